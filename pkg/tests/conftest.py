import numpy as np
import pytest

from app.models.models import WorkAssignment
from app.schemas.schemas import Instance, Job
from app.services.pd_service import PDService
from app.services.timeline import TimelineService


def make_instance(jobs, alpha=2.0, m=1):
    """Instance from (id, release, deadline, workload, value) tuples."""
    return Instance(
        alpha=alpha,
        m=m,
        jobs=[Job(id=j, release=r, deadline=d, workload=w, value=v) for j, r, d, w, v in jobs],
    )


def arrivals(instance, delta):
    """Yield (timeline, state, index) after every arrival of an online run."""
    order = instance.arrival_order()
    timeline = TimelineService.build_partition(order[:1])
    state = PDService.arrival(WorkAssignment.empty(1, timeline.n_intervals, delta), timeline, 0,
                              instance.alpha, instance.m)
    yield timeline, state, 0
    for job in order[1:]:
        timeline, state = TimelineService.refine(timeline, state, job)
        index = timeline.n_jobs - 1
        state = PDService.arrival(state, timeline, index, instance.alpha, instance.m)
        yield timeline, state, index


@pytest.fixture
def single_job_finished():
    """m=1, w=1 over [0, 1), alpha=2, v=2: finished at speed 1."""
    return make_instance([("a", 0.0, 1.0, 1.0, 2.0)])


@pytest.fixture
def single_job_rejected():
    """Same job with v=0.5: rejected."""
    return make_instance([("a", 0.0, 1.0, 1.0, 0.5)])


@pytest.fixture
def two_jobs_nested():
    """Unit jobs over [0, 1) and [0, 2) on one processor; speed 1 throughout when both finish."""
    return make_instance([("a", 0.0, 1.0, 1.0, 100.0), ("b", 0.0, 2.0, 1.0, 100.0)])


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def instance_yaml():
    return (
        "alpha: 2.0\n"
        "m: 2\n"
        "jobs:\n"
        "  - {id: a, release: 0, deadline: 2, workload: 1.0, value: 5.0}\n"
        "  - {id: b, release: 1, deadline: 3, workload: 0.5, value: 0.2}\n"
        "  - {id: c, release: 0.5, deadline: 2.5, workload: 2.0, value: 9.0}\n"
    )

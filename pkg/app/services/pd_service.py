"""
PD Service - Online primal-dual scheduling with rejection.

Each arriving job is waterfilled over its available intervals at one common
marginal level; the job is rejected when that level would have to exceed its
value. Earlier placements are never touched.
"""
import logging
import math
from typing import Dict, Optional, Tuple

import numpy as np

from app.config import settings
from app.models.models import IntervalLoad, ScheduleReport, Timeline, WorkAssignment
from app.schemas.schemas import CostBreakdown, Instance, Job
from app.services.chen_kernel import ChenKernel, tie_ranks
from app.services.timeline import TimelineService
from app.utils.errors import InstanceError, ParameterError

logger = logging.getLogger("profit_sched.services.pd")


class PDService:
    """Arrival handling, full runs and cost accounting of the online algorithm."""

    @staticmethod
    def default_delta(alpha: float) -> float:
        """The analysed parameter choice alpha^(1 - alpha)."""
        return alpha ** (1.0 - alpha)

    @staticmethod
    def validate_delta(delta: float) -> float:
        if not (0.0 < delta <= 1.0) or not math.isfinite(delta):
            raise ParameterError(f"delta must lie in (0, 1], got {delta}")
        return float(delta)

    @staticmethod
    def level_speed(level: float, workload: float, alpha: float, delta: float) -> float:
        """Speed whose scaled marginal cost delta * w * alpha * s^(alpha-1) equals ``level``."""
        if level < 0:
            raise ParameterError(f"level must be nonnegative, got {level}")
        return (level / (delta * alpha * workload)) ** (1.0 / (alpha - 1.0))

    @staticmethod
    def placement(
        state: WorkAssignment,
        timeline: Timeline,
        job_index: int,
        level: float,
        alpha: float,
        m: int
    ) -> np.ndarray:
        """Fractions x_jk(level) of the job over all intervals (zero outside its window)."""
        workload = timeline.workloads[job_index]
        speed = PDService.level_speed(level, workload, alpha, state.delta)
        window = timeline.window(job_index)
        fixed = state.loads(timeline.workloads)[:, window].T.copy()
        fixed[:, job_index] = 0.0
        row = np.zeros(timeline.n_intervals)
        row[window] = ChenKernel.loads_at_level(fixed, timeline.lengths[window], m, speed) / workload
        return row

    @staticmethod
    def level_sum(
        state: WorkAssignment,
        timeline: Timeline,
        job_index: int,
        level: float,
        alpha: float,
        m: int
    ) -> float:
        """Total fraction of the job placed at ``level``; continuous and nondecreasing."""
        return float(PDService.placement(state, timeline, job_index, level, alpha, m).sum())

    @staticmethod
    def _initial_level(state: WorkAssignment, timeline: Timeline, job_index: int, alpha: float, m: int) -> float:
        """Level of spreading all work in the job's window evenly over m processors."""
        window = timeline.window(job_index)
        loads = state.loads(timeline.workloads)[:, window]
        workload = timeline.workloads[job_index]
        work = loads.sum() - loads[job_index].sum() + workload
        speed = work / (m * timeline.lengths[window].sum())
        return state.delta * alpha * workload * speed ** (alpha - 1.0)

    @staticmethod
    def arrival(
        state: WorkAssignment,
        timeline: Timeline,
        job_index: int,
        alpha: float,
        m: int
    ) -> WorkAssignment:
        """
        Place or reject the job at ``job_index``.

        The smallest level whose placement covers the whole job is found by
        bisection. If that level exceeds the job's value the job is rejected:
        nothing is placed and its dual is set to the value.

        Returns:
            A new WorkAssignment; only the job's own row, indicator and dual differ.
        """
        job = timeline.jobs[job_index]
        window = timeline.window(job_index)
        assert window.size > 0, f"job {job.id} has no available interval"
        assert not state.x[job_index].any(), f"job {job.id} already placed"

        result = state.copy()

        def covered(level: float) -> float:
            return PDService.level_sum(state, timeline, job_index, level, alpha, m)

        if math.isfinite(job.value) and covered(job.value) < 1.0:
            result.x[job_index] = 0.0
            result.y[job_index] = 0
            result.lam[job_index] = job.value
            logger.debug(f"Job {job.id} rejected: level {job.value} covers {covered(job.value):.6g}")
            return result

        lo, hi = 0.0, min(PDService._initial_level(state, timeline, job_index, alpha, m), job.value)
        for _ in range(settings.BRACKET_MAX_DOUBLINGS):
            if covered(hi) >= 1.0:
                break
            lo, hi = hi, min(2.0 * hi, job.value)
        else:
            raise AssertionError(f"level bracket for job {job.id} did not close")

        tolerance = settings.BISECTION_REL_TOL * max(1.0, hi)
        for _ in range(settings.BISECTION_MAX_ITER):
            if hi - lo <= tolerance:
                break
            mid = 0.5 * (lo + hi)
            if covered(mid) >= 1.0:
                hi = mid
            else:
                lo = mid

        row = PDService.placement(state, timeline, job_index, hi, alpha, m)
        result.x[job_index] = row / row.sum()
        result.y[job_index] = 1
        result.lam[job_index] = hi
        logger.debug(f"Job {job.id} finished at level {hi:.12g} over {int((row > 0).sum())} intervals")
        return result

    @staticmethod
    def run(
        instance: Instance,
        delta: Optional[float] = None,
        online_refinement: bool = True
    ) -> Tuple[WorkAssignment, ScheduleReport]:
        """
        Process the jobs in arrival order and assemble the final schedule.

        Args:
            instance: validated instance
            delta: level scaling parameter, defaults to alpha^(1 - alpha)
            online_refinement: refine the partition job by job (True) or use
                the final partition from the start (False); both give the
                same assignment

        Returns:
            The final assignment and the schedule report.
        """
        if not instance.jobs:
            raise InstanceError("empty instance")
        delta = PDService.validate_delta(PDService.default_delta(instance.alpha) if delta is None else delta)
        order = instance.arrival_order()
        alpha, m = instance.alpha, instance.m

        if online_refinement:
            timeline = TimelineService.build_partition(order[:1])
            state = WorkAssignment.empty(1, timeline.n_intervals, delta)
            state = PDService.arrival(state, timeline, 0, alpha, m)
            for job in order[1:]:
                timeline, state = TimelineService.refine(timeline, state, job)
                state = PDService.arrival(state, timeline, timeline.n_jobs - 1, alpha, m)
        else:
            timeline = TimelineService.build_partition(order)
            state = WorkAssignment.empty(timeline.n_jobs, timeline.n_intervals, delta)
            for j in range(timeline.n_jobs):
                state = PDService.arrival(state, timeline, j, alpha, m)

        report = PDService.build_report(state, timeline, alpha, m)
        logger.info(
            f"PD run: {len(report.finished)} finished, {len(report.rejected)} rejected, "
            f"cost {report.cost.total:.6g} (delta={delta:.6g})"
        )
        return state, report

    @staticmethod
    def build_report(state: WorkAssignment, timeline: Timeline, alpha: float, m: int) -> ScheduleReport:
        """Schedule every interval on its final loads and account the cost."""
        loads = state.loads(timeline.workloads)
        schedules = []
        job_energy: Dict[str, float] = {job_id: 0.0 for job_id in timeline.job_ids}
        for k, length in enumerate(timeline.lengths):
            interval_load = IntervalLoad(loads=loads[:, k], length=float(length), m=m, job_ids=timeline.job_ids)
            schedule = ChenKernel.schedule_interval(interval_load)
            schedules.append(schedule)
            for j in schedule.dedicated:
                job_energy[timeline.job_ids[j]] += length * schedule.speeds[j] ** alpha
            pool_total = sum(loads[j, k] for j in schedule.pool_jobs)
            if pool_total > 0:
                pool_energy = schedule.pool_processors * length * schedule.pool_speed ** alpha
                for j in schedule.pool_jobs:
                    job_energy[timeline.job_ids[j]] += pool_energy * loads[j, k] / pool_total

        report = ScheduleReport(
            timeline=timeline,
            assignment=state,
            schedules=schedules,
            cost=CostBreakdown.from_parts(0.0, 0.0),
            alpha=alpha,
            m=m,
            job_energy=job_energy,
        )
        report.cost = PDService.cost(report)
        return report

    @staticmethod
    def cost(report: ScheduleReport) -> CostBreakdown:
        """Energy of the final interval schedules plus the values of rejected jobs."""
        timeline = report.timeline
        loads = report.assignment.loads(timeline.workloads)
        energy = float(ChenKernel.power_many(
            loads.T, timeline.lengths, report.m, report.alpha, tie_ranks(timeline.job_ids)
        ).sum())
        lost_value = float(sum(job.value for job, y in zip(timeline.jobs, report.assignment.y) if y == 0))
        return CostBreakdown.from_parts(energy, lost_value)

    @staticmethod
    def marginal_gaps(
        state: WorkAssignment,
        timeline: Timeline,
        job_index: int,
        alpha: float,
        m: int
    ) -> Dict[int, Tuple[float, float]]:
        """
        For each interval in the job's window: (x_jk, grad - lambda_j / delta),
        with the gradient taken on the interval's current loads.
        """
        loads = state.loads(timeline.workloads)
        workload = timeline.workloads[job_index]
        target = state.lam[job_index] / state.delta
        gaps = {}
        for k in timeline.window(job_index):
            interval_load = IntervalLoad(loads=loads[:, k], length=float(timeline.lengths[k]), m=m,
                                         job_ids=timeline.job_ids)
            gradient = ChenKernel.grad(interval_load, job_index, workload, alpha)
            gaps[int(k)] = (float(state.x[job_index, k]), gradient - target)
        return gaps

    @staticmethod
    def rejection_speed(job: Job, alpha: float, delta: float) -> float:
        """Planned speed above which the job is rejected: (v / (delta * alpha * w))^(1/(alpha-1))."""
        return PDService.level_speed(job.value, job.workload, alpha, delta)

    @staticmethod
    def rejection_energy(job: Job, alpha: float, delta: float) -> float:
        """Energy of running the whole job at its rejection speed, v / (delta * alpha)."""
        return job.workload * PDService.rejection_speed(job, alpha, delta) ** (alpha - 1.0)

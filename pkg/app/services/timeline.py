"""
Timeline Service - Atomic interval partition and its online refinement.
"""
import logging
from typing import Sequence, Tuple

import numpy as np

from app.models.models import Timeline, WorkAssignment
from app.schemas.schemas import Job
from app.utils.errors import InstanceError

logger = logging.getLogger("profit_sched.services.timeline")


class TimelineService:
    """Builds and refines the partition induced by releases and deadlines."""

    @staticmethod
    def build_partition(jobs: Sequence[Job]) -> Timeline:
        """
        Partition time at every release and deadline of ``jobs``.

        Boundaries are deduplicated by exact equality; a deadline that equals
        another job's release yields a single boundary.
        """
        if not jobs:
            raise InstanceError("empty instance")

        points = [job.release for job in jobs] + [job.deadline for job in jobs]
        boundaries = np.unique(np.asarray(points, dtype=float))
        timeline = Timeline(boundaries, jobs)
        logger.debug(f"Partition of {len(jobs)} jobs: {timeline.n_intervals} intervals")
        return timeline

    @staticmethod
    def refine(
        timeline: Timeline,
        assignment: WorkAssignment,
        new_job: Job
    ) -> Tuple[Timeline, WorkAssignment]:
        """
        Add ``new_job`` to the known jobs and split the intervals its release
        and deadline fall into.

        Work already assigned to a split interval is divided in proportion to
        the lengths of the pieces. The new job gets an all-zero row.

        Returns:
            The refined timeline and a new assignment; inputs are not modified.
        """
        old = timeline.boundaries
        boundaries = np.union1d(old, np.array([new_job.release, new_job.deadline], dtype=float))
        refined = Timeline(boundaries, timeline.jobs + (new_job,))

        n_old = timeline.n_jobs
        x = np.zeros((n_old + 1, refined.n_intervals))
        if len(boundaries) == len(old):
            x[:n_old] = assignment.x
        else:
            old_lengths = timeline.lengths
            # Pieces outside the old horizon carry no earlier work.
            for k, (start, length) in enumerate(zip(refined.starts, refined.lengths)):
                if start < old[0] or start >= old[-1]:
                    continue
                parent = int(np.searchsorted(old, start, side="right")) - 1
                x[:n_old, k] = assignment.x[:, parent] * (length / old_lengths[parent])
            logger.debug(
                f"Refined {timeline.n_intervals} -> {refined.n_intervals} intervals for job {new_job.id}"
            )

        state = WorkAssignment(
            x=x,
            y=np.append(assignment.y, np.int8(0)).astype(np.int8),
            lam=np.append(assignment.lam, 0.0),
            delta=assignment.delta,
        )
        return refined, state

    @staticmethod
    def availability(job: Job, start: float, end: float) -> int:
        """1 iff the interval [start, end) lies inside the job's window [r_j, d_j)."""
        return int(start >= job.release and end <= job.deadline)

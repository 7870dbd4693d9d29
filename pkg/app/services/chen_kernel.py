"""
Interval kernel - energy-minimal multiprocessor schedule of one atomic interval.

Jobs whose load is at least the average of the smaller loads over the
processors left for them get a dedicated processor at speed L_j / l; all other
jobs share the remaining (pool) processors at one common speed.
"""
import logging
from typing import List, Sequence, Tuple

import numpy as np

from app.models.models import IntervalLoad, IntervalSchedule, PoolSegment
from app.utils.errors import ParameterError

logger = logging.getLogger("profit_sched.services.chen_kernel")

# Fraction of the interval below which a wrap-around remainder is treated as used up.
_PLACEMENT_EPS = 1e-12


def tie_ranks(job_ids: Sequence[str]) -> np.ndarray:
    """Position of each id in ascending id order."""
    order = sorted(range(len(job_ids)), key=lambda i: job_ids[i])
    ranks = np.empty(len(job_ids), dtype=np.int64)
    ranks[order] = np.arange(len(job_ids))
    return ranks


class ChenKernel:
    """Dedicated/pool classification, power, gradient and its inverse."""

    @staticmethod
    def classify(
        loads: np.ndarray,
        lengths: np.ndarray,
        m: int,
        ties: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Vectorized dedicated-set rule for many intervals at once.

        Args:
            loads: shape (intervals, jobs), absolute loads
            lengths: shape (intervals,)
            m: processor count
            ties: shape (jobs,), tie-breaker among equal loads

        Returns:
            (dedicated mask (intervals, jobs), pool speed (intervals,),
            marginal speed (intervals, jobs)) where the marginal speed is the
            speed whose derivative is the partial derivative of the power.
        """
        loads = np.atleast_2d(np.asarray(loads, dtype=float))
        lengths = np.asarray(lengths, dtype=float).reshape(-1)
        n_rows, n = loads.shape
        if n == 0:
            empty = np.zeros((n_rows, 0))
            return empty.astype(bool), np.zeros(n_rows), empty

        ties = np.broadcast_to(ties, loads.shape)
        order = np.lexsort((ties, -loads), axis=-1)
        ranked = np.take_along_axis(loads, order, axis=1)

        # rest[:, i] = sum of the loads ranked after position i
        suffix = np.cumsum(ranked[:, ::-1], axis=1)[:, ::-1]
        rest = np.zeros_like(ranked)
        rest[:, :-1] = suffix[:, 1:]

        cap = min(m, n)
        rank = np.arange(1, cap + 1)
        head, head_rest = ranked[:, :cap], rest[:, :cap]
        before_last = (rank < m) & (head * (m - rank) >= head_rest)
        last = (rank == m) & (head_rest == 0)
        qualifies = (head > 0) & (before_last | last)
        prefix = np.logical_and.accumulate(qualifies, axis=1)

        dedicated_ranked = np.zeros_like(ranked, dtype=bool)
        dedicated_ranked[:, :cap] = prefix
        n_dedicated = prefix.sum(axis=1)

        pool_total = np.where(dedicated_ranked, 0.0, ranked).sum(axis=1)
        pool_processors = m - n_dedicated
        with np.errstate(divide="ignore", invalid="ignore"):
            pool_speed = np.where(pool_processors > 0, pool_total / (np.maximum(pool_processors, 1) * lengths), 0.0)

        # Without pool processors a zero-load job would join at the slowest dedicated speed.
        slowest_dedicated = ranked[np.arange(n_rows), np.maximum(n_dedicated - 1, 0)] / lengths
        idle_speed = np.where(pool_processors > 0, pool_speed, slowest_dedicated)
        ranked_speed = np.where(dedicated_ranked, ranked / lengths[:, None], idle_speed[:, None])

        dedicated = np.zeros_like(dedicated_ranked)
        speed = np.empty_like(ranked_speed)
        np.put_along_axis(dedicated, order, dedicated_ranked, axis=1)
        np.put_along_axis(speed, order, ranked_speed, axis=1)
        return dedicated, pool_speed, speed

    @staticmethod
    def _classify_one(load: IntervalLoad) -> Tuple[np.ndarray, float, np.ndarray]:
        dedicated, pool_speed, speed = ChenKernel.classify(
            load.loads[None, :], np.array([load.length]), load.m, tie_ranks(load.job_ids)
        )
        return dedicated[0], float(pool_speed[0]), speed[0]

    @staticmethod
    def dedicated_set(load: IntervalLoad) -> Tuple[int, ...]:
        """Indices of the dedicated jobs, in descending load order."""
        dedicated, _, _ = ChenKernel._classify_one(load)
        members = [int(i) for i in np.flatnonzero(dedicated)]
        ties = tie_ranks(load.job_ids)
        return tuple(sorted(members, key=lambda i: (-load.loads[i], ties[i])))

    @staticmethod
    def schedule_interval(load: IntervalLoad) -> IntervalSchedule:
        """
        Build the dedicated/pool schedule and place the pool work by
        wrap-around: fill one pool processor up to the interval length, then
        continue the split job on the next processor from offset 0.
        """
        dedicated_mask, pool_speed, speed = ChenKernel._classify_one(load)
        dedicated = ChenKernel.dedicated_set(load)
        ties = tie_ranks(load.job_ids)
        pool_jobs = tuple(sorted(
            (i for i in range(len(load.loads)) if not dedicated_mask[i] and load.loads[i] > 0),
            key=lambda i: (-load.loads[i], ties[i]),
        ))
        pool_processors = load.m - len(dedicated)
        assert not pool_jobs or pool_processors > 0, "pool work without pool processors"

        placement: List[List[PoolSegment]] = [[] for _ in range(pool_processors)]
        if pool_jobs:
            processor, cursor = 0, 0.0
            for job in pool_jobs:
                remaining = load.loads[job] / pool_speed
                while remaining > _PLACEMENT_EPS * load.length:
                    if processor >= pool_processors:
                        # Rounding residue past the last processor.
                        last = placement[-1][-1]
                        placement[-1][-1] = PoolSegment(last.job, last.start, load.length)
                        break
                    piece = min(remaining, load.length - cursor)
                    placement[processor].append(PoolSegment(job, cursor, cursor + piece))
                    remaining -= piece
                    cursor += piece
                    if load.length - cursor <= _PLACEMENT_EPS * load.length:
                        if placement[processor]:
                            last = placement[processor][-1]
                            placement[processor][-1] = PoolSegment(last.job, last.start, load.length)
                        processor, cursor = processor + 1, 0.0

        return IntervalSchedule(
            length=load.length,
            m=load.m,
            dedicated=dedicated,
            pool_jobs=pool_jobs,
            pool_speed=pool_speed,
            speeds=speed,
            placement=tuple(tuple(segments) for segments in placement),
        )

    @staticmethod
    def power(load: IntervalLoad, alpha: float) -> float:
        """Energy of the interval schedule; 0 for an all-zero assignment."""
        return float(ChenKernel.power_many(load.loads[None, :], np.array([load.length]), load.m, alpha,
                                           tie_ranks(load.job_ids))[0])

    @staticmethod
    def power_many(
        loads: np.ndarray,
        lengths: np.ndarray,
        m: int,
        alpha: float,
        ties: np.ndarray
    ) -> np.ndarray:
        """Per-interval energy for a (intervals, jobs) load matrix."""
        loads = np.atleast_2d(np.asarray(loads, dtype=float))
        lengths = np.asarray(lengths, dtype=float).reshape(-1)
        dedicated, pool_speed, _ = ChenKernel.classify(loads, lengths, m, ties)
        dedicated_energy = np.where(dedicated, lengths[:, None] * (loads / lengths[:, None]) ** alpha, 0.0).sum(axis=1)
        pool_processors = m - dedicated.sum(axis=1)
        return dedicated_energy + pool_processors * lengths * pool_speed ** alpha

    @staticmethod
    def grad(load: IntervalLoad, index: int, workload: float, alpha: float) -> float:
        """Partial derivative of the power with respect to x_jk: w_j * alpha * s_jk^(alpha-1)."""
        _, _, speed = ChenKernel._classify_one(load)
        return float(workload * alpha * speed[index] ** (alpha - 1))

    @staticmethod
    def grad_many(
        loads: np.ndarray,
        lengths: np.ndarray,
        m: int,
        alpha: float,
        workloads: np.ndarray,
        ties: np.ndarray
    ) -> np.ndarray:
        """Gradient matrix with respect to x for a (intervals, jobs) load matrix."""
        _, _, speed = ChenKernel.classify(loads, lengths, m, ties)
        return workloads[None, :] * alpha * speed ** (alpha - 1)

    @staticmethod
    def processor_loads(load: IntervalLoad) -> np.ndarray:
        """Work per processor in descending order (dedicated loads, then equal pool loads)."""
        schedule = ChenKernel.schedule_interval(load)
        dedicated = [load.loads[j] for j in schedule.dedicated]
        pool = [schedule.pool_speed * load.length] * schedule.pool_processors
        return np.sort(np.array(dedicated + pool, dtype=float))[::-1]

    @staticmethod
    def load_at_level(fixed: IntervalLoad, target_speed: float) -> float:
        """
        Smallest load for an extra job that makes its marginal speed equal
        ``target_speed`` given the already committed ``fixed`` loads.
        """
        if target_speed < 0:
            raise ParameterError(f"target speed must be nonnegative, got {target_speed}")
        return float(ChenKernel.loads_at_level(
            fixed.loads[None, :], np.array([fixed.length]), fixed.m, target_speed
        )[0])

    @staticmethod
    def loads_at_level(
        fixed: np.ndarray,
        lengths: np.ndarray,
        m: int,
        target_speed: float
    ) -> np.ndarray:
        """Vectorized ``load_at_level`` over the rows of a (intervals, jobs) matrix."""
        if target_speed < 0:
            raise ParameterError(f"target speed must be nonnegative, got {target_speed}")
        fixed = np.atleast_2d(np.asarray(fixed, dtype=float))
        lengths = np.asarray(lengths, dtype=float).reshape(-1)
        cap = target_speed * lengths
        above = fixed > cap[:, None]
        budget = cap * (m - above.sum(axis=1)) - np.where(above, 0.0, fixed).sum(axis=1)
        return np.where(budget <= 0, 0.0, np.minimum(budget, cap))

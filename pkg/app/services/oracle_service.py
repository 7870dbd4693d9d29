"""
Oracle Service - Offline optimum of small instances.

Every finish-subset is scheduled at minimum energy by projected gradient
descent on a product of per-job simplices; the optimum is the cheapest
subset once the values of the unfinished jobs are added. Single-processor
instances can use YDS instead.
"""
import itertools
import logging
import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.config import settings
from app.models.models import EnergyResult, OracleResult, Timeline
from app.schemas.schemas import Instance
from app.services.chen_kernel import ChenKernel, tie_ranks
from app.services.timeline import TimelineService
from app.utils.errors import OracleLimitError, ParameterError
from app.utils.projection import euclidean_proj_simplex_rows

logger = logging.getLogger("profit_sched.services.oracle")

METHODS = ("auto", "pgd", "yds")

# Backtracking factor below which the line search is considered stalled.
_MIN_STEP = 1e-14
# Energy differences below this fraction of the energy are round-off.
_ROUNDOFF = 64 * np.finfo(float).eps
# Spectral step bounds and the window of the nonmonotone acceptance test.
_STEP_BOUNDS = (1e-12, 1e12)
_MEMORY = 10

SubsetTask = Tuple[Tuple[str, ...], Instance, Timeline, str, Optional[np.ndarray]]


def _subset_energy(task: SubsetTask) -> Tuple[Tuple[str, ...], EnergyResult]:
    subset, instance, timeline, method, x0 = task
    if method == "yds":
        restricted = instance.model_copy(update={"jobs": [instance.job(job_id) for job_id in subset]})
        energy = OracleService.yds(restricted)
        return subset, EnergyResult(energy=energy, x=None, converged=True, iterations=0, projected_gradient_norm=0.0)
    return subset, OracleService.min_energy(subset, instance, timeline, x0=x0)


def _warm_start(subset: Tuple[str, ...], results: Dict[Tuple[str, ...], EnergyResult]) -> Optional[np.ndarray]:
    """Rows of the costliest converged subset with one job fewer; the new job's row is left empty."""
    parents = [
        (results[parent].energy, parent)
        for parent in (tuple(i for i in subset if i != j) for j in subset)
        if parent in results and results[parent].converged and results[parent].x is not None
    ]
    if not parents:
        return None
    _, parent = max(parents)
    rows = results[parent].x
    x0 = np.zeros((len(subset), rows.shape[1]))
    for i, job_id in enumerate(subset):
        if job_id in parent:
            x0[i] = rows[parent.index(job_id)]
    return x0


class OracleService:
    """Finish-subset enumeration, per-subset energy minimization and YDS."""

    @staticmethod
    def min_energy(
        subset: Sequence[str],
        instance: Instance,
        timeline: Optional[Timeline] = None,
        max_iter: Optional[int] = None,
        tol: Optional[float] = None,
        x0: Optional[np.ndarray] = None
    ) -> EnergyResult:
        """
        Minimize the total interval power with every job of ``subset`` fully
        assigned to its available intervals and all other jobs left out.

        Steps are spectral (Barzilai-Borwein) projected-gradient steps with a
        nonmonotone backtracking test that tolerates energy round-off, so
        only the iteration cap ends a run unconverged.

        Args:
            subset: ids of the jobs that must finish
            instance: supplies alpha, m and the jobs
            timeline: partition to optimize on; defaults to the instance's own
            max_iter: iteration cap, defaults to settings.ORACLE_MAX_ITER
            tol: relative stopping tolerance on the projected-gradient norm
            x0: optional starting rows (subset position, interval); rows
                without admissible work start spread over the window

        Returns:
            EnergyResult; ``x`` is indexed (subset position, interval of the
            timeline). Non-convergence is reported through ``converged``.
        """
        max_iter = settings.ORACLE_MAX_ITER if max_iter is None else max_iter
        tol = settings.ORACLE_TOL if tol is None else tol
        if not subset:
            return EnergyResult(energy=0.0, x=None, converged=True, iterations=0, projected_gradient_norm=0.0)
        if timeline is None:
            timeline = TimelineService.build_partition(instance.arrival_order())

        rows = [timeline.index_of(job_id) for job_id in subset]
        available = timeline.availability[rows].astype(bool)
        assert available.any(axis=1).all(), "every finishing job needs an available interval"
        columns = np.flatnonzero(available.any(axis=0))
        available = available[:, columns]
        lengths = timeline.lengths[columns]
        workloads = timeline.workloads[rows]
        ties = tie_ranks([timeline.job_ids[r] for r in rows])
        alpha, m = instance.alpha, instance.m

        def energy(x: np.ndarray) -> float:
            return float(ChenKernel.power_many((x * workloads[:, None]).T, lengths, m, alpha, ties).sum())

        def gradient(x: np.ndarray) -> np.ndarray:
            loads = (x * workloads[:, None]).T
            return ChenKernel.grad_many(loads, lengths, m, alpha, workloads, ties).T * available

        def project(z: np.ndarray) -> np.ndarray:
            return euclidean_proj_simplex_rows(z, available)

        # Each job spread over its window in proportion to interval lengths.
        spread = available * lengths[None, :]
        spread = spread / spread.sum(axis=1, keepdims=True)
        if x0 is None:
            x = spread
        else:
            x = np.where(available, np.asarray(x0, dtype=float)[:, columns], 0.0)
            empty = x.sum(axis=1) <= 0
            x[empty] = spread[empty]
            x = project(x)

        value = energy(x)
        g = gradient(x)
        history = deque([value], maxlen=_MEMORY)
        step = 1.0
        converged = False
        norm = math.inf
        iterations = 0
        for iterations in range(max_iter + 1):
            norm = float(np.linalg.norm(x - project(x - g)))
            if norm <= tol * (1.0 + abs(value)):
                converged = True
                break
            if iterations == max_iter:
                break

            direction = project(x - step * g) - x
            slope = float((g * direction).sum())
            reference = max(history)
            slack = _ROUNDOFF * max(1.0, abs(reference))
            t = 1.0
            while True:
                candidate = x + t * direction
                candidate_value = energy(candidate)
                if candidate_value <= reference + settings.ORACLE_ARMIJO * t * slope + slack:
                    break
                t *= 0.5
                if t < _MIN_STEP:
                    break
            if t < _MIN_STEP:
                # No representable move left: stationary up to round-off.
                converged = float(np.abs(direction).max()) <= _ROUNDOFF * (1.0 + float(np.abs(x).max()))
                logger.debug(f"Line search stalled at iteration {iterations}, norm {norm:.3e}")
                break

            new_g = gradient(candidate)
            s, y = candidate - x, new_g - g
            sy = float((s * y).sum())
            step = min(max(float((s * s).sum()) / sy, _STEP_BOUNDS[0]), _STEP_BOUNDS[1]) if sy > 0 else _STEP_BOUNDS[1]
            x, value, g = candidate, candidate_value, new_g
            history.append(value)

        if not converged:
            logger.warning(
                f"Energy minimization of {len(rows)} jobs stopped after {iterations} iterations "
                f"with projected-gradient norm {norm:.3e}"
            )
        full = np.zeros((len(rows), timeline.n_intervals))
        full[:, columns] = x
        return EnergyResult(
            energy=value,
            x=full,
            converged=converged,
            iterations=iterations,
            projected_gradient_norm=norm,
        )

    @staticmethod
    def optimal_cost(instance: Instance, method: str = "auto") -> OracleResult:
        """
        Cheapest finish-subset: min over S of min_energy(S) + sum of values outside S.

        Subsets are visited by size and each descent starts from the solution
        of a subset with one job fewer. A subset is skipped when its lost
        value alone, or a lower bound on its energy (the converged energy of
        any subset with one job fewer) plus its lost value, already reaches
        the best total.

        Args:
            instance: at most settings.ORACLE_MAX_JOBS jobs
            method: "pgd", "yds" (m = 1 only) or "auto" (yds when m = 1)

        Raises:
            OracleLimitError: the instance is too large to enumerate
            ParameterError: unknown method, or yds requested with m > 1
        """
        if method not in METHODS:
            raise ParameterError(f"unknown oracle method {method!r}, expected one of {METHODS}")
        if len(instance.jobs) > settings.ORACLE_MAX_JOBS:
            raise OracleLimitError("oracle limited to small instances")
        if method == "auto":
            method = "yds" if instance.m == 1 else "pgd"
        if method == "yds" and instance.m != 1:
            raise ParameterError("yds requires a single processor")

        jobs = instance.arrival_order()
        if not jobs:
            return OracleResult(
                finished=(), energy=0.0, lost_value=0.0, method=method, converged=True,
                iterations=0, projected_gradient_norm=0.0, subsets_evaluated=1, subset_energies={(): 0.0},
            )

        timeline = TimelineService.build_partition(jobs)
        ids = tuple(job.id for job in jobs)
        values = {job.id: job.value for job in jobs}
        total_value = sum(values.values())

        energies: Dict[Tuple[str, ...], float] = {(): 0.0}
        lower: Dict[Tuple[str, ...], float] = {(): 0.0}
        results: Dict[Tuple[str, ...], EnergyResult] = {}
        best_subset: Tuple[str, ...] = ()
        best_total = total_value

        executor = ProcessPoolExecutor(settings.ORACLE_WORKERS) if settings.ORACLE_WORKERS > 1 else None
        try:
            for size in range(1, len(ids) + 1):
                candidates: List[Tuple[str, ...]] = []
                for subset in itertools.combinations(ids, size):
                    lost = total_value - sum(values[j] for j in subset)
                    bound = max(lower[tuple(i for i in subset if i != j)] for j in subset)
                    lower[subset] = bound
                    if lost >= best_total or bound + lost >= best_total:
                        continue
                    candidates.append(subset)

                tasks = [
                    (subset, instance, timeline, method, _warm_start(subset, results) if method == "pgd" else None)
                    for subset in candidates
                ]
                mapped = executor.map(_subset_energy, tasks) if executor else map(_subset_energy, tasks)
                for subset, result in mapped:
                    results[subset] = result
                    energies[subset] = result.energy
                    # An unconverged energy overestimates the minimum and is no valid bound.
                    if result.converged:
                        lower[subset] = max(lower[subset], result.energy)
                    total = result.energy + total_value - sum(values[j] for j in subset)
                    if total < best_total:
                        best_subset, best_total = subset, total
                logger.debug(f"Subsets of size {size}: {len(candidates)} evaluated, best {best_total:.9g}")
        finally:
            if executor:
                executor.shutdown()

        best = results.get(best_subset)
        lost_value = total_value - sum(values[j] for j in best_subset)
        oracle = OracleResult(
            finished=best_subset,
            energy=best.energy if best else 0.0,
            lost_value=lost_value,
            method=method,
            converged=all(result.converged for result in results.values()),
            iterations=best.iterations if best else 0,
            projected_gradient_norm=best.projected_gradient_norm if best else 0.0,
            subsets_evaluated=len(energies),
            subset_energies=energies,
        )
        logger.info(
            f"Oracle ({method}): optimum {oracle.total:.9g} finishing {len(best_subset)}/{len(ids)} jobs, "
            f"{oracle.subsets_evaluated} subsets evaluated"
        )
        return oracle

    @staticmethod
    def yds(instance: Instance) -> float:
        """
        Minimum energy of finishing every job on one processor.

        Repeatedly takes the interval of maximum density (work of the jobs whose
        windows lie inside it, divided by its length), runs it at that density
        and cuts it out of the time axis.

        Raises:
            ParameterError: more than one processor
        """
        if instance.m != 1:
            raise ParameterError("yds requires a single processor")

        releases = np.array([job.release for job in instance.jobs], dtype=float)
        deadlines = np.array([job.deadline for job in instance.jobs], dtype=float)
        workloads = np.array([job.workload for job in instance.jobs], dtype=float)
        energy = 0.0
        while releases.size:
            starts, ends = np.unique(releases), np.unique(deadlines)
            inside = (releases[None, None, :] >= starts[:, None, None]) & (deadlines[None, None, :] <= ends[None, :, None])
            length = ends[None, :] - starts[:, None]
            with np.errstate(divide="ignore", invalid="ignore"):
                density = np.where(length > 0, (inside @ workloads) / length, -np.inf)
            a, b = np.unravel_index(np.argmax(density), density.shape)
            t1, t2 = starts[a], ends[b]
            critical = inside[a, b]
            energy += (t2 - t1) * density[a, b] ** instance.alpha

            releases, deadlines, workloads = releases[~critical], deadlines[~critical], workloads[~critical]
            width = t2 - t1
            releases = np.where(releases >= t2, releases - width, np.minimum(releases, t1))
            deadlines = np.where(deadlines >= t2, deadlines - width, np.minimum(deadlines, t1))
        return float(energy)

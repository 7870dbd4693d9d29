"""
Harness Service - Instance generators, the simulate pipeline and sweeps.

The pipeline runs the online algorithm, evaluates the dual certificate,
optionally runs the oracle and records every invariant check in the report.
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from app.config import settings
from app.models.models import DualCertificate, IntervalLoad, OracleResult, ScheduleReport, WorkAssignment
from app.schemas.schemas import (
    CertificateSummary,
    CheckResult,
    GeneratorRanges,
    Instance,
    IntervalScheduleOut,
    Job,
    JobCertificateOut,
    OracleReport,
    OracleSummary,
    ProcessorOut,
    RunReport,
    SegmentOut,
    SweepRow,
)
from app.services.chen_kernel import ChenKernel
from app.services.dual_service import DualService
from app.services.oracle_service import OracleService
from app.services.pd_service import PDService
from app.utils.errors import ExitCode, InstanceError
from app.utils.instance_io import instance_digest

logger = logging.getLogger("profit_sched.services.harness")

# Decimal places of generated instance numbers.
_DECIMALS = 4

# Tolerances of the report checks.
IDENTITY_TOL = 1e-9
DUALITY_TOL = 1e-6

SWEEP_KINDS = ("n", "delta")
DEFAULT_SWEEP_N = (2, 5, 10, 20, 50)


class HarnessService:
    """Generators, pipeline orchestration and report assembly."""

    # =========================================================================
    # Generators
    # =========================================================================

    @staticmethod
    def gen_lower_bound(n: int, alpha: float, value_scale: float = 1e9) -> Instance:
        """
        Single-processor instance on which the online algorithm pays the most:
        job j arrives at j - 1, is due at n and has workload (n - j + 1)^(-1/alpha).
        """
        if n < 1:
            raise InstanceError(f"n must be at least 1, got {n}")
        width = len(str(n))
        jobs = [
            Job(
                id=f"{j:0{width}d}",
                release=float(j - 1),
                deadline=float(n),
                workload=(n - j + 1) ** (-1.0 / alpha),
                value=value_scale,
            )
            for j in range(1, n + 1)
        ]
        return Instance(alpha=alpha, m=1, jobs=jobs)

    @staticmethod
    def gen_random(seed: int, n: int, m: int, alpha: float, ranges: Optional[GeneratorRanges] = None) -> Instance:
        """
        Seeded random instance; identical arguments give identical instances.

        Raises:
            InstanceError: n < 1 or a range that is empty, nonpositive or
                wider than the horizon
        """
        ranges = ranges or GeneratorRanges()
        if n < 1:
            raise InstanceError(f"n must be at least 1, got {n}")
        for name in ("window", "workload", "value"):
            lo, hi = getattr(ranges, name)
            if not (0 < lo <= hi) or not math.isfinite(hi):
                raise InstanceError(f"degenerate {name} range ({lo}, {hi})")
        if ranges.window[0] < 10 ** -(_DECIMALS - 1):
            raise InstanceError(f"window range starts below {10 ** -(_DECIMALS - 1)}")
        if ranges.window[1] > ranges.horizon:
            raise InstanceError(f"window range exceeds the horizon {ranges.horizon}")

        rng = np.random.default_rng(seed)
        floor = 10.0 ** -_DECIMALS
        jobs = []
        for j in range(n):
            length = rng.uniform(*ranges.window)
            release = round(rng.uniform(0.0, ranges.horizon - length), _DECIMALS)
            deadline = round(release + length, _DECIMALS)
            jobs.append(Job(
                id=f"j{j:03d}",
                release=release,
                deadline=deadline,
                workload=max(round(rng.uniform(*ranges.workload), _DECIMALS), floor),
                value=max(round(rng.uniform(*ranges.value), _DECIMALS), floor),
            ))
        logger.debug(f"Generated random instance: seed={seed}, n={n}, m={m}, alpha={alpha}")
        return Instance(alpha=alpha, m=m, jobs=jobs)

    # =========================================================================
    # Report assembly
    # =========================================================================

    @staticmethod
    def intervals_out(report: ScheduleReport) -> List[IntervalScheduleOut]:
        """Absolute-time processor segments of every interval schedule."""
        timeline, ids = report.timeline, report.timeline.job_ids
        loads = report.assignment.loads(timeline.workloads)
        intervals = []
        for k, schedule in enumerate(report.schedules):
            start, end = float(timeline.starts[k]), float(timeline.ends[k])
            processors: List[ProcessorOut] = []
            for j in schedule.dedicated:
                processors.append(ProcessorOut(
                    processor=len(processors), kind="dedicated", speed=float(schedule.speeds[j]),
                    segments=[SegmentOut(job_id=ids[j], start=start, end=end)],
                ))
            for placement in schedule.placement:
                if not placement:
                    processors.append(ProcessorOut(
                        processor=len(processors), kind="idle", speed=0.0,
                        segments=[SegmentOut(job_id=None, start=start, end=end)],
                    ))
                    continue
                segments, cursor = [], 0.0
                for piece in placement:
                    if piece.start > cursor:
                        segments.append(SegmentOut(job_id=None, start=start + cursor, end=start + piece.start))
                    segments.append(SegmentOut(job_id=ids[piece.job], start=start + piece.start, end=start + piece.end))
                    cursor = piece.end
                if cursor < schedule.length:
                    segments.append(SegmentOut(job_id=None, start=start + cursor, end=end))
                processors.append(ProcessorOut(
                    processor=len(processors), kind="pool", speed=float(schedule.pool_speed), segments=segments,
                ))

            interval_load = IntervalLoad(loads=loads[:, k], length=schedule.length, m=report.m, job_ids=ids)
            intervals.append(IntervalScheduleOut(
                index=k,
                start=start,
                end=end,
                dedicated=[ids[j] for j in schedule.dedicated],
                pool_speed=float(schedule.pool_speed),
                energy=ChenKernel.power(interval_load, report.alpha),
                processors=processors,
            ))
        return intervals

    @staticmethod
    def certificate_out(certificate: DualCertificate) -> CertificateSummary:
        ids = certificate.job_ids
        return CertificateSummary(
            g=certificate.g,
            jobs={
                job_id: JobCertificateOut(
                    s_hat=float(certificate.s_hat[j]),
                    x_hat=float(certificate.x_hat_job[j]),
                    energy=float(certificate.energy[j]),
                    contributing_length=float(certificate.contributing_length[j]),
                    category=certificate.categories[j],
                )
                for j, job_id in enumerate(ids)
            },
            contributing=[[ids[j] for j in phi] for phi in certificate.contributing],
            available_counts=certificate.available_counts,
            categories=certificate.category_counts,
        )

    @staticmethod
    def oracle_out(oracle: OracleResult) -> OracleSummary:
        return OracleSummary(
            total=oracle.total,
            energy=oracle.energy,
            lost_value=oracle.lost_value,
            finished=list(oracle.finished),
            method=oracle.method,
            converged=oracle.converged,
            iterations=oracle.iterations,
            projected_gradient_norm=oracle.projected_gradient_norm,
            subsets_evaluated=oracle.subsets_evaluated,
        )

    @staticmethod
    def oracle_report(instance: Instance, method: str = "auto") -> OracleReport:
        oracle = OracleService.optimal_cost(instance, method=method)
        return OracleReport(
            instance_digest=instance_digest(instance),
            oracle=HarnessService.oracle_out(oracle),
            subset_energies={",".join(subset): energy for subset, energy in oracle.subset_energies.items()},
        )

    @staticmethod
    def recompute_energy(intervals: Sequence[IntervalScheduleOut], alpha: float) -> float:
        """Energy implied by the serialized segments alone."""
        return sum(
            (segment.end - segment.start) * processor.speed ** alpha
            for interval in intervals
            for processor in interval.processors
            for segment in processor.segments
            if segment.job_id is not None
        )

    # =========================================================================
    # Checks
    # =========================================================================

    @staticmethod
    def _feasibility(state: WorkAssignment, report: ScheduleReport) -> CheckResult:
        timeline = report.timeline
        x = state.x
        problems = []
        if np.any(x < 0):
            problems.append("negative assignment")
        if np.any(x[timeline.availability == 0] != 0):
            problems.append("work outside a window")
        covered = (x * timeline.availability).sum(axis=1)
        for j, job_id in enumerate(timeline.job_ids):
            expected = 1.0 if state.y[j] == 1 else 0.0
            if abs(covered[j] - expected) > IDENTITY_TOL:
                problems.append(f"job {job_id} covers {covered[j]:.12g}")
        return CheckResult(name="feasibility", passed=not problems, detail="; ".join(problems))

    @staticmethod
    def _checks(
        instance: Instance,
        state: WorkAssignment,
        report: ScheduleReport,
        certificate: DualCertificate,
        ratio: float,
        intervals: List[IntervalScheduleOut],
        oracle: Optional[OracleResult]
    ) -> List[CheckResult]:
        alpha, timeline = instance.alpha, report.timeline
        cost = report.cost.total
        checks = [
            CheckResult(
                name="certified_ratio",
                passed=DualService.within_bound(ratio, alpha),
                detail=f"{ratio:.12g} vs bound {DualService.ratio_bound(alpha):.12g}",
            ),
            HarnessService._feasibility(state, report),
        ]

        sizes = [len(phi) for phi in certificate.contributing]
        checks.append(CheckResult(
            name="contributor_cap", passed=max(sizes, default=0) <= instance.m, detail=f"max {max(sizes, default=0)}",
        ))

        identity = state.lam * certificate.x_hat_job / alpha
        gap = float(np.max(np.abs(certificate.energy - identity), initial=0.0))
        scale = 1.0 + float(np.max(certificate.energy, initial=0.0))
        checks.append(CheckResult(name="energy_identity", passed=gap <= IDENTITY_TOL * scale, detail=f"max gap {gap:.3e}"))

        at_pd = DualService.lagrangian_value(state.x, state.y, state.lam, instance, timeline)
        y_hat = (state.lam < timeline.values).astype(float)
        at_hat = DualService.lagrangian_value(certificate.x_hat, y_hat, state.lam, instance, timeline)
        scale = 1.0 + abs(certificate.g)
        passed = certificate.g <= at_pd + IDENTITY_TOL * (1.0 + abs(at_pd)) and abs(at_hat - certificate.g) <= IDENTITY_TOL * scale
        checks.append(CheckResult(
            name="lagrangian_bounds", passed=passed,
            detail=f"g {certificate.g:.12g}, at PD {at_pd:.12g}, at optimal infeasible {at_hat:.12g}",
        ))

        recomputed = HarnessService.recompute_energy(intervals, alpha)
        energy = report.cost.energy
        checks.append(CheckResult(
            name="energy_recompute",
            passed=abs(recomputed - energy) <= IDENTITY_TOL * (1.0 + energy),
            detail=f"segments {recomputed:.12g} vs cost {energy:.12g}",
        ))

        if oracle is not None:
            checks.append(CheckResult(
                name="weak_duality",
                passed=certificate.g <= oracle.total + DUALITY_TOL * (1.0 + cost),
                detail=f"g {certificate.g:.12g} vs optimum {oracle.total:.12g}",
            ))
            checks.append(CheckResult(
                name="oracle_convergence",
                passed=oracle.converged,
                detail=f"{oracle.iterations} iterations, norm {oracle.projected_gradient_norm:.3e}",
            ))
        return checks

    @staticmethod
    def exit_code(report: RunReport) -> ExitCode:
        """Map failed checks to the process exit status."""
        failed = {check.name for check in report.checks if not check.passed}
        if not failed:
            return ExitCode.OK
        if failed & {"certified_ratio", "weak_duality"}:
            return ExitCode.CERTIFICATE_VIOLATION
        if failed == {"oracle_convergence"}:
            return ExitCode.ORACLE_NON_CONVERGENCE
        return ExitCode.INVARIANT_FAILURE

    # =========================================================================
    # Pipeline
    # =========================================================================

    @staticmethod
    def simulate(instance: Instance, delta: Optional[float] = None, with_oracle: bool = False) -> RunReport:
        """
        Run the online algorithm, certify it and optionally compare with the oracle.

        Args:
            instance: validated instance with at least one job
            delta: level scaling, defaults to alpha^(1 - alpha)
            with_oracle: also compute the offline optimum (small instances only)

        Returns:
            RunReport with every check recorded; failed checks do not raise.

        Raises:
            InstanceError: empty instance
            ParameterError: delta outside (0, 1]
            CertificateViolation: the certificate cannot be formed
            OracleLimitError: with_oracle on an instance that is too large
        """
        if not instance.jobs:
            raise InstanceError("empty instance")
        alpha = instance.alpha
        delta = PDService.validate_delta(PDService.default_delta(alpha) if delta is None else delta)

        state, schedule = PDService.run(instance, delta)
        timeline = schedule.timeline
        certificate = DualService.dual_value(state.lam, instance, timeline, finished=state.y == 1)
        ratio = DualService.certified_ratio(schedule.cost, certificate, alpha)
        logger.info(f"Certificate: g={certificate.g:.9g}, certified ratio {ratio:.6g}")

        oracle = OracleService.optimal_cost(instance) if with_oracle else None
        intervals = HarnessService.intervals_out(schedule)
        checks = HarnessService._checks(instance, state, schedule, certificate, ratio, intervals, oracle)

        report = RunReport(
            instance_digest=instance_digest(instance),
            alpha=alpha,
            m=instance.m,
            delta=delta,
            intervals=intervals,
            cost=schedule.cost,
            lambdas=schedule.lambdas,
            finished=schedule.finished,
            rejected=schedule.rejected,
            job_energy=schedule.job_energy,
            certificate=HarnessService.certificate_out(certificate),
            certified_ratio=ratio,
            ratio_bound=DualService.ratio_bound(alpha),
            oracle=HarnessService.oracle_out(oracle) if oracle else None,
            empirical_ratio=HarnessService._ratio(schedule.cost.total, oracle.total) if oracle else None,
            checks=checks,
        )
        for check in checks:
            if not check.passed:
                logger.warning(f"Check {check.name} failed: {check.detail}")
        return report

    @staticmethod
    def _ratio(cost: float, reference: float) -> float:
        if reference <= 0:
            return 1.0 if cost == 0 else math.inf
        return cost / reference

    # =========================================================================
    # Sweeps
    # =========================================================================

    @staticmethod
    def sweep(
        kind: str,
        values: Sequence[float],
        alpha: float = 2.0,
        instance: Optional[Instance] = None,
        with_oracle: bool = False,
        workers: Optional[int] = None,
        progress: bool = True
    ) -> List[SweepRow]:
        """
        Ratio table over a parameter.

        ``kind="n"`` runs the single-processor lower-bound family for each n
        with YDS as the reference. ``kind="delta"`` runs ``instance`` for each
        delta, with the oracle as the reference when ``with_oracle`` is set.
        """
        if kind not in SWEEP_KINDS:
            raise InstanceError(f"unknown sweep kind {kind!r}, expected one of {SWEEP_KINDS}")
        if kind == "delta" and instance is None:
            raise InstanceError("a delta sweep needs an instance")

        reference = None
        if kind == "delta" and with_oracle:
            reference = OracleService.optimal_cost(instance).total

        tasks = [(kind, value, alpha, instance, reference) for value in values]
        workers = settings.SWEEP_WORKERS if workers is None else workers
        if workers > 1:
            with ProcessPoolExecutor(workers) as executor:
                rows = list(tqdm(executor.map(_sweep_point, tasks), total=len(tasks), desc=f"sweep {kind}",
                                 disable=not progress))
        else:
            rows = [_sweep_point(task) for task in tqdm(tasks, desc=f"sweep {kind}", disable=not progress)]
        logger.info(f"Sweep over {kind}: {len(rows)} points")
        return rows


def _sweep_point(task: Tuple[str, float, float, Optional[Instance], Optional[float]]) -> SweepRow:
    kind, value, alpha, instance, reference = task
    if kind == "n":
        instance = HarnessService.gen_lower_bound(int(value), alpha)
        delta = None
        reference = OracleService.yds(instance)
    else:
        delta = float(value)
    state, schedule = PDService.run(instance, delta)
    certificate = DualService.dual_value(state.lam, instance, schedule.timeline, finished=state.y == 1)
    cost = schedule.cost.total
    return SweepRow(
        parameter=kind,
        value=float(value),
        cost=cost,
        g=certificate.g,
        certified_ratio=DualService.certified_ratio(schedule.cost, certificate, instance.alpha),
        reference_cost=reference,
        empirical_ratio=HarnessService._ratio(cost, reference) if reference is not None else None,
    )

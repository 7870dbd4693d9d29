"""
Dual Service - Closed-form dual function value at the duals of a PD run.

The minimizer of the Lagrangian for fixed duals runs, in every interval, the
(at most m) available jobs with the largest speeds s_hat_j on their own
processors. Its value is a lower bound on every schedule's cost.
"""
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.config import settings
from app.models.models import DualCertificate, Timeline
from app.schemas.schemas import CostBreakdown, Instance, JobCategory
from app.services.chen_kernel import ChenKernel, tie_ranks
from app.utils.errors import CertificateViolation

logger = logging.getLogger("profit_sched.services.dual")


class DualService:
    """Dual certificate construction and the certified competitive ratio."""

    @staticmethod
    def s_hat(lam: float, workload: float, alpha: float) -> float:
        """Speed (lambda / (alpha * w))^(1/(alpha-1))."""
        return (lam / (alpha * workload)) ** (1.0 / (alpha - 1.0))

    @staticmethod
    def contributing(
        available: Sequence[int],
        speeds: np.ndarray,
        job_ids: Sequence[str],
        m: int
    ) -> Tuple[int, ...]:
        """The min(m, n_k) available jobs with the largest speeds, ties by id; zero speeds dropped."""
        ranked = sorted(available, key=lambda j: (-speeds[j], job_ids[j]))
        return tuple(j for j in ranked[:m] if speeds[j] > 0)

    @staticmethod
    def categorize(finished: bool, x_hat: float, alpha: float) -> JobCategory:
        """J1 finished; J2 rejected with x_hat <= (alpha - alpha^(1-alpha)) / (alpha - 1); else J3."""
        if finished:
            return JobCategory.FINISHED
        threshold = (alpha - alpha ** (1.0 - alpha)) / (alpha - 1.0)
        return JobCategory.REJECTED_LIGHT if x_hat <= threshold else JobCategory.REJECTED_HEAVY

    @staticmethod
    def dual_value(
        lam: np.ndarray,
        instance: Instance,
        timeline: Optional[Timeline],
        finished: Optional[np.ndarray] = None
    ) -> DualCertificate:
        """
        Evaluate g(lambda) = (1 - alpha) * sum_j E(j) + sum_j lambda_j.

        Args:
            lam: duals aligned with ``timeline.jobs``
            instance: supplies alpha and m
            timeline: partition of the run; None for an instance without jobs
            finished: indicators of the run; defaults to lambda_j < v_j

        Raises:
            CertificateViolation: a dual exceeds its job's value, or the
                interval-wise and job-wise forms of g disagree
        """
        alpha, m = instance.alpha, instance.m
        if timeline is None or timeline.n_jobs == 0:
            return DualCertificate(
                job_ids=(), s_hat=np.zeros(0), x_hat=np.zeros((0, 0)), x_hat_job=np.zeros(0),
                energy=np.zeros(0), contributing_length=np.zeros(0), contributing=[],
                available_counts=[], g=0.0, categories=[],
            )

        lam = np.asarray(lam, dtype=float)
        values, workloads = timeline.values, timeline.workloads
        over = np.flatnonzero(lam > values)
        if over.size:
            job_id = timeline.job_ids[over[0]]
            raise CertificateViolation(f"dual of job {job_id} exceeds its value")
        if finished is None:
            finished = lam < values

        speeds = np.array([DualService.s_hat(l, w, alpha) for l, w in zip(lam, workloads)])
        n, N = timeline.n_jobs, timeline.n_intervals
        x_hat = np.zeros((n, N))
        contributing: List[Tuple[int, ...]] = []
        available_counts: List[int] = []
        interval_form = 0.0
        for k, length in enumerate(timeline.lengths):
            available = [int(j) for j in np.flatnonzero(timeline.availability[:, k])]
            phi = DualService.contributing(available, speeds, timeline.job_ids, m)
            contributing.append(phi)
            available_counts.append(len(available))
            for j in phi:
                x_hat[j, k] = length / workloads[j] * speeds[j]
            interval_form += (1.0 - alpha) * length * sum(speeds[j] ** alpha for j in phi)

        contributing_length = np.array([
            sum(timeline.lengths[k] for k, phi in enumerate(contributing) if j in phi) for j in range(n)
        ], dtype=float)
        energy = contributing_length * speeds ** alpha
        job_form = (1.0 - alpha) * energy.sum()
        if not math.isclose(interval_form, job_form, rel_tol=1e-9, abs_tol=1e-9):
            raise CertificateViolation(
                f"interval-wise dual contribution {interval_form} differs from job-wise {job_form}"
            )

        x_hat_job = x_hat.sum(axis=1)
        g = float(job_form + lam.sum())
        categories = [DualService.categorize(bool(f), float(x), alpha) for f, x in zip(finished, x_hat_job)]
        logger.debug(f"Dual value g={g:.12g} over {n} jobs and {N} intervals")
        return DualCertificate(
            job_ids=timeline.job_ids,
            s_hat=speeds,
            x_hat=x_hat,
            x_hat_job=x_hat_job,
            energy=energy,
            contributing_length=contributing_length,
            contributing=contributing,
            available_counts=available_counts,
            g=g,
            categories=categories,
        )

    @staticmethod
    def lagrangian_value(
        x: np.ndarray,
        y: np.ndarray,
        lam: np.ndarray,
        instance: Instance,
        timeline: Timeline
    ) -> float:
        """
        Lagrangian of the relaxed program at (x, y, lambda):
        energy + sum (1 - y_j) v_j + sum lambda_j (y_j - sum_k c_jk x_jk).
        """
        workloads, values = timeline.workloads, timeline.values
        loads = np.asarray(x, dtype=float) * workloads[:, None]
        energy = ChenKernel.power_many(
            loads.T, timeline.lengths, instance.m, instance.alpha, tie_ranks(timeline.job_ids)
        ).sum()
        y = np.asarray(y, dtype=float)
        covered = (timeline.availability * x).sum(axis=1)
        lost = np.where(y < 1, (1.0 - y) * values, 0.0).sum()
        return float(energy + lost + (np.asarray(lam) * (y - covered)).sum())

    @staticmethod
    def certified_ratio(cost: CostBreakdown, certificate: DualCertificate, alpha: float) -> float:
        """
        cost / g; 1 for an empty instance.

        Raises:
            CertificateViolation: g <= 0 while the cost is positive
        """
        if certificate.g <= 0:
            if cost.total == 0:
                return 1.0
            raise CertificateViolation(f"dual value {certificate.g} is not positive for cost {cost.total}")
        return cost.total / certificate.g

    @staticmethod
    def ratio_bound(alpha: float) -> float:
        return alpha ** alpha

    @staticmethod
    def within_bound(ratio: float, alpha: float) -> bool:
        return ratio <= DualService.ratio_bound(alpha) * (1.0 + settings.RATIO_SLACK)

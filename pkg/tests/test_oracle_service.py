import numpy as np
import pytest

from app.config import settings
from app.models.models import EnergyResult
from app.services.harness_service import HarnessService
from app.services.oracle_service import OracleService
from app.utils.errors import OracleLimitError, ParameterError
from app.utils.projection import euclidean_proj_simplex, euclidean_proj_simplex_rows
from tests.conftest import make_instance


class TestSimplexProjection:
    def test_already_on_simplex(self):
        np.testing.assert_array_equal(euclidean_proj_simplex(np.array([0.25, 0.75])), [0.25, 0.75])

    def test_projection(self):
        np.testing.assert_allclose(euclidean_proj_simplex(np.array([1.0, 1.0, -1.0])), [0.5, 0.5, 0.0])
        np.testing.assert_allclose(euclidean_proj_simplex(np.array([2.0, 0.0])), [1.0, 0.0])

    def test_result_on_simplex(self, rng):
        for _ in range(50):
            w = euclidean_proj_simplex(rng.normal(size=6), s=2.0)
            assert w.sum() == pytest.approx(2.0)
            assert np.all(w >= 0)

    def test_rows_with_mask(self):
        v = np.array([[1.0, 1.0, 5.0], [0.2, -3.0, 0.4]])
        mask = np.array([[True, True, False], [True, False, True]])
        w = euclidean_proj_simplex_rows(v, mask)
        np.testing.assert_allclose(w, [[0.5, 0.5, 0.0], [0.4, 0.0, 0.6]])

    def test_rows_match_single_projection(self, rng):
        v = rng.normal(size=(20, 5))
        expected = np.array([euclidean_proj_simplex(row, s=1.5) for row in v])
        np.testing.assert_allclose(euclidean_proj_simplex_rows(v, s=1.5), expected, atol=1e-12)


class TestMinEnergy:
    def test_single_job(self, single_job_finished):
        result = OracleService.min_energy(("a",), single_job_finished)
        assert result.energy == pytest.approx(1.0, rel=1e-9)
        assert result.converged

    def test_two_nested_jobs(self, two_jobs_nested):
        result = OracleService.min_energy(("a", "b"), two_jobs_nested)
        assert result.energy == pytest.approx(2.0, rel=1e-6)
        assert result.converged
        np.testing.assert_allclose(result.x.sum(axis=1), [1.0, 1.0])

    def test_empty_subset(self, two_jobs_nested):
        result = OracleService.min_energy((), two_jobs_nested)
        assert result.energy == 0.0
        assert result.converged

    def test_iteration_cap_is_flagged(self):
        instance = make_instance([("a", 0, 2, 1.0, 9.0), ("b", 1, 3, 1.0, 9.0), ("c", 0, 3, 2.0, 9.0)], m=2)
        result = OracleService.min_energy(("a", "b", "c"), instance, max_iter=1)
        assert not result.converged
        assert result.iterations == 1
        assert result.projected_gradient_norm > 0

    def test_adding_a_job_never_lowers_energy(self):
        instance = make_instance(
            [("a", 0, 2, 1.0, 9.0), ("b", 1, 3, 0.5, 9.0), ("c", 0, 3, 2.0, 9.0), ("d", 2, 4, 1.0, 9.0)], m=2)
        subsets = [("a",), ("a", "b"), ("a", "b", "c"), ("a", "b", "c", "d")]
        energies = [OracleService.min_energy(subset, instance).energy for subset in subsets]
        assert all(b >= a * (1 - 1e-6) for a, b in zip(energies, energies[1:]))

    def test_matches_yds_on_single_processor(self):
        for seed in range(8):
            instance = HarnessService.gen_random(seed, n=4, m=1, alpha=(2.0, 3.0)[seed % 2])
            ids = tuple(job.id for job in instance.jobs)
            assert OracleService.min_energy(ids, instance).energy == pytest.approx(
                OracleService.yds(instance), rel=1e-6)

    def test_converges_on_multiprocessor_subset(self):
        instance = HarnessService.gen_random(2, n=7, m=2, alpha=1.5)
        result = OracleService.min_energy(("j000", "j004", "j005"), instance)
        assert result.converged
        assert result.projected_gradient_norm <= settings.ORACLE_TOL * (1 + result.energy)
        assert result.energy == pytest.approx(4.0146, rel=1e-3)

    def test_warm_start_reaches_same_optimum(self):
        instance = HarnessService.gen_random(4, n=6, m=3, alpha=2.0)
        ids = tuple(job.id for job in instance.jobs)
        cold = OracleService.min_energy(ids, instance)
        smaller = OracleService.min_energy(ids[:-1], instance)
        x0 = np.vstack([smaller.x, np.zeros(smaller.x.shape[1])])
        warm = OracleService.min_energy(ids, instance, x0=x0)
        assert cold.converged and warm.converged
        assert warm.energy == pytest.approx(cold.energy, rel=1e-7)


class TestOptimalCost:
    def test_reject_when_cheaper(self, single_job_rejected):
        result = OracleService.optimal_cost(single_job_rejected)
        assert result.total == pytest.approx(0.5)
        assert result.finished == ()

    def test_finish_when_cheaper(self, single_job_finished):
        result = OracleService.optimal_cost(single_job_finished, method="pgd")
        assert result.total == pytest.approx(1.0, rel=1e-9)
        assert result.finished == ("a",)
        assert result.method == "pgd"

    def test_negligible_values_reject_everything(self):
        instance = make_instance([("a", 0, 1, 1.0, 1e-9), ("b", 0, 2, 1.0, 1e-9)], m=2)
        result = OracleService.optimal_cost(instance)
        assert result.total == pytest.approx(2e-9)
        assert result.energy == 0.0
        assert result.finished == ()

    def test_not_above_rejecting_everything(self):
        for seed in range(5):
            instance = HarnessService.gen_random(seed, n=5, m=1, alpha=2.0)
            result = OracleService.optimal_cost(instance)
            assert result.total <= sum(job.value for job in instance.jobs) + 1e-12

    def test_auto_uses_yds_on_one_processor(self, two_jobs_nested):
        auto = OracleService.optimal_cost(two_jobs_nested)
        pgd = OracleService.optimal_cost(two_jobs_nested, method="pgd")
        assert auto.method == "yds"
        assert auto.total == pytest.approx(2.0)
        assert pgd.total == pytest.approx(auto.total, rel=1e-6)
        assert set(auto.finished) == {"a", "b"}

    def test_empty_instance(self):
        result = OracleService.optimal_cost(make_instance([]))
        assert result.total == 0.0

    def test_too_many_jobs(self):
        instance = HarnessService.gen_random(0, n=settings.ORACLE_MAX_JOBS + 1, m=1, alpha=2.0)
        with pytest.raises(OracleLimitError, match="oracle limited to small instances"):
            OracleService.optimal_cost(instance)

    def test_unknown_method(self, two_jobs_nested):
        with pytest.raises(ParameterError):
            OracleService.optimal_cost(two_jobs_nested, method="simplex")

    def test_yds_needs_one_processor(self):
        with pytest.raises(ParameterError):
            OracleService.optimal_cost(make_instance([("a", 0, 1, 1.0, 1.0)], m=2), method="yds")

    def test_multiprocessor_optimum_converges(self):
        result = OracleService.optimal_cost(HarnessService.gen_random(2, n=7, m=2, alpha=1.5))
        assert result.method == "pgd"
        assert result.converged

    def test_unconverged_energy_does_not_prune_supersets(self, two_jobs_nested, monkeypatch):
        descent = OracleService.min_energy

        def inflated(subset, instance, timeline=None, **kwargs):
            result = descent(subset, instance, timeline, **kwargs)
            if tuple(subset) == ("a",):
                return EnergyResult(energy=1e3, x=result.x, converged=False, iterations=result.iterations,
                                    projected_gradient_norm=1.0)
            return result

        monkeypatch.setattr(OracleService, "min_energy", staticmethod(inflated))
        result = OracleService.optimal_cost(two_jobs_nested, method="pgd")
        assert result.finished == ("a", "b")
        assert result.total == pytest.approx(2.0, rel=1e-6)
        assert not result.converged


class TestYDS:
    def test_single_job(self):
        instance = make_instance([("a", 0.5, 2.5, 3.0, 1.0)], alpha=3.0)
        assert OracleService.yds(instance) == pytest.approx(2.0 * 1.5 ** 3)

    def test_two_nested_jobs(self, two_jobs_nested):
        assert OracleService.yds(two_jobs_nested) == pytest.approx(2.0)

    def test_dense_inner_interval(self):
        # Peak [1, 2) at density 3, then the rest [0, 1) and [2, 3) at density 0.5.
        instance = make_instance([("a", 1, 2, 3.0, 1.0), ("b", 0, 3, 1.0, 1.0)])
        assert OracleService.yds(instance) == pytest.approx(9.0 + 2 * 0.25)

    def test_multiprocessor(self):
        with pytest.raises(ParameterError):
            OracleService.yds(make_instance([("a", 0, 1, 1.0, 1.0)], m=2))

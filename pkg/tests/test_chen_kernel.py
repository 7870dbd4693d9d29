import numpy as np
import pytest
from scipy.optimize import minimize

from app.models.models import IntervalLoad
from app.services.chen_kernel import ChenKernel, tie_ranks
from app.utils.errors import ParameterError


def interval(loads, length=1.0, m=1):
    return IntervalLoad(loads=np.asarray(loads, dtype=float), length=length, m=m)


def job_segments(schedule, job):
    return sorted(
        (segment.start, segment.end)
        for processor in schedule.placement
        for segment in processor
        if segment.job == job
    )


class TestDedicatedSet:
    def test_largest_job_dedicated(self):
        assert ChenKernel.dedicated_set(interval([3, 1, 1, 1], m=2)) == (0,)

    def test_remainder_zero_at_rank_m(self):
        assert ChenKernel.dedicated_set(interval([1, 1], m=2)) == (0, 1)

    def test_all_zero(self):
        assert ChenKernel.dedicated_set(interval([0, 0, 0], m=2)) == ()

    def test_single_processor_with_two_jobs_has_no_dedicated(self):
        assert ChenKernel.dedicated_set(interval([0.5, 0.3], m=1)) == ()

    def test_descending_order(self):
        assert ChenKernel.dedicated_set(interval([2, 6, 1], m=3)) == (1, 0, 2)


class TestScheduleInterval:
    def test_dedicated_and_pool(self):
        schedule = ChenKernel.schedule_interval(interval([4, 1, 1], m=2))
        assert schedule.dedicated == (0,)
        assert schedule.speeds[0] == pytest.approx(4.0)
        assert schedule.pool_speed == pytest.approx(2.0)
        assert schedule.pool_jobs == (1, 2)
        assert [segment.job for segment in schedule.placement[0]] == [1, 2]
        assert schedule.placement[0][-1].end == pytest.approx(1.0)

    def test_single_pool_processor(self):
        schedule = ChenKernel.schedule_interval(interval([0.5, 0.3], m=1))
        assert schedule.dedicated == ()
        assert schedule.pool_speed == pytest.approx(0.8)
        first, second = schedule.placement[0]
        assert first.end - first.start == pytest.approx(0.625)
        assert second.end - second.start == pytest.approx(0.375)

    def test_idle_processors(self):
        schedule = ChenKernel.schedule_interval(interval([6.0], length=2.0, m=3))
        assert schedule.dedicated == (0,)
        assert schedule.speeds[0] == pytest.approx(3.0)
        assert schedule.pool_processors == 2
        np.testing.assert_allclose(schedule.processor_speeds, [3.0, 0.0, 0.0])

    def test_wrap_around_never_runs_a_job_in_parallel(self, rng):
        for _ in range(200):
            m = int(rng.integers(1, 5))
            loads = rng.uniform(0.05, 2.0, size=int(rng.integers(1, 8)))
            length = float(rng.uniform(0.5, 3.0))
            schedule = ChenKernel.schedule_interval(interval(loads, length=length, m=m))
            for job in schedule.pool_jobs:
                pieces = job_segments(schedule, job)
                done = sum(end - start for start, end in pieces) * schedule.pool_speed
                assert done == pytest.approx(loads[job], rel=1e-9)
                for (_, end), (start, _) in zip(pieces, pieces[1:]):
                    assert start >= end - 1e-9 * length
            for processor in schedule.placement:
                for left, right in zip(processor, processor[1:]):
                    assert right.start >= left.end - 1e-12


class TestPower:
    @pytest.mark.parametrize(
        "loads, m, expected",
        [
            ([3, 1, 1, 1], 2, 18.0),
            ([4, 1, 1], 2, 20.0),
            ([0, 0, 0], 2, 0.0),
            ([2, 1], 2, 5.0),
            ([0.5, 0.3], 1, 0.64),
        ],
    )
    def test_examples(self, loads, m, expected):
        assert ChenKernel.power(interval(loads, m=m), alpha=2.0) == pytest.approx(expected)

    def test_power_many_matches_single(self, rng):
        loads = rng.uniform(0.0, 2.0, size=(20, 5))
        lengths = rng.uniform(0.2, 2.0, size=20)
        many = ChenKernel.power_many(loads, lengths, 3, 2.5, tie_ranks([str(i) for i in range(5)]))
        single = [ChenKernel.power(interval(row, length=l, m=3), 2.5) for row, l in zip(loads, lengths)]
        np.testing.assert_allclose(many, single, rtol=1e-12)

    def test_convex_along_segments(self, rng):
        for _ in range(300):
            m = int(rng.integers(1, 4))
            alpha = float(rng.choice([1.5, 2.0, 3.0]))
            a = rng.uniform(0.0, 2.0, size=4)
            b = rng.uniform(0.0, 2.0, size=4)
            mid = ChenKernel.power(interval((a + b) / 2, m=m), alpha)
            ends = (ChenKernel.power(interval(a, m=m), alpha) + ChenKernel.power(interval(b, m=m), alpha)) / 2
            assert mid <= ends + 1e-12 * (1.0 + ends)

    def test_not_above_any_feasible_processor_speed_profile(self, rng):
        """Energy is minimal among processor speed profiles that can carry the loads."""
        for _ in range(100):
            m = int(rng.integers(1, 4))
            n = int(rng.integers(1, 5))
            alpha = float(rng.choice([1.5, 2.0, 3.0]))
            length = float(rng.uniform(0.5, 2.0))
            loads = rng.uniform(0.1, 2.0, size=n)
            top = np.cumsum(np.sort(loads)[::-1])

            # Speeds sigma_1 >= ... >= sigma_m can carry the loads iff the k fastest
            # processors cover the k largest loads, and the min(n, m) fastest cover the total.
            constraints = [{"type": "ineq", "fun": lambda s, k=k: length * np.sum(s[:k + 1]) - top[k]}
                           for k in range(min(n, m) - 1)]
            busy = min(n, m)
            constraints.append({"type": "ineq", "fun": lambda s: length * np.sum(s[:busy]) - top[-1]})
            constraints += [{"type": "ineq", "fun": lambda s, p=p: s[p] - s[p + 1]} for p in range(m - 1)]
            start = np.full(m, max(loads.max(), loads.sum() / busy) / length)
            result = minimize(
                lambda s: length * np.sum(np.abs(s) ** alpha),
                start,
                method="SLSQP",
                bounds=[(0.0, None)] * m,
                constraints=constraints,
                options={"ftol": 1e-12, "maxiter": 500},
            )
            power = ChenKernel.power(interval(loads, length=length, m=m), alpha)
            assert power <= result.fun * (1.0 + 1e-6) + 1e-9
            assert power >= result.fun * (1.0 - 1e-3)


class TestGrad:
    def test_single_load(self):
        assert ChenKernel.grad(interval([0.5], m=1), 0, workload=1.0, alpha=2.0) == pytest.approx(1.0)

    def test_all_zero(self):
        load = interval([0.0, 0.0, 0.0], m=2)
        for j in range(3):
            assert ChenKernel.grad(load, j, workload=1.0, alpha=2.0) == 0.0

    def test_zero_load_job_sees_pool_speed(self):
        load = interval([4.0, 1.0, 1.0, 0.0], m=2)
        assert ChenKernel.grad(load, 3, workload=1.0, alpha=2.0) == pytest.approx(2.0 * 2.0)

    def test_matches_central_finite_differences(self, rng):
        step = 1e-6
        for _ in range(1000):
            m = int(rng.integers(1, 4))
            n = int(rng.integers(1, 6))
            alpha = float(rng.choice([1.5, 2.0, 3.0]))
            length = float(rng.uniform(0.5, 2.0))
            loads = rng.uniform(0.1, 3.0, size=n)
            workloads = rng.uniform(0.5, 2.0, size=n)
            j = int(rng.integers(n))

            plus, minus = loads.copy(), loads.copy()
            plus[j] += workloads[j] * step
            minus[j] -= workloads[j] * step
            numeric = (ChenKernel.power(interval(plus, length, m), alpha)
                       - ChenKernel.power(interval(minus, length, m), alpha)) / (2 * step)
            analytic = ChenKernel.grad(interval(loads, length, m), j, workloads[j], alpha)
            assert analytic == pytest.approx(numeric, rel=1e-5, abs=1e-7)

    def test_grad_many_matches_single(self, rng):
        loads = rng.uniform(0.0, 2.0, size=(10, 4))
        lengths = rng.uniform(0.5, 1.5, size=10)
        workloads = rng.uniform(0.5, 2.0, size=4)
        many = ChenKernel.grad_many(loads, lengths, 2, 2.0, workloads, tie_ranks(["a", "b", "c", "d"]))
        for k in range(10):
            for j in range(4):
                single = ChenKernel.grad(interval(loads[k], lengths[k], 2), j, workloads[j], 2.0)
                assert many[k, j] == pytest.approx(single, rel=1e-12)


class TestProcessorLoads:
    def test_example(self):
        np.testing.assert_allclose(ChenKernel.processor_loads(interval([4, 1, 1], m=2)), [4.0, 2.0])

    def test_appending_a_job_raises_each_processor_by_at_most_its_load(self, rng):
        for _ in range(1000):
            m = int(rng.integers(1, 5))
            loads = rng.uniform(0.0, 2.0, size=int(rng.integers(1, 7)))
            z = float(rng.uniform(0.0, 2.0))
            length = float(rng.uniform(0.5, 2.0))
            before = ChenKernel.processor_loads(interval(loads, length, m))
            after = ChenKernel.processor_loads(interval(np.append(loads, z), length, m))
            assert np.all(after - before >= -1e-9)
            assert np.all(after - before <= z + 1e-9)


class TestLoadAtLevel:
    def test_pool_budget(self):
        assert ChenKernel.load_at_level(interval([0.5], m=1), 0.8) == pytest.approx(0.3)

    def test_below_current_pool_speed(self):
        assert ChenKernel.load_at_level(interval([0.5, 0.5], m=1), 0.4) == 0.0

    def test_dedicated_at_level(self):
        assert ChenKernel.load_at_level(interval([3.0], m=2), 3.5) == pytest.approx(3.5)

    def test_negative_speed(self):
        with pytest.raises(ParameterError):
            ChenKernel.load_at_level(interval([1.0], m=1), -0.1)

    def test_inverse_of_marginal_speed(self, rng):
        checked = 0
        for _ in range(500):
            m = int(rng.integers(1, 4))
            fixed = rng.uniform(0.0, 2.0, size=int(rng.integers(0, 5)))
            length = float(rng.uniform(0.5, 2.0))
            target = float(rng.uniform(0.05, 3.0))
            load = ChenKernel.load_at_level(interval(fixed, length, m), target) if fixed.size else min(
                target * length * m, target * length)
            if load <= 0:
                continue
            loads = np.append(fixed, load)
            _, _, speed = ChenKernel.classify(loads[None, :], np.array([length]), m, np.arange(len(loads)))
            assert speed[0, -1] == pytest.approx(target, rel=1e-9)
            checked += 1
        assert checked > 100

    def test_vectorized_matches_single(self, rng):
        fixed = rng.uniform(0.0, 2.0, size=(15, 3))
        lengths = rng.uniform(0.5, 2.0, size=15)
        many = ChenKernel.loads_at_level(fixed, lengths, 2, 1.1)
        single = [ChenKernel.load_at_level(interval(row, l, 2), 1.1) for row, l in zip(fixed, lengths)]
        np.testing.assert_allclose(many, single)

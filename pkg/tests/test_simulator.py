import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvdrift import _kernels
from mvdrift.model import BetaSpec, DriftSpec
from mvdrift.simulator import (BlowUpError, Mu0, ParticleEnsemble, SimConfig,
                               beta_drift_binned, drift_fast, drift_naive,
                               euler_step, load_samples, project, save_samples,
                               simulate)


def quad_spec(a1=1.0):
    return DriftSpec(j1=1, j=1, a=[a1], theta=[], beta=BetaSpec.zero())


class TestDriftKernels:
    def test_two_particle_example(self):
        np.testing.assert_allclose(drift_naive([0.0, 2.0], quad_spec()), [1.0, -1.0])
        np.testing.assert_allclose(drift_fast([0.0, 2.0], quad_spec()), [1.0, -1.0])

    def test_equal_positions_zero(self):
        np.testing.assert_allclose(drift_naive([1.5] * 6, quad_spec()), np.zeros(6),
                                   atol=1e-15)

    def test_single_particle_zero(self):
        np.testing.assert_allclose(drift_naive([3.0], quad_spec()), [0.0], atol=1e-15)

    def test_trig_contribution_vanishes_at_pi(self):
        # pure trigonometric part evaluated at separation pi
        x = np.array([0.0, np.pi])
        for mod in _kernels.available_backends().values():
            out = mod.parametric_drift_naive(x, [], [1.0], [1.0])
            np.testing.assert_allclose(out, [0.0, 0.0], atol=1e-15)
            out = mod.parametric_drift_fast(x, [], [1.0], [1.0])
            np.testing.assert_allclose(out, [0.0, 0.0], atol=1e-15)

    def test_fast_equals_naive_battery(self, rng):
        specs = [
            quad_spec(1.3),
            DriftSpec(j1=2, j=2, a=[1.0, 0.5], theta=[], beta=BetaSpec.zero()),
            DriftSpec(j1=1, j=2, a=[1.5, 0.4], theta=[1.7], beta=BetaSpec.zero()),
            DriftSpec(j1=2, j=3, a=[1.0, 0.4, 0.2], theta=[1.2],
                      beta=BetaSpec.cos_bump(1.3)),
            DriftSpec(j1=1, j=1, a=[0.8], theta=[], beta=BetaSpec.sinc_power(2)),
        ]
        worst = 0.0
        for _ in range(30):
            n = int(rng.integers(2, 257))
            x = rng.standard_normal(n)
            for spec in specs:
                d = np.max(np.abs(drift_naive(x, spec) - drift_fast(x, spec)))
                worst = max(worst, d)
        assert worst < 1e-10

    def test_backends_agree(self, rng):
        backends = _kernels.available_backends()
        if len(backends) < 2:
            pytest.skip("compiled extension not built")
        x = rng.standard_normal(300)
        args = (x, [1.0, 0.4], [1.7], [0.3])
        for fn in ("parametric_drift_naive", "parametric_drift_fast"):
            out = [getattr(mod, fn)(*args) for mod in backends.values()]
            np.testing.assert_allclose(out[0], out[1], atol=1e-12)
        beta = BetaSpec.cos_bump(1.3)
        np.testing.assert_allclose(
            backends["compiled"].beta_drift_pairwise_analytic(x, 1, 1.3, 1),
            backends["numpy"].beta_drift_pairwise(x, beta.deriv), atol=1e-13)

    def test_drift_sums_to_zero(self, rng):
        spec = DriftSpec(j1=2, j=3, a=[1.0, 0.4, 0.2], theta=[1.2],
                         beta=BetaSpec.cos_bump(1.0))
        for _ in range(5):
            x = rng.standard_normal(200)
            assert abs(np.sum(drift_naive(x, spec))) < 1e-9
            assert abs(np.sum(drift_fast(x, spec))) < 1e-9

    def test_binned_beta_drift_approximates_pairwise(self, rng):
        beta = BetaSpec.cos_bump(1.0)
        spec = DriftSpec(j1=1, j=1, a=[0.5], theta=[], beta=beta)
        x = rng.standard_normal(500)
        exact = drift_naive(x, spec) - drift_naive(x, quad_spec(0.5))
        approx = beta_drift_binned(x, beta, n_bins=4096)
        assert np.max(np.abs(exact - approx)) < 1e-3


class TestEulerStep:
    def test_zero_noise_equal_positions(self):
        ens = ParticleEnsemble(np.full(4, 2.0), time=0.0, n_steps=0, seed=0, stream=0)
        out = euler_step(ens, quad_spec(), 0.1, np.zeros(4))
        np.testing.assert_allclose(out.positions, ens.positions)

    def test_single_particle_stays(self):
        ens = ParticleEnsemble(np.array([1.0]), time=0.0, n_steps=0, seed=0, stream=0)
        out = euler_step(ens, quad_spec(), 0.1, np.zeros(1))
        assert out.positions[0] == 1.0

    def test_two_particle_step(self):
        ens = ParticleEnsemble(np.array([0.0, 2.0]), time=0.0, n_steps=0, seed=0, stream=0)
        out = euler_step(ens, quad_spec(), 0.1, np.zeros(2))
        np.testing.assert_allclose(out.positions, [0.1, 1.9])
        assert out.time == out.n_steps * 0.1

    def test_blowup_detected(self):
        ens = ParticleEnsemble(np.array([0.0, 1e200]), time=0.0, n_steps=0,
                               seed=0, stream=0)
        spec = DriftSpec(j1=2, j=2, a=[1.0, 1.0], theta=[], beta=BetaSpec.zero())
        with pytest.raises(BlowUpError):
            euler_step(ens, spec, 1.0, np.zeros(2))

    def test_noise_length_checked(self):
        ens = ParticleEnsemble(np.zeros(3), time=0.0, n_steps=0, seed=0, stream=0)
        with pytest.raises(ValueError):
            euler_step(ens, quad_spec(), 0.1, np.zeros(2))


class TestSimulate:
    def test_deterministic_given_seed_stream(self):
        cfg = SimConfig(n=64, t=1.0, dt=0.01, seed=9, stream=3)
        a = simulate(cfg, quad_spec()).positions
        b = simulate(cfg, quad_spec()).positions
        assert np.array_equal(a, b)

    def test_stream_changes_output(self):
        base = SimConfig(n=64, t=0.5, dt=0.01, seed=9, stream=0)
        other = SimConfig(n=64, t=0.5, dt=0.01, seed=9, stream=1)
        assert not np.array_equal(simulate(base, quad_spec()).positions,
                                  simulate(other, quad_spec()).positions)

    def test_point_mass_at_time_zero(self):
        cfg = SimConfig(n=5, t=0.0, dt=0.01, mu0=Mu0("point"))
        np.testing.assert_array_equal(simulate(cfg, quad_spec()).positions, np.zeros(5))

    def test_time_is_exact_product(self):
        cfg = SimConfig(n=8, t=0.3, dt=0.01, seed=1)
        ens = simulate(cfg, quad_spec())
        assert ens.time == ens.n_steps * 0.01

    def test_stationary_variance_quadratic(self):
        cfg = SimConfig(n=10_000, t=10.0, dt=0.01, seed=5)
        ens = simulate(cfg, quad_spec(0.5))
        var = np.var(project(ens.positions))
        assert abs(var - 1.0) < 0.05

    def test_ou_reduction_variance(self):
        # projected spread of the quadratic system approaches (1 - 1/N)/(2 a1)
        n = 4000
        cfg = SimConfig(n=n, t=12.0, dt=0.01, seed=17)
        ens = simulate(cfg, quad_spec(1.0))
        var = np.var(project(ens.positions))
        assert var == pytest.approx((1 - 1 / n) / 2.0, rel=0.1)

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            SimConfig(n=0, t=1.0)
        with pytest.raises(ValueError):
            SimConfig(n=1, t=1.0, dt=0.3)


class TestProject:
    def test_example(self):
        np.testing.assert_allclose(project([1.0, 2.0, 3.0]), [-1.0, 0.0, 1.0])

    def test_constant_maps_to_zero(self):
        np.testing.assert_allclose(project(np.full(7, 3.3)), np.zeros(7), atol=1e-15)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-100, 100), min_size=1, max_size=50))
    def test_mean_zero_and_idempotent(self, xs):
        y = project(np.array(xs))
        scale = max(1.0, np.max(np.abs(xs)))
        assert abs(np.mean(y)) < 1e-12 * scale
        np.testing.assert_allclose(project(y), y, atol=1e-12 * scale)


class TestSampleIO:
    def test_roundtrip(self, tmp_path, rng):
        path = tmp_path / "samples.txt"
        values = rng.standard_normal(100)
        save_samples(path, values, meta={"n": 100, "seed": 4})
        back, meta = load_samples(path)
        np.testing.assert_array_equal(back, values)
        assert meta["n"] == "100" and meta["seed"] == "4"

import numpy as np
import pytest

from dvarskit import (
    InvalidInputError,
    SimulationSpec,
    ar1_coeff,
    derive_mask,
    dvars,
    estimate_noise_params,
    inject_drift,
    inject_spike,
    simulate_ar1_volume,
)
from dvarskit.simulate import Drift, Spike, parse_spec
from conftest import full_mask


class TestSimulate:
    def test_white_noise_autocorrelation(self):
        v, _ = simulate_ar1_volume(SimulationSpec((1, 1, 1), 100_000, mu=0.0, sigma=1.0, rho=0.0, seed=1))
        assert abs(ar1_coeff(v.data[0])) < 0.01

    def test_stationary_variance_and_rho(self):
        v, truth = simulate_ar1_volume(SimulationSpec((1, 1, 1), 100_000, mu=5.0, sigma=3.0, rho=0.6, seed=2))
        assert np.var(v.data[0], ddof=1) == pytest.approx(9.0, rel=0.05)
        assert ar1_coeff(v.data[0]) == pytest.approx(0.6, rel=0.05)
        assert truth.sigma[0] == 3.0 and truth.rho[0] == 0.6

    def test_first_frame_stationary(self):
        # variance at t = 1 across many voxels equals sigma^2 (no burn-in needed)
        v, _ = simulate_ar1_volume(SimulationSpec((100, 50, 4), 3, mu=0.0, sigma=2.0, rho=0.9, seed=3))
        assert np.var(v.data[:, 0]) == pytest.approx(4.0, rel=0.05)
        assert np.var(v.data[:, 2]) == pytest.approx(4.0, rel=0.05)

    def test_deterministic(self):
        spec = SimulationSpec((3, 3, 2), 50, mu=(0, 10), sigma=(1, 2), rho=(-0.5, 0.5), seed=77)
        a, pa = simulate_ar1_volume(spec)
        b, pb = simulate_ar1_volume(spec)
        assert np.array_equal(a.data, b.data) and np.array_equal(pa.sigma, pb.sigma)
        c, _ = simulate_ar1_volume(SimulationSpec((3, 3, 2), 50, mu=(0, 10), sigma=(1, 2), rho=(-0.5, 0.5), seed=78))
        assert not np.array_equal(a.data, c.data)

    def test_voxel_streams_independent_of_grid(self):
        a, _ = simulate_ar1_volume(SimulationSpec((4, 1, 1), 30, seed=5))
        b, _ = simulate_ar1_volume(SimulationSpec((2, 1, 1), 30, seed=5))
        assert np.array_equal(a.data[:2], b.data)

    def test_param_ranges(self):
        _, truth = simulate_ar1_volume(SimulationSpec((20, 20, 1), 2, sigma=(5, 20), rho=(0, 0.5), seed=6))
        assert truth.sigma.min() >= 5 and truth.sigma.max() <= 20
        assert truth.rho.min() >= 0 and truth.rho.max() <= 0.5

    @pytest.mark.parametrize(
        "kwargs, field",
        [
            (dict(rho=1.0), "rho"),
            (dict(rho=(-1.0, 0.2)), "rho"),
            (dict(sigma=0.0), "sigma"),
            (dict(sigma=(3, 1)), "sigma"),
            (dict(n_frames=1), "frames"),
            (dict(dims=(0, 1, 1)), "dims"),
            (dict(artifacts=(Spike(99, 1.0),)), "spike"),
        ],
    )
    def test_invalid(self, kwargs, field):
        base = dict(dims=(2, 2, 2), n_frames=10)
        base.update(kwargs)
        with pytest.raises(InvalidInputError, match=field):
            simulate_ar1_volume(SimulationSpec(**base))

    def test_artifacts_applied(self):
        spec = SimulationSpec((10, 10, 1), 40, sigma=1.0, rho=0.0, seed=8)
        clean, truth = simulate_ar1_volume(spec)
        dirty, _ = simulate_ar1_volume(SimulationSpec((10, 10, 1), 40, sigma=1.0, rho=0.0, seed=8,
                                                      artifacts=(Spike(20, 2.0), Drift(0.5))))
        diff = dirty.data - clean.data
        expected_drift = 0.5 * np.arange(1, 41)
        np.testing.assert_allclose(np.delete(diff, 19, axis=1), np.delete(np.tile(expected_drift, (100, 1)), 19, axis=1))
        assert np.std(diff[:, 19] - 10.0) > 1.0


class TestInjectSpike:
    def test_zero_factor_identity(self, small_null):
        v, truth = small_null
        assert inject_spike(v, 5, 0.0, truth.sigma) is v

    def test_boundary_frame(self, small_null):
        v, truth = small_null
        w = inject_spike(v, 1, 2.0, truth.sigma)
        m = full_mask(v)
        a, b = dvars(v, m).values, dvars(w, m).values
        assert a[0] != b[0]
        assert np.array_equal(a[1:], b[1:])
        assert np.array_equal(w.data[:, 1:], v.data[:, 1:])

    def test_out_of_range(self, small_null):
        v, truth = small_null
        with pytest.raises(InvalidInputError):
            inject_spike(v, 0, 1.0, truth.sigma)
        with pytest.raises(InvalidInputError):
            inject_spike(v, v.n_frames + 1, 1.0, truth.sigma)

    def test_variance(self):
        v, truth = simulate_ar1_volume(SimulationSpec((100, 100, 1), 3, mu=0.0, sigma=2.0, rho=0.0, seed=9))
        w = inject_spike(v, 2, 1.5, truth.sigma, seed=4)
        added = w.data[:, 1] - v.data[:, 1]
        assert np.var(added) == pytest.approx((1.5 * 2.0) ** 2, rel=0.05)


class TestInjectDrift:
    def test_zero_identity(self, small_null):
        v, _ = small_null
        assert inject_drift(v, 0.0) is v

    def test_differences_shift_by_slope(self, small_null):
        v, _ = small_null
        w = inject_drift(v, 0.7)
        np.testing.assert_allclose(np.diff(w.data, axis=1) - np.diff(v.data, axis=1), 0.7, atol=1e-9)

    def test_detrend_restores_estimates(self):
        spec = SimulationSpec((10, 10, 2), 400, mu=1000.0, sigma=10.0, rho=0.3, seed=10)
        v, _ = simulate_ar1_volume(spec)
        w = inject_drift(v, 0.5)
        m = full_mask(v)
        clean = estimate_noise_params(v, m, detrend=True)
        drifted = estimate_noise_params(w, m, detrend=True)
        undetrended = estimate_noise_params(w, m, detrend=False)
        assert drifted.sigma.mean() == pytest.approx(clean.sigma.mean(), rel=0.05)
        assert drifted.rho.mean() == pytest.approx(clean.rho.mean(), rel=0.05)
        # without detrending the drift dominates
        assert undetrended.rho.mean() > 0.9


class TestSpecFile:
    TEXT = """
    # demo
    dims = 4 3 2
    frames = 30
    mu = 500 1500
    sigma = 5, 20
    rho = 0.2
    seed = 12
    tr = 2.0
    spikes = 10:2, 20:1.5
    drift = 0.1
    """

    def test_parse(self):
        spec = parse_spec(self.TEXT)
        assert spec.dims == (4, 3, 2) and spec.n_frames == 30
        assert spec.mu == (500, 1500) and spec.sigma == (5, 20) and spec.rho == 0.2
        assert spec.seed == 12 and spec.tr == 2.0
        assert spec.artifacts == (Spike(10, 2.0), Spike(20, 1.5), Drift(0.1))

    def test_fields_named(self):
        with pytest.raises(InvalidInputError) as info:
            parse_spec("dims = 2 2\nframes = x\nrho = 1.0\ncolor = red\n")
        msg = str(info.value)
        for name in ("frames", "color"):
            assert name in msg

    def test_rho_bound(self):
        with pytest.raises(InvalidInputError, match="rho"):
            parse_spec("dims = 2 2 2\nframes = 10\nrho = 1.0\n")

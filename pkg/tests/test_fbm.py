import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fou2.exceptions import DomainError, GridCapError
from fou2.fbm import (GRID_CAP_ENV, SamplePath, TimeGrid, fbm_cov, fbm_cov_matrix, hurst_constant,
                      sample_fbm_exact, volterra_kernel, weighted_inner_product)
from fou2.numerics import QuadratureSpec, RngStream, integrate, psd_factor
import oracles


class TestCovariance:
    def test_variance_case(self):
        assert fbm_cov(1.7, 1.7, 0.3) == pytest.approx(1.7 ** 0.6, rel=1e-14)

    @pytest.mark.parametrize("t,s", [(1.0, 2.0), (0.3, 0.1), (5.0, 5.0)])
    def test_brownian_case(self, t, s):
        assert fbm_cov(t, s, 0.5) == pytest.approx(min(t, s), rel=1e-14)

    def test_arithmetic(self):
        assert fbm_cov(2, 1, 0.75) == pytest.approx(math.sqrt(2), rel=1e-14)

    @settings(max_examples=50)
    @given(st.floats(0.01, 10), st.floats(0.01, 10), st.floats(0.05, 20), st.floats(0.05, 0.95))
    def test_self_similarity(self, t, s, c, H):
        assert fbm_cov(c * t, c * s, H) == pytest.approx(c ** (2 * H) * fbm_cov(t, s, H), rel=1e-11)

    @settings(max_examples=50)
    @given(st.floats(0, 10), st.floats(0, 10), st.floats(0.05, 0.95))
    def test_increment_stationarity(self, t, s, H):
        var_incr = fbm_cov(t, t, H) + fbm_cov(s, s, H) - 2 * fbm_cov(t, s, H)
        assert var_incr == pytest.approx(abs(t - s) ** (2 * H), rel=1e-9, abs=1e-12)

    @pytest.mark.parametrize("H", [0.1, 0.5, 0.7, 0.95])
    def test_matrix_psd(self, H):
        t = np.sort(np.random.default_rng(3).uniform(0.01, 10, 30))
        psd_factor(fbm_cov_matrix(t, H))

    def test_domain(self):
        with pytest.raises(DomainError):
            fbm_cov(-1, 1, 0.7)
        with pytest.raises(DomainError):
            fbm_cov(1, 1, 1.0)


class TestVolterraKernel:
    @staticmethod
    def kernel_cov(t, s, H):
        m = min(t, s)
        spec = QuadratureSpec(1e-10, 1e-9, 400).with_singularities([0.0, m])
        return integrate(lambda u: volterra_kernel(t, u, H) * volterra_kernel(s, u, H), 0, m, spec)

    def test_identity_example(self):
        assert self.kernel_cov(1.0, 0.5, 0.7) == pytest.approx(fbm_cov(1.0, 0.5, 0.7), abs=1e-6)

    @pytest.mark.parametrize("H", [0.55, 0.7, 0.9])
    def test_identity_grid(self, H):
        pts = [0.2, 0.5, 1.0, 1.5, 2.0]
        for t in pts:
            for s in pts:
                assert self.kernel_cov(t, s, H) == pytest.approx(fbm_cov(t, s, H), abs=1e-6)

    def test_positive_and_monotone_in_t(self):
        vals = [volterra_kernel(t, 0.3, 0.7) for t in (0.4, 0.8, 1.6)]
        assert vals[0] > 0
        assert vals[0] < vals[1] < vals[2]

    def test_finite_near_zero(self):
        v = volterra_kernel(1.0, 1e-8, 0.7)
        assert math.isfinite(v) and v > 0

    @pytest.mark.parametrize("t,s", [(1.0, 1.0), (1.0, 0.0), (0.5, 1.0)])
    def test_domain(self, t, s):
        with pytest.raises(DomainError):
            volterra_kernel(t, s, 0.7)

    def test_requires_h_above_half(self):
        with pytest.raises(DomainError):
            hurst_constant(0.4)


def _indicator(c):
    return lambda x: 1.0 if x <= c else 0.0


class TestInnerProduct:
    def test_indicator_variance(self):
        assert weighted_inner_product(_indicator(1.0), _indicator(1.0), 1.0, 0.7) == pytest.approx(1.0, abs=1e-8)

    def test_indicator_covariance(self):
        val = weighted_inner_product(_indicator(1.0), _indicator(0.5), 2.0, 0.7, breakpoints=[1.0, 0.5])
        assert val == pytest.approx(fbm_cov(1.0, 0.5, 0.7), abs=1e-8)

    def test_bilinearity_step_functions(self):
        g = np.random.default_rng(11)
        H, T = 0.7, 2.0
        ti, ci = g.uniform(0.2, T, 3), g.normal(size=3)
        sj, dj = g.uniform(0.2, T, 2), g.normal(size=2)
        phi = lambda x: float(sum(c for t, c in zip(ti, ci) if x <= t))
        psi = lambda x: float(sum(d for s, d in zip(sj, dj) if x <= s))
        val = weighted_inner_product(phi, psi, T, H, breakpoints=list(ti) + list(sj))
        ref = sum(c * d * fbm_cov(t, s, H) for t, c in zip(ti, ci) for s, d in zip(sj, dj))
        assert val == pytest.approx(ref, abs=1e-7)


class TestGrid:
    def test_uniform(self):
        g = TimeGrid.uniform(10, 400)
        assert len(g) == 401 and g.times[0] == 0 and g.horizon == 10 and g.is_uniform()

    @pytest.mark.parametrize("bad", [[], [0.0, 0.0], [1.0, 0.5], [-1.0, 1.0], [0.0, np.inf]])
    def test_invalid(self, bad):
        with pytest.raises(DomainError):
            TimeGrid(np.array(bad))

    def test_immutable(self):
        g = TimeGrid.uniform(1, 4)
        with pytest.raises(ValueError):
            g.times[0] = 1.0

    def test_path_length_mismatch(self):
        with pytest.raises(DomainError):
            SamplePath(TimeGrid.uniform(1, 4), np.zeros(3))

    def test_path_finite(self):
        with pytest.raises(DomainError):
            SamplePath(TimeGrid.uniform(1, 1), np.array([0.0, np.nan]))


class TestExactSampler:
    def test_empirical_covariance(self):
        H = 0.7
        grid = TimeGrid(np.linspace(0.1, 1.0, 10))
        x = np.array([sample_fbm_exact(grid, H, RngStream(5, r)).values for r in range(20000)])
        emp, se = oracles.mc_cov(x)
        ref = fbm_cov_matrix(grid.times, H)
        assert np.all(np.abs(emp - ref) <= 3 * se)

    def test_brownian_increments_uncorrelated(self):
        grid = TimeGrid.uniform(1.0, 10)
        x = np.array([sample_fbm_exact(grid, 0.5, RngStream(6, r)).values for r in range(20000)])
        d = np.diff(x, axis=1)
        prod = d[:, 3] * d[:, 4]
        assert abs(prod.mean()) <= 3 * prod.std(ddof=1) / math.sqrt(prod.size)

    def test_starts_at_zero(self):
        p = sample_fbm_exact(TimeGrid.uniform(1.0, 8), 0.7, RngStream(1))
        assert p.values[0] == 0.0

    def test_deterministic(self):
        grid = TimeGrid.uniform(3.0, 50)
        a = sample_fbm_exact(grid, 0.7, RngStream(9, 4)).values
        b = sample_fbm_exact(grid, 0.7, RngStream(9, 4)).values
        assert a.tobytes() == b.tobytes()

    def test_zero_noise(self, zero_rng):
        p = sample_fbm_exact(TimeGrid.uniform(1.0, 8), 0.7, zero_rng)
        assert np.all(p.values == 0)

    def test_grid_cap(self, monkeypatch):
        monkeypatch.setenv(GRID_CAP_ENV, "16")
        with pytest.raises(GridCapError):
            sample_fbm_exact(TimeGrid.uniform(1.0, 20), 0.7, RngStream(1))

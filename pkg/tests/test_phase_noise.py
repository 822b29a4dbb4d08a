"""Tests for the Wiener phase-noise model and its CPE statistics."""

import numpy as np
import pytest

from pnlink import numerics, phase_noise
from pnlink.phase_noise import PnParams

TS = 1.0 / 3_840_000.0


def params(beta, nc=256, no=14):
    return PnParams(beta=beta, ts=TS, nc=nc, no=no)


class TestGenerate:
    def test_zero_beta_constant_phase(self):
        rng = np.random.default_rng(0)
        r = phase_noise.generate(params(0.0), rng)
        assert np.ptp(r.phi) == 0.0
        expected = np.exp(1j * r.phi[0])
        assert abs(r.spectral[0, 0] - expected) < 1e-12
        assert np.abs(r.spectral[:, 1:]).max() < 1e-12

    def test_step_variance_value(self):
        assert params(25.0).step_variance == pytest.approx(8.1812e-5, rel=1e-4)

    def test_step_variance_monte_carlo(self):
        rng = np.random.default_rng(1)
        p = PnParams(beta=25.0, ts=TS, nc=1000, no=1000)
        r = phase_noise.generate(p, rng)
        var = np.var(np.diff(r.phi))
        assert var == pytest.approx(p.step_variance, rel=0.01)

    def test_parseval_per_symbol(self):
        rng = np.random.default_rng(2)
        r = phase_noise.generate(params(200.0), rng)
        power = np.sum(np.abs(r.spectral) ** 2, axis=1)
        assert np.abs(power - 1.0).max() < 1e-10

    def test_spectrum_circulant_unitary(self):
        rng = np.random.default_rng(3)
        r = phase_noise.generate(params(100.0), rng)
        mat = numerics.circulant(r.spectral[5])
        assert np.abs(mat.conj().T @ mat - np.eye(256)).max() < 1e-9

    def test_trajectory_is_continuous_across_symbols(self):
        rng = np.random.default_rng(4)
        r = phase_noise.generate(params(400.0), rng)
        # no resets: increments everywhere have the step std, including
        # across the block boundary between consecutive symbols
        steps = np.diff(r.phi)
        assert np.abs(steps).max() < 10 * np.sqrt(params(400.0).step_variance)

    def test_realize_rejects_wrong_step_count(self):
        with pytest.raises(ValueError):
            phase_noise.realize(params(25.0), 0.0, np.zeros(7))


class TestCpeCrossCorrelation:
    def test_zero_beta_limit(self):
        assert phase_noise.cpe_cross_correlation(0, 1, params(0.0)) == 1.0

    def test_lag_one_value(self):
        # frozen from the brute-force double sum at beta=25 Hz, nc=256
        val = phase_noise.cpe_cross_correlation(0, 1, params(25.0))
        assert val == pytest.approx(0.9895917079, rel=1e-9)

    def test_matches_brute_force(self):
        for beta in (25.0, 100.0, 400.0):
            p = params(beta)
            for lag in (1, 3, 13):
                closed = phase_noise.cpe_cross_correlation(0, lag, p)
                brute = phase_noise.cpe_cross_correlation_brute(0, lag, p)
                assert closed == pytest.approx(brute, rel=1e-9)

    def test_symmetry(self):
        p = params(100.0)
        assert phase_noise.cpe_cross_correlation(2, 7, p) == pytest.approx(
            phase_noise.cpe_cross_correlation(7, 2, p), rel=1e-12
        )

    def test_monotone_decay(self):
        p = params(100.0)
        vals = [phase_noise.cpe_cross_correlation(0, m, p) for m in range(1, 14)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_equal_symbols_rejected(self):
        with pytest.raises(ValueError):
            phase_noise.cpe_cross_correlation(3, 3, params(25.0))

    def test_matches_monte_carlo(self):
        # E{a_l[0] a_m[0]*} over many realizations, within 3 standard errors
        rng = np.random.default_rng(5)
        p = params(100.0, no=4)
        n = 10_000
        prods = np.empty((n, 3), dtype=complex)
        for i in range(n):
            r = phase_noise.generate(p, rng)
            a0 = r.spectral[:, 0]
            prods[i] = [a0[0] * np.conj(a0[1]),
                        a0[0] * np.conj(a0[3]),
                        a0[1] * np.conj(a0[2])]
        for col, (l, m) in enumerate([(0, 1), (0, 3), (1, 2)]):
            mean = prods[:, col].mean()
            se = prods[:, col].std() / np.sqrt(n)
            predicted = phase_noise.cpe_cross_correlation(l, m, p)
            assert abs(mean - predicted) <= 3 * max(se, 1e-12)


class TestCpeSelfPower:
    def test_zero_beta(self):
        assert phase_noise.cpe_self_power(params(0.0)) == 1.0

    def test_default_formula_value(self):
        assert phase_noise.cpe_self_power(params(25.0)) == pytest.approx(
            0.99651, abs=1e-5
        )

    def test_monte_carlo_agreement(self):
        rng = np.random.default_rng(6)
        p = params(25.0, no=1)
        n = 10_000
        vals = np.empty(n)
        for i in range(n):
            vals[i] = np.abs(phase_noise.generate(p, rng).spectral[0, 0]) ** 2
        measured = vals.mean()
        formula = phase_noise.cpe_self_power(p, "nc")
        assert abs(formula - measured) <= 0.1 * (1.0 - formula)

    def test_nt_variant_needs_count(self):
        with pytest.raises(ValueError):
            phase_noise.cpe_self_power(params(25.0), "nt")


class TestIciVariance:
    def test_zero_beta(self):
        assert phase_noise.ici_variance(params(0.0), nt=2) == 0.0

    def test_default_formula_value(self):
        assert phase_noise.ici_variance(params(25.0), nt=2) == pytest.approx(
            6.98e-3, rel=1e-2
        )

    def test_variants_differ(self):
        p = params(25.0)
        assert phase_noise.ici_variance(p, 2, "nc") > phase_noise.ici_variance(p, 2, "nt")

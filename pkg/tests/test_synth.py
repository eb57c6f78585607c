"""Tests for the time-domain noise synthesizers.

The main oracle is the stationary covariance from the continuous Lyapunov
equation: sample statistics of every generator must land on it within
tolerances computed from the correlation time of the process.  Independent
routes (state-space recursion vs inverse-FFT synthesis of the analytic PSD)
are also required to agree with each other.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dvsnoise.pixel import (
    NoiseSourceSet,
    PixelParams,
    natural_params,
    noise_sources,
    output_noise_psd,
    system_matrices,
)
from dvsnoise.synth import (
    Discretization,
    OuSpec,
    SamplePath,
    discretize,
    ou_decay,
    synthesize_from_psd,
    synthesize_ou,
    synthesize_path,
)

P_DEFAULT = PixelParams(i_photo=1e-9, i_pr=1e-9)
SCALE = P_DEFAULT.constants.kappa / P_DEFAULT.constants.u_t


def contrast_variance(p: PixelParams) -> float:
    """Stationary var of the output in contrast units (Lyapunov route)."""
    d = discretize(p, 0.01 / natural_params(p).f_n)
    scale = p.constants.kappa / p.constants.u_t
    return float(d.stationary_cov[1, 1]) * scale * scale


# --------------------------------------------------------------------------
# Discretization
# --------------------------------------------------------------------------

class TestDiscretize:
    def test_stationary_cov_solves_lyapunov(self):
        p = P_DEFAULT
        a, _ = system_matrices(p)
        d = discretize(p, 1e-7)
        s = noise_sources(p)
        _, inputs = system_matrices(p)
        q_c = ((s.s_pd + s.s_fb) / 2.0
               * np.outer(inputs["input_node"], inputs["input_node"])
               + s.s_amp / 2.0
               * np.outer(inputs["output_node"], inputs["output_node"]))
        residual = a @ d.stationary_cov + d.stationary_cov @ a.T + q_c
        assert np.abs(residual).max() < 1e-12 * np.abs(q_c).max()

    def test_noise_cov_is_fixed_point_increment(self):
        d = discretize(P_DEFAULT, 1e-7)
        back = d.phi @ d.stationary_cov @ d.phi.T + d.noise_cov
        np.testing.assert_allclose(back, d.stationary_cov, rtol=1e-12)

    def test_small_dt_increment_is_continuous_intensity(self):
        # For dt much shorter than every time constant, Q_d -> Q_c dt.
        p = P_DEFAULT
        dt = 1e-11
        d = discretize(p, dt)
        s = noise_sources(p)
        _, inputs = system_matrices(p)
        q_c = ((s.s_pd + s.s_fb) / 2.0
               * np.outer(inputs["input_node"], inputs["input_node"])
               + s.s_amp / 2.0
               * np.outer(inputs["output_node"], inputs["output_node"]))
        np.testing.assert_allclose(np.diag(d.noise_cov),
                                   np.diag(q_c) * dt, rtol=1e-3)

    def test_noise_cov_is_psd(self):
        for dt_cycles in (1e-4, 1e-2, 0.1):
            dt = dt_cycles / natural_params(P_DEFAULT).f_n
            d = discretize(P_DEFAULT, dt)
            assert np.linalg.eigvalsh(d.noise_cov).min() >= -1e-16

    def test_rejects_undersampling(self):
        f_n = natural_params(P_DEFAULT).f_n
        with pytest.raises(ValueError, match="undersamples"):
            discretize(P_DEFAULT, 0.5 / f_n)

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            Discretization(phi=np.eye(3), noise_cov=np.eye(2),
                           stationary_cov=np.eye(2), dt=1e-6)


# --------------------------------------------------------------------------
# SamplePath container
# --------------------------------------------------------------------------

class TestSamplePath:
    def test_duration_and_times(self):
        path = SamplePath(dt=0.5, samples=np.zeros(4))
        assert path.duration == 2.0
        np.testing.assert_array_equal(path.times, [0.0, 0.5, 1.0, 1.5])

    def test_rejects_bad_dtype(self):
        with pytest.raises(ValueError):
            SamplePath(dt=1.0, samples=np.zeros(4, dtype=np.float32))

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            SamplePath(dt=1.0, samples=np.zeros(0))


# --------------------------------------------------------------------------
# State-space path
# --------------------------------------------------------------------------

class TestSynthesizePath:
    def test_first_sample_is_stationary_draw(self):
        # samples[0] must be exactly L w0 in component 1, contrast-scaled,
        # with w0 the first two normals of the seeded stream.
        seed = 42
        path = synthesize_path(P_DEFAULT, 1e-4, 1e-6, seed=seed)
        d = discretize(P_DEFAULT, 1e-6)
        w, v = np.linalg.eigh(d.stationary_cov)
        l_stat = v * np.sqrt(np.clip(w, 0.0, None))
        w0 = np.random.default_rng(seed).standard_normal(2)
        assert path.samples[0] == pytest.approx(
            float((l_stat @ w0)[1]) * SCALE, rel=1e-12)

    @pytest.mark.parametrize("dt_cycles", [0.02, 0.1])
    def test_variance_matches_lyapunov(self, dt_cycles):
        # Duration 2e4 correlation times puts the standard error of the
        # sample variance near 1%; the 5% gate is 3-4 sigma.
        p = P_DEFAULT
        np_ = natural_params(p)
        dt = dt_cycles / np_.f_n
        tau = 1.0 / (2.0 * math.pi * np_.f_n / (2.0 * np_.q_factor))
        path = synthesize_path(p, 2e4 * tau, dt, seed=7)
        assert np.var(path.samples) == pytest.approx(
            contrast_variance(p), rel=0.05)

    def test_variance_matches_lyapunov_overdamped(self):
        p = PixelParams(i_photo=1e-11, i_pr=1e-10)
        np_ = natural_params(p)
        dt = 0.05 / np_.f_n
        ev = sorted(abs(e.real) for e in np_.eigenvalues)
        path = synthesize_path(p, 2e4 / ev[0], dt, seed=11)
        assert np.var(path.samples) == pytest.approx(
            contrast_variance(p), rel=0.05)

    def test_chunk_size_invariance(self):
        common = dict(duration=2e-3, dt=1e-6, seed=123)
        a = synthesize_path(P_DEFAULT, **common, chunk_size=257)
        b = synthesize_path(P_DEFAULT, **common, chunk_size=1 << 20)
        np.testing.assert_allclose(a.samples, b.samples, rtol=1e-9,
                                   atol=1e-12 * np.std(b.samples))

    def test_seed_determinism_and_distinctness(self):
        a = synthesize_path(P_DEFAULT, 1e-3, 1e-6, seed=5)
        b = synthesize_path(P_DEFAULT, 1e-3, 1e-6, seed=5)
        c = synthesize_path(P_DEFAULT, 1e-3, 1e-6, seed=6)
        np.testing.assert_array_equal(a.samples, b.samples)
        assert not np.array_equal(a.samples, c.samples)

    def test_zeroed_sources_give_flat_path(self):
        path = synthesize_path(
            P_DEFAULT, 1e-4, 1e-6, seed=0,
            sources=NoiseSourceSet(0.0, 0.0, 0.0))
        np.testing.assert_array_equal(path.samples, 0.0)

    def test_mean_is_near_zero(self):
        p = P_DEFAULT
        np_ = natural_params(p)
        path = synthesize_path(p, 2e-2, 0.05 / np_.f_n, seed=3)
        sigma = math.sqrt(contrast_variance(p))
        # mean of ~9e4 weakly correlated samples: well under 0.05 sigma
        assert abs(path.samples.mean()) < 0.05 * sigma

    def test_rejects_conflicting_stream_args(self):
        with pytest.raises(ValueError, match="either seed or rng"):
            synthesize_path(P_DEFAULT, 1e-4, 1e-6, seed=1,
                            rng=np.random.default_rng(2))


# --------------------------------------------------------------------------
# OU path
# --------------------------------------------------------------------------

class TestSynthesizeOu:
    SPEC = OuSpec(sigma=0.11, f_3db=100.0)

    def test_decay_coefficient(self):
        assert ou_decay(100.0, 1e-4) == pytest.approx(
            math.exp(-0.02 * math.pi), rel=1e-15)

    def test_matches_reference_recursion(self):
        spec = self.SPEC
        dt = 2e-4
        n = 1000
        path = synthesize_ou(spec, n * dt, dt, seed=9)
        w = np.random.default_rng(9).standard_normal(n)
        a = math.exp(-2.0 * math.pi * spec.f_3db * dt)
        b = spec.sigma * math.sqrt(1.0 - a * a)
        expect = np.empty(n)
        expect[0] = spec.sigma * w[0]
        for k in range(1, n):
            expect[k] = a * expect[k - 1] + b * w[k]
        np.testing.assert_allclose(path.samples, expect, rtol=1e-12,
                                   atol=1e-15)

    def test_variance_and_lag1_autocorrelation(self):
        spec = self.SPEC
        dt = 5e-4
        a = ou_decay(spec.f_3db, dt)
        path = synthesize_ou(spec, 400.0, dt, seed=21)
        s = path.samples
        assert np.var(s) == pytest.approx(spec.sigma ** 2, rel=0.03)
        lag1 = np.dot(s[:-1], s[1:]) / np.dot(s, s)
        assert lag1 == pytest.approx(a, abs=0.01)

    def test_chunk_size_invariance_exact(self):
        spec = self.SPEC
        a = synthesize_ou(spec, 0.7, 1e-4, seed=33, chunk_size=1009)
        b = synthesize_ou(spec, 0.7, 1e-4, seed=33, chunk_size=1 << 22)
        np.testing.assert_array_equal(a.samples, b.samples)

    def test_rejects_undersampling(self):
        with pytest.raises(ValueError, match="undersamples"):
            synthesize_ou(self.SPEC, 1.0, 1.0 / (10.0 * self.SPEC.f_3db),
                          seed=0)


# --------------------------------------------------------------------------
# PSD-sampled path
# --------------------------------------------------------------------------

class TestSynthesizeFromPsd:
    def test_lorentzian_rms(self):
        s0, fc = 4e-4, 50.0
        n, dt = 1 << 19, 2e-5

        def psd(f):
            return s0 / (1.0 + (f / fc) ** 2)

        path = synthesize_from_psd(psd, n, dt, seed=1)
        assert path.samples.mean() == pytest.approx(0.0, abs=1e-12)
        rms = float(np.sqrt(np.mean(path.samples ** 2)))
        assert rms == pytest.approx(math.sqrt(s0 * fc * math.pi / 2.0),
                                    rel=0.02)

    def test_rejects_unresolved_low_frequency(self):
        # A 1 Hz corner cannot be carried by a 0.1 s record.
        def psd(f):
            return 1.0 / (1.0 + f ** 2)

        with pytest.raises(ValueError, match="resolution"):
            synthesize_from_psd(psd, 1 << 10, 1e-4, seed=0)

    def test_rejects_undecayed_nyquist(self):
        def psd(f):
            return np.ones_like(f)

        with pytest.raises(ValueError, match="Nyquist"):
            synthesize_from_psd(psd, 1 << 10, 1e-4, seed=0)

    def test_agrees_with_state_space_route(self):
        # Same model, two independent generators: inverse FFT of the
        # analytic output PSD vs the exact discretized recursion.
        p = P_DEFAULT
        scale2 = SCALE * SCALE

        def psd(f):
            return output_noise_psd(p, f).psd_total * scale2

        n, dt = 1 << 20, 1.6e-8
        path = synthesize_from_psd(psd, n, dt, seed=4)
        var_fft = float(np.var(path.samples))
        assert var_fft == pytest.approx(contrast_variance(p), rel=0.02)


# --------------------------------------------------------------------------
# Properties
# --------------------------------------------------------------------------

@settings(max_examples=15, deadline=None)
@given(lg_ip=st.floats(min_value=-13.0, max_value=-9.0),
       lg_ipr=st.floats(min_value=-11.0, max_value=-9.0),
       dt_cycles=st.floats(min_value=0.005, max_value=0.1))
def test_discretization_preserves_stationarity(lg_ip, lg_ipr, dt_cycles):
    p = PixelParams(i_photo=10.0 ** lg_ip, i_pr=10.0 ** lg_ipr)
    dt = dt_cycles / natural_params(p).f_n
    d = discretize(p, dt)
    back = d.phi @ d.stationary_cov @ d.phi.T + d.noise_cov
    np.testing.assert_allclose(back, d.stationary_cov, rtol=1e-10)
    assert np.linalg.eigvalsh(d.noise_cov).min() >= -1e-12 * np.trace(
        d.stationary_cov)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**32 - 1))
def test_ou_stationary_start(seed):
    spec = OuSpec(sigma=0.2, f_3db=30.0)
    path = synthesize_ou(spec, 0.05, 1e-3, seed=seed)
    w0 = np.random.default_rng(seed).standard_normal(1)[0]
    assert path.samples[0] == pytest.approx(0.2 * w0, rel=1e-12)

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ybsim import decoherence as dc
from ybsim.errors import FitError

from .oracles import switching_function_integral

TWO_PI = 2 * math.pi


def seq_for(n):
    return dc.DDSequence.ramsey() if n == 0 else dc.DDSequence.hahn() if n == 1 else dc.DDSequence.cpmg(n)


# --- sequences and filter functions ----------------------------------------------------

def test_sequence_validation():
    with pytest.raises(ValueError):
        dc.DDSequence("xy8", 12)
    with pytest.raises(ValueError):
        dc.DDSequence("xy8", 8, phases=("x",) * 8)
    with pytest.raises(ValueError):
        dc.DDSequence("hahn", 2)
    with pytest.raises(ValueError):
        dc.DDSequence("cpmg", 4, tau=0.0)
    with pytest.raises(ValueError):
        dc.DDSequence("spin-lock", 1)
    s = dc.DDSequence.xy8(16, tau=2e-6)
    assert s.phases == dc.XY8_PHASES * 2
    assert s.total_time == pytest.approx(64e-6)


def test_cell_signs():
    np.testing.assert_array_equal(dc.DDSequence.hahn().cell_signs(), [1, -1])
    np.testing.assert_array_equal(dc.DDSequence.cpmg(2).cell_signs(), [1, -1, -1, 1])
    assert dc.DDSequence.ramsey().cell_signs().tolist() == [1, 1]


def test_ramsey_low_frequency_limit():
    z = np.array([1e-4, 1e-3])
    np.testing.assert_allclose(dc.filter_function(dc.DDSequence.ramsey(), z, 1.0), z**2, rtol=1e-6)


def test_hahn_at_two_pi():
    assert dc.filter_function(dc.DDSequence.hahn(), TWO_PI, 1.0) == pytest.approx(16.0)


@pytest.mark.parametrize("n", [0, 1, 2, 3, 4, 7, 8])
@pytest.mark.parametrize("z", [0.3, 2.0, 7.5, 13.0, 31.4159, 52.0])
def test_filter_matches_brute_force_switching_integral(n, z):
    seq = seq_for(n)
    ref = switching_function_integral(seq.pulse_fractions(), z, 1.0)
    assert dc.filter_function(seq, z, 1.0) == pytest.approx(ref, rel=1e-8, abs=1e-10)


@pytest.mark.parametrize("n", [2, 4, 8, 16, 64])
def test_cpmg_passband_even_n(n):
    # F(pi N) = 4 N^2 exactly, confirmed by the brute-force integral
    ref = switching_function_integral(dc.DDSequence.cpmg(n).pulse_fractions(), math.pi * n, 1.0)
    assert dc.filter_function(dc.DDSequence.cpmg(n), math.pi * n, 1.0) == pytest.approx(4 * n * n, rel=1e-8)
    assert ref == pytest.approx(4 * n * n, rel=1e-8)


def test_cpmg_principal_maximum_approaches_pi_n():
    # the omega^2 weight pulls the peak above pi N; the offset shrinks with N
    offsets = []
    for n in (2, 4, 8, 16, 64):
        z = np.linspace(0.5, 2 * math.pi * n, 400_001)
        offsets.append(z[np.argmax(dc.filter_function(dc.DDSequence.cpmg(n), z, 1.0))] / (math.pi * n) - 1)
    assert all(a > b > 0 for a, b in zip(offsets, offsets[1:]))
    assert offsets[2] < 0.03 and offsets[-1] < 1e-3


def test_xy8_filter_equals_cpmg():
    z = np.linspace(0, 200, 5001)
    np.testing.assert_array_equal(dc.filter_function(dc.DDSequence.xy8(16), z, 1.0),
                                  dc.filter_function(dc.DDSequence.cpmg(16), z, 1.0))


def test_removable_singularity_is_continuous():
    n = 6
    z0 = math.pi * n  # cos(z / 2N) = 0
    z = z0 + np.array([-1e-3, -1e-6, 0.0, 1e-6, 1e-3])
    f = dc.filter_function(dc.DDSequence.cpmg(n), z, 1.0)
    np.testing.assert_allclose(f, dc._phase_sum(n, z), rtol=1e-8)


def test_negative_frequency_rejected():
    with pytest.raises(ValueError):
        dc.filter_function(dc.DDSequence.hahn(), -1.0, 1.0)


@settings(max_examples=200)
@given(n=st.integers(0, 40), z=st.floats(0, 1e4))
def test_filter_nonnegative_and_bounded(n, z):
    f = float(dc._filter_z(n, z))
    assert -1e-9 <= f <= (2 * n + 2) ** 2 * (1 + 1e-9)


# --- PSD to coherence ------------------------------------------------------------------

def exact_ou_chi(kind, sigma, tau_c, t):
    # closed forms of the Gaussian phase variance / 2, evaluated at 50 digits
    with mpmath.workdps(50):
        r = mpmath.mpf(t) / tau_c
        if kind == "ramsey":
            f = r - 1 + mpmath.exp(-r)
        else:
            f = r - 3 + 4 * mpmath.exp(-r / 2) - mpmath.exp(-r)
        return float(mpmath.mpf(sigma) ** 2 * mpmath.mpf(tau_c) ** 2 * f)


@pytest.mark.parametrize("kind", ["ramsey", "hahn"])
@pytest.mark.parametrize("tau_c", [1e-3, 1e-6, 1e-8])
@pytest.mark.parametrize("t", [1e-7, 1e-6, 3e-5])
def test_ou_quadrature_matches_closed_form(kind, tau_c, t):
    sigma = TWO_PI * 20e3
    noise = dc.NoiseModel([dc.OUNoise(sigma, tau_c)])
    seq = dc.DDSequence.ramsey() if kind == "ramsey" else dc.DDSequence.hahn()
    assert dc.decoherence_exponent(noise, seq, t) == pytest.approx(exact_ou_chi(kind, sigma, tau_c, t), rel=1e-6)


def test_hahn_series_matches_closed_form():
    for r in [1e-4, 5e-3, 9.99e-3, 1.001e-2, 0.3]:
        assert dc.ou_hahn_chi(1.0, 1.0, r) == pytest.approx(exact_ou_chi("hahn", 1.0, 1.0, r), rel=1e-8)


def test_quasi_static_ramsey():
    sigma = TWO_PI * 100e3
    noise = dc.NoiseModel([dc.OUNoise(sigma, 10.0)])
    t = 2e-6
    assert dc.decoherence_exponent(noise, dc.DDSequence.ramsey(), t) == pytest.approx(sigma**2 * t**2 / 2, rel=1e-5)


def test_zero_noise_and_zero_time():
    seq = dc.DDSequence.cpmg(4)
    assert dc.coherence_from_psd(dc.NoiseModel([]), seq, [1e-6, 1e-3]).tolist() == [1.0, 1.0]
    assert dc.coherence_from_psd(dc.NoiseModel([dc.OUNoise(0.0, 1e-3)]), seq, 1e-4) == 1.0
    assert dc.coherence_from_psd(dc.dd_noise_preset(), seq, 0.0) == 1.0


def test_narrow_lorentzian_converges_to_exact_line():
    seq = dc.DDSequence.cpmg(8)
    t = 8 * 1.3e-6
    exact = dc.decoherence_exponent(dc.NoiseModel([dc.NarrowbandNoise(340e3, TWO_PI * 30e3)]), seq, t)
    broad = dc.decoherence_exponent(
        dc.NoiseModel([dc.NarrowbandNoise(340e3, TWO_PI * 30e3, linewidth=340.0)]), seq, t)
    assert broad == pytest.approx(exact, rel=1e-3)


def test_divergent_ramsey_power_law_raises():
    with pytest.raises(dc.QuadratureError):
        dc.decoherence_exponent(dc.NoiseModel([dc.PowerLawNoise(1.0, 2.0)]), dc.DDSequence.ramsey(), 1.0)


def test_nonconvergence_reports_estimates():
    qs = dc.QuadratureSettings(rtol=1e-12, order=2, max_refinements=1)
    noise = dc.NoiseModel([dc.OUNoise(1e5, 1e-5)])
    with pytest.raises(dc.QuadratureError) as info:
        dc.decoherence_exponent(noise, dc.DDSequence.hahn(), 1e-5, qs)
    assert len(info.value.estimates) == 2


def test_preset_hahn_t2():
    t2 = dc.t2_from_psd(dc.dd_noise_preset(with_line=False), dc.DDSequence.hahn(), 1e-5)
    assert t2 == pytest.approx(43.5e-6, rel=1e-6)


# --- OU sampler ------------------------------------------------------------------------

def test_ou_stationary_variance():
    x = dc.ou_trajectory(2.0, 1e-3, 1e-4, 1_000_000, seed=11)
    assert x.var() == pytest.approx(4.0, rel=0.01)


@pytest.mark.parametrize("lag", [1, 5, 20])
def test_ou_autocorrelation(lag):
    sigma, tau_c, dt = 1.5, 1e-3, 1e-4
    x = dc.ou_trajectory(sigma, tau_c, dt, 1_000_000, seed=12)
    acf = np.mean(x[:-lag] * x[lag:])
    assert acf == pytest.approx(sigma**2 * math.exp(-lag * dt / tau_c), abs=0.02 * sigma**2)


def test_ou_zero_sigma_and_determinism():
    assert not np.any(dc.ou_trajectory(0.0, 1e-3, 1e-5, 1000, seed=1))
    a = dc.ou_trajectory(1.0, 1e-3, 1e-5, 1000, seed=3)
    np.testing.assert_array_equal(a, dc.ou_trajectory(1.0, 1e-3, 1e-5, 1000, seed=3))
    with pytest.raises(ValueError):
        dc.ou_trajectory(1.0, 1e-3, 0.0, 10, seed=1)


# --- Monte Carlo coherence -------------------------------------------------------------

def brute_force_mc(sigma, tau_c, seq, t, shots, rng, steps_per_cell=64):
    """Fine-grid OU paths integrated by the midpoint rule; independent of the exact-cell sampler."""
    signs = np.repeat(seq.cell_signs(), steps_per_cell)
    m = signs.size
    dt = t / m
    a = math.exp(-dt / tau_c)
    x = sigma * rng.standard_normal(shots)
    phase = np.zeros(shots)
    for k in range(m):
        x_new = a * x + sigma * math.sqrt(1 - a * a) * rng.standard_normal(shots)
        phase += signs[k] * 0.5 * (x + x_new) * dt
        x = x_new
    return abs(np.mean(np.exp(1j * phase)))


@pytest.mark.parametrize("n", [1, 4])
def test_mc_matches_brute_force_paths(n):
    sigma, tau_c = TWO_PI * 20e3, 20e-6
    noise = dc.NoiseModel([dc.OUNoise(sigma, tau_c)])
    seq = seq_for(n)
    t = 30e-6
    w = dc.mc_coherence(noise, seq, [t], 40_000, seed=5).w[0]
    ref = brute_force_mc(sigma, tau_c, seq, t, 40_000, np.random.default_rng(99))
    assert w == pytest.approx(ref, abs=0.02)


def test_mc_no_noise_is_exactly_one():
    c = dc.mc_coherence(dc.NoiseModel([]), dc.DDSequence.hahn(), [1e-6, 1e-5], 1000, seed=1)
    assert c.w.tolist() == [1.0, 1.0]


def test_mc_requires_shots():
    with pytest.raises(ValueError):
        dc.mc_coherence(dc.dd_noise_preset(), dc.DDSequence.hahn(), [1e-6], 999, seed=1)


def test_mc_power_law_not_sampled():
    with pytest.raises(NotImplementedError):
        dc.mc_coherence(dc.NoiseModel([dc.PowerLawNoise(1.0, 2.0)]), dc.DDSequence.hahn(), [1e-6], 1000, 1)


def test_mc_partition_invariance():
    noise = dc.dd_noise_preset()
    times = [5e-6, 2e-5]
    a = dc.mc_coherence(noise, dc.DDSequence.cpmg(8), times, 5000, seed=21, workers=1, block=1000)
    b = dc.mc_coherence(noise, dc.DDSequence.cpmg(8), times, 5000, seed=21, workers=3, block=1000)
    np.testing.assert_array_equal(a.w, b.w)


@pytest.mark.parametrize("kind,n", [("ramsey", 0), ("hahn", 1), ("cpmg", 4), ("xy8", 8)])
def test_mc_agrees_with_quadrature(kind, n):
    noise = dc.NoiseModel([dc.OUNoise(TWO_PI * 20e3, 1e-3)])
    seq = dc.DDSequence(kind, n)
    t_end = 2e-5 if n == 0 else 1e-4 * math.sqrt(n)
    times = np.linspace(0, t_end, 9)[1:]
    mc = dc.mc_coherence(noise, seq, times, 100_000, seed=7)
    np.testing.assert_allclose(mc.w, dc.coherence_from_psd(noise, seq, times), atol=0.02)


def test_hahn_slow_bath_stretch_exponent():
    noise = dc.NoiseModel([dc.OUNoise(TWO_PI * 20e3, 1e-3)])
    mc = dc.mc_coherence(noise, dc.DDSequence.hahn(), np.linspace(5e-6, 2e-4, 30), 100_000, seed=1)
    fit = dc.fit_stretched_exp(mc)
    assert 2.5 <= fit.stretch <= 3.2


@pytest.mark.slow
def test_revivals_spaced_by_line_period():
    spacing = np.linspace(0.5e-6, 12e-6, 231)
    mc = dc.mc_coherence(dc.dd_noise_preset(), dc.DDSequence.cpmg(8), 8 * spacing, 10_000, seed=3)
    assert dc.revival_period(spacing, mc.w) == pytest.approx(1 / 340e3, rel=0.05)


# --- fits ------------------------------------------------------------------------------

def test_stretched_fit_recovers_reported_t2():
    rng = np.random.default_rng(4)
    t = np.linspace(2e-6, 120e-6, 40)
    w = np.exp(-((t / 43.5e-6) ** 1.8)) + 0.02 * rng.standard_normal(t.size)
    fit = dc.fit_stretched_exp(t, w)
    assert fit.t2 == pytest.approx(43.5e-6, rel=0.05)


def test_stretched_fit_pure_exponential():
    t = np.linspace(0, 5e-5, 30)
    assert dc.fit_stretched_exp(t, np.exp(-t / 1e-5)).stretch == pytest.approx(1.0, abs=0.05)


@settings(max_examples=25, deadline=None)
@given(t2=st.floats(1e-6, 1e-3), x=st.floats(0.7, 3.5))
def test_stretched_fit_round_trip(t2, x):
    t = np.linspace(0, 3 * t2, 40)
    f1 = dc.fit_stretched_exp(t, np.exp(-((t / t2) ** x)))
    f2 = dc.fit_stretched_exp(t, f1.amplitude * np.exp(-((t / f1.t2) ** f1.stretch)))
    assert f2.t2 == pytest.approx(f1.t2, rel=0.01)
    assert f2.stretch == pytest.approx(f1.stretch, rel=0.01)


def test_stretched_fit_errors():
    with pytest.raises(FitError):
        dc.fit_stretched_exp(np.arange(4.0), np.ones(4))
    with pytest.raises(FitError):
        dc.fit_stretched_exp(np.arange(6.0), np.linspace(0.5, 1, 6))
    with pytest.raises(FitError) as info:
        t = np.linspace(0, 1, 30)
        dc.fit_stretched_exp(t, np.where(t < 0.5, 1.0, 0.0) + 0.3 * np.sin(40 * t))
    assert info.value.residuals.size == 30


def test_scaling_exact_power_law():
    n = np.array([1, 2, 4, 8, 16])
    fit = dc.scaling_exponent(np.column_stack([n, 3e-5 * n**0.7]))
    assert fit.exponent == pytest.approx(0.7, abs=1e-6)
    assert fit.prefactor == pytest.approx(3e-5, rel=1e-6)
    with pytest.raises(ValueError):
        dc.scaling_exponent([(1, 1.0), (2, 2.0), (4, 3.0)])


@pytest.mark.parametrize("gamma,target,tol", [(2.3, 0.70, 0.03), (2.0, 2 / 3, 0.05), (1.5, 0.6, 0.03)])
def test_scaling_from_quadrature(gamma, target, tol):
    noise = dc.NoiseModel([dc.PowerLawNoise(1.0, gamma)])
    rows = [(n, dc.t2_from_psd(noise, n, 1.0)) for n in (4, 8, 16, 32, 64)]
    assert dc.scaling_exponent(rows).exponent == pytest.approx(target, abs=tol)


def test_power_law_shortcut_matches_root_find():
    noise = dc.NoiseModel([dc.PowerLawNoise(1.0, 2.3)])
    t2 = dc.t2_from_psd(noise, 4, 1.0)
    assert dc.decoherence_exponent(noise, dc.DDSequence.cpmg(4), t2) == pytest.approx(1.0, rel=1e-6)


def test_linewidth_duals():
    assert dc.linewidth_from_t2(370e-9) == pytest.approx(860e3, rel=0.02)
    assert dc.t2_from_linewidth(48e3) == pytest.approx(6.6e-6, rel=0.02)


# --- post-selection --------------------------------------------------------------------

def test_postselection_preset():
    rows = dc.postselected_ramsey(dc.spectral_diffusion_preset(), 3, 200_000, seed=5)
    assert rows[0].t2_star == pytest.approx(370e-9, rel=0.03)
    assert rows[0].discard_fraction == 0
    assert rows[2].t2_star == pytest.approx(1.0e-6, rel=0.1)
    assert rows[2].discard_fraction == pytest.approx(0.84, abs=0.02)
    t2s = [r.t2_star for r in rows]
    assert all(a < b for a, b in zip(t2s, t2s[1:]))


def test_postselection_errors():
    m = dc.SpectralDiffusionModel(1e5, 1e5, 0, 0.5)
    with pytest.raises(dc.InsufficientPostselection):
        dc.postselected_ramsey(m, [1], 10_000, seed=1)
    with pytest.raises(ValueError):
        dc.postselected_ramsey(m, [0], 100, seed=1)

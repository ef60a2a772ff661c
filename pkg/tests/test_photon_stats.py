import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ybsim import photon_stats as ps
from ybsim.errors import FitError
from tests.oracles import simulate_readout_counts


def model(p_f=0.003, p_tot=0.01, gamma_bg=0.0, n_pulses=400, t_r=5e-6):
    return ps.ReadoutModel(p_f, p_tot, gamma_bg, n_pulses, t_r)


# --- ion counts ------------------------------------------------------------------------

def test_untruncated_geometric_parameter():
    d = ps.ion_count_distribution(model(), truncation="none")
    p_n = 0.003 / 0.01297
    assert p_n == pytest.approx(0.23130, abs=1e-5)
    assert d[0] == pytest.approx(p_n, rel=1e-10)
    assert d[3] == pytest.approx(p_n * (1 - p_n) ** 3, rel=1e-10)


def test_perfect_detection_reduces_to_shelving_geometric():
    d = ps.ion_count_distribution(model(p_f=0.5, p_tot=1.0), truncation="none")
    k = np.arange(20)
    np.testing.assert_allclose(d.pmf[:20], 0.5 ** (k + 1), rtol=1e-10)


def test_untruncated_rejects_unshelvable():
    with pytest.raises(ValueError, match="non-normalizable"):
        ps.ion_count_distribution(model(p_f=0.0), truncation="none")


def test_no_shelving_finite_train_is_binomial():
    d = ps.ion_count_distribution(model(p_f=0.0, p_tot=0.2, n_pulses=30))
    from scipy.stats import binom
    np.testing.assert_allclose(d.padded(31)[:31], binom.pmf(np.arange(31), 30, 0.2), atol=1e-12)


def test_truncated_matches_pulse_by_pulse_monte_carlo():
    rng = np.random.default_rng(11)
    samples = simulate_readout_counts(0.003, 0.01, 0.0, 400, 1_000_000, rng)
    d = ps.ion_count_distribution(model())
    assert d.tv_distance(ps.CountDistribution.from_counts(samples)) < 0.01


def test_renormalized_truncation_differs_from_pulse_train():
    # the renormalized geometric cut redistributes the survivors' weight; for a
    # train much shorter than 1/p_f it is visibly wrong
    exact = ps.ion_count_distribution(model(p_f=0.003, p_tot=0.05))
    renorm = ps.ion_count_distribution(model(p_f=0.003, p_tot=0.05), truncation="renormalized")
    assert exact.tv_distance(renorm) > 0.05
    long = model(p_f=0.05, p_tot=0.05, n_pulses=2000)
    assert ps.ion_count_distribution(long).tv_distance(
        ps.ion_count_distribution(long, truncation="renormalized")) < 1e-9


def test_truncated_tends_to_untruncated_for_long_trains():
    m = model(p_f=0.02, p_tot=0.3, n_pulses=5000)
    a = ps.ion_count_distribution(m)
    b = ps.ion_count_distribution(m, truncation="none")
    assert a.tv_distance(b) < 1e-9


# --- background and convolution ------------------------------------------------------------

def test_background_zero_rate_point_mass():
    d = ps.background_distribution(model(gamma_bg=0.0))
    assert d.pmf.tolist() == [1.0]


def test_background_values():
    d = ps.poisson_distribution(0.04)
    assert d[0] == pytest.approx(math.exp(-0.04), rel=1e-12)
    assert d[0] == pytest.approx(0.9608, abs=1e-4)
    d1 = ps.poisson_distribution(1.0)
    assert d1[0] == pytest.approx(d1[1], rel=1e-12)
    assert d1[0] == pytest.approx(math.exp(-1), rel=1e-12)
    m = model(gamma_bg=20.0)
    assert ps.background_distribution(m).mean() == pytest.approx(20.0 * 400 * 5e-6, rel=1e-9)


def test_convolve_identity():
    d = ps.ion_count_distribution(model())
    out = ps.convolve(d, ps.CountDistribution.point_mass(0))
    np.testing.assert_allclose(out.pmf, d.pmf, atol=1e-15)


@given(l1=st.floats(0.01, 20), l2=st.floats(0.01, 20))
@settings(max_examples=40, deadline=None)
def test_poisson_closure(l1, l2):
    c = ps.convolve(ps.poisson_distribution(l1), ps.poisson_distribution(l2))
    ref = ps.poisson_distribution(l1 + l2)
    n = max(c.pmf.size, ref.pmf.size)
    np.testing.assert_allclose(c.padded(n), ref.padded(n), atol=1e-9)


def test_geometric_plus_poisson_matches_sampled_sum():
    rng = np.random.default_rng(5)
    p_n = 0.2313
    samples = rng.geometric(p_n, 1_000_000) - 1 + rng.poisson(0.04, 1_000_000)
    d = ps.convolve(ps._geometric(p_n), ps.poisson_distribution(0.04))
    assert d.tv_distance(ps.CountDistribution.from_counts(samples)) < 0.01


# --- fidelities ------------------------------------------------------------------------

def test_fig4b_calibration():
    m = ps.fig4b_model()
    rep = ps.assignment_errors(ps.background_distribution(m), ps.bright_distribution(m), 1)
    assert rep.f_0 == pytest.approx(0.961, abs=5e-4)
    assert rep.f_1 == pytest.approx(0.640, abs=5e-4)
    assert rep.f_avg == pytest.approx(0.800, abs=1e-3)


def test_perfectly_separable():
    d0 = ps.CountDistribution.point_mass(0)
    d1 = ps.CountDistribution(np.array([0.0, 0.5, 0.5]))
    rep = ps.assignment_errors(d0, d1, 1)
    assert rep.f_0 == 1.0 and rep.f_1 == 1.0


def test_threshold_limits_and_errors():
    m = ps.fig4b_model()
    d0, d1 = ps.background_distribution(m), ps.bright_distribution(m)
    rep = ps.assignment_errors(d0, d1, 10_000)
    assert rep.f_0 == 1.0 and rep.f_1 == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        ps.assignment_errors(d0, d1, 0)


def test_optimal_threshold_fig4b_matches_exhaustive_scan():
    m = ps.fig4b_model()
    d0, d1 = ps.background_distribution(m), ps.bright_distribution(m)
    scan = [(1 - d0.pmf[n:].sum() + 1 - d1.pmf[:n].sum()) / 2 for n in range(1, 21)]
    assert int(np.argmax(scan)) + 1 == 1
    assert ps.optimal_threshold(d0, d1).n_c == 1


def test_optimal_threshold_ties():
    d = ps.poisson_distribution(2.0)
    rep = ps.optimal_threshold(d, d)
    assert rep.n_c == 1 and rep.f_avg == pytest.approx(0.5)
    rep = ps.optimal_threshold(ps.CountDistribution.point_mass(0), ps.CountDistribution.point_mass(5))
    assert rep.n_c == 1 and rep.f_avg == 1.0
    for n_c in range(1, 6):
        assert ps.assignment_errors(ps.CountDistribution.point_mass(0),
                                    ps.CountDistribution.point_mass(5), n_c).f_avg == 1.0


@given(mean0=st.floats(0, 3), p_f=st.floats(1e-3, 0.5), p_tot=st.floats(1e-3, 1.0))
@settings(max_examples=40, deadline=None)
def test_fidelities_monotone_in_threshold(mean0, p_f, p_tot):
    m = ps.ReadoutModel(p_f, p_tot, mean0 / (100 * 1e-6), 100, 1e-6)
    d0, d1 = ps.background_distribution(m), ps.bright_distribution(m)
    reps = [ps.assignment_errors(d0, d1, n) for n in range(1, 30)]
    f0 = np.array([r.f_0 for r in reps])
    f1 = np.array([r.f_1 for r in reps])
    assert np.all(np.diff(f0) >= -1e-15)
    assert np.all(np.diff(f1) <= 1e-15)


# --- conditional readout ------------------------------------------------------------------

def test_conditional_values():
    rep = ps.conditional_fidelity(0.961, 0.640)
    assert rep.p_success == pytest.approx(0.62908, abs=1e-5)
    assert rep.f_cond == pytest.approx(0.97768, abs=1e-5)
    np.testing.assert_allclose(rep.outcome_matrix.sum(axis=0), [1, 1], atol=1e-12)


def test_conditional_trivial_cases():
    r = ps.conditional_fidelity(1, 1)
    assert (r.f_cond, r.p_success) == (1, 1)
    r = ps.conditional_fidelity(0.5, 0.5)
    assert r.f_cond == pytest.approx(0.5) and r.p_success == pytest.approx(0.5)


def test_outcome_table_entries():
    f0, f1 = 0.9, 0.7
    m = ps.conditional_fidelity(f0, f1).outcome_matrix
    # prepared |0>: 01 is the correct complementary outcome; prepared |1>: 10
    assert m[1, 0] == pytest.approx(f0 * f1)
    assert m[2, 1] == pytest.approx(f1 * f0)
    assert m[2, 0] == pytest.approx((1 - f0) * (1 - f1))
    assert m[0, 1] == pytest.approx((1 - f1) * f0)


@given(f0=st.floats(0.5001, 1.0), f1=st.floats(0.5001, 1.0))
def test_conditional_never_worse(f0, f1):
    rep = ps.conditional_fidelity(f0, f1)
    assert rep.f_cond >= max(f0, f1) - 1e-12
    np.testing.assert_allclose(rep.outcome_matrix.sum(axis=0), [1, 1], atol=1e-12)


# --- invariants ------------------------------------------------------------------------

@given(p_f=st.floats(1e-3, 1.0), p_tot=st.floats(0.0, 1.0), n=st.integers(1, 600),
       bg=st.floats(0, 2.0), trunc=st.sampled_from(["none", "censored", "renormalized"]))
@settings(max_examples=60, deadline=None)
def test_distributions_normalized(p_f, p_tot, n, bg, trunc):
    m = ps.ReadoutModel(p_f, p_tot, bg / (n * 1e-6), n, 1e-6)
    for d in (ps.ion_count_distribution(m, trunc), ps.background_distribution(m),
              ps.bright_distribution(m, trunc)):
        assert d.total() == pytest.approx(1.0, abs=1e-9)
        assert np.all(d.pmf >= 0)


@given(p_f=st.floats(1e-3, 1.0), p_tot=st.floats(1e-3, 1.0))
@settings(max_examples=60, deadline=None)
def test_untruncated_mean_identity(p_f, p_tot):
    d = ps.ion_count_distribution(ps.ReadoutModel(p_f, p_tot, 0, 1, 1e-6), truncation="none")
    p_n = ps.geometric_parameter(p_f, p_tot)
    # trimming drops up to 1e-12 of tail mass, so the mean is exact only to ~1e-10
    assert d.mean() == pytest.approx((1 - p_n) / p_n, rel=1e-8, abs=1e-10)


@pytest.mark.parametrize("seed", range(5))
def test_random_tuples_match_monte_carlo(seed):
    rng = np.random.default_rng(1000 + seed)
    p_f = 10 ** rng.uniform(-3, -1.3)
    p_tot = 10 ** rng.uniform(-2.3, -0.7)
    n = int(rng.integers(50, 800))
    nbg = rng.uniform(0, 0.5)
    m = ps.ReadoutModel(p_f, p_tot, nbg / (n * 1e-6), n, 1e-6)
    samples = simulate_readout_counts(p_f, p_tot, nbg, n, 200_000, rng)
    assert ps.bright_distribution(m).tv_distance(ps.CountDistribution.from_counts(samples)) < 0.01


# --- branching fit ------------------------------------------------------------------------

def synthetic_curve(beta_eff, rng, noise=0.01, n_max=2000, n_points=60, amplitude=3.0):
    n_p = np.unique(np.geomspace(1, n_max, n_points).round())
    y = amplitude * ps.cumulative_shape(beta_eff, n_p)
    if rng is None:
        return np.column_stack([n_p, y])
    return np.column_stack([n_p, y * (1 + noise * rng.standard_normal(n_p.size))])


def test_branching_fit_recovers_beta_eff():
    rng = np.random.default_rng(3)
    fit = ps.fit_branching_from_cumulative(synthetic_curve(0.997, rng), p_exc=0.94)
    assert fit.beta_eff == pytest.approx(0.997, abs=1e-3)


def test_branching_fit_reported_parallel_value():
    fit = ps.fit_branching_from_cumulative(synthetic_curve(0.997, None, noise=0.0), p_exc=0.94)
    assert fit.beta_eff == pytest.approx(0.997, abs=1e-7)
    assert fit.beta_parallel == pytest.approx(0.9968, abs=5e-5)


def test_branching_fit_linear_limit():
    n_p = np.arange(1, 200)
    fit = ps.fit_branching_from_cumulative(np.column_stack([n_p, 0.5 * n_p]), p_exc=1.0)
    assert fit.beta_eff >= 0.9999


def test_branching_fit_input_errors():
    with pytest.raises(ValueError):
        ps.fit_branching_from_cumulative([(1, 1), (2, 2)], p_exc=0.9)
    with pytest.raises(ValueError):
        ps.fit_branching_from_cumulative([(1, 5), (2, 2), (3, 1), (4, 0.5)], p_exc=0.9)


def test_branching_fit_divergence_reports_residuals():
    n_p = np.arange(1, 50)
    y = np.where(n_p % 2 == 0, 10.0, 9.9) * np.sqrt(n_p) ** 0 + np.where(n_p > 25, 30.0, 0.0)
    with pytest.raises(FitError) as exc:
        ps.fit_branching_from_cumulative(np.column_stack([n_p, y]), p_exc=1.0)
    assert exc.value.residuals is not None and exc.value.residuals.size == n_p.size

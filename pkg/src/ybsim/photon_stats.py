"""Photon-count distributions for single-shot readout and the derived fidelities.

Counts are per readout sequence of ``n_pulses`` optical pulses. The ion emits a
detectable photon on each pulse that returns it to the bright state; each
pulse also shelves it with probability ``p_f`` after which it stays dark.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special, stats

from .errors import FitError

TAIL = 1e-12


@dataclass(frozen=True)
class ReadoutModel:
    p_f: float  # shelving probability per pulse, 1 - beta_eff
    p_tot: float  # detection probability per bright pulse
    gamma_bg: float  # background count rate, 1/s
    n_pulses: int
    t_r: float  # integration window per pulse, s

    def __post_init__(self):
        for name in ("p_f", "p_tot"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.gamma_bg < 0:
            raise ValueError("gamma_bg must be >= 0")
        if int(self.n_pulses) != self.n_pulses or self.n_pulses < 1:
            raise ValueError("n_pulses must be an integer >= 1")
        if self.t_r < 0:
            raise ValueError("t_r must be >= 0")

    @property
    def n_bg_mean(self) -> float:
        return self.gamma_bg * self.n_pulses * self.t_r

    def with_pulses(self, n_pulses: int) -> "ReadoutModel":
        return ReadoutModel(self.p_f, self.p_tot, self.gamma_bg, int(n_pulses), self.t_r)


@dataclass
class CountDistribution:
    pmf: np.ndarray

    def __post_init__(self):
        self.pmf = np.asarray(self.pmf, dtype=float)
        if self.pmf.ndim != 1 or self.pmf.size == 0:
            raise ValueError("pmf must be a non-empty 1-D array")
        if np.any(self.pmf < 0):
            raise ValueError("pmf entries must be >= 0")

    @property
    def support_cap(self) -> int:
        return self.pmf.size - 1

    def __getitem__(self, k: int) -> float:
        return float(self.pmf[k]) if 0 <= k < self.pmf.size else 0.0

    def total(self) -> float:
        return float(self.pmf.sum())

    def mean(self) -> float:
        return float(np.arange(self.pmf.size) @ self.pmf)

    def padded(self, n: int) -> np.ndarray:
        out = np.zeros(max(n, self.pmf.size))
        out[: self.pmf.size] = self.pmf
        return out

    def tv_distance(self, other: "CountDistribution") -> float:
        n = max(self.pmf.size, other.pmf.size)
        return 0.5 * float(np.abs(self.padded(n) - other.padded(n)).sum())

    @classmethod
    def point_mass(cls, k: int = 0) -> "CountDistribution":
        p = np.zeros(k + 1)
        p[k] = 1.0
        return cls(p)

    @classmethod
    def from_counts(cls, counts) -> "CountDistribution":
        """Empirical distribution of integer samples."""
        counts = np.asarray(counts)
        if counts.size == 0:
            raise ValueError("no samples")
        h = np.bincount(counts.astype(np.int64))
        return cls(h / h.sum())

    @classmethod
    def from_histogram(cls, k, occurrences) -> "CountDistribution":
        k = np.asarray(k, dtype=np.int64)
        occ = np.asarray(occurrences, dtype=float)
        if np.any(k < 0) or np.any(occ < 0) or occ.sum() <= 0:
            raise ValueError("histogram needs non-negative counts and positive total")
        p = np.zeros(k.max() + 1)
        np.add.at(p, k, occ)
        return cls(p / p.sum())


def _trimmed(p: np.ndarray) -> CountDistribution:
    """Cut the support at the smallest k whose cumulative mass exceeds 1 - TAIL; renormalize."""
    p = np.clip(np.asarray(p, dtype=float), 0, None)
    c = np.cumsum(p)
    k = int(np.searchsorted(c, (1 - TAIL) * c[-1], side="right"))
    p = p[: min(k + 1, p.size)]
    return CountDistribution(p / p.sum())


def _geometric(p_n: float) -> CountDistribution:
    if p_n >= 1:
        return CountDistribution.point_mass(0)
    cap = max(0, math.ceil(math.log(TAIL) / math.log1p(-p_n)) - 1)
    k = np.arange(cap + 1)
    return _trimmed(p_n * np.exp(k * math.log1p(-p_n)))


def geometric_parameter(p_f: float, p_tot: float) -> float:
    """Success parameter of the untruncated ion-count geometric distribution."""
    return p_f / (p_tot + p_f - p_tot * p_f)


def shelving_distribution(p_f: float, n_max: int, truncation: str = "censored") -> np.ndarray:
    """Distribution of the number of bright pulses N_r in a train of ``n_max`` pulses.

    ``censored``: exact for the pulse train, the ion still bright after the last
    pulse contributes ``n_max`` bright pulses. ``renormalized``: geometric law
    cut at ``n_max`` and rescaled.
    """
    r = np.arange(n_max + 1)
    log_q = math.log1p(-p_f) if p_f < 1 else -np.inf
    with np.errstate(invalid="ignore"):
        surv = np.exp(r * log_q) if p_f < 1 else (r == 0).astype(float)
    if truncation == "censored":
        w = surv * p_f
        w[-1] = surv[-1]
    elif truncation == "renormalized":
        if p_f == 0:
            w = np.full(n_max + 1, 1.0 / (n_max + 1))
        else:
            w = surv * p_f / -math.expm1((n_max + 1) * log_q) if p_f < 1 else (r == 0).astype(float)
    else:
        raise ValueError(f"unknown truncation {truncation!r}")
    return w


def ion_count_distribution(model: ReadoutModel, truncation: str = "censored") -> CountDistribution:
    """Photon counts from the ion alone for a readout starting in the bright state.

    ``truncation`` is ``"none"`` (geometric law of an unbounded pulse train),
    ``"censored"`` (default, exact for ``model.n_pulses``) or ``"renormalized"``.
    """
    if truncation == "none":
        if model.p_f == 0:
            raise ValueError("non-normalizable: p_f = 0 with an unbounded pulse train")
        return _geometric(geometric_parameter(model.p_f, model.p_tot))
    n = model.n_pulses
    w = shelving_distribution(model.p_f, n, truncation)
    keep = w > 0
    r = np.arange(n + 1)[keep]
    k = np.arange(n + 1)
    # P(k) = sum_r P(N_r = r) Binom(k; r, p_tot)
    pk = _binom_pmf(k[:, None], r[None, :], model.p_tot) @ w[keep]
    return _trimmed(pk)


def _binom_pmf(k, n, p):
    # log-space form; scipy's binom overflows for subnormal p
    k, n = np.broadcast_arrays(k, n)
    with np.errstate(invalid="ignore", divide="ignore"):
        logc = special.gammaln(n + 1) - special.gammaln(k + 1) - special.gammaln(n - k + 1)
        out = np.exp(logc + special.xlogy(k, p) + special.xlog1py(n - k, -p))
    return np.where(k <= n, out, 0.0)


def background_distribution(model: ReadoutModel) -> CountDistribution:
    return poisson_distribution(model.n_bg_mean)


def poisson_distribution(mean: float) -> CountDistribution:
    if mean < 0 or not math.isfinite(mean):
        raise ValueError("Poisson mean must be finite and >= 0")
    if mean == 0:
        return CountDistribution.point_mass(0)
    cap = int(stats.poisson.isf(TAIL, mean)) + 2
    return _trimmed(stats.poisson.pmf(np.arange(cap + 1), mean))


def convolve(a: CountDistribution, b: CountDistribution) -> CountDistribution:
    return _trimmed(np.convolve(a.pmf, b.pmf))


def bright_distribution(model: ReadoutModel, truncation: str = "censored") -> CountDistribution:
    """Counts for the ion prepared in the bright qubit state: ion counts plus background."""
    return convolve(ion_count_distribution(model, truncation), background_distribution(model))


@dataclass(frozen=True)
class FidelityReport:
    n_c: int
    epsilon_0: float
    epsilon_1: float

    @property
    def f_0(self) -> float:
        return 1.0 - self.epsilon_0

    @property
    def f_1(self) -> float:
        return 1.0 - self.epsilon_1

    @property
    def f_avg(self) -> float:
        return 0.5 * (self.f_0 + self.f_1)

    def as_dict(self) -> dict:
        return {"n_c": self.n_c, "epsilon_0": self.epsilon_0, "epsilon_1": self.epsilon_1,
                "f_0": self.f_0, "f_1": self.f_1, "f_avg": self.f_avg}


def assignment_errors(dist0: CountDistribution, dist1: CountDistribution, n_c: int) -> FidelityReport:
    """Threshold assignment: ``>= n_c`` counts is read as the bright state |1>."""
    if n_c < 1:
        raise ValueError("n_c must be >= 1 (n_c = 0 assigns every outcome to |1>)")
    eps0 = float(dist0.pmf[n_c:].sum())
    eps1 = float(dist1.pmf[:n_c].sum())
    return FidelityReport(int(n_c), min(max(eps0, 0.0), 1.0), min(max(eps1, 0.0), 1.0))


def optimal_threshold(dist0: CountDistribution, dist1: CountDistribution) -> FidelityReport:
    """Threshold maximizing the average fidelity; ties go to the smaller threshold."""
    best = None
    for n_c in range(1, max(dist0.pmf.size, dist1.pmf.size) + 2):
        rep = assignment_errors(dist0, dist1, n_c)
        if best is None or rep.f_avg > best.f_avg + 1e-12:
            best = rep
    return best


@dataclass(frozen=True)
class ConditionalReport:
    f_cond: float
    p_success: float
    outcome_matrix: np.ndarray = field(repr=False)  # rows |00>,|01>,|10>,|11>; cols prepared |0>,|1>

    OUTCOMES = ("00", "01", "10", "11")


def conditional_fidelity(f0: float, f1: float) -> ConditionalReport:
    """Two readouts separated by a pi pulse, identical fidelities assumed for both.

    The state is assigned only on the complementary outcomes 01 (prepared |0>)
    and 10 (prepared |1>).
    """
    for v in (f0, f1):
        if not 0 <= v <= 1:
            raise ValueError("fidelities must lie in [0, 1]")
    e0, e1 = 1 - f0, 1 - f1
    m = np.array([
        [f0 * e1, e1 * f0],
        [f0 * f1, e1 * e0],
        [e0 * e1, f1 * f0],
        [e0 * f1, f1 * e0],
    ])
    p_success = f0 * f1 + e1 * e0
    f_cond = f0 * f1 / p_success if p_success > 0 else float("nan")
    return ConditionalReport(f_cond, p_success, m)


def readout_sweep(model: ReadoutModel, pulses, n_c: int = 1, truncation: str = "censored") -> dict:
    """Single and conditional readout figures of merit versus readout train length."""
    rows = {k: [] for k in ("n_pulses", "f_0", "f_1", "f_avg", "f_cond", "p_success")}
    for n in pulses:
        m = model.with_pulses(int(n))
        rep = assignment_errors(background_distribution(m), bright_distribution(m, truncation), n_c)
        cond = conditional_fidelity(rep.f_0, rep.f_1)
        for k, v in (("n_pulses", int(n)), ("f_0", rep.f_0), ("f_1", rep.f_1), ("f_avg", rep.f_avg),
                     ("f_cond", cond.f_cond), ("p_success", cond.p_success)):
            rows[k].append(v)
    return {k: np.asarray(v) for k, v in rows.items()}


# --- cumulative-count branching ratio fit -------------------------------------------------

@dataclass(frozen=True)
class BranchingFit:
    beta_eff: float
    p_exc: float
    amplitude: float
    cumulative_curve: tuple  # ((N_p, N_c), ...)
    residuals: np.ndarray = field(repr=False)

    @property
    def beta_parallel(self) -> float:
        return 1.0 - (1.0 - self.beta_eff) / self.p_exc


def cumulative_shape(beta_eff: float, n_p) -> np.ndarray:
    """(1 - b^N) / (1 - b), continuous through b -> 1."""
    n_p = np.asarray(n_p, dtype=float)
    if beta_eff >= 1:
        return n_p.copy()
    lb = math.log(beta_eff)
    return np.expm1(n_p * lb) / math.expm1(lb)


def fit_branching_from_cumulative(curve, p_exc: float, monotone_rtol: float = 0.05,
                                  beta_min: float = 0.5) -> BranchingFit:
    """Least-squares fit of cumulative counts N_c(N_p) = A (1 - b^N_p)/(1 - b).

    The amplitude is profiled out in closed form and the effective branching
    ratio ``b`` is searched on ``[beta_min, 1)``. Dips below the running
    maximum larger than ``monotone_rtol`` (relative) are rejected as non-cumulative data.
    """
    arr = np.asarray(curve, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 3:
        raise ValueError("need at least 3 (N_p, counts) points")
    if not 0 < p_exc <= 1:
        raise ValueError("p_exc must lie in (0, 1]")
    order = np.argsort(arr[:, 0])
    n_p, y = arr[order, 0], arr[order, 1]
    running = np.maximum.accumulate(y)
    if np.any(running - y > monotone_rtol * np.abs(running)):
        raise ValueError("counts are not monotone nondecreasing in N_p")

    def profile(b):
        s = cumulative_shape(b, n_p)
        ss = s @ s
        a = (s @ y) / ss if ss > 0 else 0.0
        return a, y - a * s

    def cost(u):
        _, r = profile(1.0 - math.exp(u))
        return float(r @ r)

    # u = log(1 - b): resolves b close to 1
    u_lo, u_hi = math.log(1e-9), math.log(1.0 - beta_min)
    grid = np.linspace(u_lo, u_hi, 400)
    costs = np.array([cost(u) for u in grid])
    if not np.all(np.isfinite(costs)):
        raise FitError("non-finite residuals in branching fit")
    i = int(np.argmin(costs))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = optimize.minimize_scalar(cost, bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-10})
    u = res.x if res.fun <= costs[i] else grid[i]
    b = 1.0 - math.exp(u)
    a, r = profile(b)
    scale = np.sqrt(np.mean(y**2)) if np.any(y) else 1.0
    if not np.isfinite(a) or a <= 0 or np.sqrt(np.mean(r**2)) > 0.25 * scale:
        raise FitError("branching fit diverged", residuals=r)
    pairs = tuple((float(x), float(v)) for x, v in zip(n_p, y))
    return BranchingFit(b, p_exc, float(a), pairs, r)


FIG4B_GAMMA_BG = -math.log(0.961) / (400 * 5e-6)  # 19.89 1/s
FIG4B_P_TOT = 0.0055086207603617


def fig4b_model() -> ReadoutModel:
    """Readout model reconstructed to give F0 = 96.1 %, F1 = 64.0 % at n_c = 1, 400 pulses.

    Not measured values: beta_eff = 0.997 fixes p_f, the background rate is set
    by F0 and the per-pulse detection probability is solved for F1
    (see scripts/calibrate_fig4b.py).
    """
    return ReadoutModel(p_f=0.003, p_tot=FIG4B_P_TOT, gamma_bg=FIG4B_GAMMA_BG, n_pulses=400, t_r=5e-6)

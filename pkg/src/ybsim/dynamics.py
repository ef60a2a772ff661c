"""Pulse-by-pulse Monte Carlo of the five-level ion under optical and microwave pulses.

Levels: ``0g, 1g, aux_g`` (ground) and ``0e, 1e`` (optical excited). Optical
dynamics are incoherent: a pulse excites the addressed ground state with
probability ``p_exc`` and the excited state decays at the end of the pulse.
Transitions:

* A: ``1g <-> 0e`` (cavity coupled, the readout transition);
* C: ``aux_g -> 0e`` and F: ``aux_g -> 1e`` (off-cavity pumping);
* ``0e`` decays to ``1g`` with ``beta_a``, otherwise to ``aux_g``;
* ``1e`` decays to ``0g`` (transition E) with ``beta_e``, otherwise to ``aux_g``.

Spin relaxation among the ground levels is a continuous-time Markov chain
obeying detailed balance at ``temperature``; it acts over every pulse duration.

Two engines share these rules: :func:`simulate_sequence` samples shots
explicitly, :func:`propagate` and :func:`g2_exact` compose exact per-pulse
transfer matrices.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import linalg, optimize

from .constants import H, KB
from .errors import FitError, InsufficientStatistics
from .photon_stats import FIG4B_GAMMA_BG, FIG4B_P_TOT, ReadoutModel
from .seeding import BLOCK_SHOTS, check_seed, run_partitioned

G0, G1, AUX, E0, E1 = range(5)
LABELS = ("0g", "1g", "aux_g", "0e", "1e")
GROUND = (G0, G1, AUX)

# optical channel -> (ground, excited)
OPTICAL = {"optical-A": (G1, E0), "optical-C": (AUX, E0), "optical-F": (AUX, E1)}
CHANNELS = (*OPTICAL, "microwave-fe", "microwave-qubit", "wait")


class TransitionError(ValueError):
    """A pulse addresses a level that the model does not contain."""


def boltzmann_ratio(f: float, temperature: float) -> float:
    """Population ratio of two levels split by ``f`` (Hz): exp(-h f / k_B T)."""
    if temperature <= 0:
        raise ValueError("temperature must be > 0")
    return math.exp(-H * f / (KB * temperature))


def temperature_from_ratio(ratio: float, f: float) -> float:
    """Inverse of :func:`boltzmann_ratio`; the upper/lower population ratio gives T in K."""
    if f <= 0:
        raise ValueError("f must be > 0")
    if not 0 < ratio <= 1:
        raise ValueError("ratio must lie in (0, 1]")
    if ratio == 1:
        raise ValueError("ratio = 1 corresponds to infinite temperature")
    return H * f / (KB * math.log(1 / ratio))


@dataclass(frozen=True)
class LevelModel:
    """Rates and efficiencies of the five-level model. Times in s, frequencies in Hz."""

    beta_a: float = 1 - 0.003 / 0.94  # 0e -> 1g
    beta_e: float = 1 - 0.003 / 0.94  # 1e -> 0g
    eta_det: float = FIG4B_P_TOT * (1 - 0.003) / (0.94 * (1 - 0.003 / 0.94))
    gamma_bg: float = FIG4B_GAMMA_BG  # 1/s, during detection windows
    t1_qubit: float = 54e-3  # 0g <-> 1g decay constant
    t1_aux: float = 26.0  # qubit subspace <-> aux_g decay constant
    temperature: float = 0.059
    qubit_frequency: float = 674.48e6
    aux_gap: float = 2.07276e9  # E(0g) - E(aux_g)
    offcavity_efficiency: float = 0.025  # scales p_exc on C and F
    fe_efficiency: float = 0.9  # 0e -> 1e transfer by the f_e drive during an A pulse
    aux_leak: float = 1e-3  # aux_g -> 0e excitation per A pulse (off-resonant)
    eps_pi: float = 0.01  # depolarizing error per microwave qubit pulse
    levels: tuple = LABELS

    def __post_init__(self):
        probs = ("beta_a", "beta_e", "eta_det", "offcavity_efficiency", "fe_efficiency",
                 "aux_leak", "eps_pi")
        for name in probs:
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        for name in ("gamma_bg", "temperature", "qubit_frequency", "aux_gap"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("t1_qubit", "t1_aux"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0 (use math.inf to switch off)")
        levels = tuple(self.levels)
        if not levels or any(x not in LABELS for x in levels):
            raise ValueError(f"levels must be a subset of {LABELS}")
        object.__setattr__(self, "levels", tuple(x for x in LABELS if x in levels))
        if "aux_g" not in levels and (self.beta_a < 1 or self.beta_e < 1):
            raise TransitionError("decay into aux_g requires the aux_g level")
        if "1e" in levels and "0g" not in levels:
            raise TransitionError("level 1e decays to 0g, which is missing")
        if "0e" in levels and "1g" not in levels:
            raise TransitionError("level 0e decays to 1g, which is missing")

    @classmethod
    def two_level(cls, eta_det: float = 1.0, **kw) -> "LevelModel":
        """Cycling 1g <-> 0e only: no shelving, no spin relaxation, no background by default."""
        kw = {"beta_a": 1.0, "beta_e": 1.0, "gamma_bg": 0.0, "t1_qubit": math.inf,
              "t1_aux": math.inf, "aux_leak": 0.0, **kw}
        return cls(eta_det=eta_det, levels=("1g", "0e"), **kw)

    def present(self, idx: int) -> bool:
        return LABELS[idx] in self.levels

    def generator(self) -> np.ndarray:
        """3x3 rate matrix over (0g, 1g, aux_g), rows sum to zero.

        0g <-> 1g relax with total rate 1/t1_qubit. Each qubit level leaves for
        aux_g at the same rate k, with k chosen so the slow eigenvalue is
        1/t1_aux to first order in t1_qubit/t1_aux.
        """
        q = np.zeros((3, 3))
        if self.temperature == 0:
            r01 = r0 = r1 = 0.0
        else:
            r01 = boltzmann_ratio(self.qubit_frequency, self.temperature)
            r0 = boltzmann_ratio(self.aux_gap, self.temperature)
            r1 = boltzmann_ratio(self.aux_gap + self.qubit_frequency, self.temperature)
        if self.present(G0) and self.present(G1) and math.isfinite(self.t1_qubit):
            g = 1 / self.t1_qubit
            q[G0, G1], q[G1, G0] = g * r01 / (1 + r01), g / (1 + r01)
        if self.present(AUX) and math.isfinite(self.t1_aux):
            have = [i for i in (G0, G1) if self.present(i)]
            rs = {G0: r0, G1: r1}
            k = (1 / self.t1_aux) / (1 + sum(rs[i] for i in have))
            for i in have:
                q[i, AUX], q[AUX, i] = k, k * rs[i]
        np.fill_diagonal(q, -q.sum(axis=1))
        return q

    def boltzmann_weights(self) -> np.ndarray:
        """Thermal populations of (0g, 1g, aux_g) over the levels present."""
        if self.temperature == 0:
            e = np.array([self.aux_gap, self.aux_gap + self.qubit_frequency, 0.0])
            w = (e == min(e[i] for i in GROUND if self.present(i))).astype(float)
        else:
            w = np.array([boltzmann_ratio(self.aux_gap, self.temperature),
                          boltzmann_ratio(self.aux_gap + self.qubit_frequency, self.temperature), 1.0])
        w *= [self.present(i) for i in GROUND]
        return w / w.sum()

    def relaxation(self, dt: float) -> np.ndarray:
        return linalg.expm(self.generator() * dt) if dt > 0 else np.eye(3)

    def readout_model(self, pulse: "Pulse", n_pulses: int) -> ReadoutModel:
        """The photon-stats model of a train of ``pulse`` on 1g (exact when spin flips and leak are off)."""
        p_f = pulse.p_exc * (1 - self.beta_a)
        p_tot = pulse.p_exc * self.beta_a * self.eta_det / (1 - p_f) if p_f < 1 else 0.0
        return ReadoutModel(p_f=p_f, p_tot=p_tot, gamma_bg=self.gamma_bg, n_pulses=n_pulses,
                            t_r=pulse.window)

    def without_relaxation(self) -> "LevelModel":
        return replace(self, t1_qubit=math.inf, t1_aux=math.inf)


@dataclass(frozen=True)
class Pulse:
    """One schedule element. ``p_exc`` for optical pulses, ``angle`` (rad) for microwave ones.

    ``window`` is the photon collection time; 0 means no detection on this pulse.
    ``with_fe`` drives the excited-state transition during an A pulse.
    """

    channel: str
    duration: float
    p_exc: float = 0.0
    angle: float = math.pi
    window: float = 0.0
    with_fe: bool = False

    def __post_init__(self):
        if self.channel not in CHANNELS:
            raise TransitionError(f"unknown channel {self.channel!r}; expected one of {CHANNELS}")
        if not self.duration > 0:
            raise ValueError("pulse duration must be > 0")
        if not 0 <= self.p_exc <= 1:
            raise ValueError("p_exc must lie in [0, 1]")
        if self.window < 0:
            raise ValueError("window must be >= 0")
        if self.with_fe and self.channel != "optical-A":
            raise ValueError("with_fe only applies to optical-A pulses")

    @property
    def is_optical(self) -> bool:
        return self.channel in OPTICAL


@dataclass(frozen=True)
class PulseSequence:
    pulses: tuple = ()
    name: str = ""

    @classmethod
    def from_blocks(cls, blocks: Sequence[tuple], name: str = "") -> "PulseSequence":
        """``[(pulse, repeats), ...]`` expanded in order."""
        out = []
        for pulse, n in blocks:
            if int(n) != n or n < 0:
                raise ValueError("repeat counts must be integers >= 0")
            out += [pulse] * int(n)
        return cls(tuple(out), name)

    def __add__(self, other: "PulseSequence") -> "PulseSequence":
        return PulseSequence(self.pulses + other.pulses, self.name or other.name)

    def __len__(self):
        return len(self.pulses)

    @property
    def duration(self) -> float:
        return float(sum(p.duration for p in self.pulses))


PULSE_PERIOD = 5e-6


def readout_pulse(p_exc: float = 0.94, window: float = 5e-6) -> Pulse:
    return Pulse("optical-A", PULSE_PERIOD, p_exc=p_exc, window=window)


def init_sequence(n_f: int = 150, n_a: int = 100, target: str = "0g", p_exc: float = 0.94) -> PulseSequence:
    """F pumping out of aux_g, then A + f_e pumping into 0g; a pi pulse for target 1g."""
    if target not in ("0g", "1g"):
        raise ValueError("target must be '0g' or '1g'")
    blocks = [(Pulse("optical-F", PULSE_PERIOD, p_exc=p_exc), n_f),
              (Pulse("optical-A", PULSE_PERIOD, p_exc=p_exc, with_fe=True), n_a)]
    if target == "1g":
        blocks.append((Pulse("microwave-qubit", 1e-6), 1))
    return PulseSequence.from_blocks(blocks, name=f"init-{target}")


def readout_sequence(n_pulses: int = 400, p_exc: float = 0.94, window: float = 5e-6) -> PulseSequence:
    return PulseSequence.from_blocks([(readout_pulse(p_exc, window), n_pulses)], name="readout")


def _check_pulse(model: LevelModel, pulse: Pulse):
    need = []
    if pulse.is_optical:
        need = list(OPTICAL[pulse.channel])
        if pulse.with_fe:
            need.append(E1)
    elif pulse.channel == "microwave-qubit":
        need = [G0, G1]
    elif pulse.channel == "microwave-fe":
        need = [E0, E1]
    missing = [LABELS[i] for i in need if not model.present(i)]
    if missing:
        raise TransitionError(f"{pulse.channel} addresses {missing}, absent from the level model")


def _initial_distribution(model: LevelModel, initial) -> np.ndarray:
    if isinstance(initial, str):
        if initial == "thermal":
            p = np.zeros(5)
            w = model.boltzmann_weights()
            return np.concatenate([w, [0.0, 0.0]])
        if initial not in model.levels:
            raise TransitionError(f"initial level {initial!r} is not in the model")
        p = np.zeros(5)
        p[LABELS.index(initial)] = 1.0
        return p
    p = np.asarray(initial, dtype=float)
    if p.shape != (5,) or np.any(p < 0) or abs(p.sum() - 1) > 1e-9:
        raise ValueError("initial distribution must be 5 non-negative numbers summing to 1")
    if any(p[i] > 0 and not model.present(i) for i in range(5)):
        raise TransitionError("initial distribution populates a level absent from the model")
    return p / p.sum()


# --- exact transfer matrices --------------------------------------------------------------

def pulse_matrices(model: LevelModel, pulse: Pulse) -> tuple[np.ndarray, np.ndarray]:
    """(dark, click) 5x5 row-stochastic pieces of one pulse; ``dark + click`` is the full map.

    ``click`` collects the paths on which the ion's photon is detected.
    Background counts are independent and not included.
    """
    _check_pulse(model, pulse)
    eye = np.eye(5)
    x = eye.copy()
    if pulse.is_optical:
        g, e = OPTICAL[pulse.channel]
        p = pulse.p_exc * (1.0 if pulse.channel == "optical-A" else model.offcavity_efficiency)
        x[g, g], x[g, e] = 1 - p, p
        if pulse.channel == "optical-A" and model.present(AUX) and model.present(E0):
            x[AUX, AUX], x[AUX, E0] = 1 - model.aux_leak, model.aux_leak
    elif pulse.channel == "microwave-qubit":
        flip = (1 - model.eps_pi) * math.sin(pulse.angle / 2) ** 2 + model.eps_pi / 2
        x[G0, G0] = x[G1, G1] = 1 - flip
        x[G0, G1] = x[G1, G0] = flip
    fe = eye.copy()
    if pulse.with_fe:
        fe[E0, E0], fe[E0, E1] = 1 - model.fe_efficiency, model.fe_efficiency
    det = model.eta_det if pulse.window > 0 else 0.0
    dark, click = np.zeros((5, 5)), np.zeros((5, 5))
    for i in GROUND:
        dark[i, i] = 1.0
    for e, g, beta in ((E0, G1, model.beta_a), (E1, G0, model.beta_e)):
        dark[e, g] = beta * (1 - det)
        click[e, g] = beta * det
        dark[e, AUX] = 1 - beta
    r = eye.copy()
    r[:3, :3] = model.relaxation(pulse.duration)
    pre = x @ fe
    return pre @ dark @ r, pre @ click @ r


def propagate(model: LevelModel, seq: PulseSequence, initial="thermal") -> np.ndarray:
    """Exact level populations after each pulse, shape (len(seq) + 1, 5)."""
    p = _initial_distribution(model, initial)
    out = [p]
    cache = {}
    for pulse in seq.pulses:
        if pulse not in cache:
            d, c = pulse_matrices(model, pulse)
            cache[pulse] = d + c
        p = p @ cache[pulse]
        out.append(p)
    return np.array(out)


# --- Monte Carlo engine ----------------------------------------------------------------------

@dataclass
class TrajectoryRecord:
    """Per-shot detected counts per pulse, level populations after each pulse, final levels."""

    counts: np.ndarray  # (shots, n_pulses), uint16
    populations: np.ndarray  # (n_pulses + 1, 5)
    final_states: np.ndarray  # (shots,), level indices
    seed: int
    states: np.ndarray | None = None  # (shots, n_pulses + 1) if recorded
    labels: tuple = LABELS

    @property
    def shots(self) -> int:
        return int(self.final_states.size)

    def total_counts(self, pulses: slice | Sequence[int] = slice(None)) -> np.ndarray:
        return self.counts[:, pulses].sum(axis=1, dtype=np.int64)

    def mean_counts(self) -> np.ndarray:
        return self.counts.mean(axis=0)


class _Engine:
    """Vectorized explicit-step sampler; one instance per (model, sequence)."""

    def __init__(self, model: LevelModel, seq: PulseSequence, p_init: np.ndarray, record_states: bool):
        for pulse in seq.pulses:
            _check_pulse(model, pulse)
        self.model, self.seq, self.p_init, self.record_states = model, seq, p_init, record_states
        self.q_zero = not np.any(model.generator())
        self.relax = {}

    def _relax(self, s, dt, rng):
        if self.q_zero:
            return
        if dt not in self.relax:
            self.relax[dt] = np.cumsum(self.model.relaxation(dt), axis=1)
        cum = self.relax[dt]
        u = rng.random(s.size)
        ground = s < 3
        idx = np.nonzero(ground)[0]
        s[idx] = (u[idx, None] > cum[s[idx]][:, :-1]).sum(axis=1)

    def _pulse(self, pulse: Pulse, s, rng, counts_col):
        m = self.model
        n = s.size
        if pulse.is_optical:
            g, e = OPTICAL[pulse.channel]
            p = pulse.p_exc * (1.0 if pulse.channel == "optical-A" else m.offcavity_efficiency)
            u = rng.random(n)
            hit = (s == g) & (u < p)
            if pulse.channel == "optical-A" and m.aux_leak > 0 and m.present(AUX):
                s[(s == AUX) & (u < m.aux_leak)] = E0
            s[hit] = e
            if pulse.with_fe:
                s[(s == E0) & (rng.random(n) < m.fe_efficiency)] = E1
            w = rng.random(n)
            det = rng.random(n) < (m.eta_det if pulse.window > 0 else 0.0)
            from0, from1 = s == E0, s == E1
            ok0, ok1 = from0 & (w < m.beta_a), from1 & (w < m.beta_e)
            s[from0 | from1] = AUX
            s[ok0] = G1
            s[ok1] = G0
            if pulse.window > 0:
                counts_col += (det & (ok0 | ok1)).astype(np.uint16)
                mu = m.gamma_bg * pulse.window
                if mu > 0:
                    counts_col += rng.poisson(mu, n).astype(np.uint16)
        elif pulse.channel == "microwave-qubit":
            flip = (1 - m.eps_pi) * math.sin(pulse.angle / 2) ** 2 + m.eps_pi / 2
            f = (s < 2) & (rng.random(n) < flip)
            s[f] = 1 - s[f]
        self._relax(s, pulse.duration, rng)

    def run_states(self, s, rng):
        """Advance the given level array through the sequence in place."""
        n_p = len(self.seq)
        counts = np.zeros((s.size, n_p), dtype=np.uint16)
        occ = np.zeros((n_p + 1, 5), dtype=np.int64)
        hist = np.empty((s.size, n_p + 1), dtype=np.int8) if self.record_states else None
        occ[0] = np.bincount(s, minlength=5)
        if hist is not None:
            hist[:, 0] = s
        for k, pulse in enumerate(self.seq.pulses):
            self._pulse(pulse, s, rng, counts[:, k])
            occ[k + 1] = np.bincount(s, minlength=5)
            if hist is not None:
                hist[:, k + 1] = s
        return counts, occ, hist

    def __call__(self, n: int, rng: np.random.Generator):
        s = rng.choice(5, size=n, p=self.p_init).astype(np.int8)
        counts, occ, hist = self.run_states(s, rng)
        return counts, occ, s, hist


STREAM_SEQUENCE = 1
STREAM_G2 = 2
STREAM_T1 = 3


def simulate_sequence(model: LevelModel, seq: PulseSequence, shots: int, seed: int,
                      initial="thermal", workers: int = 1, block: int = BLOCK_SHOTS,
                      record_states: bool = False, key: Sequence[int] = (STREAM_SEQUENCE,)) -> TrajectoryRecord:
    """Sample ``shots`` independent runs of ``seq``; bit-identical for a given seed at any ``workers``."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    check_seed(seed)
    eng = _Engine(model, seq, _initial_distribution(model, initial), record_states)
    parts = run_partitioned(eng, shots, seed, key=key, workers=workers, block=block)
    counts = np.concatenate([p[0] for p in parts])
    occ = sum(p[1] for p in parts)
    final = np.concatenate([p[2] for p in parts])
    hist = np.concatenate([p[3] for p in parts]) if record_states else None
    return TrajectoryRecord(counts, occ / shots, final, seed, hist)


def subspace_fidelity(populations: np.ndarray, target: str = "0g") -> dict:
    """Qubit-subspace population and the target share within the subspace."""
    p = np.asarray(populations)
    sub = p[G0] + p[G1]
    share = p[LABELS.index(target)] / sub if sub > 0 else float("nan")
    return {"subspace": float(sub), "fidelity": float(share)}


# --- pulsewise g2 -------------------------------------------------------------------------

@dataclass(frozen=True)
class G2Schedule:
    """One period: an optional initialization pulse, then a detected readout pulse."""

    readout: Pulse = field(default_factory=readout_pulse)
    init: Pulse | None = field(default_factory=lambda: Pulse("optical-C", PULSE_PERIOD, p_exc=0.94))

    def __post_init__(self):
        if self.readout.window <= 0:
            raise ValueError("the readout pulse needs a detection window")
        if self.init is not None and self.init.window > 0:
            raise ValueError("counts are taken on the readout pulse only")

    def pulses(self) -> tuple:
        return (self.init, self.readout) if self.init is not None else (self.readout,)


@dataclass
class G2Result:
    lags: np.ndarray
    g2: np.ndarray
    stderr: np.ndarray
    mean_counts: float

    @property
    def zero_lag(self) -> float:
        return float(self.g2[0])

    @property
    def plateau(self) -> float:
        """Mean over the last quarter of the lags."""
        tail = self.g2[self.lags >= 0.75 * self.lags.max()]
        return float(tail.mean())

    @property
    def bunching_amplitude(self) -> float:
        """Excess over the Poissonian level at the first nonzero lag."""
        return float(self.g2[1] - 1.0)


def _period_matrices(model: LevelModel, schedule: G2Schedule):
    d, c = pulse_matrices(model, schedule.readout)
    pre = np.eye(5)
    if schedule.init is not None:
        di, ci = pulse_matrices(model, schedule.init)
        pre = di + ci
    return pre, d, c


def _stationary_vector(m: np.ndarray) -> np.ndarray:
    """Left fixed point of the row-stochastic ``m``, required to be unique."""
    a = m.T - np.eye(m.shape[0])
    sv = linalg.svdvals(a)
    if m.shape[0] > 1 and sv[-2] < 1e-12 * max(1.0, sv[0]):
        raise ValueError("stationary state is not unique")
    a[-1] = 1.0
    rhs = np.zeros(m.shape[0])
    rhs[-1] = 1.0
    x = np.linalg.solve(a, rhs)
    return np.clip(x, 0, None) / np.clip(x, 0, None).sum()


def _stationary(p: np.ndarray, model: LevelModel) -> np.ndarray:
    idx = [i for i in GROUND if model.present(i)]
    out = np.zeros(5)
    out[idx] = _stationary_vector(p[np.ix_(idx, idx)])
    return out


def g2_exact(model: LevelModel, schedule: G2Schedule, max_lag: int = 50) -> G2Result:
    """Stationary pulsewise g2 from transfer matrices (no sampling noise)."""
    pre, d, c = _period_matrices(model, schedule)
    period = pre @ (d + c)
    pi = _stationary(period, model)
    mu = model.gamma_bg * schedule.readout.window
    clicked = pi @ pre @ c
    a = float(clicked.sum())
    ones = np.ones(5)
    tail = pre @ c @ ones
    g = np.empty(max_lag + 1)
    g[0] = (2 * mu * a + mu**2) / (a + mu) ** 2 if a + mu > 0 else np.nan
    v = clicked
    for t in range(1, max_lag + 1):
        g[t] = (float(v @ tail) + 2 * mu * a + mu**2) / (a + mu) ** 2
        v = v @ period
    return G2Result(np.arange(max_lag + 1), g, np.zeros_like(g), a + mu)


class _G2Block:
    def __init__(self, model, schedule, max_lag, length):
        self.eng = _Engine(model, PulseSequence(schedule.pulses() * length), np.zeros(5), False)
        self.read_cols = np.arange(len(schedule.pulses()) - 1, len(schedule.pulses()) * length,
                                   len(schedule.pulses()))
        pre, d, c = _period_matrices(model, schedule)
        self.pi = _stationary(pre @ (d + c), model)
        self.max_lag, self.length = max_lag, length

    def __call__(self, n_streams: int, rng):
        s = rng.choice(5, size=n_streams, p=self.pi).astype(np.int8)
        counts, _, _ = self.eng.run_states(s, rng)
        x = counts[:, self.read_cols].astype(np.float64)
        prods = np.array([np.sum(x[:, :-t] * x[:, t:]) if t else np.sum(x * (x - 1))
                          for t in range(self.max_lag + 1)])
        pairs = np.array([n_streams * (self.length - t) for t in range(self.max_lag + 1)], dtype=float)
        return x.sum(), x.size, prods, pairs


G2_STREAMS_PER_BLOCK = 50


def g2_pulsewise(model: LevelModel, schedule: G2Schedule, shots: int, seed: int, max_lag: int = 50,
                 stream_length: int = 2000, workers: int = 1) -> G2Result:
    """Pulsewise g2 of readout counts, estimated from ``shots`` readout pulses.

    The pulse stream is cut into independent streams of ``stream_length``
    periods, each started from the exact stationary state of the schedule.
    ``g2[0] = <n(n-1)>/<n>^2``; ``g2[t] = <n_i n_{i+t}>/<n>^2``.
    """
    if stream_length <= max_lag:
        raise ValueError("stream_length must exceed max_lag")
    n_streams = max(1, math.ceil(shots / stream_length))
    fn = _G2Block(model, schedule, max_lag, stream_length)
    parts = run_partitioned(fn, n_streams, seed, key=(STREAM_G2,), workers=workers, block=G2_STREAMS_PER_BLOCK)
    s1 = sum(p[0] for p in parts)
    n = sum(p[1] for p in parts)
    prods = sum(p[2] for p in parts)
    pairs = sum(p[3] for p in parts)
    if s1 == 0:
        raise InsufficientStatistics("insufficient statistics: no detected events")
    mean = s1 / n
    g = (prods / pairs) / mean**2
    err = np.where(prods > 0, g / np.sqrt(np.maximum(prods, 1)), np.nan)
    return G2Result(np.arange(max_lag + 1), g, err, mean)


# --- spin T1 --------------------------------------------------------------------------------

@dataclass(frozen=True)
class BiexpFit:
    t_fast: float
    t_slow: float
    ratio: float  # p(1g)/p(0g) of the quasi-equilibrium after the fast decay
    amplitudes: np.ndarray  # rows (0g, 1g): constant, fast, slow
    rms: float

    def temperature(self, qubit_frequency: float) -> float:
        return temperature_from_ratio(self.ratio, qubit_frequency)


def _basis(t, tf, ts):
    return np.column_stack([np.ones_like(t), np.exp(-t / tf), np.exp(-t / ts)])


def fit_biexponential(times, p0, p1, max_rms: float = 0.05) -> BiexpFit:
    """Joint fit of p0, p1 = c + a exp(-t/t_fast) + b exp(-t/t_slow) with shared constants.

    Amplitudes are profiled out by linear least squares; the two time constants
    are refined in log space from the best point of a log grid.
    """
    t = np.asarray(times, float)
    y = np.column_stack([p0, p1]).astype(float)
    if t.size < 7:
        raise FitError("need at least 7 wait times for a bi-exponential fit")

    def resid(u):
        tf, ts = np.exp(u)
        b = _basis(t, tf, ts)
        coef, *_ = np.linalg.lstsq(b, y, rcond=None)
        return (b @ coef - y).ravel(), coef

    lo, hi = math.log(np.min(t[t > 0])), math.log(np.max(t))
    grid = np.linspace(lo - 1, hi + 1, 40)
    best = min(((a, b) for a in grid for b in grid if b > a + 0.5),
               key=lambda u: np.sum(resid(np.array(u))[0] ** 2))
    sol = optimize.least_squares(lambda u: resid(u)[0], np.array(best), method="lm", xtol=1e-12)
    r, coef = resid(sol.x)
    rms = float(np.sqrt(np.mean(r**2)))
    tf, ts = np.exp(sol.x)
    if not sol.success or rms > max_rms or tf >= ts or not (lo - 2 < sol.x[0] < hi + 2) \
            or not (lo - 2 < sol.x[1] < hi + 2):
        raise FitError(f"bi-exponential fit diverged (rms {rms:.3g})", residuals=r)
    c, b = coef[0], coef[2]
    ratio = float((c[1] + b[1]) / (c[0] + b[0]))
    return BiexpFit(float(tf), float(ts), ratio, coef.T.copy(), rms)


@dataclass
class T1Curves:
    times: np.ndarray
    populations: np.ndarray  # (n_times, 5)
    fit: BiexpFit | None

    @property
    def p0(self):
        return self.populations[:, G0]

    @property
    def p1(self):
        return self.populations[:, G1]


def spin_t1_curves(model: LevelModel, wait_times, shots: int, seed: int, initial="0g",
                   workers: int = 1, fit: bool = True) -> T1Curves:
    """Populations after waiting ``wait_times`` from ``initial``, one seeded stream per point.

    The fit is skipped (``fit`` is None) when the curves are exactly flat.
    """
    t = np.asarray(wait_times, float)
    if t.ndim != 1 or t.size == 0 or np.any(t <= 0):
        raise ValueError("wait_times must be a non-empty 1-D array of positive times")
    pops = np.empty((t.size, 5))
    for i, tau in enumerate(t):
        rec = simulate_sequence(model, PulseSequence((Pulse("wait", float(tau)),)), shots, seed,
                                initial=initial, workers=workers, key=(STREAM_T1, i))
        pops[i] = rec.populations[-1]
    res = None
    if fit and (np.ptp(pops[:, G0]) > 0 or np.ptp(pops[:, G1]) > 0):
        res = fit_biexponential(t, pops[:, G0], pops[:, G1])
    return T1Curves(t, pops, res)

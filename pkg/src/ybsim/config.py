"""TOML experiment configuration: typed sections, strict keys, validation at load time.

Each section maps onto one module's parameter objects. Field defaults are the
reconstructed device presets, so a section may be given empty; a section that
a subcommand needs must still be present. Units are SI unless the key name
says otherwise (``_us``, ``_hz``, ``_um3``, ``_nm``).
"""
from __future__ import annotations

import dataclasses
import hashlib
import math
import sys
import typing
from dataclasses import dataclass, field, fields

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from . import cavity, decoherence, dynamics, photon_stats, spin
from .errors import ConfigError
from .seeding import SEED_MAX


@dataclass(frozen=True)
class RunSection:
    seed: int
    shots: int = 100_000
    workers: int = 1
    out: str = "out"

    def validate(self):
        if not 0 <= self.seed <= SEED_MAX:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.shots < 1000:
            raise ValueError("shots must be >= 1000")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class CavitySection:
    kappa_hz: float = 30.7e9  # kappa / 2 pi
    mode_volume_um3: float = 0.095
    refractive_index: float = 2.17
    wavelength_nm: float = 984.5
    kappa_in_ratio: float = 0.14

    def params(self) -> cavity.CavityParams:
        return cavity.CavityParams(kappa=2 * math.pi * self.kappa_hz, mode_volume=self.mode_volume_um3 * 1e-18,
                                   refractive_index=self.refractive_index, wavelength=self.wavelength_nm * 1e-9,
                                   kappa_in_ratio=self.kappa_in_ratio)

    def validate(self):
        self.params()


@dataclass(frozen=True)
class EmitterSection:
    dipole_moment: float = 1.06e-31  # C m
    t1_bulk_us: float = 267.0
    t_parallel_us: float = 763.0
    t1_cav_us: float = 2.27  # measured cavity lifetime for eta
    t1_cav_branching_us: float = 2.3  # lifetime used for the branching bound
    beta_eff: float = 0.997
    p_exc: float = 0.94

    def params(self) -> cavity.EmitterParams:
        return cavity.EmitterParams.from_lifetimes(self.dipole_moment, self.t1_bulk_us * 1e-6,
                                                   self.t_parallel_us * 1e-6)

    def validate(self):
        self.params()
        cavity.eta_from_lifetimes(self.t1_cav_us, self.t1_bulk_us)
        cavity.eta_from_lifetimes(self.t1_cav_branching_us, self.t1_bulk_us)
        if not 0 < self.beta_eff <= 1:
            raise ValueError("beta_eff must lie in (0, 1]")
        cavity.branching_from_effective(self.beta_eff, self.p_exc)


def _default_sweep():
    return list(range(25, 801, 25))


@dataclass(frozen=True)
class ReadoutSection:
    p_f: float = 0.003
    p_tot: float = photon_stats.FIG4B_P_TOT
    gamma_bg: float = photon_stats.FIG4B_GAMMA_BG
    n_pulses: int = 400
    t_r_us: float = 5.0
    n_c: int = 1
    truncation: str = "censored"
    sweep_pulses: list[int] = field(default_factory=_default_sweep)

    def model(self) -> photon_stats.ReadoutModel:
        return photon_stats.ReadoutModel(self.p_f, self.p_tot, self.gamma_bg, self.n_pulses, self.t_r_us * 1e-6)

    def validate(self):
        self.model()
        if self.n_c < 1:
            raise ValueError("n_c must be >= 1")
        if self.truncation not in ("censored", "renormalized", "none"):
            raise ValueError("truncation must be censored, renormalized or none")
        if not self.sweep_pulses or min(self.sweep_pulses) < 1:
            raise ValueError("sweep_pulses must be a non-empty list of integers >= 1")


_LM = dynamics.LevelModel()


@dataclass(frozen=True)
class LevelsSection:
    beta_a: float = _LM.beta_a
    beta_e: float = _LM.beta_e
    eta_det: float = _LM.eta_det
    gamma_bg: float = _LM.gamma_bg
    t1_qubit: float = _LM.t1_qubit
    t1_aux: float = _LM.t1_aux
    temperature: float = _LM.temperature
    qubit_frequency: float = _LM.qubit_frequency
    aux_gap: float = _LM.aux_gap
    offcavity_efficiency: float = _LM.offcavity_efficiency
    fe_efficiency: float = _LM.fe_efficiency
    aux_leak: float = _LM.aux_leak
    eps_pi: float = _LM.eps_pi

    def model(self) -> dynamics.LevelModel:
        return dynamics.LevelModel(**dataclasses.asdict(self))

    def validate(self):
        self.model()


@dataclass(frozen=True)
class SequencesSection:
    p_exc: float = 0.94
    init_f_pulses: int = 150
    init_a_pulses: int = 100
    readout_pulses: int = 400
    init_f_scan: list[int] = field(default_factory=lambda: [0, 10, 25, 50, 75, 100, 150, 200])
    init_a_scan: list[int] = field(default_factory=lambda: [0, 1, 2, 5, 10, 20, 50, 100])
    g2_max_lag: int = 50
    g2_stream_length: int = 2000
    t1_wait_min: float = 1e-3
    t1_wait_max: float = 300.0
    t1_wait_points: int = 40

    def validate(self):
        if not 0 <= self.p_exc <= 1:
            raise ValueError("p_exc must lie in [0, 1]")
        for name in ("init_f_pulses", "init_a_pulses"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.readout_pulses < 1:
            raise ValueError("readout_pulses must be >= 1")
        if any(n < 0 for n in self.init_f_scan + self.init_a_scan):
            raise ValueError("scan entries must be >= 0")
        if not 1 <= self.g2_max_lag < self.g2_stream_length:
            raise ValueError("need 1 <= g2_max_lag < g2_stream_length")
        if not 0 < self.t1_wait_min < self.t1_wait_max or self.t1_wait_points < 7:
            raise ValueError("need 0 < t1_wait_min < t1_wait_max and t1_wait_points >= 7")

    def waits(self) -> np.ndarray:
        return np.geomspace(self.t1_wait_min, self.t1_wait_max, self.t1_wait_points)


@dataclass(frozen=True)
class NoiseSection:
    tau_c: float = decoherence.DD_TAU_C
    hahn_t2_us: float = decoherence.DD_HAHN_T2 * 1e6  # sets the OU amplitude
    line_f0_hz: float = decoherence.DD_LINE_F0
    line_amplitude_hz: float = decoherence.DD_LINE_AMPLITUDE / (2 * math.pi)
    line_linewidth_hz: float = 0.0
    curve_n: list[int] = field(default_factory=lambda: [1, 8, 16])
    curve_points: int = 30
    scaling_exponents: list[float] = field(default_factory=lambda: [2.3, 2.0])
    scaling_n: list[int] = field(default_factory=lambda: [4, 8, 16, 32, 64])
    revival_n: int = 8
    spacing_min_us: float = 0.5
    spacing_max_us: float = 12.0
    spacing_points: int = 231

    def noise(self, with_line: bool = True) -> decoherence.NoiseModel:
        sigma = decoherence.ou_sigma_for_hahn_t2(self.hahn_t2_us * 1e-6, self.tau_c)
        comps = [decoherence.OUNoise(sigma, self.tau_c)]
        if with_line and self.line_amplitude_hz > 0:
            comps.append(decoherence.NarrowbandNoise(self.line_f0_hz, 2 * math.pi * self.line_amplitude_hz,
                                                     self.line_linewidth_hz))
        return decoherence.NoiseModel(comps)

    def validate(self):
        if not self.hahn_t2_us > 0:
            raise ValueError("hahn_t2_us must be > 0")
        self.noise()
        if not self.curve_n or min(self.curve_n) < 1 or self.curve_points < 2:
            raise ValueError("curve_n entries must be >= 1 and curve_points >= 2")
        if len(self.scaling_n) < 4 or min(self.scaling_n) < 1:
            raise ValueError("scaling_n needs at least 4 pulse numbers >= 1")
        if self.revival_n < 1 or self.spacing_points < 10 or not 0 < self.spacing_min_us < self.spacing_max_us:
            raise ValueError("bad revival scan")


@dataclass(frozen=True)
class PostselectionSection:
    sigma_hz: float = 608322.0
    linewidth_hz: float = 641119.0
    n_probe: int = 100
    p_det: float = 0.0146019
    n_c: list[int] = field(default_factory=lambda: [0, 1, 2, 3])

    def model(self) -> decoherence.SpectralDiffusionModel:
        return decoherence.SpectralDiffusionModel(self.sigma_hz, self.linewidth_hz, self.n_probe, self.p_det)

    def validate(self):
        self.model()
        if not self.n_c or min(self.n_c) < 0:
            raise ValueError("n_c must be a non-empty list of integers >= 0")


@dataclass(frozen=True)
class SpinSection:
    ground: str = "ion-X"
    excited: str = "excited"
    neighbors: int = 4  # first k of the default V, V, V, Y shell
    broadening_hz: float = 15e3

    def systems(self):
        return spin.preset(self.ground), spin.preset(self.excited)

    def neighbor_list(self):
        return spin.default_neighbors()[: self.neighbors]

    def validate(self):
        try:
            self.systems()
        except KeyError as e:
            raise ValueError(str(e)) from None
        if not 0 <= self.neighbors <= 4:
            raise ValueError("neighbors must lie in [0, 4]")
        if not self.broadening_hz > 0:
            raise ValueError("broadening_hz must be > 0")


SECTIONS = {
    "run": RunSection,
    "cavity": CavitySection,
    "emitter": EmitterSection,
    "readout": ReadoutSection,
    "levels": LevelsSection,
    "sequences": SequencesSection,
    "noise": NoiseSection,
    "postselection": PostselectionSection,
    "spin": SpinSection,
}


@dataclass(frozen=True)
class ExperimentConfig:
    run: RunSection
    cavity: CavitySection | None = None
    emitter: EmitterSection | None = None
    readout: ReadoutSection | None = None
    levels: LevelsSection | None = None
    sequences: SequencesSection | None = None
    noise: NoiseSection | None = None
    postselection: PostselectionSection | None = None
    spin: SpinSection | None = None

    def to_dict(self) -> dict:
        out = {}
        for name in SECTIONS:
            sec = getattr(self, name)
            if sec is not None:
                out[name] = dataclasses.asdict(sec)
        return out

    def dumps(self) -> str:
        return tomli_w.dumps(self.to_dict())

    def experiment_dict(self) -> dict:
        """Everything that determines results: output location and worker count are left out."""
        d = self.to_dict()
        d["run"] = {k: v for k, v in d["run"].items() if k not in ("out", "workers")}
        return d

    def digest(self) -> str:
        return hashlib.sha256(tomli_w.dumps(self.experiment_dict()).encode()).hexdigest()

    def require(self, *names: str):
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise ConfigError(f"missing required section(s) {', '.join('[' + m + ']' for m in missing)}")


def _check_type(value, hint, where):
    origin = typing.get_origin(hint)
    if origin is list:
        (inner,) = typing.get_args(hint)
        if not isinstance(value, list):
            raise ConfigError(f"expected a list, got {type(value).__name__}", where)
        return [_check_type(v, inner, f"{where}[{i}]") for i, v in enumerate(value)]
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError("expected true/false", where)
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", where)
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", where)
        if not math.isfinite(value) and not (value == math.inf):
            raise ConfigError("expected a finite number or inf", where)
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", where)
        return value
    raise TypeError(f"unsupported field type {hint}")  # pragma: no cover


def _build_section(name: str, raw) -> object:
    cls = SECTIONS[name]
    if not isinstance(raw, dict):
        raise ConfigError("expected a table", f"[{name}]")
    hints = typing.get_type_hints(cls)
    known = {f.name for f in fields(cls)}
    for key in raw:
        if key not in known:
            raise ConfigError(f"unknown key (allowed: {', '.join(sorted(known))})", f"{name}.{key}")
    for f in fields(cls):
        required = f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING
        if required and f.name not in raw:
            raise ConfigError("required key is missing", f"{name}.{f.name}")
    kw = {k: _check_type(v, hints[k], f"{name}.{k}") for k, v in raw.items()}
    sec = cls(**kw)
    try:
        sec.validate()
    except (ValueError, KeyError) as e:
        raise ConfigError(str(e), f"[{name}]") from None
    return sec


def from_dict(raw: dict) -> ExperimentConfig:
    for name in raw:
        if name not in SECTIONS:
            raise ConfigError(f"unknown section (allowed: {', '.join(SECTIONS)})", f"[{name}]")
    if "run" not in raw:
        raise ConfigError("missing required section [run]")
    return ExperimentConfig(**{name: _build_section(name, body) for name, body in raw.items()})


def loads(text: str) -> ExperimentConfig:
    return from_dict(parse(text))


def parse(text: str) -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"TOML syntax error: {e}") from None


def load(path, overrides: typing.Sequence[str] = ()) -> ExperimentConfig:
    """Read ``path``, apply ``section.key=value`` overrides, validate."""
    return from_dict(read_raw(path, overrides))


def read_raw(path, overrides: typing.Sequence[str] = ()) -> dict:
    """Parsed TOML with overrides applied, not yet validated."""
    try:
        with open(path, "rb") as fh:
            text = fh.read().decode()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e.strerror}", str(path)) from None
    raw = parse(text)
    for item in overrides:
        apply_override(raw, item)
    return raw


def parse_value(text: str):
    """A TOML scalar or array; bare words fall back to strings."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_override(raw: dict, item: str):
    if "=" not in item:
        raise ConfigError(f"override {item!r} must look like section.key=value")
    path, value = item.split("=", 1)
    set_path(raw, path.strip(), parse_value(value.strip()))


def set_path(raw: dict, path: str, value):
    parts = path.split(".")
    if len(parts) != 2 or parts[0] not in SECTIONS:
        raise ConfigError("parameter must be section.key with a known section", path)
    raw.setdefault(parts[0], {})[parts[1]] = value

"""Closed-form cavity-QED arithmetic for a single emitter in a resonant cavity.

All angular frequencies are in rad/s, lifetimes in s, lengths in m.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .constants import C, EPS0, HBAR, TWO_PI


@dataclass(frozen=True)
class CavityParams:
    kappa: float  # energy decay rate, rad/s
    mode_volume: float  # m^3
    refractive_index: float
    wavelength: float  # m
    kappa_in_ratio: float = 0.14

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError(f"kappa must be > 0, got {self.kappa}")
        if not self.mode_volume > 0:
            raise ValueError(f"mode_volume must be > 0, got {self.mode_volume}")
        if not self.wavelength > 0:
            raise ValueError(f"wavelength must be > 0, got {self.wavelength}")
        if not self.refractive_index >= 1:
            raise ValueError(f"refractive_index must be >= 1, got {self.refractive_index}")
        if not 0 <= self.kappa_in_ratio <= 1:
            raise ValueError(f"kappa_in_ratio must lie in [0, 1], got {self.kappa_in_ratio}")

    @property
    def omega(self) -> float:
        """Optical angular frequency of the resonant transition."""
        return TWO_PI * C / self.wavelength


@dataclass(frozen=True)
class EmitterParams:
    """Bulk emitter: dipole moment and the partition of the excited-state decay.

    ``gamma_0`` is derived from the three channel rates.
    """

    dipole_moment: float  # C m
    rate_parallel: float  # 1/s, E || c channel back to the readout ground state
    rate_perp: float  # 1/s
    rate_other: float  # 1/s, via other crystal-field levels

    def __post_init__(self):
        for name in ("dipole_moment", "rate_parallel", "rate_perp", "rate_other"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not self.gamma_0 > 0:
            raise ValueError("total decay rate gamma_0 must be > 0")

    @property
    def gamma_0(self) -> float:
        return self.rate_parallel + self.rate_perp + self.rate_other

    @property
    def beta_parallel(self) -> float:
        return self.rate_parallel / self.gamma_0

    @classmethod
    def from_lifetimes(cls, dipole_moment, t1_bulk, t_parallel, perp_fraction=0.5):
        """Build from the bulk lifetime and the radiative lifetime of the E || c channel.

        The remainder ``1/t1_bulk - 1/t_parallel`` is split between the perpendicular
        and other channels by ``perp_fraction``.
        """
        if t_parallel < t1_bulk:
            raise ValueError("t_parallel must be >= t1_bulk")
        rest = 1.0 / t1_bulk - 1.0 / t_parallel
        return cls(dipole_moment, 1.0 / t_parallel, perp_fraction * rest, (1 - perp_fraction) * rest)


@dataclass(frozen=True)
class CouplingResult:
    g: float  # rad/s
    eta: float  # effective Purcell factor beta_parallel * F_p
    purcell_factor: float
    t1_cav: float  # s
    p_cav: float
    beta_cav: float


def single_photon_coupling(emitter: EmitterParams, cavity: CavityParams) -> float:
    """Single-photon coupling g (rad/s) for an ion at the field maximum with aligned dipole."""
    e_vac = math.sqrt(HBAR * cavity.omega / (2 * EPS0 * cavity.refractive_index**2 * cavity.mode_volume))
    return emitter.dipole_moment * e_vac / HBAR


def purcell_enhancement(g: float, cavity: CavityParams, emitter: EmitterParams,
                        detuning: float = 0.0) -> CouplingResult:
    """Resonant Purcell enhancement of the total decay rate.

    Only the resonant case is modeled; a nonzero ``detuning`` is rejected.
    """
    if detuning != 0.0:
        raise NotImplementedError("detuned cavity enhancement is not modeled")
    gamma_0 = emitter.gamma_0
    if gamma_0 <= 0:
        raise ValueError("gamma_0 must be > 0")
    eta = 4 * g**2 / (cavity.kappa * gamma_0)
    t1_cav = 1.0 / (gamma_0 * (1 + eta))
    beta = emitter.beta_parallel
    fp = eta / beta if beta > 0 else math.inf
    return CouplingResult(
        g=g,
        eta=eta,
        purcell_factor=fp,
        t1_cav=t1_cav,
        p_cav=emission_fraction(eta),
        beta_cav=cavity_branching_ratio(beta, t1_cav, 1.0 / gamma_0),
    )


def coupling_from_eta(eta: float, kappa: float, gamma_0: float) -> float:
    """Inverse of the resonant Purcell relation: g from eta."""
    if eta < 0:
        raise ValueError("eta must be >= 0")
    return math.sqrt(eta * kappa * gamma_0 / 4)


def eta_from_lifetimes(t1_cav: float, t1_bulk: float) -> float:
    if not t1_cav > 0:
        raise ValueError("t1_cav must be > 0")
    if t1_cav > t1_bulk:
        raise ValueError("t1_cav > t1_bulk: lifetime inhibition is not modeled")
    return t1_bulk / t1_cav - 1.0


def emission_fraction(beta_fp: float) -> float:
    """Fraction of the emission that goes into the cavity mode."""
    if beta_fp < 0:
        raise ValueError("beta_fp must be >= 0")
    if math.isinf(beta_fp):
        return 1.0
    return beta_fp / (1.0 + beta_fp)


def cavity_branching_ratio(beta_parallel: float, t1_cav: float, t1_bulk: float) -> float:
    """Cavity-enhanced branching ratio into the cycling transition.

    This is a lower bound: decay through other crystal-field levels is assumed
    to end in a different ground state.
    """
    if not 0 <= beta_parallel <= 1:
        raise ValueError("beta_parallel must lie in [0, 1]")
    eta_from_lifetimes(t1_cav, t1_bulk)
    return 1.0 - (1.0 - beta_parallel) * (t1_cav / t1_bulk)


def cavity_branching_from_fp(beta_parallel: float, purcell_factor: float) -> float:
    """Same quantity written in terms of the Purcell factor of the cavity-coupled line."""
    return (1 + purcell_factor) * beta_parallel / (1 + purcell_factor * beta_parallel)


def branching_from_effective(beta_eff: float, p_exc: float) -> float:
    """Undo the finite excitation probability folded into a measured branching ratio."""
    if not 0 < p_exc <= 1:
        raise ValueError("p_exc must lie in (0, 1]")
    return 1.0 - (1.0 - beta_eff) / p_exc


def device_preset() -> tuple[EmitterParams, CavityParams]:
    """Emitter and cavity constants of the measured device (ion X, nanobeam in YVO)."""
    emitter = EmitterParams.from_lifetimes(1.06e-31, t1_bulk=267e-6, t_parallel=763e-6)
    cavity = CavityParams(
        kappa=TWO_PI * 30.7e9,
        mode_volume=0.095e-18,
        refractive_index=2.17,
        wavelength=984.5e-9,
        kappa_in_ratio=0.14,
    )
    return emitter, cavity

"""Solve for the probe linewidth and per-pulse detection probability of the
post-selected Ramsey preset.

Targets: T2* = 1.0 us and 84 % of shots discarded at n_c = 2, with the
unconditioned T2* fixed at 370 ns. The kept ensemble is evaluated by
deterministic quadrature over the detuning distribution, not by sampling.
"""
import math

import numpy as np
from scipy import optimize, stats

T2_STAR_BARE = 370e-9
SIGMA = 1.0 / (math.sqrt(2) * math.pi * T2_STAR_BARE)
N_PROBE = 100
N_C = 2
TARGET_T2, TARGET_DISCARD = 1.0e-6, 0.84

delta = np.linspace(-8 * SIGMA, 8 * SIGMA, 8001)
prior = stats.norm.pdf(delta, scale=SIGMA)


def kept_ensemble(linewidth, p_det):
    p = p_det / (1 + (2 * delta / linewidth) ** 2)
    keep = stats.binom.sf(N_C - 1, N_PROBE, p)
    w = prior * keep
    return w / w.sum(), float(np.sum(prior * keep) / prior.sum())


def t2_star(weights):
    t = np.linspace(0, 3e-6, 200)
    coh = np.abs(np.exp(2j * math.pi * np.outer(t, delta)) @ weights)
    (a, t2), _ = optimize.curve_fit(lambda t, a, t2: a * np.exp(-(t / t2) ** 2), t, coh, p0=[1, 1e-6])
    return abs(t2)


def residual(x):
    lw, pd = math.exp(x[0]), 1 / (1 + math.exp(-x[1]))
    w, kept = kept_ensemble(lw, pd)
    return [math.log(t2_star(w) / TARGET_T2), math.log((1 - kept) / TARGET_DISCARD)]


if __name__ == "__main__":
    sol = optimize.fsolve(residual, [math.log(600e3), math.log(0.02 / 0.98)], xtol=1e-10)
    lw, pd = math.exp(sol[0]), 1 / (1 + math.exp(-sol[1]))
    w, kept = kept_ensemble(lw, pd)
    print(f"sigma     = {SIGMA:.6g} Hz")
    print(f"linewidth = {lw:.6g} Hz")
    print(f"p_det     = {pd:.6g}  (n_probe = {N_PROBE})")
    print(f"T2*(n_c={N_C}) = {t2_star(w) * 1e6:.4f} us, discarded = {1 - kept:.4f}")

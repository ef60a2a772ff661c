"""Solve the per-pulse detection probability that reproduces the Fig. 4B fidelities.

F0 = 96.1 % fixes the background mean; with beta_eff = 0.997 and 400 pulses,
p_tot is tuned so F1 = 64.0 % at n_c = 1. Prints the values frozen in
``ybsim.photon_stats``.
"""
import math

from scipy.optimize import brentq

from ybsim import photon_stats as ps

F0, F1, N, T_R, P_F = 0.961, 0.640, 400, 5e-6, 0.003


def f1_for(p_tot):
    m = ps.ReadoutModel(P_F, p_tot, -math.log(F0) / (N * T_R), N, T_R)
    rep = ps.assignment_errors(ps.background_distribution(m), ps.bright_distribution(m), 1)
    return rep.f_1


if __name__ == "__main__":
    p_tot = brentq(lambda p: f1_for(p) - F1, 1e-4, 0.5, xtol=1e-14)
    print(f"gamma_bg = {-math.log(F0) / (N * T_R)!r} 1/s")
    print(f"p_tot    = {p_tot!r}")
    print(f"check F1 = {f1_for(p_tot):.6f}")

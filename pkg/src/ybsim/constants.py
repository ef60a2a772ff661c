"""Physical constants (CODATA 2018, via scipy.constants) used across the package."""
from scipy import constants as _c

HBAR = _c.hbar  # J s
H = _c.h  # J s
KB = _c.k  # J / K
EPS0 = _c.epsilon_0  # F / m
C = _c.c  # m / s
MU0 = _c.mu_0  # N / A^2
MU_B = _c.physical_constants["Bohr magneton"][0]  # J / T
MU_N = _c.physical_constants["nuclear magneton"][0]  # J / T

TWO_PI = 2.0 * _c.pi


def hz_to_rad(f):
    """Convert a frequency in Hz to an angular frequency in rad/s."""
    return TWO_PI * f


def rad_to_hz(w):
    return w / TWO_PI

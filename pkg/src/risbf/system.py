"""System configuration, beamforming solution container, and the
physical-layer evaluation formulas (transmit power, per-user SINR,
effective channels).

Conventions used throughout the package:

* SINR targets and noise powers are stored linear; dB/dBm conversions
  happen only at the config/CLI boundary.
* User channels h[k] are stored unconjugated; every formula applies the
  conjugate transpose explicitly.
* The RIS vector b stores the conjugated response coefficients, i.e. the
  response matrix is diag(b.conj()).  With the cascade matrix
  Hk = diag(h[k].conj()) @ G this makes the reflected channel read
  b^H Hk, so all quadratic subproblems share the b^H c form.
"""

from dataclasses import dataclass, field

import numpy as np


class ConfigError(ValueError):
    """Invalid system configuration."""


def db_to_linear(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)


def dbm_to_watts(x_dbm):
    return 10.0 ** ((np.asarray(x_dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(x):
    return 10.0 * np.log10(x) + 30.0


def near_square_factors(m):
    """(rows, cols) with rows*cols == m and rows the largest divisor <= sqrt(m)."""
    r = int(np.sqrt(m))
    while m % r:
        r -= 1
    return r, m // r


@dataclass(frozen=True)
class SystemConfig:
    """Dimensions, targets and solver parameters for one scenario.

    m BS antennas are driven by n RF chains of d = m/n antennas each
    (sub-connected); the RIS has f1 x f2 cells.  gamma (linear) and sigma2
    (watts) are per-user arrays.  rho0/c/eps1/eps2 parametrize the
    two-layer penalty solver.
    """

    m: int = 16
    n: int = 4
    k: int = 3
    f1: int = 4
    f2: int = 4
    gamma: np.ndarray = field(default_factory=lambda: np.full(3, 10.0))
    sigma2: np.ndarray = field(default_factory=lambda: np.full(3, dbm_to_watts(-85.0)))
    ris_distance: float = 50.0
    rho0: float = 1e-3
    c: float = 0.9
    eps1: float = 1e-4
    eps2: float = 1e-7

    def __post_init__(self):
        object.__setattr__(self, "gamma", np.atleast_1d(np.asarray(self.gamma, dtype=float)))
        object.__setattr__(self, "sigma2", np.atleast_1d(np.asarray(self.sigma2, dtype=float)))
        if self.n < 1 or self.m % self.n:
            raise ConfigError(f"m={self.m} must be an exact multiple of n={self.n}")
        if self.k > self.n:
            raise ConfigError(f"k={self.k} users exceed n={self.n} RF chains")
        if self.f1 < 1 or self.f2 < 1:
            raise ConfigError("RIS grid must be at least 1x1")
        if self.gamma.shape != (self.k,) or self.sigma2.shape != (self.k,):
            raise ConfigError("gamma and sigma2 must have one entry per user")
        if (self.gamma <= 0).any() or (self.sigma2 <= 0).any():
            raise ConfigError("SINR targets and noise powers must be positive")
        if not 0.0 < self.c < 1.0:
            raise ConfigError("penalty scale c must lie in (0, 1)")
        if self.rho0 <= 0 or self.eps1 <= 0 or self.eps2 <= 0:
            raise ConfigError("rho0, eps1, eps2 must be positive")

    @property
    def d(self):
        return self.m // self.n

    @property
    def f(self):
        return self.f1 * self.f2

    @property
    def bs_geometry(self):
        from .channel import ArrayGeometry

        rows, cols = near_square_factors(self.m)
        return ArrayGeometry(rows, cols)

    @property
    def ris_geometry(self):
        from .channel import ArrayGeometry

        return ArrayGeometry(self.f1, self.f2)


@dataclass
class BeamformingSolution:
    """Digital matrix W (n x k), analog blocks V (n x d, row per chain,
    unit-modulus entries), RIS coefficient vector b (length f, unit-modulus,
    stored conjugated; see module docstring)."""

    W: np.ndarray
    V_blocks: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.complex128)
        self.V_blocks = np.asarray(self.V_blocks, dtype=np.complex128)
        self.b = np.asarray(self.b, dtype=np.complex128)

    def validate_unit_modulus(self, tol=1e-10):
        dev = max(
            np.abs(np.abs(self.V_blocks) - 1.0).max(),
            np.abs(np.abs(self.b) - 1.0).max(),
        )
        if dev >= tol:
            raise ValueError(f"unit-modulus violation {dev:.3e}")
        return dev


@dataclass
class EffectiveChannels:
    """Cached per-solution channel products.

    h_eff[k] = b^H Hk V (length n), c_coeffs[k, j] = Hk V w_j (length f),
    d_coeffs[k, j] = b^H Hk Z_j (length m), where Hk = diag(h[k].conj()) G
    and Z_j x == V w_j for the stacked analog vector x.
    """

    h_eff: np.ndarray
    c_coeffs: np.ndarray
    d_coeffs: np.ndarray


def cascade_matrices(channels):
    """Per-user cascade Hk = diag(h[k].conj()) @ G, stacked (k, f, m)."""
    return channels.h.conj()[:, :, None] * channels.G[None, :, :]


def assemble_analog(V_blocks):
    """Block-diagonal analog matrix: chain n's column carries its block."""
    V_blocks = np.asarray(V_blocks)
    n, d = V_blocks.shape
    V = np.zeros((n * d, n), dtype=np.complex128)
    for i in range(n):
        V[i * d : (i + 1) * d, i] = V_blocks[i]
    return V


def stack_x(V_blocks):
    """Concatenate the per-chain phase vectors into one length-m vector."""
    return np.asarray(V_blocks).reshape(-1).copy()


def unstack_x(x, n):
    """Inverse of stack_x."""
    x = np.asarray(x)
    return x.reshape(n, -1).copy()


def expand_to_antennas(W, d):
    """Repeat each digital row d times: row m of the result is w_{j, chain(m)}."""
    return np.repeat(np.asarray(W), d, axis=0)


def transmit_power(W, d):
    """Total BS transmit power d * sum_k ||w_k||^2 (watts)."""
    W = np.asarray(W)
    return float(d * np.sum(np.abs(W) ** 2))


def effective_channels(channels, solution):
    """Recompute the EffectiveChannels cache from raw channels + solution."""
    H = cascade_matrices(channels)  # (k, f, m)
    d = H.shape[2] // solution.V_blocks.shape[0]
    # cascade[k] = b^H Hk, length m
    casc = np.einsum("f,kfm->km", solution.b.conj(), H)
    h_eff = np.einsum("knd,nd->kn", casc.reshape(casc.shape[0], -1, d), solution.V_blocks)
    P = assemble_analog(solution.V_blocks) @ solution.W  # (m, k) columns V w_j
    c_coeffs = np.einsum("kfm,mj->kjf", H, P)
    Wx = expand_to_antennas(solution.W, d)  # (m, k)
    d_coeffs = casc[:, None, :] * Wx.T[None, :, :]
    return EffectiveChannels(h_eff=h_eff, c_coeffs=c_coeffs, d_coeffs=d_coeffs)


def received_amplitudes(channels, solution):
    """Matrix E with E[k, j] = h[k]^H Theta G V w_j (== b^H c_{k,j})."""
    eff = effective_channels(channels, solution)
    return eff.h_eff @ solution.W


def sinr(k, solution, channels):
    """Received SINR of user k for the given solution (linear)."""
    E = received_amplitudes(channels, solution)
    return sinr_from_amplitudes(E, channels.noise_powers)[k]


def sinr_from_amplitudes(E, noise_powers):
    """Per-user SINR from the amplitude matrix E[k, j] = h~_k w_j."""
    p = np.abs(E) ** 2
    sig = np.diag(p)
    interference = p.sum(axis=1) - sig
    return sig / (interference + noise_powers)


def all_sinrs(solution, channels):
    return sinr_from_amplitudes(received_amplitudes(channels, solution), channels.noise_powers)

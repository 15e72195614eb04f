"""Two-layer penalty solver for SINR-constrained power minimization.

Inner layer: block coordinate descent over the digital beamformer W
(closed form), the RIS phases and the analog phases (both Riemannian CG on
the unit-modulus torus), and the auxiliary amplitudes t_{k,j} (exact
per-user projection onto the SINR cone).  Outer layer: geometric penalty
tightening rho <- rho / c until the maximum squared constraint violation
xi drops below eps2.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import system
from ._kernels import cone_project_row
from .manifold import QuadraticUnitModulusObjective, RcgOptions, rcg_minimize
from .system import BeamformingSolution

OUTER_CAP = 500
INNER_CAP = 50


class ConeProjectionError(RuntimeError):
    """Bisection failed to converge; signals numerical breakdown."""


@dataclass
class PenaltyState:
    """Auxiliary variables and loop bookkeeping for one solve."""

    t: np.ndarray  # (K, K), t[k, j] tracks h~_k w_j
    rho: float
    xi: float = math.inf
    inner_iters: int = 0
    outer_iters: int = 0
    objective_trace: list = field(default_factory=list)


@dataclass
class OuterRecord:
    outer_iter: int
    rho: float
    objective: float
    xi: float


@dataclass
class SolveDiagnostics:
    records: list
    converged: bool
    scale: float  # amplitude applied to W when mapping back to physical units
    xi_trace: np.ndarray = None

    def __post_init__(self):
        if self.xi_trace is None:
            self.xi_trace = np.array([r.xi for r in self.records])


def normalize_channels(channels):
    """Noise-whitened, amplitude-normalized copy of `channels`.

    Each user channel is divided by its noise std (noise becomes 1) and all
    are divided by a common factor that brings the RMS cascade entry to 1.
    Returns (normalized ChannelSet, w_scale): solving on the normalized set
    and multiplying the resulting W by `w_scale` yields a solution of the
    original problem with identical SINRs.
    """
    sigma = np.sqrt(channels.noise_powers)
    hw = channels.h / sigma[:, None]
    # ||diag(conj(h_k)) G||_F^2 = sum_f |h_kf|^2 ||G[f,:]||^2
    g_row = np.sum(np.abs(channels.G) ** 2, axis=1)
    casc2 = np.mean(np.abs(hw) ** 2 @ g_row)
    f, m = channels.G.shape
    amp = np.sqrt(casc2 / (f * m)) if casc2 > 0 else 1.0
    normalized = type(channels)(
        G=channels.G.copy(),
        h=hw / amp,
        noise_powers=np.ones(channels.num_users),
    )
    return normalized, 1.0 / float(amp)


def penalized_objective(solution, state, channels, config):
    """D sum_k ||w_k||^2 + (rho/2) sum_{k,j} |h~_k w_j - t_{k,j}|^2."""
    E = system.received_amplitudes(channels, solution)
    power = system.transmit_power(solution.W, config.d)
    return power + 0.5 * state.rho * float(np.sum(np.abs(E - state.t) ** 2))


def update_digital(channels, solution, state, config):
    """Exact minimizer of the penalized objective in W (first-order condition).

    Solves (2 D I + rho H~^H H~) w_k = rho sum_j h~_j^H t_{j,k} through a
    Cholesky factorization.
    """
    eff = system.effective_channels(channels, solution)
    H = eff.h_eff  # (K, N) rows h~_j
    n = H.shape[1]
    A = 2.0 * config.d * np.eye(n, dtype=np.complex128) + state.rho * (H.conj().T @ H)
    rhs = state.rho * (H.conj().T @ state.t)
    cho = scipy.linalg.cho_factor(A, lower=True)
    return scipy.linalg.cho_solve(cho, rhs)


def _theta_objective(channels, solution, state):
    eff = system.effective_channels(channels, solution)
    k = state.t.shape[0]
    C = eff.c_coeffs.reshape(k * k, -1).T  # columns c_{k,j}
    return QuadraticUnitModulusObjective(C, state.t.reshape(-1))


def update_theta(channels, solution, state, opts=None):
    """RIS phase update: RCG on f(b) = sum |b^H c_{k,j} - t_{k,j}|^2, warm start."""
    obj = _theta_objective(channels, solution, state)
    return rcg_minimize(obj, solution.b, opts).b


def _analog_objective(channels, solution, state):
    H = system.cascade_matrices(channels)
    casc = np.einsum("f,kfm->km", solution.b.conj(), H)
    d = H.shape[2] // solution.V_blocks.shape[0]
    Wx = system.expand_to_antennas(solution.W, d)  # (M, K)
    k = state.t.shape[0]
    D = (casc[:, None, :] * Wx.T[None, :, :]).reshape(k * k, -1)  # rows d_{k,j}
    # f(x) = sum |d_{k,j} x - t_{k,j}|^2 maps to the kernel form with
    # c_i = d_{k,j}^H and targets conj(t_{k,j})
    return QuadraticUnitModulusObjective(D.conj().T, np.conj(state.t.reshape(-1)))


def update_analog(channels, solution, state, opts=None):
    """Analog phase update: RCG over the stacked per-chain vector x."""
    obj = _analog_objective(channels, solution, state)
    x0 = system.stack_x(solution.V_blocks)
    x = rcg_minimize(obj, x0, opts).b
    return system.unstack_x(x, solution.V_blocks.shape[0])


def project_sinr_cone(a, k_idx, gamma_k, sigma2_k, max_iter=200, tol=1e-12):
    """Project amplitude row a onto {t : |t_k|^2 >= gamma_k (sum_{j!=k} |t_j|^2 + sigma2_k)}."""
    a = np.ascontiguousarray(a, dtype=np.complex128)
    t, lam, iters, ok = cone_project_row(a, k_idx, float(gamma_k), float(sigma2_k),
                                         max_iter, tol)
    if not ok:
        raise ConeProjectionError(
            f"cone projection bisection did not converge after {iters} iterations"
        )
    return t


def update_t(channels, solution, state, config):
    """Exact row-wise projection of h~_k w_j onto each user's SINR cone."""
    E = system.received_amplitudes(channels, solution)
    t = np.empty_like(E)
    for k in range(E.shape[0]):
        t[k] = project_sinr_cone(E[k], k, config.gamma[k], channels.noise_powers[k])
    return t


def stopping_indicator(channels, solution, state):
    """xi = max_{k,j} |h~_k w_j - t_{k,j}|^2."""
    E = system.received_amplitudes(channels, solution)
    return float(np.max(np.abs(E - state.t) ** 2))


def _random_phases(rng, shape):
    return np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=shape))


def solve(config, channels, init_seed, *, fixed_theta=None, outer_cap=OUTER_CAP,
          inner_cap=INNER_CAP, rcg_opts=None, normalize=True, validate=False):
    """Run the full two-layer penalty algorithm on one channel realization.

    Returns (BeamformingSolution, PenaltyState, SolveDiagnostics).  The
    solution is expressed in the units of `channels`; the state and the
    per-outer-iteration records are in the internally normalized units
    (noise 1, unit RMS cascade) unless normalize=False.  When fixed_theta
    is given the RIS vector stays at that value and the theta update is
    skipped.  Non-convergence (outer cap hit with xi >= eps2) is reported
    through diagnostics.converged, never masked.
    """
    rcg_opts = rcg_opts or RcgOptions(max_iters=100, grad_tol=1e-9)
    if normalize:
        ch, w_scale = normalize_channels(channels)
    else:
        ch, w_scale = channels, 1.0

    rng = np.random.default_rng(init_seed)
    k, nf = config.k, config.f
    b0 = np.ascontiguousarray(fixed_theta, dtype=np.complex128) if fixed_theta is not None \
        else _random_phases(rng, nf)
    V0 = _random_phases(rng, (config.n, config.d))
    t0 = (rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))) / np.sqrt(2.0)
    for i in range(k):
        t0[i] = project_sinr_cone(t0[i], i, config.gamma[i], ch.noise_powers[i])

    state = PenaltyState(t=t0, rho=config.rho0)
    sol = BeamformingSolution(W=np.zeros((config.n, k), dtype=np.complex128),
                              V_blocks=V0, b=b0)
    sol.W = update_digital(ch, sol, state, config)

    records = []
    converged = False
    for outer in range(1, outer_cap + 1):
        obj_prev = penalized_objective(sol, state, ch, config)
        for _ in range(inner_cap):
            cur = obj_prev
            sol.W = update_digital(ch, sol, state, config)
            if validate:
                cur = _check_descent(cur, sol, state, ch, config, "digital")
            if fixed_theta is None:
                sol.b = update_theta(ch, sol, state, rcg_opts)
                if validate:
                    cur = _check_descent(cur, sol, state, ch, config, "theta")
            sol.V_blocks = update_analog(ch, sol, state, rcg_opts)
            if validate:
                cur = _check_descent(cur, sol, state, ch, config, "analog")
            state.t = update_t(ch, sol, state, config)
            if validate:
                _check_descent(cur, sol, state, ch, config, "t")
                _check_cone_rows(state.t, config.gamma, ch.noise_powers)
            obj = penalized_objective(sol, state, ch, config)
            state.objective_trace.append(obj)
            state.inner_iters += 1
            decrease = obj_prev - obj
            obj_prev = obj
            if decrease < config.eps1:
                break
        state.xi = stopping_indicator(ch, sol, state)
        state.outer_iters = outer
        records.append(OuterRecord(outer, state.rho, obj_prev, state.xi))
        if state.xi < config.eps2:
            converged = True
            break
        state.rho /= config.c

    result = BeamformingSolution(W=w_scale * sol.W, V_blocks=sol.V_blocks, b=sol.b)
    return result, state, SolveDiagnostics(records=records, converged=converged, scale=w_scale)


def _check_descent(obj_before, sol, state, ch, config, label):
    obj = penalized_objective(sol, state, ch, config)
    if obj > obj_before + 1e-9 * max(1.0, abs(obj_before)):
        raise AssertionError(f"{label} update increased the penalized objective "
                             f"({obj_before} -> {obj})")
    return obj


def _check_cone_rows(t, gamma, noise_powers):
    for k in range(t.shape[0]):
        lhs = abs(t[k, k]) ** 2
        rhs = gamma[k] * (np.sum(np.abs(t[k]) ** 2) - lhs + noise_powers[k])
        if lhs < rhs * (1.0 - 1e-9):
            raise AssertionError(f"SINR cone violated for user {k} after t-update")

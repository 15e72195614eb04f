"""Riemannian conjugate gradient over the product of unit circles.

Minimizes quadratic objectives f(b) = sum_i |b^H c_i - t_i|^2 subject to
|b_f| = 1.  Both the RIS phase update and the analog beamformer update
reduce to this problem; the heavy lifting lives in ``_kernels`` (numba by
default, numpy fallback).
"""

from dataclasses import dataclass

import numpy as np

from ._kernels import rcg_kernel


@dataclass
class QuadraticUnitModulusObjective:
    """Coefficient set {(c_i, t_i)} defining f(b) = sum_i |b^H c_i - t_i|^2.

    C stacks the c_i as columns (L x T); t holds the T scalar targets.
    """

    C: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        self.C = np.ascontiguousarray(self.C, dtype=np.complex128)
        self.t = np.ascontiguousarray(np.atleast_1d(self.t), dtype=np.complex128)
        if self.C.ndim != 2 or self.t.shape != (self.C.shape[1],):
            raise ValueError("C must be L x T with one target per column")
        if not (np.isfinite(self.C).all() and np.isfinite(self.t).all()):
            raise ValueError("objective coefficients must be finite")

    @classmethod
    def from_terms(cls, terms):
        """Build from an iterable of (c_i vector, t_i scalar) pairs."""
        cs, ts = zip(*terms)
        return cls(np.stack(cs, axis=1), np.array(ts))

    @property
    def dim(self):
        return self.C.shape[0]

    def value(self, b):
        return float(np.sum(np.abs(self.C.conj().T @ b - np.conj(self.t)) ** 2))


@dataclass
class RcgOptions:
    """Line-search and direction-update knobs.

    initial_step 0 means the adaptive default 1/||grad||; restart_period 0
    means restart every L iterations.  beta_rule only supports the
    nonnegativity-clamped Polak-Ribiere coefficient.
    """

    max_iters: int = 200
    grad_tol: float = 1e-8
    armijo_c: float = 1e-4
    armijo_shrink: float = 0.5
    initial_step: float = 0.0
    beta_rule: str = "pr+"
    restart_period: int = 0

    def __post_init__(self):
        if self.max_iters < 1 or self.grad_tol <= 0:
            raise ValueError("max_iters and grad_tol must be positive")
        if not (0.0 < self.armijo_c < 1.0 and 0.0 < self.armijo_shrink < 1.0):
            raise ValueError("armijo parameters must lie in (0, 1)")
        if self.initial_step < 0 or self.restart_period < 0:
            raise ValueError("initial_step and restart_period must be >= 0")
        if self.beta_rule != "pr+":
            raise ValueError(f"unsupported beta rule {self.beta_rule!r}")


@dataclass
class RcgResult:
    b: np.ndarray
    objective_values: np.ndarray  # f at b0 and after each accepted step
    iterations: int
    resets: int
    max_modulus_deviation: float
    max_tangency_residual: float
    max_descent_inner_product: float
    converged: bool

    @property
    def objective(self):
        return float(self.objective_values[-1])


def check_unit_modulus(b, tol=1e-8):
    dev = float(np.abs(np.abs(b) - 1.0).max())
    if dev > tol:
        raise ValueError(f"vector is not unit-modulus (deviation {dev:.3e})")


def tangent_project(b, z):
    """Orthogonal projection of z onto the tangent space at unit-modulus b."""
    b = np.asarray(b, dtype=np.complex128)
    z = np.asarray(z, dtype=np.complex128)
    check_unit_modulus(b)
    return z - np.real(z * b.conj()) * b


def euclidean_grad(obj, b):
    """2 * sum_i c_i (c_i^H b - conj(t_i))."""
    b = np.asarray(b, dtype=np.complex128)
    return 2.0 * (obj.C @ (obj.C.conj().T @ b - np.conj(obj.t)))


def phase_init(obj):
    """Heuristic start: co-phase with the linear term sum_i c_i conj(t_i)."""
    z = obj.C @ np.conj(obj.t)
    az = np.abs(z)
    return np.where(az > 0, z / np.where(az > 0, az, 1.0), 1.0).astype(np.complex128)


def _escape_probe(CH, tc, b, f):
    """Try small per-coordinate phase twiddles; returns an improving point or None.

    A strict local minimum rejects every probe; a maximum or saddle with a
    descent coordinate (e.g. an antipodal start on the circle) is escaped.
    """
    base = CH @ b - tc
    best_f, best_l, best_rot = f, -1, 1.0
    for theta in (1e-2, 0.5):
        for rot in (np.exp(1j * theta), np.exp(-1j * theta)):
            res = base[:, None] + CH * ((rot - 1.0) * b)[None, :]
            vals = np.sum(np.abs(res) ** 2, axis=0)
            l = int(np.argmin(vals))
            if vals[l] < best_f * (1.0 - 1e-12):
                best_f, best_l, best_rot = float(vals[l]), l, rot
    if best_l < 0:
        return None
    out = b.copy()
    out[best_l] *= best_rot
    out[best_l] /= abs(out[best_l])
    return out


def rcg_minimize(obj, b0, opts=None):
    """Minimize a QuadraticUnitModulusObjective from unit-modulus b0.

    Monotone by construction (Armijo acceptance); the returned iterate is
    exactly renormalized after every retraction.  A zero-gradient start at
    the exact optimum returns b0 unchanged; a zero-gradient start at a
    maximum or saddle is escaped through a coordinate phase probe.  Raises
    on a non-finite objective, which signals bad coefficients.
    """
    opts = opts or RcgOptions()
    b0 = np.ascontiguousarray(b0, dtype=np.complex128)
    if b0.shape != (obj.dim,):
        raise ValueError("b0 length must match the objective dimension")
    check_unit_modulus(b0)

    CH = np.ascontiguousarray(obj.C.conj().T)
    tc = np.conj(obj.t)
    restart = opts.restart_period if opts.restart_period else obj.dim
    f_floor = 1e-16 * float(np.sum(np.abs(tc) ** 2) + np.sum(np.abs(CH) ** 2))

    b = b0
    hist = []
    iters = resets = 0
    mod_dev = tang = 0.0
    ip = -np.inf
    for _ in range(3):
        budget = opts.max_iters - iters
        if budget < 1:
            break
        b, f_hist, it, rs, md, tg, dip = rcg_kernel(
            CH, tc, b, budget, opts.grad_tol, opts.armijo_c,
            opts.armijo_shrink, opts.initial_step, restart,
        )
        hist.append(f_hist if not hist else f_hist[1:])
        iters += int(it)
        resets += int(rs)
        mod_dev = max(mod_dev, float(md))
        tang = max(tang, float(tg))
        ip = max(ip, float(dip))
        f = float(f_hist[-1])
        if f <= f_floor:
            break
        probe = _escape_probe(CH, tc, b, f)
        if probe is None:
            break
        b = probe
        hist.append(np.array([float(np.sum(np.abs(CH @ b - tc) ** 2))]))

    f_hist = np.concatenate(hist)
    if not np.isfinite(f_hist).all():
        raise FloatingPointError("non-finite objective encountered in RCG")
    grad_norm = float(np.linalg.norm(tangent_project(b, euclidean_grad(obj, b))))
    return RcgResult(
        b=b,
        objective_values=f_hist,
        iterations=iters,
        resets=resets,
        max_modulus_deviation=mod_dev,
        max_tangency_residual=tang,
        max_descent_inner_product=ip,
        converged=grad_norm < opts.grad_tol,
    )


def best_of_starts(obj, starts, opts=None):
    """Run rcg_minimize from each start; return (best result, all results)."""
    results = [rcg_minimize(obj, b0, opts) for b0 in starts]
    best = min(results, key=lambda r: r.objective)
    return best, results

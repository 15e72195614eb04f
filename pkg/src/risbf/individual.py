"""Low-complexity sequential design: RIS phases, then analog, then digital.

The three stages run once each, without alternating optimization:

1. RIS phases maximize the worst user's effective channel gain through a
   smoothed-min ascent on the unit-modulus torus (continuation over the
   smoothing temperature, multi-start).
2. The analog beamformer approximates a zero-forcing fully digital
   reference by orthogonal matching pursuit over a per-chain masked DFT-style
   codebook of BS array responses.
3. The digital beamformer solves the classic SINR-constrained power
   minimization through uplink-downlink duality (fixed point + exact
   downlink power rebalancing).
"""

from dataclasses import dataclass

import numpy as np

from .channel import upa_response
from .system import BeamformingSolution, cascade_matrices


class DegenerateChannelError(RuntimeError):
    """Effective channel matrix lost row rank; caller should resample."""


class InfeasibleError(RuntimeError):
    """No digital beamformer meets the SINR targets for the given (V, b)."""


@dataclass
class Codebook:
    """BS array responses on the oversampled angular grid, one per column."""

    mu: int
    n_y: int
    n_z: int
    columns: np.ndarray  # (m, mu^2 * n_y * n_z)


@dataclass
class ZfReference:
    """Fully digital zero-forcing beamformer hitting the SINR targets exactly."""

    F_opt: np.ndarray  # (m, k)


@dataclass
class OmpResult:
    V_blocks: np.ndarray
    residual_norms: np.ndarray  # Frobenius residual after each selection
    selected: np.ndarray  # codebook column chosen for each chain


@dataclass
class RisMaxMinOptions:
    rounds: int = 4
    tau_growth: float = 6.0
    iters_per_round: int = 150
    num_random_starts: int = 100
    power_iters: int = 25
    seed: int = 12345


def user_gains(channels, b):
    """||h_k^H Theta G||^2 for each user at RIS vector b."""
    H = cascade_matrices(channels)
    rows = np.einsum("f,kfm->km", b.conj(), H)
    return np.sum(np.abs(rows) ** 2, axis=1)


def _gains_from_R(R, b):
    return np.real(np.einsum("f,kfg,g->k", b.conj(), R, b))


def _softmin_value_grad(R, b, tau):
    """Smoothed min of the gains and its Euclidean gradient (ascent form)."""
    g = _gains_from_R(R, b)
    shift = g.min()
    w = np.exp(-tau * (g - shift))
    ws = w.sum()
    val = shift - np.log(ws / len(g)) / tau
    grad = 2.0 * np.einsum("k,kfg,g->f", w / ws, R, b)
    return val, grad, g


def _ascend_smoothed_min(R, b0, tau, iters):
    """Riemannian gradient ascent with Armijo backtracking; monotone in the surrogate."""
    b = b0.copy()
    val, grad, _ = _softmin_value_grad(R, b, tau)
    for _ in range(iters):
        gp = grad - np.real(grad * b.conj()) * b
        gn2 = float(np.real(np.vdot(gp, gp)))
        # cutoff relative to the gain scale so tiny physical units still ascend
        if gn2 <= (1e-9 * abs(val)) ** 2:
            break
        alpha = 1.0 / np.sqrt(gn2)
        ok = False
        for _ in range(60):
            z = b + alpha * gp
            az = np.abs(z)
            cand = np.where(az > 0, z / np.where(az > 0, az, 1.0), b)
            v_new, g_new, _ = _softmin_value_grad(R, cand, tau)
            if v_new >= val + 1e-4 * alpha * gn2:
                ok = True
                break
            alpha *= 0.5
        if not ok:
            break
        b, val, grad = cand, v_new, g_new
    return b


def ris_max_min(channels, opts=None):
    """Unit-modulus RIS vector approximately maximizing min_k ||h_k^H Theta G||^2.

    Smoothed-min surrogate -(1/tau) log sum_k exp(-tau g_k(b)) maximized by
    Riemannian ascent with the temperature tau raised over several rounds
    (continuation).  Deterministic: the random starts use a fixed seed.
    """
    opts = opts or RisMaxMinOptions()
    H = cascade_matrices(channels)
    R = np.einsum("kfm,kgm->kfg", H, H.conj())  # R_k = Hk Hk^H
    nf = H.shape[1]
    rng = np.random.default_rng(opts.seed)

    starts = [np.ones(nf, dtype=np.complex128)]
    # per-user co-phasing via unit-modulus power iteration on R_k
    for k in range(R.shape[0]):
        b = np.ones(nf, dtype=np.complex128)
        for _ in range(opts.power_iters):
            z = R[k] @ b
            az = np.abs(z)
            b = np.where(az > 0, z / np.where(az > 0, az, 1.0), b)
        starts.append(b)
    if opts.num_random_starts:
        draws = np.exp(1j * rng.uniform(0, 2 * np.pi, size=(opts.num_random_starts, nf)))
        min_gains = np.array([np.min(_gains_from_R(R, dr)) for dr in draws])
        starts.append(draws[int(np.argmax(min_gains))])

    best_b, best_val = None, -np.inf
    for b0 in starts:
        g0 = _gains_from_R(R, b0)
        scale = max(float(np.mean(g0)), 1e-300)
        b = b0
        tau = 1.0 / scale
        for _ in range(opts.rounds):
            b = _ascend_smoothed_min(R, b, tau, opts.iters_per_round)
            tau *= opts.tau_growth
        val = float(np.min(_gains_from_R(R, b)))
        if val > best_val:
            best_b, best_val = b, val
    return best_b


def zf_reference(channels, b, gamma, sigma2):
    """F_opt = pinv(H~) diag(sqrt(gamma_k sigma2_k)); exact SINR targets, zero interference."""
    H = cascade_matrices(channels)
    Ht = np.einsum("f,kfm->km", np.asarray(b).conj(), H)  # rows h_k^H Theta G
    k = Ht.shape[0]
    sv = np.linalg.svd(Ht, compute_uv=False)
    if sv.size < k or sv[-1] <= max(Ht.shape) * np.finfo(float).eps * sv[0] * 1e3:
        raise DegenerateChannelError("effective channel matrix is rank deficient")
    target = np.sqrt(np.asarray(gamma) * np.asarray(sigma2))
    F_opt = np.linalg.pinv(Ht) @ np.diag(target.astype(np.complex128))
    return ZfReference(F_opt=F_opt)


def build_codebook(mu, n_y, n_z, bs_geom):
    """Array responses at psi_i = 2 pi (i-1)/(mu n_y), phi_j = 2 pi (j-1)/(mu n_z), j-minor."""
    if mu < 1 or n_y < 1 or n_z < 1:
        raise ValueError("mu, n_y, n_z must be >= 1")
    if n_y * n_z != bs_geom.size:
        raise ValueError("codebook grid must match the BS array size")
    cols = []
    for i in range(mu * n_y):
        psi = 2.0 * np.pi * i / (mu * n_y)
        for j in range(mu * n_z):
            phi = 2.0 * np.pi * j / (mu * n_z)
            cols.append(upa_response(psi, phi, bs_geom))
    return Codebook(mu=mu, n_y=n_y, n_z=n_z, columns=np.stack(cols, axis=1))


def omp_analog(F_opt, codebook, n, d):
    """Greedy per-chain codeword selection against the ZF reference.

    The sub-connected mask restricts chain t to rows t*d..(t+1)*d of the
    codebook; masked columns of different chains are orthogonal, so OMP
    picks, at each of n steps, the (chain, column) pair whose masked column
    best correlates with the residual, then refits the digital factor by
    least squares.  Selected segments are renormalized to unit-modulus
    entries (phases kept).
    """
    F_opt = np.asarray(F_opt, dtype=np.complex128)
    m = F_opt.shape[0]
    A = codebook.columns
    resid = F_opt.copy()
    unassigned = list(range(n))
    chosen = {}
    sel_cols = np.zeros((m, 0), dtype=np.complex128)
    norms = []
    for _ in range(n):
        best = (-1.0, None, None)
        for t in unassigned:
            rows = slice(t * d, (t + 1) * d)
            corr = np.sum(np.abs(A[rows].conj().T @ resid[rows]) ** 2, axis=1)
            idx = int(np.argmax(corr))
            if corr[idx] > best[0]:
                best = (float(corr[idx]), t, idx)
        _, t, idx = best
        unassigned.remove(t)
        chosen[t] = idx
        col = np.zeros(m, dtype=np.complex128)
        col[t * d : (t + 1) * d] = A[t * d : (t + 1) * d, idx]
        sel_cols = np.concatenate([sel_cols, col[:, None]], axis=1)
        fbb, *_ = np.linalg.lstsq(sel_cols, F_opt, rcond=None)
        resid = F_opt - sel_cols @ fbb
        norms.append(float(np.linalg.norm(resid)))

    V_blocks = np.empty((n, d), dtype=np.complex128)
    for t in range(n):
        seg = A[t * d : (t + 1) * d, chosen[t]]
        az = np.abs(seg)
        V_blocks[t] = np.where(az > 0, seg / np.where(az > 0, az, 1.0), 1.0)
    return OmpResult(V_blocks=V_blocks,
                     residual_norms=np.array(norms),
                     selected=np.array([chosen[t] for t in range(n)]))


def digital_power_min(channels, b, V_blocks, gamma, sigma2, d,
                      max_iters=5000, tol=1e-12):
    """Minimum-power digital beamformer meeting every SINR target with equality.

    Uplink-downlink duality: fixed-point iteration on the dual uplink
    powers with MMSE receive directions, then a K x K linear solve that
    rebalances downlink powers so all constraints hold tight.  The plain
    interference iteration slows to a crawl near the feasibility boundary,
    so every cycle applies a safeguarded Aitken extrapolation; the stopping
    certificate is the genuine fixed-point residual of an unextrapolated
    step.  Raises InfeasibleError when the iteration diverges.
    """
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    sigma2 = np.atleast_1d(np.asarray(sigma2, dtype=float))
    H = cascade_matrices(channels)
    casc = np.einsum("f,kfm->km", np.asarray(b).conj(), H)
    g_rows = np.einsum("knd,nd->kn", casc.reshape(casc.shape[0], -1, d),
                       np.asarray(V_blocks))  # rows g_k^H = h_k^H Theta G V
    k, n = g_rows.shape
    gh = g_rows / np.sqrt(sigma2)[:, None]  # noise-whitened rows
    amp = float(np.mean(np.linalg.norm(gh, axis=1)))
    if amp <= 0:
        raise InfeasibleError("all effective channels vanish")
    gh = gh / amp  # solve at O(1) scale; W maps back via 1/amp

    gcols = gh.conj().T  # columns ghat_k
    eye = np.eye(n, dtype=np.complex128)

    def step(qv):
        Phi = eye + (gcols * qv) @ gcols.conj().T
        sol = np.linalg.solve(Phi, gcols)  # Phi^{-1} ghat_k per column
        mkk = np.real(np.sum(gcols.conj() * sol, axis=0))
        return gamma * (1.0 - qv * mkk) / mkk

    q = gamma / np.maximum(np.sum(np.abs(gh) ** 2, axis=1), 1e-300)
    q_cap = 1e14 * max(q.sum(), 1.0)
    converged = False
    for _ in range(max_iters):
        q1 = step(q)
        if not np.isfinite(q1).all() or (q1 < 0).any() or q1.sum() > q_cap:
            raise InfeasibleError("dual uplink fixed point diverged")
        resid = np.max(np.abs(q1 - q) / np.maximum(q1, 1e-300))
        if resid < tol:
            q = q1
            converged = True
            break
        q2 = step(q1)
        if not np.isfinite(q2).all() or (q2 < 0).any() or q2.sum() > q_cap:
            raise InfeasibleError("dual uplink fixed point diverged")
        denom = q2 - 2.0 * q1 + q
        safe = np.abs(denom) > 1e-300
        acc = np.where(safe, q2 - (q2 - q1) ** 2 / np.where(safe, denom, 1.0), q2)
        q = acc if (np.isfinite(acc).all() and (acc > 0).all() and acc.sum() <= q_cap) else q2
    if not converged:
        raise InfeasibleError("dual uplink fixed point did not converge")

    Phi = np.eye(n, dtype=np.complex128) + (gcols * q) @ gcols.conj().T
    U = np.linalg.solve(Phi, gcols)
    U = U / np.linalg.norm(U, axis=0, keepdims=True)
    cross = np.abs(gh @ U) ** 2  # cross[k, j] = |ghat_k^H u_j|^2
    M = -cross.copy()
    M[np.arange(k), np.arange(k)] = cross[np.arange(k), np.arange(k)] / gamma
    p = np.linalg.solve(M, np.ones(k))
    if (p <= 0).any() or not np.isfinite(p).all():
        raise InfeasibleError("downlink power rebalancing produced nonpositive powers")
    return (U * np.sqrt(p)) / amp


@dataclass
class IndividualOptions:
    mu: int = 2
    ris_opts: RisMaxMinOptions = None


def individual_solve(config, channels, opts=None):
    """Sequential pipeline: ris_max_min -> ZF + codebook + OMP -> power min."""
    opts = opts or IndividualOptions()
    b = ris_max_min(channels, opts.ris_opts)
    zf = zf_reference(channels, b, config.gamma, config.sigma2)
    geom = config.bs_geometry
    codebook = build_codebook(opts.mu, geom.rows, geom.cols, geom)
    omp = omp_analog(zf.F_opt, codebook, config.n, config.d)
    W = digital_power_min(channels, b, omp.V_blocks, config.gamma, config.sigma2,
                          config.d)
    return BeamformingSolution(W=W, V_blocks=omp.V_blocks, b=b)

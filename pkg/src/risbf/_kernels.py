"""Hot numeric kernels.

Two kernels dominate solver runtime: the Riemannian conjugate-gradient
minimizer for quadratic objectives on the unit-modulus torus, and the
per-user SINR-cone projection (scalar bisection).  Both ship in two
equivalent implementations:

* an explicit-loop version compiled with numba ``@njit`` (default), and
* a vectorized pure-numpy version.

Set ``RISBF_PURE_NUMPY=1`` to skip numba entirely and run the numpy path.
``active_backend()`` reports which one is bound; ``available_backends()``
exposes both for benchmarks and cross-checks (see benchmarks/bench_kernels.py).

Kernel objective convention: minimize f(b) = sum_i |CH[i] @ b - tc[i]|^2
over unit-modulus b, where CH rows are the conjugated coefficient vectors
and tc the conjugated targets.  Both implementations follow the same
iteration: project the Euclidean gradient onto the tangent space, build a
Polak-Ribiere direction from the transported previous one (clamped at
zero, periodic restart, reset to steepest descent if the direction stops
being a descent direction), Armijo backtracking, unit-modulus retraction.

Return signature of the RCG kernel::

    b, f_hist, iters, resets, max_mod_dev, max_tang, max_descent_ip

where f_hist holds the objective at b0 and after every accepted step
(non-increasing by construction), max_mod_dev the largest unit-modulus
deviation over all iterates, max_tang the largest elementwise tangency
residual of the projected gradient, and max_descent_ip the largest
directional derivative actually used (<= 0 when the reset logic works).
"""

import os

import numpy as np

_MAX_BACKTRACKS = 60


def _rcg_loops_impl(CH, tc, b0, max_iters, grad_tol, armijo_c, armijo_shrink,
                    initial_step, restart_period):
    T, L = CH.shape
    b = b0.copy()
    r = np.empty(T, np.complex128)
    f = 0.0
    for i in range(T):
        acc = 0.0 + 0.0j
        for l in range(L):
            acc += CH[i, l] * b[l]
        r[i] = acc - tc[i]
        f += r[i].real * r[i].real + r[i].imag * r[i].imag

    g = np.zeros(L, np.complex128)
    for i in range(T):
        ri = 2.0 * r[i]
        for l in range(L):
            g[l] += CH[i, l].conjugate() * ri
    max_tang = 0.0
    gnorm2 = 0.0
    for l in range(L):
        re = g[l].real * b[l].real + g[l].imag * b[l].imag
        g[l] = g[l] - re * b[l]
        t_res = abs(g[l].real * b[l].real + g[l].imag * b[l].imag)
        if t_res > max_tang:
            max_tang = t_res
        gnorm2 += g[l].real * g[l].real + g[l].imag * g[l].imag

    d = np.empty(L, np.complex128)
    for l in range(L):
        d[l] = -g[l]

    f_hist = np.empty(max_iters + 1, np.float64)
    f_hist[0] = f
    n_hist = 1
    n_resets = 0
    max_mod_dev = 0.0
    max_ip = -np.inf
    alpha_prev = -1.0
    b_trial = np.empty(L, np.complex128)
    r_trial = np.empty(T, np.complex128)
    it = 0
    while it < max_iters:
        if np.sqrt(gnorm2) < grad_tol:
            break
        s = 0.0
        for l in range(L):
            s += g[l].real * d[l].real + g[l].imag * d[l].imag
        if s > 0.0:
            for l in range(L):
                d[l] = -g[l]
            s = -gnorm2
            n_resets += 1
        if s > max_ip:
            max_ip = s

        accepted = False
        f_trial = f
        for round_ in range(2):
            alpha = initial_step if initial_step > 0.0 else 1.0 / np.sqrt(gnorm2)
            if alpha_prev > 0.0 and alpha_prev / armijo_shrink < alpha:
                alpha = alpha_prev / armijo_shrink
            for _ in range(_MAX_BACKTRACKS):
                for l in range(L):
                    z = b[l] + alpha * d[l]
                    az = abs(z)
                    b_trial[l] = z / az if az > 0.0 else b[l]
                f_trial = 0.0
                for i in range(T):
                    acc = 0.0 + 0.0j
                    for l in range(L):
                        acc += CH[i, l] * b_trial[l]
                    r_trial[i] = acc - tc[i]
                    f_trial += r_trial[i].real * r_trial[i].real + r_trial[i].imag * r_trial[i].imag
                if f_trial <= f + armijo_c * alpha * s:
                    accepted = True
                    break
                alpha *= armijo_shrink
            if accepted or s == -gnorm2:
                break
            # conjugate direction made no progress: retry along steepest descent
            for l in range(L):
                d[l] = -g[l]
            s = -gnorm2
            n_resets += 1
        if not accepted:
            break
        alpha_prev = alpha

        for l in range(L):
            b[l] = b_trial[l]
            dev = abs(abs(b[l]) - 1.0)
            if dev > max_mod_dev:
                max_mod_dev = dev
        for i in range(T):
            r[i] = r_trial[i]
        f = f_trial
        it += 1
        f_hist[n_hist] = f
        n_hist += 1

        g_new = np.zeros(L, np.complex128)
        for i in range(T):
            ri = 2.0 * r[i]
            for l in range(L):
                g_new[l] += CH[i, l].conjugate() * ri
        gnorm2_new = 0.0
        cross = 0.0
        for l in range(L):
            re = g_new[l].real * b[l].real + g_new[l].imag * b[l].imag
            g_new[l] = g_new[l] - re * b[l]
            t_res = abs(g_new[l].real * b[l].real + g_new[l].imag * b[l].imag)
            if t_res > max_tang:
                max_tang = t_res
            gnorm2_new += g_new[l].real * g_new[l].real + g_new[l].imag * g_new[l].imag
            # transported previous gradient: project old g onto new tangent
            re_g = g[l].real * b[l].real + g[l].imag * b[l].imag
            tg_re = g[l].real - re_g * b[l].real
            tg_im = g[l].imag - re_g * b[l].imag
            cross += g_new[l].real * tg_re + g_new[l].imag * tg_im

        beta = (gnorm2_new - cross) / gnorm2
        if beta < 0.0:
            beta = 0.0
        if restart_period > 0 and it % restart_period == 0:
            beta = 0.0
        for l in range(L):
            re_d = d[l].real * b[l].real + d[l].imag * b[l].imag
            td = d[l] - re_d * b[l]
            d[l] = -g_new[l] + beta * td
            g[l] = g_new[l]
        gnorm2 = gnorm2_new

    return b, f_hist[:n_hist], it, n_resets, max_mod_dev, max_tang, max_ip


def _rcg_numpy_impl(CH, tc, b0, max_iters, grad_tol, armijo_c, armijo_shrink,
                    initial_step, restart_period):
    b = b0.copy()
    r = CH @ b - tc
    f = float(np.real(np.vdot(r, r)))

    def _proj(z, at):
        return z - np.real(z * at.conj()) * at

    g = _proj(2.0 * (CH.conj().T @ r), b)
    max_tang = float(np.abs(np.real(g * b.conj())).max()) if b.size else 0.0
    gnorm2 = float(np.real(np.vdot(g, g)))
    d = -g

    f_hist = np.empty(max_iters + 1)
    f_hist[0] = f
    n_hist = 1
    n_resets = 0
    max_mod_dev = 0.0
    max_ip = -np.inf
    alpha_prev = -1.0
    it = 0
    while it < max_iters:
        if np.sqrt(gnorm2) < grad_tol:
            break
        s = float(np.real(np.vdot(g, d)))
        if s > 0.0:
            d = -g
            s = -gnorm2
            n_resets += 1
        max_ip = max(max_ip, s)

        accepted = False
        for round_ in range(2):
            alpha = initial_step if initial_step > 0.0 else 1.0 / np.sqrt(gnorm2)
            if alpha_prev > 0.0:
                alpha = min(alpha, alpha_prev / armijo_shrink)
            for _ in range(_MAX_BACKTRACKS):
                z = b + alpha * d
                az = np.abs(z)
                b_trial = np.where(az > 0.0, z / np.where(az > 0.0, az, 1.0), b)
                r_trial = CH @ b_trial - tc
                f_trial = float(np.real(np.vdot(r_trial, r_trial)))
                if f_trial <= f + armijo_c * alpha * s:
                    accepted = True
                    break
                alpha *= armijo_shrink
            if accepted or s == -gnorm2:
                break
            # conjugate direction made no progress: retry along steepest descent
            d = -g
            s = -gnorm2
            n_resets += 1
        if not accepted:
            break
        alpha_prev = alpha

        b = b_trial
        r = r_trial
        f = f_trial
        max_mod_dev = max(max_mod_dev, float(np.abs(np.abs(b) - 1.0).max()))
        it += 1
        f_hist[n_hist] = f
        n_hist += 1

        g_new = _proj(2.0 * (CH.conj().T @ r), b)
        max_tang = max(max_tang, float(np.abs(np.real(g_new * b.conj())).max()))
        gnorm2_new = float(np.real(np.vdot(g_new, g_new)))
        tg = _proj(g, b)
        beta = (gnorm2_new - float(np.real(np.vdot(g_new, tg)))) / gnorm2
        beta = max(beta, 0.0)
        if restart_period > 0 and it % restart_period == 0:
            beta = 0.0
        d = -g_new + beta * _proj(d, b)
        g = g_new
        gnorm2 = gnorm2_new

    return b, f_hist[:n_hist], it, n_resets, max_mod_dev, max_tang, max_ip


def _cone_project_impl(a, k_idx, gamma, sig2, max_iter, tol):
    """Euclidean projection of row a onto {t : |t_k|^2 >= gamma*(sum_{j!=k}|t_j|^2 + sig2)}.

    KKT stationarity gives t_j = a_j/(1 + lam*gamma) for j != k and
    t_k = a_k/(1 - lam); the unique multiplier lam in [0, 1) solves the
    active-constraint equation, found by bisection from the feasible side.
    Returns (t, lam, iters, converged).
    """
    K = a.shape[0]
    ak2 = a[k_idx].real * a[k_idx].real + a[k_idx].imag * a[k_idx].imag
    sa = 0.0
    for j in range(K):
        if j != k_idx:
            sa += a[j].real * a[j].real + a[j].imag * a[j].imag
    need = gamma * (sa + sig2)
    t = a.copy()
    if ak2 >= need:
        return t, 0.0, 0, True

    scale = ak2 if ak2 > need else need  # relative residual scale, unit-agnostic

    if ak2 <= 1e-20 * need:
        # lam -> 1 limit: shrink interferers, place t_k on the boundary
        # (phase of a_k kept, tie-broken to 0 when a_k is exactly zero)
        mag2 = 0.0
        for j in range(K):
            if j != k_idx:
                t[j] = a[j] / (1.0 + gamma)
                mag2 += t[j].real * t[j].real + t[j].imag * t[j].imag
        mag = np.sqrt(gamma * (mag2 + sig2))
        if ak2 > 0.0:
            t[k_idx] = a[k_idx] * (mag / np.sqrt(ak2))
        else:
            t[k_idx] = mag + 0.0j
        return t, 1.0, 0, True

    # g(lam) = ak2/(1-lam)^2 - gamma*(sa/(1+lam*gamma)^2 + sig2); increasing on [0, 1)
    lo = 0.0
    hi = 0.5
    ghi = -1.0
    for _ in range(200):
        om = 1.0 - hi
        ghi = ak2 / (om * om) - gamma * (sa / ((1.0 + hi * gamma) * (1.0 + hi * gamma)) + sig2)
        if ghi >= 0.0:
            break
        lo = hi
        hi = 1.0 - om * 0.25
    converged = False
    iters = 0
    while iters < max_iter:
        iters += 1
        mid = 0.5 * (lo + hi)
        om = 1.0 - mid
        gm = ak2 / (om * om) - gamma * (sa / ((1.0 + mid * gamma) * (1.0 + mid * gamma)) + sig2)
        if gm >= 0.0:
            hi = mid
        else:
            lo = mid
        if abs(gm) <= tol * scale:
            converged = True
            break
        # root pinned to machine precision; the residual is limited by the
        # conditioning of g near the root, not by the bracket
        if hi - lo <= 4e-16 * hi:
            converged = True
            break
    lam = hi  # feasible side: g(hi) >= 0 keeps the cone constraint satisfied
    for j in range(K):
        if j == k_idx:
            t[j] = a[j] / (1.0 - lam)
        else:
            t[j] = a[j] / (1.0 + lam * gamma)
    return t, lam, iters, converged


def _env_flag(name):
    return os.environ.get(name, "").strip().lower() in {"1", "true", "yes", "on"}


_FORCE_NUMPY = _env_flag("RISBF_PURE_NUMPY")
_NUMBA_OK = False
if not _FORCE_NUMPY:
    try:
        from numba import njit

        _NUMBA_OK = True
    except ImportError:
        _NUMBA_OK = False

if _NUMBA_OK:
    rcg_kernel = njit(cache=True)(_rcg_loops_impl)
    cone_project_row = njit(cache=True)(_cone_project_impl)
    _BACKEND = "numba"
else:
    rcg_kernel = _rcg_numpy_impl
    cone_project_row = _cone_project_impl
    _BACKEND = "numpy"


def active_backend():
    """'numba' or 'numpy' depending on RISBF_PURE_NUMPY and numba availability."""
    return _BACKEND


def available_backends():
    """dict backend name -> (rcg, cone_project); compiles numba lazily if present."""
    out = {"numpy": (_rcg_numpy_impl, _cone_project_impl)}
    try:
        from numba import njit as _njit
    except ImportError:
        return out
    out["numba"] = (_njit(cache=True)(_rcg_loops_impl), _njit(cache=True)(_cone_project_impl))
    return out

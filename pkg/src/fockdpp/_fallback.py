"""Pure numpy implementations of the compiled kernels in ``_core``."""

import numpy as np
from scipy.spatial import cKDTree

from .errors import EnvelopeError

_CHUNK = 1 << 20


def log_kernel_series(log_abs_w, arg_w, log_c):
    """Log-modulus and phase of ``sum_n w**n / c_n`` for each ``w``.

    Parameters
    ----------
    log_abs_w, arg_w : ndarray, shape (m,)
        ``log|w|`` (``-inf`` for ``w = 0``) and ``arg w``.
    log_c : ndarray, shape (N,)
        ``log c_n``.

    Returns
    -------
    log_mod, phase : ndarray, shape (m,)
    """
    log_abs_w = np.ascontiguousarray(log_abs_w, dtype=float)
    arg_w = np.ascontiguousarray(arg_w, dtype=float)
    log_c = np.ascontiguousarray(log_c, dtype=float)
    m, N = log_abs_w.size, log_c.size
    out_mod = np.empty(m)
    out_arg = np.empty(m)
    n = np.arange(N, dtype=float)
    step = max(1, _CHUNK // max(N, 1))
    for a in range(0, m, step):
        law = log_abs_w[a:a + step, None]
        zero = np.isneginf(law[:, 0])
        with np.errstate(invalid="ignore"):
            t = n[None, :] * np.where(np.isneginf(law), 0.0, law) - log_c[None, :]
        top = t.max(axis=1, keepdims=True)
        ph = n[None, :] * arg_w[a:a + step, None]
        mag = np.exp(t - top)
        s = np.sum(mag * np.cos(ph), axis=1) + 1j * np.sum(mag * np.sin(ph), axis=1)
        with np.errstate(divide="ignore"):
            lm = top[:, 0] + np.log(np.abs(s))
        out_mod[a:a + step] = np.where(zero, -log_c[0], lm)
        out_arg[a:a + step] = np.where(zero, 0.0, np.angle(s))
    return out_mod, out_arg


def nn_distances(x, y):
    """Nearest-neighbour distance and index for each planar point."""
    pts = np.column_stack([np.asarray(x, float), np.asarray(y, float)])
    n = pts.shape[0]
    if n < 2:
        return np.full(n, np.inf), np.full(n, -1, dtype=np.intp)
    dist, idx = cKDTree(pts).query(pts, k=2)
    return dist[:, 1].copy(), idx[:, 1].astype(np.intp)


def hkpv_first_accept(log_r, theta, half_log_mu, bound, u, log_c, V, k):
    """First proposal accepted by the projection sampler at step ``k``.

    Each proposal ``z_b = exp(log_r[b] + i theta[b])`` has scaled feature
    vector ``g_n = exp(n log_r - log_c[n] / 2 + half_log_mu) e^{i n theta}``.
    Its conditional density is ``p = |g - sum_j <v_j, g> v_j|^2`` where the
    rows ``v_j = V[j]``, ``j < k``, are orthonormal, and it is accepted when
    ``u[b] * bound[b] <= p``.

    Returns
    -------
    index : int
        Accepted proposal or -1.
    residual : ndarray or None
        ``g - sum_j <v_j, g> v_j`` of the accepted proposal.
    """
    N = log_c.size
    n = np.arange(N, dtype=float)
    lg = n[None, :] * log_r[:, None] - 0.5 * log_c[None, :] + half_log_mu[:, None]
    G = np.exp(lg) * np.exp(1j * n[None, :] * theta[:, None])
    if k:
        Vk = V[:k]
        R = G - (G @ Vk.conj().T) @ Vk
    else:
        R = G
    p = np.sum(R.real ** 2 + R.imag ** 2, axis=1)
    hit = np.flatnonzero(u * bound <= p)
    b = int(hit[0]) if hit.size else -1
    seen = p if b < 0 else p[:b + 1]
    if np.any(seen > bound[:seen.size] * (1.0 + 1e-9)):
        raise EnvelopeError("conditional density exceeds the rejection envelope")
    if b < 0:
        return -1, None
    return b, R[b].copy()

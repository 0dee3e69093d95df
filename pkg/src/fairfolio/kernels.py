"""Hot numeric kernels.

Every kernel exists twice: a numba-compiled version and a plain numpy version
with the same floating point expression order, so both paths produce the same
tables.  ``_accel`` decides which one the public names point at.
"""
import numpy as np

from ._accel import HAS_NUMBA, njit

__all__ = [
    "dp_table",
    "dp_table_numpy",
    "dp_table_numba",
    "project_simplex",
    "ascent_simplex",
    "ascent_affine",
]


# ---------------------------------------------------------------------------
# weighted regret DP over sorted thresholds


def dp_table_numpy(r, w, p, base_return=0.0):
    """Fill the (n+1) x (p+1) table of optimal partial weighted regrets.

    ``T[k, q]`` is the least weighted regret of the first ``k`` consumers using
    ``q`` products chosen among their own thresholds, with a default product of
    return ``base_return`` (cash is ``0``) always available.  ``Z[k, q]`` is the
    1-based index of the highest product in an optimal solution; ties go to the
    smallest index.  Entries with ``k < q`` are ``inf``.
    """
    r = np.asarray(r, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    n = r.shape[0]
    W = np.zeros(n + 1)
    WR = np.zeros(n + 1)
    W[1:] = np.cumsum(w)
    WR[1:] = np.cumsum(w * r)
    T = np.full((n + 1, p + 1), np.inf)
    Z = np.zeros((n + 1, p + 1), dtype=np.int64)
    T[:, 0] = WR - base_return * W
    if p == 0 or n == 0:
        return T, Z
    ks = np.arange(n + 1)[:, None]
    zs = np.arange(1, n + 1)[None, :]
    valid_tri = zs <= ks
    # seg[k, z-1] = sum_{i=z..k} w_i (r_i - r_z)
    seg = (WR[:, None] - WR[None, :-1]) - r[None, :] * (W[:, None] - W[None, :-1])
    for q in range(1, p + 1):
        cand = T[:-1, q - 1][None, :] + seg
        mask = valid_tri & (zs >= q)
        cand = np.where(mask, cand, np.inf)
        best = np.argmin(cand, axis=1)
        vals = cand[np.arange(n + 1), best]
        ok = ks[:, 0] >= q
        T[ok, q] = vals[ok]
        Z[ok, q] = best[ok] + 1
    return T, Z


@njit
def _dp_table_jit(r, w, p, base_return):
    n = r.shape[0]
    W = np.zeros(n + 1)
    WR = np.zeros(n + 1)
    for i in range(n):
        W[i + 1] = W[i] + w[i]
        WR[i + 1] = WR[i] + w[i] * r[i]
    T = np.full((n + 1, p + 1), np.inf)
    Z = np.zeros((n + 1, p + 1), dtype=np.int64)
    for k in range(n + 1):
        T[k, 0] = WR[k] - base_return * W[k]
    for q in range(1, p + 1):
        for k in range(q, n + 1):
            best = np.inf
            arg = 0
            for z in range(q, k + 1):
                v = T[z - 1, q - 1] + ((WR[k] - WR[z - 1]) - r[z - 1] * (W[k] - W[z - 1]))
                if v < best:
                    best = v
                    arg = z
            T[k, q] = best
            Z[k, q] = arg
    return T, Z


def dp_table_numba(r, w, p, base_return=0.0):
    return _dp_table_jit(
        np.ascontiguousarray(r, dtype=np.float64),
        np.ascontiguousarray(w, dtype=np.float64),
        int(p),
        float(base_return),
    )


dp_table = dp_table_numba if HAS_NUMBA else dp_table_numpy


def reconstruct(Z, k, q):
    """Walk the argmin table back from ``(k, q)``; returns 0-based indices ascending."""
    out = []
    while q > 0 and k > 0:
        z = int(Z[k, q])
        out.append(z - 1)
        k, q = z - 1, q - 1
    out.reverse()
    return out


# ---------------------------------------------------------------------------
# projected gradient ascent for  max  mu.a - lam * a' Sigma a


@njit
def project_simplex(v):
    """Euclidean projection onto the probability simplex (sort-based)."""
    m = v.shape[0]
    u = np.sort(v)[::-1]
    css = 0.0
    theta = 0.0
    for j in range(m):
        css += u[j]
        t = (css - 1.0) / (j + 1)
        if u[j] - t > 0.0:
            theta = t
    out = v - theta
    for j in range(m):
        if out[j] < 0.0:
            out[j] = 0.0
    return out


@njit
def _project_affine(v):
    return v - (v.sum() - 1.0) / v.shape[0]


@njit
def _ascent(mu, sigma, lam, a0, step, max_iter, tol, simplex):
    # FISTA with gradient-based adaptive restart
    x = a0.copy()
    y = a0.copy()
    t = 1.0
    it = 0
    for it in range(1, max_iter + 1):
        g = mu - 2.0 * lam * (sigma @ y)
        if simplex:
            x_new = project_simplex(y + step * g)
        else:
            x_new = _project_affine(y + step * g)
        diff = x_new - x
        change = np.max(np.abs(diff))
        if np.dot(g, diff) < 0.0:
            t = 1.0
            y = x_new.copy()
        else:
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            y = x_new + ((t - 1.0) / t_new) * diff
            t = t_new
        x = x_new
        if change <= tol:
            break
    return x, it


def ascent_simplex(mu, sigma, lam, a0, step, max_iter=50_000, tol=1e-10):
    return _ascent(mu, sigma, float(lam), a0, float(step), int(max_iter), float(tol), True)


def ascent_affine(mu, sigma, lam, a0, step, max_iter=50_000, tol=1e-10):
    return _ascent(mu, sigma, float(lam), a0, float(step), int(max_iter), float(tol), False)

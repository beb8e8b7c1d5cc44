"""Hot numerical kernels: numba versions with pure-numpy twins.

Every kernel integrates backward in time (tau = T - t), i.e. it steps the
forward-time right-hand side with a flipped sign, and stores samples on the
ascending time grid.  A kernel returns ``(samples, fail)`` where ``fail`` is
the first grid index holding a nonfinite value, or -1 on success.

The numpy twins accumulate in the same element order as the numba loops so
the two backends agree to the last few ulps.
"""

from __future__ import annotations

import numpy as np

from ._backend import NUMBA_ENABLED

# ---------------------------------------------------------------------------
# numpy reference implementations
# ---------------------------------------------------------------------------


def _conv_head_numpy(a, b, n):
    return np.convolve(a, b)[:n]


def _chain_cascade_rk4_numpy(y_T, eps, src1, h, n_steps):
    # phi'_k = sum_{j<=k} phi_j phi_{k-j} - eps*[k=0] + src1*[k=1]
    dim = y_T.shape[0]

    def rhs(y):
        d = _conv_head_numpy(y, y, dim)
        d[0] -= eps
        if dim > 1:
            d[1] += src1
        return d

    out = np.empty((n_steps + 1, dim))
    out[n_steps] = y_T
    y = y_T.copy()
    for m in range(n_steps, 0, -1):
        k1 = -rhs(y)
        k2 = -rhs(y + 0.5 * h * k1)
        k3 = -rhs(y + 0.5 * h * k2)
        k4 = -rhs(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[m - 1] = y
        if not np.all(np.isfinite(y)):
            return out, m - 1
    return out, -1


def _mixed_cascade_rk4_numpy(y_T, u, eps, h, n_steps):
    # state [psi, phi_0..phi_D]:
    #   psi'   = (1-u) psi^2 - eps
    #   phi'_k = u (phi*phi)_k + 2(1-u) psi phi_k - eps*[k=0] + eps*[k=1]
    dim = y_T.shape[0] - 1

    def rhs(y):
        psi = y[0]
        phi = y[1:]
        d = np.empty_like(y)
        d[0] = (1.0 - u) * psi * psi - eps
        dp = u * _conv_head_numpy(phi, phi, dim) + 2.0 * (1.0 - u) * psi * phi
        dp[0] -= eps
        if dim > 1:
            dp[1] += eps
        d[1:] = dp
        return d

    out = np.empty((n_steps + 1, dim + 1))
    out[n_steps] = y_T
    y = y_T.copy()
    for m in range(n_steps, 0, -1):
        k1 = -rhs(y)
        k2 = -rhs(y + 0.5 * h * k1)
        k3 = -rhs(y + 0.5 * h * k2)
        k4 = -rhs(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[m - 1] = y
        if not np.all(np.isfinite(y)):
            return out, m - 1
    return out, -1


def _ring_rk4_numpy(y_T, eps, h, n_steps):
    # cyclic convolution: phi'_k = sum_{i+j = k mod N} phi_i phi_j + eps*[k=1] - eps*[k=0]
    n = y_T.shape[0]

    def rhs(y):
        full = np.convolve(y, y)
        d = full[:n].copy()
        d[: n - 1] += full[n:]
        d[0] -= eps
        d[1] += eps
        return d

    out = np.empty((n_steps + 1, n))
    out[n_steps] = y_T
    y = y_T.copy()
    for m in range(n_steps, 0, -1):
        k1 = -rhs(y)
        k2 = -rhs(y + 0.5 * h * k1)
        k3 = -rhs(y + 0.5 * h * k2)
        k4 = -rhs(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[m - 1] = y
        if not np.all(np.isfinite(y)):
            return out, m - 1
    return out, -1


def _em_advance_numpy(X, phis_t, kappa_t, noise, h, scale):
    # one Euler-Maruyama sweep over all steps in `noise`; X is modified in place
    n_steps, band = phis_t.shape
    n_players = X.shape[1]
    for s in range(n_steps):
        drift = kappa_t[s] * X
        for j in range(band):
            if j >= n_players:
                break
            drift[:, : n_players - j] += phis_t[s, j] * X[:, j:]
        X -= h * drift
        X += noise[:, s, :] * scale
    return X


# ---------------------------------------------------------------------------
# numba twins
# ---------------------------------------------------------------------------

if NUMBA_ENABLED:
    from numba import njit, prange

    @njit(cache=True)
    def _chain_cascade_rk4_numba(y_T, eps, src1, h, n_steps):
        dim = y_T.shape[0]
        out = np.empty((n_steps + 1, dim))
        out[n_steps] = y_T
        y = y_T.copy()
        k = np.empty((4, dim))
        for m in range(n_steps, 0, -1):
            for stage in range(4):
                if stage == 0:
                    z = y
                elif stage == 1:
                    z = y + 0.5 * h * k[0]
                elif stage == 2:
                    z = y + 0.5 * h * k[1]
                else:
                    z = y + h * k[2]
                for i in range(dim):
                    acc = 0.0
                    for j in range(i + 1):
                        acc += z[j] * z[i - j]
                    k[stage, i] = -acc
                k[stage, 0] += eps
                if dim > 1:
                    k[stage, 1] -= src1
            y = y + (h / 6.0) * (k[0] + 2.0 * k[1] + 2.0 * k[2] + k[3])
            out[m - 1] = y
            ok = True
            for i in range(dim):
                if not np.isfinite(y[i]):
                    ok = False
            if not ok:
                return out, m - 1
        return out, -1

    @njit(cache=True)
    def _mixed_cascade_rk4_numba(y_T, u, eps, h, n_steps):
        dim = y_T.shape[0] - 1
        out = np.empty((n_steps + 1, dim + 1))
        out[n_steps] = y_T
        y = y_T.copy()
        k = np.empty((4, dim + 1))
        for m in range(n_steps, 0, -1):
            for stage in range(4):
                if stage == 0:
                    z = y
                elif stage == 1:
                    z = y + 0.5 * h * k[0]
                elif stage == 2:
                    z = y + 0.5 * h * k[1]
                else:
                    z = y + h * k[2]
                psi = z[0]
                k[stage, 0] = -((1.0 - u) * psi * psi - eps)
                for i in range(dim):
                    acc = 0.0
                    for j in range(i + 1):
                        acc += z[1 + j] * z[1 + i - j]
                    k[stage, 1 + i] = -(u * acc + 2.0 * (1.0 - u) * psi * z[1 + i])
                k[stage, 1] += eps
                if dim > 1:
                    k[stage, 2] -= eps
            y = y + (h / 6.0) * (k[0] + 2.0 * k[1] + 2.0 * k[2] + k[3])
            out[m - 1] = y
            ok = True
            for i in range(dim + 1):
                if not np.isfinite(y[i]):
                    ok = False
            if not ok:
                return out, m - 1
        return out, -1

    @njit(cache=True)
    def _ring_rk4_numba(y_T, eps, h, n_steps):
        n = y_T.shape[0]
        out = np.empty((n_steps + 1, n))
        out[n_steps] = y_T
        y = y_T.copy()
        k = np.empty((4, n))
        for m in range(n_steps, 0, -1):
            for stage in range(4):
                if stage == 0:
                    z = y
                elif stage == 1:
                    z = y + 0.5 * h * k[0]
                elif stage == 2:
                    z = y + 0.5 * h * k[1]
                else:
                    z = y + h * k[2]
                for i in range(n):
                    acc = 0.0
                    for j in range(n):
                        r = i - j
                        if r < 0:
                            r += n
                        acc += z[j] * z[r]
                    k[stage, i] = -acc
                k[stage, 0] += eps
                k[stage, 1] -= eps
            y = y + (h / 6.0) * (k[0] + 2.0 * k[1] + 2.0 * k[2] + k[3])
            out[m - 1] = y
            ok = True
            for i in range(n):
                if not np.isfinite(y[i]):
                    ok = False
            if not ok:
                return out, m - 1
        return out, -1

    @njit(cache=True, parallel=True)
    def _em_advance_numba(X, phis_t, kappa_t, noise, h, scale):
        n_paths, n_players = X.shape
        n_steps, band = phis_t.shape
        for p in prange(n_paths):
            drift = np.empty(n_players)
            for s in range(n_steps):
                for i in range(n_players):
                    acc = kappa_t[s] * X[p, i]
                    jmax = band
                    if n_players - i < jmax:
                        jmax = n_players - i
                    for j in range(jmax):
                        acc += phis_t[s, j] * X[p, i + j]
                    drift[i] = acc
                for i in range(n_players):
                    X[p, i] = X[p, i] - h * drift[i] + noise[p, s, i] * scale[i]
        return X


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

if NUMBA_ENABLED:
    chain_cascade_rk4 = _chain_cascade_rk4_numba
    mixed_cascade_rk4 = _mixed_cascade_rk4_numba
    ring_rk4 = _ring_rk4_numba
    em_advance = _em_advance_numba
else:
    chain_cascade_rk4 = _chain_cascade_rk4_numpy
    mixed_cascade_rk4 = _mixed_cascade_rk4_numpy
    ring_rk4 = _ring_rk4_numpy
    em_advance = _em_advance_numpy

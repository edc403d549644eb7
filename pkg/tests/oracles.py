"""Independent numeric oracles.

Nothing here goes through the symbolic differentiation or the compiled
evaluators of the library: metrics are plain Python callables, derivatives
are central differences, inverses come from numpy.
"""

from __future__ import annotations

import numpy as np

FD_H = 1e-4


def fd_partial(fn, x, k, h=FD_H):
    x = np.asarray(x, dtype=float)
    e = np.zeros_like(x)
    e[k] = h
    return (np.asarray(fn(x + e)) - np.asarray(fn(x - e))) / (2 * h)


def fd_gradient(fn, x, h=FD_H):
    """Stack of central-difference partials, new axis first."""
    return np.array([fd_partial(fn, x, k, h) for k in range(len(x))])


def christoffel_fd(metric, x, h=FD_H):
    """Γ^s_{ab} from a callable metric(x) -> (d, d) array."""
    g = np.asarray(metric(x), dtype=float)
    gi = np.linalg.inv(g)
    dg = fd_gradient(metric, x, h)  # dg[l, a, b]
    d = len(x)
    out = np.zeros((d, d, d))
    for s in range(d):
        for a in range(d):
            for b in range(d):
                out[s, a, b] = 0.5 * sum(gi[s, l] * (dg[a, b, l] + dg[b, l, a] - dg[l, a, b]) for l in range(d))
    return out


def riemann_fd(gamma, x, h=FD_H):
    """R[r, s, m, n] = ∂_m Γ^r_{ns} - ∂_n Γ^r_{ms} + Γ^r_{ml} Γ^l_{ns} - Γ^r_{nl} Γ^l_{ms}."""
    G = np.asarray(gamma(x))
    dG = fd_gradient(gamma, x, h)  # dG[m, r, n, s]
    d = len(x)
    R = np.zeros((d,) * 4)
    for r in range(d):
        for s in range(d):
            for m in range(d):
                for n in range(d):
                    v = dG[m, r, n, s] - dG[n, r, m, s]
                    for l in range(d):
                        v += G[r, m, l] * G[l, n, s] - G[r, n, l] * G[l, m, s]
                    R[r, s, m, n] = v
    return R


def deformation_loops(q, f):
    """T^n_{ik} = δ^n_i q̃_k + f^n_i q_k + δ^n_k q̃_i + f^n_k q_i by explicit loops."""
    d = len(q)
    qt = [sum(q[s] * f[s, i] for s in range(d)) for i in range(d)]
    T = np.zeros((d, d, d))
    for n in range(d):
        for i in range(d):
            for k in range(d):
                T[n, i, k] = ((n == i) * qt[k] + f[n, i] * q[k] + (n == k) * qt[i] + f[n, k] * q[i])
    return T


def lift_loops(base_gamma, x, y, h=FD_H):
    """Complete lift coefficients at (x, y) from a callable base connection."""
    n = len(x)
    G = np.asarray(base_gamma(x))
    dG = fd_gradient(base_gamma, x, h)  # dG[s, h, i, k]
    L = np.zeros((2 * n,) * 3)
    for a in range(n):
        for i in range(n):
            for k in range(n):
                L[a, i, k] = G[a, i, k]
                L[n + a, i, n + k] = G[a, i, k]
                L[n + a, n + i, k] = G[a, i, k]
                L[n + a, i, k] = sum(y[s] * dG[s, a, i, k] for s in range(n))
    return L


def pure_residual_rank2_lower(T, f):
    """max |T(fx, y) - T(x, fy)| over basis vectors, by loops."""
    d = T.shape[0]
    worst = 0.0
    for a in range(d):
        for b in range(d):
            left = sum(T[l, b] * f[l, a] for l in range(d))
            right = sum(T[a, l] * f[l, b] for l in range(d))
            worst = max(worst, abs(left - right))
    return worst

"""Independent reference implementations used as test oracles.

Everything here is deliberately naive (enumeration, finite differences,
direct dense solves) and must stay independent of the code under test.
"""

import itertools

import numpy as np


def qp_brute_force(H, q, G=None, h=None, tol=1e-9):
    """Globally solve a convex QP by enumerating candidate active sets.

    For every subset of constraints (smallest first) the equality KKT
    system is solved; by convexity any candidate that is primal and dual
    feasible is the global optimum, so enumeration stops at the first
    subset size that produces one. Subsets of equal size are solved as
    one batched linear solve purely for speed. Returns (u, objective)
    or (None, None) if no KKT point is found (infeasible or too
    degenerate for the enumeration).
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    q = np.asarray(q, dtype=float).ravel()
    n = q.size
    if G is None:
        G = np.zeros((0, n))
        h = np.zeros(0)
    G = np.asarray(G, dtype=float).reshape(-1, n)
    h = np.asarray(h, dtype=float).ravel()
    m = h.size
    scale = max(1.0, np.abs(H).max(initial=0.0), np.abs(q).max(initial=0.0),
                np.abs(h).max(initial=0.0))

    for k in range(0, min(n, m) + 1):
        subsets = np.array(list(itertools.combinations(range(m), k)), dtype=int)
        if subsets.size == 0 and k > 0:
            break
        count = max(len(subsets), 1) if k == 0 else len(subsets)
        dim = n + k
        chunk = max(1, int(5e7 / (dim * dim * 8)))
        best = None
        for start in range(0, count, chunk):
            idx = subsets[start:start + chunk] if k else np.zeros((1, 0), dtype=int)
            c = len(idx)
            kkt = np.zeros((c, dim, dim))
            kkt[:, :n, :n] = H
            if k:
                Ga = G[idx]  # (c, k, n)
                kkt[:, :n, n:] = np.transpose(Ga, (0, 2, 1))
                kkt[:, n:, :n] = Ga
            rhs = np.empty((c, dim))
            rhs[:, :n] = -q
            if k:
                rhs[:, n:] = h[idx]
            try:
                sol = np.linalg.solve(kkt, rhs[..., None])[..., 0]
            except np.linalg.LinAlgError:
                sol = np.stack([
                    np.linalg.lstsq(kkt[i], rhs[i], rcond=None)[0] for i in range(c)
                ])
            residual = np.abs(np.einsum("cij,cj->ci", kkt, sol) - rhs).max(axis=1)
            u = sol[:, :n]
            lam = sol[:, n:]
            ok = residual <= 1e-7 * scale
            if m:
                ok &= (u @ G.T - h).max(axis=1) <= tol * scale
            if k:
                ok &= lam.min(axis=1) >= -tol * scale
            if np.any(ok):
                objs = 0.5 * np.einsum("ci,ij,cj->c", u, H, u) + u @ q
                objs = np.where(ok, objs, np.inf)
                i_best = int(np.argmin(objs))
                cand = (u[i_best], float(objs[i_best]))
                if best is None or cand[1] < best[1]:
                    best = cand
        if best is not None:
            return best
    return (None, None)


def finite_difference_jacobian(fn, x, eps=1e-6):
    """Central-difference Jacobian of fn at x (fn maps vectors to vectors)."""
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(fn(x), dtype=float)
    jac = np.zeros((f0.size, x.size))
    for i in range(x.size):
        dx = np.zeros_like(x)
        dx[i] = eps
        jac[:, i] = (np.asarray(fn(x + dx)) - np.asarray(fn(x - dx))) / (2 * eps)
    return jac


def random_feasible_qp(rng, n_max=10, m_max=20):
    """Draw a random strictly feasible dense QP with PD curvature."""
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(0, m_max + 1))
    M = rng.standard_normal((n, n))
    H = M.T @ M + 0.1 * np.eye(n)
    q = rng.standard_normal(n)
    G = rng.standard_normal((m, n))
    u_feas = rng.standard_normal(n)
    h = G @ u_feas + rng.uniform(0.05, 1.0, size=m)
    return H, q, G, h

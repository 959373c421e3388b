"""Brute-force discretized solver for the vector equilibrium problem.

Everything here is deliberately independent of the analytic machinery in
``measures``: the energy is assembled from first principles on explicit
grids and minimized as a finite-dimensional convex program, so agreement
with the spectral-curve densities is a genuine cross-check rather than a
tautology.

The three-fold symmetric ansatz is reduced to a single ray per measure:
a node x carries the whole rotation orbit {x, omega x, omega^2 x}, which
collapses the log interaction through

    sum_k log|x - omega^k y| = log|x^3 - y^3|,

so the kernels live on one ray with a 1/3 prefactor.  Units: weights1
sums to 1 (first measure), weights2 to 1/2 (second measure), and the
external field acts on the first measure only.

Minimization is projected gradient descent with Armijo backtracking
(globally convergent for this convex energy over the product of scaled
simplices), followed by an exact KKT polish on the discovered active set
-- plain gradient iterations identify the support quickly but close the
last digits slowly, while one symmetric linear solve lands at machine
precision.
"""

from typing import NamedTuple

import numpy as np
from mpmath import mp

from .curve import curve_constants
from .numerics import CTX_DEFAULT, NonConvergence

_GRID_GROWTH = 1.05          # geometric growth of the mu2 cell widths
_TAIL_FACTOR = 50            # R_tail default, in units of x_star
_ARMIJO_SLOPE = 1e-4
_POLISH_PASSES = 30


class NoConvergence(NonConvergence):
    """Iteration budget exhausted; carries the best iterate found."""

    def __init__(self, message, weights1=None, weights2=None, residual=None):
        super().__init__(message)
        self.weights1 = weights1
        self.weights2 = weights2
        self.residual = residual


class DiscretizedProblem(NamedTuple):
    """One-ray discretization of the two-measure energy.

    kernels are the symmetry-reduced log-inverse interactions
    (1/3) log 1/|x^3 -+ y^3|; ``field`` is the external field on the
    first-measure nodes; ``masses`` the prescribed totals (1, 1/2).
    """

    n1: int
    n2: int
    nodes1: np.ndarray
    widths1: np.ndarray
    nodes2: np.ndarray
    widths2: np.ndarray
    K11: np.ndarray
    K22: np.ndarray
    K12: np.ndarray
    field: np.ndarray
    masses: tuple
    metadata: dict


class OracleSolution(NamedTuple):
    weights1: np.ndarray
    weights2: np.ndarray
    multiplier: float


def _geometric_cells(total, n, growth):
    """Cell widths growing by ``growth``, summing to ``total``."""
    w0 = total * (growth - 1.0) / (growth**n - 1.0)
    widths = w0 * growth ** np.arange(n)
    edges = np.concatenate(([0.0], np.cumsum(widths)))
    return (edges[:-1] + edges[1:]) / 2, widths


def _collapsed_kernel(nodes, widths, sign):
    """(1/3) log 1/|x^3 + sign*y^3| on one grid, with the diagonal of the
    sign=-1 case replaced by the midpoint desingularization
    log(2e/width) for the |x - y| factor (the smooth cofactor
    |x^2 + xy + y^2| stays exact)."""
    c = nodes**3
    diff = np.abs(c[:, None] + sign * c[None, :])
    if sign < 0:
        np.fill_diagonal(diff, 1.0)  # placeholder, rewritten below
    K = -np.log(diff) / 3.0
    if sign < 0:
        diag = (np.log(2.0 * np.e / widths) - np.log(3.0 * nodes**2)) / 3.0
        np.fill_diagonal(K, diag)
    return K


def external_field(x, params):
    """(1/t0) (2/(3 sqrt(t3)) x^(3/2) - (t3/3) x^3) on the first-measure ray."""
    t0, t3 = float(params.t0), float(params.t3)
    return (2.0 / (3.0 * np.sqrt(t3)) * x**1.5 - t3 / 3.0 * x**3) / t0


def build_problem(params, n1=400, n2=400, R_tail=None):
    """Assemble the discretized energy on midpoint/geometric grids.

    The first measure lives on a uniform midpoint grid over (0, x_star),
    the second on a geometrically graded grid over (0, R_tail) so both
    the origin and the algebraic tail are resolved.
    """
    if params.regime != "subcritical":
        raise ValueError("discretized problem requires the subcritical regime")
    if n1 < 16 or n2 < 16:
        raise ValueError("node counts below 16 are meaningless here")
    x_star = float(curve_constants(params, CTX_DEFAULT).x_star)
    if R_tail is None:
        R_tail = _TAIL_FACTOR * x_star

    w1 = np.full(n1, x_star / n1)
    x1 = (np.arange(n1) + 0.5) * (x_star / n1)
    x2, w2 = _geometric_cells(R_tail, n2, _GRID_GROWTH)

    K11 = _collapsed_kernel(x1, w1, -1)
    K22 = _collapsed_kernel(x2, w2, -1)
    K12 = -np.log(x1[:, None] ** 3 + x2[None, :] ** 3) / 3.0
    field = external_field(x1, params)
    meta = {"diagonal": "log(2e/width) midpoint desingularization",
            "R_tail": R_tail, "growth": _GRID_GROWTH}
    return DiscretizedProblem(n1, n2, x1, w1, x2, w2,
                              K11, K22, K12, field, (1.0, 0.5), meta)


def energy(problem, u, v):
    """E = u'K11 u + v'K22 v - u'K12 v + u.field."""
    return (u @ problem.K11 @ u + v @ problem.K22 @ v
            - u @ problem.K12 @ v + u @ problem.field)


def _gradients(problem, u, v):
    gu = 2.0 * (problem.K11 @ u) - problem.K12 @ v + problem.field
    gv = 2.0 * (problem.K22 @ v) - problem.K12.T @ u
    return gu, gv


def _project_simplex(y, mass):
    """Euclidean projection onto {w >= 0, sum w = mass} (sort-based)."""
    desc = np.sort(y)[::-1]
    css = (np.cumsum(desc) - mass) / np.arange(1, len(y) + 1)
    k = np.nonzero(desc > css)[0][-1]
    return np.maximum(y - css[k], 0.0)


def kkt_residual(problem, u, v):
    """Scaled complementarity residual and the two multiplier estimates.

    On the active set the gradient must be constant; off it, no smaller.
    """
    gu, gv = _gradients(problem, u, v)
    scale = 1.0 + max(np.abs(gu).max(), np.abs(gv).max())
    res = 0.0
    lams = []
    for g, w in ((gu, u), (gv, v)):
        act = w > 0
        lam = np.median(g[act])
        lams.append(lam)
        res = max(res, np.abs(g[act] - lam).max())
        if not act.all():
            res = max(res, max(0.0, (lam - g[~act]).max()))
    return res / scale, lams


def _polish(problem, u, v):
    """Exact equality-constrained KKT solve on the current active set.

    Deactivates any node the solve drives negative and repeats; returns
    None if the active set fails to settle.
    """
    a1, a2 = u > 0, v > 0
    for _ in range(_POLISH_PASSES):
        i1, i2 = np.nonzero(a1)[0], np.nonzero(a2)[0]
        p, q = len(i1), len(i2)
        M = np.zeros((p + q + 2, p + q + 2))
        M[:p, :p] = 2.0 * problem.K11[np.ix_(i1, i1)]
        M[:p, p:p + q] = -problem.K12[np.ix_(i1, i2)]
        M[p:p + q, :p] = -problem.K12[np.ix_(i1, i2)].T
        M[p:p + q, p:p + q] = 2.0 * problem.K22[np.ix_(i2, i2)]
        M[:p, p + q] = -1.0
        M[p:p + q, p + q + 1] = -1.0
        M[p + q, :p] = 1.0
        M[p + q + 1, p:p + q] = 1.0
        rhs = np.concatenate([-problem.field[i1], np.zeros(q),
                              list(problem.masses)])
        try:
            sol = np.linalg.solve(M, rhs)
        except np.linalg.LinAlgError:
            return None
        uu, vv = sol[:p], sol[p:p + q]
        if uu.min() >= 0 and vv.min() >= 0:
            un, vn = np.zeros_like(u), np.zeros_like(v)
            un[i1], vn[i2] = uu, vv
            return un, vn
        a1[i1[uu < 0]] = False
        a2[i2[vv < 0]] = False
        if not (a1.any() and a2.any()):
            return None
    return None


def solve(problem, max_iter=5000, tol=1e-8):
    """Minimize the discretized energy; return (weights1, weights2, multiplier).

    The multiplier is reported in the plain-log convention (the sign that
    matches the equilibrium constant of the analytic modules): with the
    log-inverse kernels used here it is minus the active-set gradient level
    of the first measure.

    Raises NoConvergence (with the best iterate attached) if the KKT
    residual cannot be brought below tol * scale.
    """
    m1, m2 = problem.masses
    u = np.full(problem.n1, m1 / problem.n1)
    v = m2 * problem.widths2 / problem.widths2.sum()
    e = energy(problem, u, v)
    eta = 0.1
    best = (np.inf, u, v)

    for it in range(max_iter):
        gu, gv = _gradients(problem, u, v)
        while True:
            un = _project_simplex(u - eta * gu, m1)
            vn = _project_simplex(v - eta * gv, m2)
            en = energy(problem, un, vn)
            dec = gu @ (un - u) + gv @ (vn - v)
            if en <= e + _ARMIJO_SLOPE * dec or eta < 1e-14:
                break
            eta /= 2.0
        u, v, e = un, vn, en
        eta = min(eta * 1.25, 10.0)
        if it % 25 == 24 or it == max_iter - 1:
            res, _ = kkt_residual(problem, u, v)
            if res < best[0]:
                best = (res, u.copy(), v.copy())
            if res < 1e-5 or it > max_iter // 2:
                polished = _polish(problem, u, v)
                if polished is not None:
                    pu, pv = polished
                    pres, lams = kkt_residual(problem, pu, pv)
                    if pres < tol:
                        return OracleSolution(pu, pv, -float(lams[0]))
                    if pres < best[0]:
                        best = (pres, pu, pv)
            if res < tol:
                _, lams = kkt_residual(problem, u, v)
                return OracleSolution(u, v, -float(lams[0]))

    raise NoConvergence(
        f"KKT residual {best[0]:.3e} after {max_iter} iterations",
        weights1=best[1], weights2=best[2], residual=best[0])


def ray_density(problem, weights, which):
    """Cell weights -> one-ray density values at the nodes.

    A node's weight carries its whole rotation orbit, so the single-ray
    density is weight / (3 * cell width).
    """
    if which == "mu1":
        return weights / (3.0 * problem.widths1)
    if which == "mu2":
        return weights / (3.0 * problem.widths2)
    raise ValueError(f"unknown measure {which!r}")

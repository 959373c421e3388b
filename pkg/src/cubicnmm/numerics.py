"""Extended-precision arithmetic contexts, quadrature, and polynomial roots.

Everything downstream (spectral-curve branches, equilibrium-measure
integrals, moment systems) runs on top of this module.  The working scalar
type is mpmath's ``mpf``/``mpc``; a :class:`PrecisionContext` pins the binary
mantissa width so that identical inputs at identical precision give
bit-identical results.

Three quadrature entry points are provided:

* :func:`quad_segment` -- composite Gauss-Legendre on a straight segment in
  the complex plane, with panel doubling until the self-reported error
  estimate ``|Q(2N) - Q(N)|`` stabilizes.
* :func:`quad_ray` -- integrals over ``[0, inf)`` along a ray, for integrands
  dominated by ``M * exp(-kappa * t**p)``.  The ray is truncated at a radius
  where the rigorous tail bound drops below the requested tolerance and the
  remaining finite integral is mapped by ``t = R_s*(e^u - 1)``.
* :func:`quad_log_graded` -- integrals with an integrable logarithmic
  singularity at one endpoint, on a geometrically graded panel mesh.

The polynomial solver is an Aberth-Ehrlich simultaneous iteration with a
Newton polish; root labels are ordered by ascending principal argument, then
modulus, so tests can rely on a stable layout.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import mpmath as mp


class NonConvergence(Exception):
    """Root refinement stalled; caller should raise the precision."""


class EvaluationFailure(Exception):
    """An integrand or iteration produced a non-finite value."""


class TailBoundViolation(Exception):
    """Sampled |f| exceeded the decay envelope declared to quad_ray."""


@dataclass(frozen=True)
class PrecisionContext:
    """Immutable binary-precision context.

    Parameters
    ----------
    bits : int
        Mantissa width in bits, at least 64.  ``eps`` is ``2**(1 - bits)``.
    """

    bits: int = 256

    def __post_init__(self):
        if self.bits < 64:
            raise ValueError("PrecisionContext.bits must be >= 64")

    @property
    def eps(self):
        with mp.workprec(self.bits):
            return mp.mpf(2) ** (1 - self.bits)

    def work(self, extra: int = 0):
        """mpmath precision guard: ``with ctx.work(): ...``."""
        return mp.workprec(self.bits + extra)


CTX_DEFAULT = PrecisionContext(256)
CTX_HIGH = PrecisionContext(512)


@dataclass(frozen=True)
class QuadratureRule:
    """Node-count / panel policy for the quadrature routines.

    kind is "gauss-legendre-segment" or "mapped-ray"; ``points`` is the
    Gauss-Legendre node count per panel.  For the ray rule, ``radius`` may
    pin the truncation radius (0 means "choose from the tail bound") and
    ``map_scale`` is the R_s of the exponential substitution.
    """

    kind: str = "gauss-legendre-segment"
    points: int = 48
    max_doublings: int = 8
    radius: float = 0.0
    map_scale: float = 1.0

    def __post_init__(self):
        if self.points < 2:
            raise ValueError("QuadratureRule.points must be >= 2")


@dataclass
class QuadResult:
    value: object
    err_est: object
    panels: int = 0

    def __iter__(self):  # allow  value, err = quad_segment(...)
        yield self.value
        yield self.err_est


def _require_finite(v, where=""):
    if isinstance(v, mp.mpc):
        ok = mp.isfinite(v.real) and mp.isfinite(v.imag)
    else:
        ok = mp.isfinite(v)
    if not ok:
        raise EvaluationFailure(f"non-finite value {v} {where}")
    return v


# ----------------------------------------------------------------------
# Gauss-Legendre nodes
# ----------------------------------------------------------------------

def _legendre_p_dp(n, x):
    """(P_n(x), P_n'(x)) by the three-term recurrence."""
    p0, p1 = mp.mpf(1), x
    for j in range(2, n + 1):
        p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
    if x * x == 1:
        raise EvaluationFailure("Legendre derivative at x = +-1")
    return p1, n * (x * p1 - p0) / (x * x - 1)


@functools.lru_cache(maxsize=None)
def gauss_legendre_nodes(npts, bits):
    """Nodes/weights of the npts-point Gauss-Legendre rule on [-1, 1].

    Newton iteration on the Legendre recurrence from Chebyshev-like initial
    guesses; exploits root symmetry.  Nodes come back ascending; cached per
    (npts, bits).
    """
    n = npts
    with mp.workprec(bits + 32):
        pos = []  # strictly positive roots, descending
        for k in range(n // 2):
            x = mp.cos(mp.pi * (k + mp.mpf(3) / 4) / (n + mp.mpf(1) / 2))
            for _ in range(100):
                p, dp = _legendre_p_dp(n, x)
                dx = p / dp
                x -= dx
                if abs(dx) < mp.eps * 8 * max(abs(x), mp.mpf(1) / 4):
                    break
            _, dp = _legendre_p_dp(n, x)
            pos.append((x, 2 / ((1 - x * x) * dp * dp)))
        nodes = [(-x, w) for (x, w) in pos]
        if n % 2:
            _, dp = _legendre_p_dp(n, mp.mpf(0))
            nodes.append((mp.mpf(0), 2 / (dp * dp)))
        nodes.extend(reversed(pos))
    with mp.workprec(bits):
        xs = tuple(+x for x, _ in nodes)
        ws = tuple(+w for _, w in nodes)
    return xs, ws


def _gl_panel(f, a, b, xs, ws):
    mid = (a + b) / 2
    half = (b - a) / 2
    total = mp.mpf(0)
    for x, w in zip(xs, ws):
        total += w * _require_finite(f(mid + half * x), "in quadrature panel")
    return total * half


def quad_segment(f, a, b, rule=None, ctx=CTX_DEFAULT):
    """Integrate f over the straight segment [a, b].

    Composite Gauss-Legendre; the panel count doubles until
    ``|Q(2N) - Q(N)|`` stops improving, and that difference is reported as
    the error estimate.

    Returns
    -------
    QuadResult with fields value, err_est, panels.
    """
    rule = rule or QuadratureRule()
    with ctx.work(16):
        a, b = mp.mpmathify(a), mp.mpmathify(b)
        xs, ws = gauss_legendre_nodes(rule.points, ctx.bits + 16)
        panels = 1
        prev = _gl_panel(f, a, b, xs, ws)
        best, err = prev, mp.inf
        for _ in range(rule.max_doublings):
            panels *= 2
            cur = mp.mpf(0)
            for i in range(panels):
                pa = a + (b - a) * mp.mpf(i) / panels
                pb = a + (b - a) * mp.mpf(i + 1) / panels
                cur += _gl_panel(f, pa, pb, xs, ws)
            delta = abs(cur - prev)
            best, err, prev = cur, delta, cur
            if delta <= 4 * ctx.eps * (1 + abs(cur)):
                break
    with ctx.work():
        return QuadResult(+best, +err, panels)


def tail_bound(M, kappa, p, R):
    """Rigorous bound on ``M * integral_R^inf exp(-kappa t**p) dt`` for p >= 1.

    Uses ``t**(1-p) <= R**(1-p)`` after the substitution ``v = t**p``.
    """
    M, kappa, p, R = map(mp.mpmathify, (M, kappa, p, R))
    return M * mp.power(R, 1 - p) * mp.e ** (-kappa * R**p) / (kappa * p)


def _choose_radius(M, kappa, p, tol):
    R = mp.power(mp.log(max(mp.mpf(M) / tol, mp.mpf(10))) / kappa, 1 / mp.mpf(p))
    for _ in range(60):
        if tail_bound(M, kappa, p, R) < tol:
            return R
        R *= mp.mpf("1.25")
    raise NonConvergence("cannot satisfy tail tolerance; check kappa, p")


def quad_ray(f, origin, direction, kappa, rule=None, ctx=CTX_DEFAULT,
             M=1, p=mp.mpf(3) / 2, tol=None):
    """Integrate f along {origin + t*direction : t >= 0}.

    The caller declares a decay envelope |f(origin + t d)| <= M exp(-kappa t^p)
    (p >= 1; the contour integrals in this package have p = 3/2 or 3).  The
    ray is truncated where the rigorous tail bound falls below ``tol``
    (default: context eps scaled by M) and the finite part is mapped through
    ``t = R_s (e^u - 1)`` before composite Gauss-Legendre.

    The envelope is spot-checked at the quadrature nodes;
    TailBoundViolation means the declared (M, kappa, p) was wrong.

    Returns QuadResult; err_est includes the tail bound.
    """
    rule = rule or QuadratureRule(kind="mapped-ray")
    with ctx.work(16):
        origin = mp.mpmathify(origin)
        direction = mp.mpmathify(direction)
        direction = direction / abs(direction)
        kappa = mp.mpf(kappa)
        p = mp.mpf(p)
        if p < 1:
            raise ValueError("quad_ray requires p >= 1")
        tol = mp.mpf(tol) if tol is not None else mp.mpf(M) * ctx.eps
        R = mp.mpf(rule.radius) if rule.radius else _choose_radius(M, kappa, p, tol)
        tbound = tail_bound(M, kappa, p, R)
        Rs = mp.mpf(rule.map_scale)
        U = mp.log(R / Rs + 1)
        grace = 1 + mp.mpf(2) ** (-20)

        def g(u):
            t = Rs * (mp.e**u - 1)
            v = _require_finite(f(origin + t * direction), "on ray")
            if abs(v) > grace * M * mp.e ** (-kappa * t**p):
                raise TailBoundViolation(
                    f"|f|={mp.nstr(abs(v), 8)} exceeds envelope at t={mp.nstr(t, 8)}")
            return v * Rs * mp.e**u * direction

        xs, ws = gauss_legendre_nodes(rule.points, ctx.bits + 16)
        panels = 2
        prev = sum(_gl_panel(g, U * mp.mpf(i) / panels, U * mp.mpf(i + 1) / panels,
                             xs, ws) for i in range(panels))
        best, err = prev, mp.inf
        for _ in range(rule.max_doublings):
            panels *= 2
            cur = sum(_gl_panel(g, U * mp.mpf(i) / panels, U * mp.mpf(i + 1) / panels,
                                xs, ws) for i in range(panels))
            delta = abs(cur - prev)
            best, err, prev = cur, delta, cur
            if delta <= 4 * ctx.eps * (1 + abs(cur)) or delta <= tol / 4:
                break
    with ctx.work():
        return QuadResult(+best, +(err + tbound), panels)


def quad_log_graded(f, a, b, ctx=CTX_DEFAULT, levels=40, points=24, toward="a"):
    """Integrate f over [a, b] when f has a log singularity at one endpoint.

    Geometrically graded panels (ratio 1/2) accumulate toward the singular
    endpoint; plain Gauss-Legendre on each panel.  With ``levels`` panel
    levels the untreated sliver has length ``(b-a) * 2**-levels``, which the
    final panel's closed-form log-moment bound keeps below eps for the
    default settings at 256 bits.
    """
    with ctx.work(16):
        a, b = mp.mpmathify(a), mp.mpmathify(b)
        xs, ws = gauss_legendre_nodes(points, ctx.bits + 16)
        total = mp.mpf(0)
        # breakpoints from the far end toward the singularity
        frac = mp.mpf(1)
        pieces = []
        for _ in range(levels):
            nfrac = frac / 2
            pieces.append((nfrac, frac))
            frac = nfrac
        pieces.append((mp.mpf(0), frac))
        for lo, hi in pieces:
            if toward == "a":
                pa, pb = a + (b - a) * lo, a + (b - a) * hi
            else:
                pa, pb = a + (b - a) * (1 - hi), a + (b - a) * (1 - lo)
            total += _gl_panel(f, pa, pb, xs, ws)
    with ctx.work():
        return +total


# ----------------------------------------------------------------------
# Polynomial roots
# ----------------------------------------------------------------------

def _polyval(coeffs, z):
    v = mp.mpc(0)
    for c in coeffs:
        v = v * z + c
    return v


def _polyval_d(coeffs, z):
    """(p(z), p'(z)) by Horner."""
    v = mp.mpc(0)
    d = mp.mpc(0)
    for c in coeffs:
        d = d * z + v
        v = v * z + c
    return v, d


def solve_polynomial(coeffs, ctx=CTX_DEFAULT):
    """All roots (with multiplicity) of a polynomial, highest degree first.

    Aberth-Ehrlich simultaneous iteration started on a perturbed circle at
    the Cauchy root bound, followed by Newton polishing (with a
    multiplicity-2 accelerated step when plain Newton stalls, which keeps
    double roots honest).  Stops when every residual satisfies
    |p(root)| < eps * scale, scale = max|coeff| * max(1, |root|)**deg.

    Roots are returned sorted by ascending principal argument, then modulus.

    Raises NonConvergence when the iteration budget is exhausted.
    """
    with ctx.work(32):
        cs = [mp.mpmathify(c) for c in coeffs]
        while cs and cs[0] == 0:
            cs = cs[1:]
        deg = len(cs) - 1
        if deg < 1:
            raise ValueError("degree must be >= 1 with nonzero leading coefficient")
        lead = cs[0]
        cs = [c / lead for c in cs]
        cmax = max(abs(c) for c in cs)
        radius = 1 + max(abs(c) for c in cs[1:]) if deg else mp.mpf(1)
        # deterministic perturbed starting circle
        roots = [radius * mp.e ** (mp.mpc(0, 1) * (2 * mp.pi * k / deg + mp.mpf(1) / 3))
                 * (1 + mp.mpf(k % 7) / 100)
                 for k in range(deg)]
        eps = ctx.eps

        def scale_for(r):
            return cmax * max(mp.mpf(1), abs(r)) ** deg

        for sweep in range(220):
            moved = mp.mpf(0)
            done = True
            for i in range(deg):
                z = roots[i]
                pv, dv = _polyval_d(cs, z)
                if abs(pv) < eps * scale_for(z):
                    continue
                done = False
                if dv == 0:
                    z *= 1 + eps * 1000
                    pv, dv = _polyval_d(cs, z)
                newton = pv / dv
                s = mp.mpc(0)
                for j in range(deg):
                    if j != i:
                        dz = z - roots[j]
                        if dz == 0:
                            dz = eps * (1 + abs(z))
                        s += 1 / dz
                denom = 1 - newton * s
                step = newton / denom if denom != 0 else newton
                roots[i] = z - step
                moved = max(moved, abs(step))
            if done:
                break
            if moved < eps * (1 + radius) / 4 and sweep > 8:
                break
        # Newton polish, with a doubled step as fallback for multiple roots
        for i in range(deg):
            z = roots[i]
            pv, dv = _polyval_d(cs, z)
            budget = 200
            while abs(pv) >= eps * scale_for(z) and budget > 0:
                budget -= 1
                if dv == 0:
                    raise NonConvergence("derivative vanished during polish")
                step = pv / dv
                z2 = z - step
                pv2, dv2 = _polyval_d(cs, z2)
                if abs(pv2) > abs(pv) / 2:
                    # stalled: try a multiplicity-2 step
                    z3 = z - 2 * step
                    pv3, dv3 = _polyval_d(cs, z3)
                    if abs(pv3) < abs(pv2):
                        z2, pv2, dv2 = z3, pv3, dv3
                if abs(pv2) >= abs(pv) and abs(pv) < mp.sqrt(eps) * scale_for(z):
                    break  # at the floor a multiple root allows
                z, pv, dv = z2, pv2, dv2
            if abs(pv) >= mp.sqrt(eps) * scale_for(z) * 4:
                raise NonConvergence(
                    f"root {i} residual {mp.nstr(abs(pv), 6)} did not converge")
            roots[i] = z
        for z in roots:
            _require_finite(z, "in solve_polynomial")
        roots.sort(key=lambda r: (mp.arg(r), abs(r)))
    with ctx.work():
        return [+r for r in roots]


def richardson_geometric(values, ratio=10, ctx=CTX_DEFAULT):
    """Extrapolate values f(h_k) with h_k = h0 / ratio**k toward h -> 0.

    Assumes an error expansion in integer powers of h; standard Neville
    tableau.  Returns (limit, spread-of-last-column) as an accuracy hint.
    """
    with ctx.work():
        tab = [mp.mpmathify(v) for v in values]
        n = len(tab)
        last = list(tab)
        for m in range(1, n):
            fac = mp.mpf(ratio) ** m
            nxt = []
            for k in range(n - m):
                nxt.append((fac * last[k + 1] - last[k]) / (fac - 1))
            last = nxt
        spread = abs(last[0] - tab[-1]) if n > 1 else mp.mpf(0)
        return +last[0], +spread

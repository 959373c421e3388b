"""Airy-weight multiple orthogonal polynomials and their asymptotics.

The degree-n monic polynomial is pinned down by n moment conditions split
between two Airy-type weights: ceil(n/2) conditions against the level-0
weight and floor(n/2) against the level-1 (derivative) weight.  The moment
integrals run over three contours, each connecting two of the asymptotic
directions arg z in {-pi/3, pi/3, pi} through the origin; every contour is
realized as a difference of two straight rays.  On those rays each Airy
solution is oscillatory-neutral and the cubic factor exp(n t3 z^3 / (3 t0))
is purely damping, so the integrands never grow and never cancel -- unlike
on the deformed segment-plus-leg representation, where the integrand humps
to e^{O(n)} before the endpoint contribution emerges.  The deformed pieces
(see :mod:`cubicnmm.airy`) are therefore used for pointwise weight
evaluation only; quadrature always happens on the rays, which give the
same moments by entirety of the weights.

Beyond the construction itself the module measures everything the theory
predicts about P_n: coefficient sparsity mod 3, zero clustering on the
trefoil Sigma_1, the moment recursion that ties shifted moment columns
together, agreement with the brute-force sesquilinear form, and the
exterior asymptotics P_n ~ m11 e^{n g1} with its O(1/n) error rate.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import mpmath as mp

from .airy import OverflowAtPrecision, ScaleConstants, solution_y
from .curve import curve_constants
from .numerics import (
    CTX_DEFAULT,
    NonConvergence,
    PrecisionContext,
    QuadratureRule,
    gauss_legendre_nodes,
    quad_ray,
    solve_polynomial,
    tail_bound,
)
from . import growth as _growth
from . import measures as _measures


class SingularSystem(NonConvergence):
    """The moment system lost all its pivots; raise the precision."""


# weight index on each contour: the level-0 weight on contour j is a
# difference y_a - y_b of Airy solutions, and the level-1 weight takes the
# same difference of derivatives
_WPAIR = {0: (2, 1), 1: (1, 0), 2: (0, 2)}

# ray p enters contour j with this sign (contour j = ray_{j+1} - ray_j,
# rays ordered (-pi/3, +pi/3, pi))
_RAY_IN_CONTOUR = (
    (-1, 0, 1),   # ray 0 starts contour 0, ends contour 2
    (1, -1, 0),   # ray 1 ends contour 0, starts contour 1
    (0, 1, -1),   # ray 2 ends contour 1, starts contour 2
)

_Y_CACHE = {}
_Y_CACHE_CAP = 400_000


def _y_triple(u, deriv, ctx):
    """(y0, y1, y2) (or derivatives) at u, memoized on the exact value."""
    key = (u, deriv, ctx.bits)
    hit = _Y_CACHE.get(key)
    if hit is None:
        if len(_Y_CACHE) >= _Y_CACHE_CAP:
            _Y_CACHE.clear()
        hit = tuple(solution_y(i, u, deriv=deriv, ctx=ctx) for i in range(3))
        _Y_CACHE[key] = hit
    return hit


def _ray_fractions(ctx):
    """Ray directions as fractions of pi: exp(i pi f) for f in the tuple."""
    with ctx.work():
        third = mp.mpf(1) / 3
        return (-third, third, mp.mpf(1))


# ----------------------------------------------------------------------
# contour geometry
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ContourConfig:
    """Geometry of the deformed contour plus the quadrature policy.

    The deformed representation consists of the three segments
    [0, omega^j x_hat] and, from each anchor omega^j x_hat, two straight
    legs going to infinity at angle offsets +-leg_offset from the anchor
    ray.  The admissible offset band is (pi/6, pi/3); the default pi/4
    puts the leg attached at omega x_hat at absolute asymptotic angle
    5 pi/12.  ``points``/``max_doublings`` control the ray quadrature.
    """

    x_hat: object
    leg_offset: object
    points: int = 24
    max_doublings: int = 12

    @classmethod
    def for_model(cls, params, ctx=CTX_DEFAULT):
        cc = curve_constants(params, ctx)
        with ctx.work():
            return cls(x_hat=+cc.x_hat, leg_offset=+(mp.pi / 4))

    def validate(self):
        off = mp.mpf(self.leg_offset)
        if not (mp.pi / 6 < off < mp.pi / 3):
            raise ValueError(
                "leg_offset must lie strictly between pi/6 and pi/3")
        if not (self.x_hat > 0):
            raise ValueError("x_hat must be positive")
        if self.points < 4 or self.max_doublings < 1:
            raise ValueError("quadrature policy too small")

    def segments(self, ctx=CTX_DEFAULT):
        """The three bounded pieces (0, omega^j x_hat)."""
        with ctx.work():
            om = mp.expjpi(mp.mpf(2) / 3)
            return tuple((mp.mpc(0), om**j * self.x_hat) for j in range(3))

    def legs(self, ctx=CTX_DEFAULT):
        """(anchor, absolute angle) for the six unbounded pieces."""
        with ctx.work():
            om = mp.expjpi(mp.mpf(2) / 3)
            out = []
            for j in range(3):
                base = 2 * mp.pi * j / 3
                for sgn in (+1, -1):
                    out.append((om**j * self.x_hat,
                                base + sgn * mp.mpf(self.leg_offset)))
            return tuple(out)


# ----------------------------------------------------------------------
# weights on the original contours and their moments
# ----------------------------------------------------------------------

_SC_CACHE = {}


def _scale_constants(n, params, ctx):
    key = (n, params.t0, params.t3, ctx.bits)
    hit = _SC_CACHE.get(key)
    if hit is None:
        if len(_SC_CACHE) >= 256:
            _SC_CACHE.clear()
        hit = ScaleConstants.for_model(n, params, ctx)
        _SC_CACHE[key] = hit
    return hit


def contour_weight(level, j, n, params, z, ctx=CTX_DEFAULT):
    """Weight w_{level,j,n} at z, exact constants included.

    Level 0 carries d_n (y_a - y_b)(c_n z) exp(n t3 z^3/(3 t0)) and level 1
    carries -d_n^2 times the same difference of derivatives; (a, b) depends
    on the contour index j.  The weights are entire, so z is unrestricted.
    """
    if level not in (0, 1):
        raise ValueError("level must be 0 or 1")
    if j not in (0, 1, 2):
        raise ValueError("contour index must be 0, 1 or 2")
    with ctx.work(16):
        z = mp.mpmathify(z)
        sc = _scale_constants(n, params, ctx)
        a, b = _WPAIR[j]
        ys = _y_triple(sc.c_n * z, level == 1, ctx)
        val = (ys[a] - ys[b]) * mp.exp(
            n * params.t3 / (3 * params.t0) * z**3)
        const = sc.d_n if level == 0 else -sc.d_n**2
        return +(const * val)


_RW_CACHE = {}
_RW_CACHE_CAP = 200_000


def _ray_weight(level, p, n, params, z, ctx):
    """Combined weight picked up by ray p from its two adjacent contours.

    Memoized on the exact node value: the moment quadrature reuses one
    node ladder for every power of z, so all powers after the first see
    cache hits only.
    """
    key = (level, p, n, params.t0, params.t3, z, ctx.bits)
    hit = _RW_CACHE.get(key)
    if hit is None:
        if len(_RW_CACHE) >= _RW_CACHE_CAP:
            _RW_CACHE.clear()
        total = mp.mpc(0)
        for j, sgn in enumerate(_RAY_IN_CONTOUR[p]):
            if sgn:
                total += sgn * contour_weight(level, j, n, params, z, ctx=ctx)
        hit = total
        _RW_CACHE[key] = hit
    return hit


class MomentTable(NamedTuple):
    """Contour moments of both weight levels, with error bounds.

    ``m0[j]`` / ``m1[j]`` are the integrals of z^j against the level-0 /
    level-1 weights summed over the three contours, exact constants
    included.  Rotation covariance forces m_l[j] = 0 unless j = l (mod 3);
    the vanishing entries are carried through anyway and come out at
    quadrature noise, which is itself a check of the whole chain.
    """

    n: int
    size: int
    m0: tuple
    m1: tuple
    err0: tuple
    err1: tuple

    def entry(self, level, j):
        return (self.m0, self.m1)[level][j]

    def scale(self):
        return max(max(abs(v) for v in self.m0),
                   max(abs(v) for v in self.m1))


# working precision for weight evaluation inside the moment quadrature:
# the ray integrals are only resolved to _TOL_BITS anyway, so there is no
# point paying full 512-bit Airy arithmetic when the context is large
_TOL_BITS = 192
_EVAL_BITS_CAP = 256


def moment_table(n, params, contour=None, ctx=CTX_DEFAULT, size=None,
                 direct_upto=3):
    """Moments of z^j against both weight levels, j = 0..size-1.

    ``size`` defaults to ceil(3n/2), which is what the degree-n linear
    system consumes.  Entries with j < direct_upto are sums of three ray
    integrals through :func:`cubicnmm.numerics.quad_ray`, sharing one
    truncation radius per level so the doubling ladders visit identical
    nodes for every power and the memoized Airy triples are reused.  The
    remaining entries follow by the exact integration-by-parts ladder

        (n t3 / t0) m0[k+2] = -k m0[k-1] + (n / t0) m1[k]
        (n t3 / t0) m1[k+2] = -k m1[k-1] + (n / (t0 t3)) m0[k+1]

    (differentiate z^k y(c_n z) e^{n t3 z^3/(3 t0)} and z^k y' (...) and
    integrate over the rays; the z = 0 boundary terms cancel across the
    three rays because the Airy solutions sum to zero).  The ladder is an
    identity of the weights, not of their symmetry class: the measured
    zero-class noise at j < direct_upto propagates through it, so the
    selection rule stays a genuine check for the whole table.  Pass
    ``direct_upto=None`` to measure every entry by quadrature instead.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if params.regime != "subcritical":
        raise ValueError("moment tables are defined for subcritical parameters")
    if contour is None:
        contour = ContourConfig.for_model(params, ctx)
    contour.validate()
    if size is None:
        size = (3 * n + 1) // 2
    if direct_upto is None:
        direct_upto = size
    direct_upto = min(max(direct_upto, 3 if size >= 3 else size), size)
    eval_ctx = ctx if ctx.bits <= _EVAL_BITS_CAP else \
        PrecisionContext(_EVAL_BITS_CAP)
    with ctx.work(16):
        t0, t3 = params.t0, params.t3
        kappa_full = n * t3 / (3 * t0)
        fracs = _ray_fractions(ctx)
        tol_abs = mp.mpf(2) ** (-min((3 * ctx.bits) // 4, _TOL_BITS))
        one_third = mp.mpf(1) / 3

        # envelope prescan: the cubic factor is the only decay on the rays
        # (the Airy part is oscillatory there), so |W| e^{+kappa r^3} is a
        # bounded profile; sweep it coarsely and take 4x for grid gaps
        scan_ctx = PrecisionContext(64)
        base = {}
        r_hi = max(mp.mpf(4), (92 / kappa_full) ** one_third)
        scan_r = [r_hi * (2 * i + 1) / 96 for i in range(48)]
        for level in (0, 1):
            for p, fr in enumerate(fracs):
                eio = mp.expjpi(fr)
                m = mp.mpf(0)
                for r in scan_r:
                    w = _ray_weight(level, p, n, params, r * eio, scan_ctx)
                    m = max(m, abs(w) * mp.exp(kappa_full * r**3))
                base[(level, p)] = 4 * max(m, mp.mpf(10) ** -40)

        # per-level truncation radius sized for the worst direct power:
        # |z^k W| <= base r^k e^{-kappa_full r^3}
        #         <= [base R^k e^{-k/3}] e^{-(kappa_full - k/(3R^3)) r^3}
        # (the bracketed fold peaks exactly at r = R)
        k_top = direct_upto - 1

        def declared(level_base, k, r_cut):
            kap = kappa_full - k / (3 * r_cut**3)
            return level_base * r_cut**k * mp.exp(-mp.mpf(k) / 3), kap

        rules = {}
        for level in (0, 1):
            b_top = max(base[(level, p)] for p in range(3))
            r_cut = ((mp.log(b_top / tol_abs + 10) + k_top) / kappa_full) \
                ** one_third
            while True:
                m_decl, kap = declared(b_top, k_top, r_cut)
                if kap > 0 and tail_bound(m_decl, kap, 3, r_cut) <= tol_abs:
                    break
                r_cut *= mp.mpf("1.1")
            rules[level] = QuadratureRule(
                kind="mapped-ray", points=contour.points,
                max_doublings=contour.max_doublings, radius=float(r_cut))

        values = {0: [], 1: []}
        errors = {0: [], 1: []}
        for level in (0, 1):
            r_cut = mp.mpf(rules[level].radius)
            for k in range(direct_upto):
                val = mp.mpc(0)
                err = mp.mpf(0)
                for p, fr in enumerate(fracs):
                    direction = mp.expjpi(fr)

                    def f(z, _level=level, _p=p, _k=k):
                        return z**_k * _ray_weight(_level, _p, n, params,
                                                   z, eval_ctx)

                    m_decl, kap = declared(base[(level, p)], k, r_cut)
                    res = quad_ray(f, 0, direction, kap, rule=rules[level],
                                   ctx=ctx, M=m_decl, p=3, tol=tol_abs)
                    val += res.value
                    err += res.err_est
                values[level].append(+val)
                errors[level].append(+err)

        # exact upward ladder for the remaining entries
        cfac = t0 / (n * t3)          # 1 / (3 kappa_full)
        for k in range(direct_upto, size):
            j = k - 2
            values[0].append(+(-j * cfac * values[0][k - 3]
                               + values[1][k - 2] / t3))
            errors[0].append(+(j * cfac * errors[0][k - 3]
                               + errors[1][k - 2] / t3))
            values[1].append(+(-j * cfac * values[1][k - 3]
                               + values[0][k - 1] / t3**2))
            errors[1].append(+(j * cfac * errors[1][k - 3]
                               + errors[0][k - 1] / t3**2))
    return MomentTable(n=n, size=size,
                       m0=tuple(values[0]), m1=tuple(values[1]),
                       err0=tuple(errors[0]), err1=tuple(errors[1]))


def _mu_reduction(table, params, j, k, ctx):
    """<z^j, z^k> collapsed to single-contour entries via the Airy equation.

    y'' = u y pulls every derivative level of the second slot back to
    levels 0 and 1; the constants are exact (d_n^3 = t0/(n t3))."""
    t3 = params.t3
    d3 = ScaleConstants.for_model(table.n, params, ctx).d_n ** 3
    if k == 0:
        return table.m0[j]
    if k == 1:
        return table.m1[j]
    if k == 2:
        return table.m0[j + 1] / t3
    if k == 3:
        return -d3 * table.m0[j] + table.m1[j + 1] / t3
    if k == 4:
        return -2 * d3 * table.m1[j] + table.m0[j + 2] / t3**2
    raise ValueError("k > 4 not reducible here")


def moment_recursion_residual(table, params, block=3, ctx=CTX_DEFAULT,
                              points=12):
    """Two-route check of the moment structure on a block of mu entries.

    The sesquilinear moments mu[j,k] = <z^j, z^k> satisfy the structure
    recursion k t0 mu[j,k-1] - n mu[j+1,k] + n t3 mu[j,k+2] = 0 and
    collapse, for k <= 4, onto the single-contour table (see
    :func:`_mu_reduction`).  The reductions satisfy the recursion
    identically, so the content is in comparing routes: this computes
    mu[j,k] for j < block, k <= 4 by direct double-contour quadrature
    and returns the worst |reduction - direct| / scale.  Wrong exact
    constants (d_n, c_n, the 1/t3 weights) break it immediately; with
    correct constants it sits at double-quadrature accuracy.
    """
    if block < 1 or block > 3:
        raise ValueError("block must be 1..3 (reductions stop at k = 4)")
    if table.size < block + 2:
        raise ValueError("table too small for the requested block")
    n = table.n
    mu_direct = _hermitian_moment_block(n, params, block - 1, 4, ctx,
                                        points=points)
    with ctx.work():
        worst = mp.mpf(0)
        scale = max(abs(v) for row in mu_direct for v in row)
        for j in range(block):
            for k in range(5):
                d = abs(_mu_reduction(table, params, j, k, ctx)
                        - mu_direct[j][k])
                worst = max(worst, d)
        return +(worst / scale)


# ----------------------------------------------------------------------
# the polynomials
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class MonicPolynomial:
    """Monic solution of the two-weight moment conditions.

    ``coeffs`` is ascending with coeffs[-1] == 1 exactly; ``zeros`` come
    from the package root finder; ``nu`` is the normalized counting
    measure, a tuple of (zero, 1/degree) pairs.
    """

    degree: int
    coeffs: tuple
    zeros: tuple
    nu: tuple

    def __post_init__(self):
        if self.coeffs[-1] != 1:
            raise ValueError("polynomial must be monic")
        if len(self.coeffs) != self.degree + 1:
            raise ValueError("coefficient count does not match degree")

    def __call__(self, z):
        z = mp.mpmathify(z)
        acc = mp.mpc(0)
        for c in reversed(self.coeffs):
            acc = acc * z + c
        return acc


def _n_max(bits):
    return bits // 8


def _solve_full_pivot(a, b, ctx):
    """Column-scaled Gaussian elimination with full pivoting.

    The shifted-moment system behaves like a Vandermonde relative and
    loses roughly 0.7 digits per degree; full pivoting on the scaled
    matrix keeps the loss at that empirical floor instead of amplifying
    it.  Raises SingularSystem when no usable pivot remains.
    """
    m = len(a)
    with ctx.work(64):
        aa = [[mp.mpc(x) for x in row] for row in a]
        bb = [mp.mpc(x) for x in b]
        col_scale = []
        for j in range(m):
            s = max(abs(aa[i][j]) for i in range(m))
            if s == 0:
                raise SingularSystem(f"column {j} vanished")
            col_scale.append(s)
            for i in range(m):
                aa[i][j] /= s
        thresh = mp.mpf(2) ** (-(6 * ctx.bits) // 10)
        row_perm = list(range(m))
        col_perm = list(range(m))
        for step in range(m):
            piv, pi, pj = mp.mpf(0), step, step
            for i in range(step, m):
                for j in range(step, m):
                    v = abs(aa[i][j])
                    if v > piv:
                        piv, pi, pj = v, i, j
            if piv < thresh:
                raise SingularSystem(
                    f"pivot {mp.nstr(piv, 5)} below threshold at step {step}")
            if pi != step:
                aa[pi], aa[step] = aa[step], aa[pi]
                bb[pi], bb[step] = bb[step], bb[pi]
                row_perm[pi], row_perm[step] = row_perm[step], row_perm[pi]
            if pj != step:
                for row in aa:
                    row[pj], row[step] = row[step], row[pj]
                col_perm[pj], col_perm[step] = col_perm[step], col_perm[pj]
            inv = 1 / aa[step][step]
            for i in range(step + 1, m):
                f = aa[i][step] * inv
                if f == 0:
                    continue
                aa[i][step] = mp.mpc(0)
                for j in range(step + 1, m):
                    aa[i][j] -= f * aa[step][j]
                bb[i] -= f * bb[step]
        x = [mp.mpc(0)] * m
        for i in range(m - 1, -1, -1):
            acc = bb[i]
            for j in range(i + 1, m):
                acc -= aa[i][j] * x[j]
            x[i] = acc / aa[i][i]
        out = [mp.mpc(0)] * m
        for k in range(m):
            out[col_perm[k]] = x[k] / col_scale[col_perm[k]]
        return out


def _assemble_and_solve(n, table, ctx):
    rows0 = (n + 1) // 2
    rows1 = n // 2
    a, b = [], []
    for k in range(rows0):
        a.append([table.m0[j + k] for j in range(n)])
        b.append(-table.m0[n + k])
    for k in range(rows1):
        a.append([table.m1[j + k] for j in range(n)])
        b.append(-table.m1[n + k])
    coeffs = _solve_full_pivot(a, b, ctx)
    with ctx.work(32):
        worst, scale = mp.mpf(0), mp.mpf(10) ** -60
        for i in range(n):
            acc = -b[i]
            mag = abs(b[i])
            for j in range(n):
                acc += a[i][j] * coeffs[j]
                mag += abs(a[i][j]) * abs(coeffs[j])
            worst = max(worst, abs(acc))
            scale = max(scale, mag)
        if worst > mp.mpf(10) ** -15 * scale:
            raise SingularSystem(
                f"system residual {mp.nstr(worst / scale, 5)} too large")
    return coeffs


def orthopoly(n, params, contour=None, ctx=CTX_DEFAULT):
    """The degree-n monic polynomial for the two Airy weights.

    Solves the n x n shifted-moment system at extended precision; on a
    singular or ill-conditioned solve the whole construction is retried
    once with doubled precision before giving up.  The asymptotic
    statements elsewhere in the package assume n even; odd n goes through
    the same construction and is simply not covered by those guarantees.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > _n_max(ctx.bits):
        raise ValueError(
            f"n = {n} needs more than {ctx.bits} bits (limit {_n_max(ctx.bits)})")

    def build(c):
        table = moment_table(n, params, contour=contour, ctx=c)
        return _assemble_and_solve(n, table, c)

    try:
        coeffs = build(ctx)
        zero_ctx = ctx
    except SingularSystem:
        zero_ctx = PrecisionContext(2 * ctx.bits)
        coeffs = build(zero_ctx)

    with zero_ctx.work():
        ascending = tuple(+c for c in coeffs) + (mp.mpf(1),)
        descending = list(reversed(ascending))
        zeros = tuple(solve_polynomial(descending, ctx=zero_ctx))
        wt = mp.mpf(1) / n
        nu = tuple((z, wt) for z in zeros)
    return MonicPolynomial(degree=n, coeffs=ascending, zeros=zeros, nu=nu)


# ----------------------------------------------------------------------
# zero diagnostics
# ----------------------------------------------------------------------

def distance_to_sigma1(z, params, ctx=CTX_DEFAULT):
    """Distance from z to the three-ray star of support segments."""
    with ctx.work():
        z = mp.mpmathify(z)
        x_star = curve_constants(params, ctx).x_star
        om = mp.expjpi(mp.mpf(2) / 3)
        best = mp.inf
        for j in range(3):
            e = om**j
            t = mp.re(z * mp.conj(e))
            t = min(max(t, mp.mpf(0)), x_star)
            best = min(best, abs(z - t * e))
        return +best


class ZeroDiagnostics(NamedTuple):
    max_distance: object
    nu: tuple


def zero_diagnostics(poly, params, ctx=CTX_DEFAULT):
    """Worst zero-to-support distance plus the counting measure."""
    if not poly.zeros:
        raise ValueError("polynomial has no computed zeros")
    with ctx.work():
        worst = max(distance_to_sigma1(z, params, ctx) for z in poly.zeros)
    return ZeroDiagnostics(max_distance=+worst, nu=poly.nu)


# ----------------------------------------------------------------------
# brute-force sesquilinear form
# ----------------------------------------------------------------------

_EPSILON_JK = ((0, -1, 1), (1, 0, -1), (-1, 1, 0))


def _coeffs_of(f):
    if isinstance(f, MonicPolynomial):
        return f.coeffs
    return tuple(mp.mpmathify(c) for c in f)


def _polyval_ascending(coeffs, z):
    acc = mp.mpc(0)
    for c in reversed(coeffs):
        acc = acc * z + c
    return acc


def _form_block(fcs, gcs, n, params, ctx, points, panels, radius):
    """All pairwise forms <f_a, g_b> on one shared tensor-product grid.

    Both contour families are expanded into ray pairs, giving nine double
    integrals combined through the epsilon matrix.  The expensive part is
    the kernel exp(-(n/t0) r_i phase s_j); the nine ray pairs share only
    three distinct phases e^{i(theta_p + theta_q)}, so three kernel
    matrices serve the whole block and every extra entry costs a cheap
    contraction.  Aims at ~1e-12 relative accuracy regardless of context
    (this is a validation route, not a production one), hence the capped
    digits guard in the truncation radius.
    """
    with ctx.work(16):
        t0, t3 = params.t0, params.t3
        kappa = n * t3 / (3 * t0)
        hump = (n / t0) / (3 * t3**2)
        digits_guard = mp.mpf("0.75") * min(ctx.bits, 192) * mp.log(2) + 40
        r_cut = mp.mpf(radius) if radius is not None else \
            ((hump + digits_guard) / kappa) ** mp.mpf("1/3")
        c_abs = n / t0
        cycles = c_abs * r_cut**2 / (2 * mp.pi)
        npan = panels if panels is not None else max(12, int(7 * cycles / points) + 1)

        xs, ws = gauss_legendre_nodes(points, ctx.bits + 16)
        nodes, weights = [], []
        h = r_cut / npan
        for ipan in range(npan):
            lo = ipan * h
            for xi, wi in zip(xs, ws):
                nodes.append(lo + h * (xi + 1) / 2)
                weights.append(wi * h / 2)

        # conjugating a contour permutes the asymptotic directions within
        # the same three-ray set, so the w-side rays reuse the z-side
        # directions; only the combination matrix below changes
        fracs = _ray_fractions(ctx)
        exact_fracs = (Fraction(-1, 3), Fraction(1, 3), Fraction(1))

        def side_values(coeff_list):
            per_ray = []
            for fr in fracs:
                eio = mp.expjpi(fr)
                cube = [mp.exp(kappa * (r * eio) ** 3) * eio * wq
                        for r, wq in zip(nodes, weights)]
                per_ray.append([[_polyval_ascending(coeffs, r * eio) * cu
                                 for r, cu in zip(nodes, cube)]
                                for coeffs in coeff_list])
            return per_ray

        fv = side_values(fcs)
        gv = side_values([tuple(mp.conj(c) for c in gc) for gc in gcs])

        # ray-combination matrix: E[p][q] = sum_{j,k} C[p][j] eps[j][k] Cbar[q][k]
        cmat = _RAY_IN_CONTOUR
        cbar = ((1, -1, 0), (-1, 0, 1), (0, 1, -1))
        emat = [[sum(cmat[p][j] * _EPSILON_JK[j][k] * cbar[q][k]
                     for j in range(3) for k in range(3))
                 for q in range(3)] for p in range(3)]

        out = [[mp.mpc(0) for _ in gcs] for _ in fcs]
        scale = n / t0
        kernels = {}
        for p in range(3):
            for q in range(3):
                if emat[p][q] == 0:
                    continue
                key = (exact_fracs[p] + exact_fracs[q]) % 2
                if key not in kernels:
                    phase = mp.expjpi(mp.mpf(key.numerator) / key.denominator)
                    kernels[key] = [[mp.exp(-scale * ri * phase * sj)
                                     for sj in nodes] for ri in nodes]
                ker = kernels[key]
                for b, grow in enumerate(gv[q]):
                    col = [mp.fdot(krow, grow) for krow in ker]
                    for a, frow in enumerate(fv[p]):
                        out[a][b] += emat[p][q] * mp.fdot(frow, col)
        return [[+(v / (2j * mp.pi)) for v in row] for row in out]


def hermitian_form_bruteforce(f, g, n, params, ctx=CTX_DEFAULT,
                              points=16, panels=None, radius=None):
    """<f, g> by direct double-contour quadrature (validation only).

    f and g are ascending coefficient sequences (or MonicPolynomial); the
    second slot is conjugate-linear.  The integrand carries an interior
    hump of size exp((n/t0)/(3 t3^2)) before the cubic decay wins, so this
    stays practical only for small n and small degree -- which is all the
    validation needs.  Independent of the moment-table machinery.
    """
    fc = _coeffs_of(f)
    gc = _coeffs_of(g)
    if len(fc) > 9 or len(gc) > 9:
        raise ValueError("brute-force form is limited to degree <= 8")
    return _form_block([fc], [gc], n, params, ctx, points, panels, radius)[0][0]


def _hermitian_moment_block(n, params, jmax, kmax, ctx, points=12,
                            panels=None, radius=None):
    """mu[j][k] = <z^j, z^k> for j <= jmax, k <= kmax, sharing kernels."""
    monos = [tuple([0] * d + [1]) for d in range(max(jmax, kmax) + 1)]
    return _form_block(monos[:jmax + 1], monos[:kmax + 1], n, params, ctx,
                       points, panels, radius)


# ----------------------------------------------------------------------
# asymptotic residuals
# ----------------------------------------------------------------------

class AsymptoticsResidual(NamedTuple):
    sup_abs: object
    sup_normalized: object


def _validate_testpoints(testpoints, params, domain, ctx):
    x_star = curve_constants(params, ctx).x_star
    pts = [mp.mpmathify(z) for z in testpoints]
    if not pts:
        raise ValueError("need at least one test point")
    for z in pts:
        if not _growth.is_exterior(z, domain):
            raise ValueError(f"test point {mp.nstr(z, 8)} is not exterior")
        if distance_to_sigma1(z, params, ctx) < mp.mpf("0.2") * x_star:
            raise ValueError(f"test point {mp.nstr(z, 8)} hugs the zero set")
    return pts


def log_potential_residual(poly, params, testpoints, ctx=CTX_DEFAULT):
    """sup over test points of |(1/n) log|P(z)| - Re g1(z)|."""
    domain = _growth.growth_domain(params, ctx=ctx)
    pts = _validate_testpoints(testpoints, params, domain, ctx)
    with ctx.work():
        worst = mp.mpf(0)
        for z in pts:
            lp = mp.log(abs(poly(z))) / poly.degree
            g1 = _measures.g_function("g1", z, params, ctx).value
            worst = max(worst, abs(lp - mp.re(g1)))
        return +worst


def strong_asymptotics_residual(poly, params, testpoints, ctx=CTX_DEFAULT):
    """sup |P e^{-n g1} - m11|, raw and divided by |m11|, over test points."""
    domain = _growth.growth_domain(params, ctx=ctx)
    pts = _validate_testpoints(testpoints, params, domain, ctx)
    n = poly.degree
    with ctx.work():
        worst_abs, worst_rel = mp.mpf(0), mp.mpf(0)
        for z in pts:
            g1 = _measures.g_function("g1", z, params, ctx).value
            if abs(mp.re(g1)) * n > mp.mpf(2) ** 24:
                raise OverflowAtPrecision("n g1 exceeds the exponent budget")
            lhs = poly(z) * mp.exp(-n * g1)
            m = _growth.m11(z, domain, ctx)
            d = abs(lhs - m)
            worst_abs = max(worst_abs, d)
            worst_rel = max(worst_rel, d / abs(m))
        return AsymptoticsResidual(sup_abs=+worst_abs, sup_normalized=+worst_rel)

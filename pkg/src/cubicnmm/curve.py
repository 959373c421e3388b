"""Spectral curve of the cubic model: constants, branches, Cauchy transforms.

The model potential is V(z) = (t3/3) z^3 with an area parameter t0.  The
spectral curve is the cubic (in xi)

    xi^3 - t3 z^2 xi^2 - (t0 t3 + 1/t3) z xi + z^3 + A = 0,

whose three solutions xi_1, xi_2, xi_3 carry the Cauchy transforms of the
limiting measures.  Everything here is subcritical/critical only: the model
degenerates at t0 = 1/(8 t3^2) (boundary cusps) and the curve construction
breaks beyond it.

Branch labels follow the sector scheme: letting S0 = {|arg z| < pi/3},
S1 = {pi/3 < arg z < pi}, S2 = {-pi < arg z < -pi/3},

    xi_1 = t3 z^2 + t0 F1(z)
    xi_2 = +- z^(1/2)/sqrt(t3) + t0 (F2 - F1)(z)   (+ in S0, - in S1 u S2)
    xi_3 = -+ z^(1/2)/sqrt(t3) - t0 F2(z)          (- in S0, + in S1 u S2)

with principal fractional powers.  Labels at finite z are obtained by
continuation from the far field along a radial path; on the support interval
(0, x_star) the conjugate-pair rule applies directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import mpmath as mp

from .numerics import (CTX_DEFAULT, EvaluationFailure, solve_polynomial)


class SupercriticalRegime(Exception):
    """Operation requires t0 <= 1/(8 t3^2)."""


class RootMismatch(Exception):
    """Discriminant roots do not form the expected {x*^3, x_hat^3 (double)} pattern."""


class BranchTrackingFailure(Exception):
    """Root continuation became ambiguous (too close to a branch point)."""


class OnSupport(Exception):
    """Evaluation point lies on the support of the relevant measure."""


def critical_t0(t3):
    """Critical area parameter 1/(8 t3^2) for cubic coupling t3 > 0."""
    t3 = mp.mpf(t3)
    if t3 <= 0:
        raise ValueError("t3 must be positive")
    return 1 / (8 * t3**2)


@dataclass(frozen=True)
class ModelParams:
    """Model parameters (t0, t3), both positive, with derived regime."""

    t0: object
    t3: object

    def __post_init__(self):
        object.__setattr__(self, "t0", mp.mpf(self.t0))
        object.__setattr__(self, "t3", mp.mpf(self.t3))
        if not (self.t0 > 0 and self.t3 > 0 and mp.isfinite(self.t0)
                and mp.isfinite(self.t3)):
            raise ValueError("t0, t3 must be finite and positive")

    @property
    def regime(self):
        tc = critical_t0(self.t3)
        if self.t0 < tc:
            return "subcritical"
        if self.t0 == tc:
            return "critical"
        return "supercritical"

    def require_not_supercritical(self):
        if self.regime == "supercritical":
            raise SupercriticalRegime(
                f"t0={mp.nstr(self.t0, 8)} exceeds critical value "
                f"{mp.nstr(critical_t0(self.t3), 8)}")


@dataclass(frozen=True)
class CurveConstants:
    x_star: object
    x_hat: object
    A: object
    t0_crit: object


def curve_constants(params, ctx=CTX_DEFAULT):
    """Closed-form constants x_star, x_hat, A of the spectral curve.

    x_star = (3/(4 t3)) (1 - s)^(2/3),  x_hat = (3 + s)/(4 t3),
    A = (1 + 20 t0 t3^2 - 8 t0^2 t3^4 - s^3) / (32 t3^3),
    where s = sqrt(1 - 8 t0 t3^2).  At the critical point s = 0 these
    collapse to x_star = x_hat = 3/(4 t3) and A = 27/(256 t3^3).
    """
    params.require_not_supercritical()
    with ctx.work():
        t0, t3 = params.t0, params.t3
        s = mp.sqrt(1 - 8 * t0 * t3**2)
        A = (1 + 20 * t0 * t3**2 - 8 * t0**2 * t3**4 - s**3) / (32 * t3**3)
        x_star = 3 / (4 * t3) * mp.power(1 - s, mp.mpf(2) / 3)
        x_hat = (3 + s) / (4 * t3)
        return CurveConstants(+x_star, +x_hat, +A, +critical_t0(t3))


def spectral_coeffs(z, params, ctx=CTX_DEFAULT):
    """Coefficients (descending) of the spectral cubic in xi at the point z."""
    t0, t3 = params.t0, params.t3
    A = curve_constants(params, ctx).A
    return [mp.mpf(1), -t3 * z**2, -(t0 * t3 + 1 / t3) * z, z**3 + A]


def discriminant_zeta(params, ctx=CTX_DEFAULT, tol=None):
    """Discriminant of the spectral cubic as a cubic in zeta = z^3.

    Returns (coeffs, roots).  The four coefficients are

        4 t3^3,
        t0^2 t3^4 + 4 A t3^3 + 20 t0 t3^2 - 8,
        4 t0^3 t3^3 + 18 A t0 t3^2 + 12 t0^2 t3 - 36 A + 12 t0/t3 + 4/t3^3,
        -27 A^2,

    and the roots must be {x_star^3 (simple), x_hat^3 (double)} subcritically,
    a triple root x_star^3 at criticality; RootMismatch otherwise.
    """
    params.require_not_supercritical()
    with ctx.work():
        t0, t3 = params.t0, params.t3
        cc = curve_constants(params, ctx)
        A = cc.A
        coeffs = [
            4 * t3**3,
            t0**2 * t3**4 + 4 * A * t3**3 + 20 * t0 * t3**2 - 8,
            (4 * t0**3 * t3**3 + 18 * A * t0 * t3**2 + 12 * t0**2 * t3
             - 36 * A + 12 * t0 / t3 + 4 / t3**3),
            -27 * A**2,
        ]
        roots = solve_polynomial(coeffs, ctx)
        tol = tol if tol is not None else mp.mpf(10) ** (-20)
        xs3, xh3 = cc.x_star**3, cc.x_hat**3
        scale = max(1, abs(xh3))
        if params.regime == "critical":
            ok = all(abs(r - xs3) < mp.sqrt(tol) * scale for r in roots)
        else:
            ds = sorted(roots, key=lambda r: abs(r - xs3))
            dh = sorted(roots, key=lambda r: abs(r - xh3))
            ok = (abs(ds[0] - xs3) < tol * scale
                  and abs(dh[0] - xh3) < mp.sqrt(tol) * scale
                  and abs(dh[1] - xh3) < mp.sqrt(tol) * scale)
        if not ok:
            raise RootMismatch(
                f"discriminant roots {[mp.nstr(r, 12) for r in roots]} do not "
                f"match x*^3={mp.nstr(xs3, 12)}, x_hat^3={mp.nstr(xh3, 12)}")
        return [+c for c in coeffs], roots


OMEGA_SECTORS = ("S0", "S1", "S2")


def sector_of(z):
    """Sector label of z; boundary rays belong to the counterclockwise side."""
    a = mp.arg(z)
    if -mp.pi / 3 <= a < mp.pi / 3:
        return "S0"
    if mp.pi / 3 <= a < mp.pi:
        return "S1"
    return "S2"


@dataclass(frozen=True)
class BranchTriple:
    xi1: object
    xi2: object
    xi3: object
    sector: str
    labeling_rule: str


def _omega(ctx):
    with ctx.work():
        return mp.e ** (2j * mp.pi / 3)


def _sector_sqrt(z, sector):
    """Square root of z as the limit from the owning sector.

    Principal everywhere except exactly on the ray arg z = pi, where the
    S2-side limit flips the sign of the principal value (whose cut sits on
    that ray).
    """
    root = mp.sqrt(z)
    if sector == "S2" and mp.im(z) == 0 and mp.re(z) < 0:
        root = -root
    return root


def _far_labels(z, params, ctx):
    """Label roots at large |z| by the sector asymptotics.

    xi1 ~ t3 z^2 (+ t0/z), xi2 ~ +-z^(1/2)/sqrt(t3), xi3 ~ -+z^(1/2)/sqrt(t3);
    sign + for xi2 in S0, - in S1 u S2 (sector-limit square root).
    """
    t0, t3 = params.t0, params.t3
    roots = solve_polynomial(spectral_coeffs(z, params, ctx), ctx)
    # xi1: closest to t3 z^2 + t0/z
    tgt1 = t3 * z**2 + t0 / z
    rts = list(roots)
    xi1 = min(rts, key=lambda r: abs(r - tgt1))
    rts.remove(xi1)
    sec = sector_of(z)
    sgn = 1 if sec == "S0" else -1
    tgt2 = sgn * _sector_sqrt(z, sec) / mp.sqrt(t3)
    xi2 = min(rts, key=lambda r: abs(r - tgt2))
    rts.remove(xi2)
    xi3 = rts[0]
    return [xi1, xi2, xi3]


def _track(labels, z_from, z_to, params, ctx, steps=24):
    """Continue root labels from z_from to z_to along the straight segment.

    Predicted-position matching: each labeled root is advanced by its
    finite-difference velocity before nearest-neighbor assignment, which
    stays stable through near-collisions (the node at x_hat).  Step halving
    on ambiguity; BranchTrackingFailure when exhausted.
    """
    cur = list(labels)
    prev = None
    dt_prev = None
    t = mp.mpf(0)
    dt = mp.mpf(1) / steps
    guard = 0
    scale = max(abs(z_from), abs(z_to), mp.mpf(1))
    floor = 1000 * ctx.eps * scale**2
    while t < 1:
        guard += 1
        if guard > 12000:
            raise BranchTrackingFailure("step budget exhausted")
        t_next = min(t + dt, mp.mpf(1))
        z = z_from + (z_to - z_from) * t_next
        roots = solve_polynomial(spectral_coeffs(z, params, ctx), ctx)
        if prev is None:
            pred = list(cur)
        else:
            pred = [c + (c - p) * (t_next - t) / dt_prev for c, p in zip(cur, prev)]
        assign = []
        pool = list(range(3))
        for p in pred:
            k = min(pool, key=lambda i: abs(roots[i] - p))
            assign.append(k)
            pool.remove(k)
        # assignment quality: the chosen root must beat the alternatives
        # clearly, unless the roots have genuinely collided (node), where
        # either assignment carries the same value.
        sep = min(abs(roots[i] - roots[j]) for i in range(3) for j in range(i + 1, 3))
        pred_err = max(abs(roots[a] - p) for a, p in zip(assign, pred))
        if sep > floor and pred_err > sep / 4 and t_next < 1:
            dt /= 2
            if dt < mp.mpf(2) ** (-48):
                raise BranchTrackingFailure(
                    f"ambiguous matching near z={mp.nstr(z, 10)}")
            continue
        prev, dt_prev = cur, (t_next - t)
        cur = [roots[a] for a in assign]
        t = t_next
        if pred_err < sep / 64:
            dt = min(dt * 2, mp.mpf(1) / steps)
    return cur


def xi_branches(z, params, ctx=CTX_DEFAULT):
    """Labeled branches (xi1, xi2, xi3) of the spectral cubic at z.

    Far field: direct asymptotic matching.  Generic z: continuation along the
    radial path from the far field.  On the support interval (0, x_star) of a
    Sigma_1 ray: the conjugate-pair rule (plus-side labels, so xi1 is the pair
    member with Im(omega^(-2j) xi) < 0, and xi3 is the real root).

    Branch points omega^j x_star are excluded within 1e-8 * x_star.
    """
    params.require_not_supercritical()
    with ctx.work():
        z = mp.mpmathify(z)
        cc = curve_constants(params, ctx)
        om = _omega(ctx)
        tau = mp.mpf(10) ** (-8) * cc.x_star
        for j in range(3):
            if abs(z - om**j * cc.x_star) < tau:
                raise BranchTrackingFailure(
                    "z within branch-point exclusion radius")
        R_far = 10 * max(cc.x_hat, mp.mpf(1))
        sec = sector_of(z)
        # support interval: conjugate-pair rule.  Branch covariance gives
        # xi(omega^j x) = omega^(2j) xi(x), so classification happens after
        # rotating the roots back by omega^(-2j).  A thin band around the
        # interval is included: radial continuation to points hugging the
        # support squeezes past the branch point and cannot step through,
        # while the one-sided limits are accurate to O(band * xi') there.
        band = mp.mpf(10) ** (-10) * max(1, abs(z))
        for j in range(3):
            zj = z * om**(-j) if j else z
            if abs(mp.im(zj)) < band and 0 < mp.re(zj) < cc.x_star:
                roots = solve_polynomial(spectral_coeffs(z, params, ctx), ctx)
                back = om ** (-2 * j)
                reals = sorted(roots, key=lambda r: abs(mp.im(r * back)))
                xi3 = reals[0]
                pair = reals[1:]
                # plus-side limit: the Cauchy transform acquires -pi*i*rho
                # approaching from the left of the outward ray, so
                # Im(omega^(-2j) xi1) < 0 there.  On the ray itself the
                # plus-side labels are returned; just below, the sides swap.
                pair.sort(key=lambda r: mp.im(r * back))
                if mp.im(zj) >= 0:
                    return BranchTriple(pair[0], pair[1], xi3, sec,
                                        "real-interval-pair")
                return BranchTriple(pair[1], pair[0], xi3, sec,
                                    "real-interval-pair")
        if abs(z) >= R_far:
            xi = _far_labels(z, params, ctx)
            return BranchTriple(xi[0], xi[1], xi[2], sec, "far-field")
        z_far = R_far * z / abs(z) * mp.mpf("1.0000001")
        labels = _far_labels(z_far, params, ctx)
        xi = _track(labels, z_far, z, params, ctx)
        return BranchTriple(xi[0], xi[1], xi[2], sec, "radial-continuation")


def cauchy_transform(k, z, params, ctx=CTX_DEFAULT):
    """Cauchy transform F_k(z) of mu_k*, recovered from the labeled branches.

    F1 = (xi1 - t3 z^2)/t0;  F2 = (s3 z^(1/2)/sqrt(t3) - xi3)/t0 with
    s3 = -1 in S0 and +1 in S1 u S2.  F1(z) = 1/z + O(z^-4) and
    F2(z) = 1/(2z) + O(z^(-5/2)) at infinity.
    """
    with ctx.work():
        z = mp.mpmathify(z)
        cc = curve_constants(params, ctx)
        om = _omega(ctx)
        # reject points on the relevant support
        for j in range(3):
            zj = z * om**(-j)
            if k == 1 and abs(mp.im(zj)) < mp.mpf(10)**(-30) * max(1, abs(z)) \
                    and 0 <= mp.re(zj) <= cc.x_star:
                raise OnSupport("z on Sigma_1")
            if k == 2 and abs(mp.im(-zj)) < mp.mpf(10)**(-30) * max(1, abs(z)) \
                    and mp.re(-zj) > 0:
                raise OnSupport("z on Sigma_2")
        tri = xi_branches(z, params, ctx)
        t0, t3 = params.t0, params.t3
        if k == 1:
            return (tri.xi1 - t3 * z**2) / t0
        s3 = -1 if tri.sector == "S0" else 1
        return (s3 * mp.sqrt(z) / mp.sqrt(t3) - tri.xi3) / t0


def imag_pair_cardano(p2, p1, p0, ctx=CTX_DEFAULT):
    """|Im| of the conjugate root pair of x^3 + p2 x^2 + p1 x + p0 (real coeffs).

    Branch-free Cardano: with the depressed cubic y^3 + py + q and
    Delta = (q/2)^2 + (p/3)^3 > 0 (one real root), the nonreal pair has
    |Im| = (sqrt(3)/2) |u - v| for the real cube roots u, v of
    -q/2 +- sqrt(Delta).  Returns 0 when all roots are real.
    """
    with ctx.work():
        p2, p1, p0 = mp.mpf(p2), mp.mpf(p1), mp.mpf(p0)
        p = p1 - p2**2 / 3
        q = 2 * p2**3 / 27 - p2 * p1 / 3 + p0
        disc = (q / 2) ** 2 + (p / 3) ** 3
        if disc <= 0:
            return mp.mpf(0)
        root = mp.sqrt(disc)
        # mp.cbrt of a negative real is the principal complex root; the
        # Cardano pair formula needs the real cube roots
        u = mp.sign(-q / 2 + root) * mp.cbrt(abs(-q / 2 + root))
        v = mp.sign(-q / 2 - root) * mp.cbrt(abs(-q / 2 - root))
        return mp.sqrt(mp.mpf(3)) / 2 * abs(u - v)

"""Airy solutions, Wronskian companions, and contour weights.

The Airy equation y'' = z y has the standard solution Ai together with the
rotated copies

    y0 = Ai,   y1(z) = w Ai(w z),   y2(z) = w^2 Ai(w^2 z),   w = e^{2 pi i/3},

satisfying y0 + y1 + y2 = 0.  Six companions are built from these:

    y3 = 2 pi i (w^2 Ai(w .) - w Ai(w^2 .)),  y4 = w y3(w .),  y5 = w^2 y3(w^2 .),
    y6 = (y2 - y1)/3,                         y7 = w y6(w .),  y8 = w^2 y6(w^2 .),

normalized so that W(y_j, y_{j+3}) = 1 for j = 0, 1, 2 while
W(y0, y1) = -1/(2 pi i).

Ai itself is evaluated from scratch (mpmath's airyai is reserved as an
independent cross-check in the tests):

* Maclaurin series for moderate |z|.  On the rays arg z ~ +-2pi/3 the series
  suffers cancellation of about (4/3)|z|^{3/2} nats, so the working precision
  is raised by 1.93 |z|^{3/2} bits before summing.
* Poincare expansion Ai(z) ~ z^{-1/4} e^{-t} S(1/t) / (2 sqrt(pi)) with
  t = (2/3) z^{3/2} for large |z| in the cone |arg z| <= 2pi/3 - delta.
  The expansion is used only when optimal truncation reaches the target
  precision, i.e. when 2|t| >= (bits + 8) ln 2 + ln(8 sqrt(2|t|+1)).
* Outside the cone, the connection y0 = -y1 - y2 is applied once; the rotated
  arguments land back inside the cone except for a narrow band near
  arg = -2pi/3, which falls back to the (elevated-precision) series.

Weights on the star-shaped orthogonality contour: on the segment [0, x_hat]
the level-0 weight is Ai(c_n x) e^{(n t3/(3 t0)) x^3} and level 1 replaces
Ai by Ai'; on the unbounded pieces the Airy factor becomes (y0 - y1)/3
(upper leg) or (y0 - y2)/3 (lower leg).  Rotating by w multiplies the level-0
weight by w^2 and the level-1 weight by w.  Exponents of the scaled Airy
representation are combined with the cubic factor analytically before a
single exponential is taken, so the pieces far out on the legs cannot
overflow intermediate results.
"""

from __future__ import annotations

from dataclasses import dataclass

from mpmath import mp

from .curve import ModelParams, curve_constants
from .numerics import CTX_DEFAULT, EvaluationFailure


class OverflowAtPrecision(EvaluationFailure):
    """Unscaled value requested where the exponential factor is absurd."""


class PieceMismatch(ValueError):
    """Evaluation point does not lie on the declared contour piece."""


@dataclass(frozen=True)
class ScaleConstants:
    """Scaling constants c_n = n^{2/3} t0^{-2/3} t3^{-1/3}, d_n = (t0/(n t3))^{1/3}."""

    c_n: object
    d_n: object

    @classmethod
    def for_model(cls, n, params, ctx=CTX_DEFAULT):
        if n <= 0:
            raise ValueError("n must be a positive integer")
        with ctx.work():
            t0, t3 = params.t0, params.t3
            third = mp.mpf(1) / 3
            c_n = mp.mpf(n) ** (2 * third) / (t0 ** (2 * third) * t3 ** third)
            d_n = (t0 / (n * t3)) ** third
        return cls(c_n=c_n, d_n=d_n)


_SEGMENT_PIECES = {f"segment-ray-{j}": j for j in range(3)}
_LEG_PIECES = {}
for _j in range(3):
    _LEG_PIECES[f"C_{_j}-plus"] = (_j, +1)
    _LEG_PIECES[f"C_{_j}-minus"] = (_j, -1)


@dataclass(frozen=True)
class WeightSpec:
    """Which weight (level 0 or 1), at which degree n, on which contour piece."""

    level: int
    n: int
    params: ModelParams
    piece: str

    def __post_init__(self):
        if self.level not in (0, 1):
            raise ValueError("level must be 0 or 1")
        if self.piece not in _SEGMENT_PIECES and self.piece not in _LEG_PIECES:
            raise ValueError(f"unknown contour piece {self.piece!r}")


def _omega(ctx):
    with ctx.work():
        return mp.exp(2j * mp.pi / 3)


# ---------------------------------------------------------------------------
# Ai from scratch
# ---------------------------------------------------------------------------

def _asymptotic_threshold(bits):
    """Return T such that the Poincare series truncated optimally at |t| >= T
    leaves a remainder below 2^-(bits+3): solve 2T = (bits+8) ln 2 + ln(8 sqrt(2T+1))."""
    rhs = (bits + 8) * mp.ln(2)
    T = rhs / 2 + 2
    for _ in range(3):
        T = (rhs + mp.ln(8 * mp.sqrt(2 * T + 1))) / 2
    return T


def _series_extra_bits(r):
    # cancellation on the worst ray costs (4/3) r^{3/2} nats = 1.93 r^{3/2} bits
    return int(mp.mpf("1.93") * r ** mp.mpf("1.5")) + 48


def _ai_series(z, deriv, bits):
    """Maclaurin evaluation of (Ai, Ai') at elevated working precision."""
    r = abs(z)
    extra = _series_extra_bits(r)
    with mp.workprec(bits + extra):
        third = mp.mpf(1) / 3
        ai0 = mp.mpf(3) ** (-2 * third) / mp.gamma(2 * third)
        aip0 = -mp.mpf(3) ** (-third) / mp.gamma(third)
        z = mp.mpmathify(z)
        z3 = z ** 3
        # F solves the ODE with F(0)=1, F'(0)=0; G has G(0)=0, G'(0)=1
        f_term = mp.mpf(1)
        g_term = z
        F, G = f_term, g_term
        Fp, Gp = mp.mpf(0), mp.mpf(1)
        floor = mp.mpf(2) ** (-(bits + extra) + 8)
        maxmag = max(mp.mpf(1), abs(g_term))
        k = 1
        kmax = 64 + int(4 * r ** mp.mpf("1.5"))
        low = 0
        while k <= kmax:
            f_term = f_term * z3 / ((3 * k - 1) * (3 * k))
            g_term = g_term * z3 / ((3 * k) * (3 * k + 1))
            F += f_term
            G += g_term
            if z != 0:
                Fp += f_term * (3 * k) / z
                Gp += g_term * (3 * k + 1) / z
            mag = max(abs(f_term), abs(g_term))
            maxmag = max(maxmag, mag)
            low = low + 1 if mag < floor * maxmag else 0
            if low >= 2:
                break
            k += 1
        if deriv:
            return ai0 * Fp + aip0 * Gp
        return ai0 * F + aip0 * G


def _ai_asymptotic(z, deriv, bits):
    """Scaled Poincare evaluation: returns Ai(z) e^{(2/3) z^{3/2}} (or the
    derivative analogue).  Caller guarantees |arg z| <= 2pi/3 - delta and
    |t| above the optimal-truncation threshold."""
    with mp.workprec(bits + 16):
        z = mp.mpmathify(z)
        t = mp.mpf(2) / 3 * z ** mp.mpf("1.5")
        neg_inv_t = -1 / t
        tol = mp.mpf(2) ** (-bits - 8)
        total = mp.mpf(1)
        u = mp.mpf(1)
        power = mp.mpf(1)
        k = 0
        kcap = int(2 * abs(t)) + 4
        while k < kcap:
            u = u * (6 * k + 1) * (6 * k + 5) / (72 * (k + 1))
            k += 1
            power *= neg_inv_t
            coeff = u * (6 * k + 1) / (1 - 6 * k) if deriv else u
            term = coeff * power
            total += term
            if abs(term) < tol:
                break
        pref = 1 / (2 * mp.sqrt(mp.pi))
        if deriv:
            return -(z ** mp.mpf("0.25")) * pref * total
        return pref * total / z ** mp.mpf("0.25")


_ABSURD_EXPONENT = mp.mpf(2) ** 48


def _exp_checked(t):
    if abs(mp.re(t)) > _ABSURD_EXPONENT:
        raise OverflowAtPrecision(
            f"exponent {mp.nstr(mp.re(t), 8)} exceeds the representable guard")
    return mp.exp(t)


def airy_ai(z, scaled=False, deriv=False, ctx=CTX_DEFAULT):
    """Ai(z) (or Ai'(z)) to ctx precision; scaled mode multiplies by
    e^{(2/3) z^{3/2}} on the principal branch.

    Raises OverflowAtPrecision only if an unscaled value is requested with an
    exponent beyond any representable range (the arbitrary-precision exponent
    makes this effectively unreachable in normal use).
    """
    bits = ctx.bits
    with ctx.work(32):
        z = mp.mpmathify(z)
        if mp.im(z) < 0:
            conj = airy_ai(mp.conj(z), scaled=scaled, deriv=deriv, ctx=ctx)
            return mp.conj(conj)
        T = _asymptotic_threshold(bits)
        rho1 = (mp.mpf("1.5") * T) ** (mp.mpf(2) / 3)
        r = abs(z)
        delta = mp.mpf("0.1")
        cone = mp.pi * 2 / 3 - delta

        def _core(v):
            # v has |arg| <= cone and |v| >= rho1: scaled asymptotic value
            return _ai_asymptotic(v, deriv, bits)

        if r < rho1:
            val = _ai_series(z, deriv, bits)
            if not scaled:
                return val
            t = mp.mpf(2) / 3 * z ** mp.mpf("1.5")
            return val * _exp_checked(t)
        arg = mp.arg(z)
        if arg <= cone:
            sval = _core(z)
            if scaled:
                return sval
            t = mp.mpf(2) / 3 * z ** mp.mpf("1.5")
            return sval * _exp_checked(-t)
        # connection: Ai(z) = -w Ai(w z) - w^2 Ai(w^2 z), applied once.
        # arg(w z) in (-2pi/3 - delta, -pi/3]; arg(w^2 z) in (-delta, pi/3].
        # The rotated term nearest the anti-Stokes ray dominates the sum, so
        # no r-dependent cancellation allowance is needed here.
        om = mp.exp(2j * mp.pi / 3)
        with mp.workprec(bits + 64):
            z = +z
            za, zb = om * z, om ** 2 * z
            parts = []
            for v, rot in ((za, om), (zb, om ** 2)):
                if abs(mp.arg(v)) <= cone:
                    sv = _ai_asymptotic(v, deriv, bits)
                    tv = mp.mpf(2) / 3 * v ** mp.mpf("1.5")
                    uv = sv * mp.exp(-tv)
                else:
                    uv = _ai_series(v, deriv, bits)
                # d/dz Ai(rot z) brings one factor rot per derivative order
                parts.append(-rot * (rot if deriv else 1) * uv)
            val = parts[0] + parts[1]
            if not scaled:
                return +val
            t = mp.mpf(2) / 3 * z ** mp.mpf("1.5")
            return val * _exp_checked(t)


def airy_ai_prime(z, scaled=False, ctx=CTX_DEFAULT):
    """Ai'(z); scaled mode multiplies by e^{(2/3) z^{3/2}}."""
    return airy_ai(z, scaled=scaled, deriv=True, ctx=ctx)


# ---------------------------------------------------------------------------
# the nine solutions
# ---------------------------------------------------------------------------

def solution_y(index, z, deriv=False, ctx=CTX_DEFAULT):
    """Value (or z-derivative) of y_index, index in 0..8.

    All solutions are reduced to Ai evaluated at rotated arguments, so the
    linear identities among them hold to rounding error.
    """
    if index not in range(9):
        raise ValueError("index must be in 0..8")
    with ctx.work(16):
        z = mp.mpmathify(z)
        om = _omega(ctx)

        def ai(v):
            return airy_ai(v, deriv=deriv, ctx=ctx)

        def y012(k, v):
            # y_k(v) = om^k Ai(om^k v); each derivative adds a factor om^k
            w = om ** k
            return w * (w if deriv else 1) * ai(w * v)

        if index <= 2:
            return y012(index, z)
        if index <= 5:
            k = index - 3
            w = om ** k
            # y3 = 2 pi i (om^2 Ai(om .) - om Ai(om^2 .)); y_{3+k}(z) = om^k y3(om^k z)
            v = w * z
            core = 2j * mp.pi * (om ** 2 * om ** (1 if deriv else 0) * ai(om * v)
                                 - om * om ** (2 if deriv else 0) * ai(om ** 2 * v))
            return w * (w if deriv else 1) * core
        k = index - 6
        w = om ** k
        v = w * z
        core = (y012(2, v) - y012(1, v)) / 3
        return w * (w if deriv else 1) * core


def wronskian(i, j, z, ctx=CTX_DEFAULT):
    """W(y_i, y_j)(z) = y_i y_j' - y_i' y_j."""
    with ctx.work(16):
        return (solution_y(i, z, ctx=ctx) * solution_y(j, z, deriv=True, ctx=ctx)
                - solution_y(i, z, deriv=True, ctx=ctx) * solution_y(j, z, ctx=ctx))


# ---------------------------------------------------------------------------
# fast repeated evaluation of the basis triple along a direction
# ---------------------------------------------------------------------------

_ANCHOR_STORE = {}
_ANCHOR_CAP = 120_000
_ANCHOR_COUNT = [0]
_STEP_REACH = 2.4
_MAX_TERMS = 170


def _taylor_step(u0, vals, ders, h, wp):
    """Transplant (y_0, y_1) and derivatives from u0 to u0 + h.

    Both solutions obey y'' = u y, so the Taylor coefficients at u0
    follow the two-back recurrence k (k-1) c_k = u0 c_{k-2} + c_{k-3};
    no special functions are involved in a step.  Only the first two
    solutions are stepped -- y_2 is recovered exactly from the sum rule.
    Returns None when the series has not visibly converged within the
    term budget (caller falls back to direct evaluation).  Convergence
    is judged against the incoming magnitudes, which is sound on the
    bounded-oscillatory directions this cache serves.
    """
    with mp.workprec(wp + 32):
        scale = max(mp.mpf(1), abs(vals[0]), abs(vals[1]),
                    abs(ders[0]), abs(ders[1]))
        tol = mp.mpf(2) ** (-(wp + 20)) * scale
        # rolling window (c_{k-3}, c_{k-2}, c_{k-1}) per solution
        am3 = mp.mpc(0)
        am2, am1 = vals[0], ders[0]
        bm3 = mp.mpc(0)
        bm2, bm1 = vals[1], ders[1]
        sva = am2 + am1 * h
        svb = bm2 + bm1 * h
        sda = am1
        sdb = bm1
        hpow = h                      # h^{k-1} for the upcoming k
        streak = 0
        for k in range(2, _MAX_TERMS):
            kk = k * (k - 1)
            a = (u0 * am2 + am3) / kk
            b = (u0 * bm2 + bm3) / kk
            tda = k * a * hpow
            tdb = k * b * hpow
            hpow = hpow * h
            tva = a * hpow
            tvb = b * hpow
            sva += tva
            svb += tvb
            sda += tda
            sdb += tdb
            if (abs(tva) <= tol and abs(tvb) <= tol
                    and abs(tda) <= tol and abs(tdb) <= tol):
                streak += 1
                if streak >= 3:
                    return (+sva, +svb), (+sda, +sdb)
            else:
                streak = 0
            am3, am2, am1 = am2, am1, a
            bm3, bm2, bm1 = bm2, bm1, b
    return None


def _direct_sixtuple(u, ctx):
    vals = tuple(solution_y(i, u, deriv=False, ctx=ctx) for i in range(3))
    ders = tuple(solution_y(i, u, deriv=True, ctx=ctx) for i in range(3))
    return vals, ders


def transplant_triple(u, ctx=CTX_DEFAULT):
    """Values and derivatives of (y_0, y_1, y_2) at u, anchor-accelerated.

    Quadrature ladders evaluate the basis at thousands of points along a
    fixed direction; a fresh rotated-Ai evaluation at every node is the
    dominant cost of the whole moment pipeline.  This keeps, per direction
    and precision, the points already computed and Taylor-transplants the
    pair (y_0, y_1) from the nearest one (see :func:`_taylor_step`),
    recovering y_2 = -y_0 - y_1 exactly; it falls back to direct
    evaluation whenever no anchor is within reach or the series stalls.
    Each transplanted result must reproduce the constant Wronskian
    W(y_0, y_1) = -1/(2 pi i) before it is accepted and stored -- a sharp
    drift canary on the bounded-oscillatory directions the quadrature
    uses, since no solution is exponentially large there.  The sum rule
    costs nothing here: on those directions all three solutions are O(1),
    so the recovered y_2 suffers no cancellation.
    """
    with ctx.work(16):
        u = mp.mpmathify(u)
        au = abs(u)
        if au == 0:
            return _direct_sixtuple(u, ctx)
        dkey = (complex(u / au), ctx.bits)
        anchors = _ANCHOR_STORE.get(dkey)
        if anchors is None:
            anchors = _ANCHOR_STORE[dkey] = []
        rho = float(au)
        result = None
        if anchors:
            idx = bisect_left(anchors, (rho,))
            cand = [anchors[i] for i in (idx - 1, idx) if 0 <= i < len(anchors)]
            best = min(cand, key=lambda a: abs(rho - a[0]), default=None)
            if best is not None:
                h = u - best[1]
                if abs(h) <= _STEP_REACH:
                    stepped = _taylor_step(best[1], best[2], best[3],
                                           h, ctx.bits)
                    if stepped is not None:
                        (v0, v1), (d0, d1) = stepped
                        wr = v0 * d1 - d0 * v1
                        expected = -1 / (2j * mp.pi)
                        if abs(wr - expected) <= \
                                mp.mpf(2) ** (-(ctx.bits // 2)) * abs(expected):
                            result = ((v0, v1, -(v0 + v1)),
                                      (d0, d1, -(d0 + d1)))
        if result is None:
            result = _direct_sixtuple(u, ctx)
        vals, ders = result
        if _ANCHOR_COUNT[0] >= _ANCHOR_CAP:
            _ANCHOR_STORE.clear()
            _ANCHOR_COUNT[0] = 0
            anchors = _ANCHOR_STORE.setdefault(dkey, [])
        insort(anchors, (rho, u, vals, ders))
        _ANCHOR_COUNT[0] += 1
        return vals, ders


# ---------------------------------------------------------------------------
# contour weights
# ---------------------------------------------------------------------------

_PIECE_TOL = mp.mpf("1e-9")


def _check_piece(spec, zeta, x_hat):
    """zeta is the point rotated back to sector 0; verify it sits on the piece."""
    scale = max(1, abs(zeta))
    if spec.piece in _SEGMENT_PIECES:
        if abs(mp.im(zeta)) > _PIECE_TOL * scale or not (
                -_PIECE_TOL <= mp.re(zeta) <= x_hat * (1 + _PIECE_TOL)):
            raise PieceMismatch(
                f"{mp.nstr(zeta, 8)} is not on [0, x_hat] (piece {spec.piece})")
        return
    _, sign = _LEG_PIECES[spec.piece]
    d = (zeta - x_hat) * mp.exp(-sign * 1j * mp.pi / 4)
    if abs(mp.im(d)) > _PIECE_TOL * scale or mp.re(d) < -_PIECE_TOL:
        raise PieceMismatch(
            f"{mp.nstr(zeta, 8)} is not on the leg {spec.piece}")


def weight_w(spec, z, ctx=CTX_DEFAULT, exact_constants=False):
    """Contour weight w_{level,n} at z on the declared piece.

    The default normalization drops the constant prefactors (3 d_n at level 0,
    -3 d_n^2 at level 1); exact_constants=True restores them, which is the
    variant entering the moment recursion checks.
    """
    with ctx.work(32):
        z = mp.mpmathify(z)
        params = spec.params
        sc = ScaleConstants.for_model(spec.n, params, ctx)
        cc = curve_constants(params, ctx)
        om = _omega(ctx)
        if spec.piece in _SEGMENT_PIECES:
            j = _SEGMENT_PIECES[spec.piece]
            sign = 0
        else:
            j, sign = _LEG_PIECES[spec.piece]
        zeta = om ** (-j) * z if j else z
        _check_piece(spec, zeta, cc.x_hat)

        expo = spec.n * params.t3 / (3 * params.t0) * zeta ** 3
        w = sc.c_n * zeta
        deriv = spec.level == 1
        if sign == 0:
            # scaled Ai keeps the two exponents combined analytically
            sv = airy_ai(w, scaled=True, deriv=deriv, ctx=ctx)
            t = mp.mpf(2) / 3 * w ** mp.mpf("1.5")
            val = sv * _exp_checked(expo - t)
        else:
            # (y0 - y1)/3 on the plus leg, (y0 - y2)/3 on the minus leg;
            # each term carries its own exponent e^{-+ t} folded with the cubic
            t = mp.mpf(2) / 3 * w ** mp.mpf("1.5")
            s0 = airy_ai(w, scaled=True, deriv=deriv, ctx=ctx)
            term0 = s0 * _exp_checked(expo - t)
            k = 1 if sign > 0 else 2
            rot = om ** k
            # y_k(w) = rot Ai(rot w), derivative adds another rot
            s1 = airy_ai(rot * w, scaled=True, deriv=deriv, ctx=ctx)
            t1 = mp.mpf(2) / 3 * (rot * w) ** mp.mpf("1.5")
            term1 = rot * (rot if deriv else 1) * s1 * _exp_checked(expo - t1)
            val = (term0 - term1) / 3
        # rotation extension: level 0 gains om^2 per sector step, level 1 om
        rot_w = om ** ((2 - spec.level) * j) if j else 1
        val = rot_w * val
        if exact_constants:
            val = val * (3 * sc.d_n if spec.level == 0 else -3 * sc.d_n ** 2)
        return +val

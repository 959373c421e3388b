"""The rationally parametrized growth domain Omega and its identities.

The boundary of Omega is the image of the unit circle under

    h(w) = r w + a / w^2,

with r, a determined by (t0, t3).  The domain carries the whole geometric
side of the model: its area is pi t0, its only nonzero exterior harmonic
moment is the third (= t3), its Schwarz function is the first spectral
branch, and the logarithmic potential of the first equilibrium measure
agrees outside Omega with the potential of the uniformly charged domain.
The global-parametrix entry m11 lives on the exterior sheet in the same
w coordinate.

Geometry helpers (winding, simplicity, polar radius) run in double
precision -- they feed tolerant topological checks -- while the identity
residuals are evaluated in working precision.
"""

from dataclasses import dataclass

import numpy as np
from mpmath import mp

from .curve import curve_constants, xi_branches
from .numerics import CTX_DEFAULT, quad_segment

_BOUNDARY_SAMPLES = 2048
_MOMENT_NODES = 256


class InsideDomain(Exception):
    """Evaluation point lies inside (or on) the growth domain."""


class SheetAmbiguity(Exception):
    """No unique exterior-sheet preimage; z is too close to the boundary."""


@dataclass(frozen=True)
class ConformalData:
    """Coefficients of h(w) = r w + a/w^2 and the cusp radius (2a/r)^(1/3)."""

    r: object
    a: object
    rho_crit: object


@dataclass(frozen=True)
class GrowthDomain:
    params: object
    conformal: ConformalData
    thetas: np.ndarray       # sample angles on the unit circle
    boundary: np.ndarray     # h(e^{i theta}), complex128


def conformal_coeffs(params, ctx=CTX_DEFAULT):
    """r = sqrt(1-s)/(2 t3), a = (1-s)/(4 t3) with s = sqrt(1 - 8 t0 t3^2)."""
    params.require_not_supercritical()
    with ctx.work():
        s = mp.sqrt(1 - 8 * params.t0 * params.t3**2)
        r = mp.sqrt(1 - s) / (2 * params.t3)
        a = (1 - s) / (4 * params.t3)
        rho = (2 * a / r) ** (mp.mpf(1) / 3)
    return ConformalData(r, a, rho)


def conformal_map(conformal, w):
    return conformal.r * w + conformal.a / w**2


def conformal_derivative(conformal, w):
    return conformal.r - 2 * conformal.a / w**3


def growth_domain(params, samples=_BOUNDARY_SAMPLES, ctx=CTX_DEFAULT):
    cf = conformal_coeffs(params, ctx)
    thetas = np.linspace(0.0, 2 * np.pi, samples, endpoint=False)
    w = np.exp(1j * thetas)
    boundary = float(cf.r) * w + float(cf.a) / w**2
    return GrowthDomain(params, cf, thetas, boundary)


def area(domain, ctx=CTX_DEFAULT):
    """(1/2i) contour integral of conj(z) dz over the boundary.

    The integrand pulled back to theta is a trigonometric polynomial of
    degree three, so the equispaced trapezoid sum is exact.
    """
    cf = domain.conformal
    with ctx.work():
        n = 16
        acc = mp.mpf(0)
        for k in range(n):
            th = 2 * mp.pi * k / n
            w = mp.e ** (1j * th)
            z = conformal_map(cf, w)
            dz = conformal_derivative(cf, w) * 1j * w
            acc += mp.re(mp.conj(z) * dz / (2j))
        return acc * 2 * mp.pi / n


def harmonic_moment(k, domain, ctx=CTX_DEFAULT):
    """Exterior harmonic moment (1/(2 pi i)) cint conj(z) z^(-k) dz.

    The boundary form of -(1/pi) iint_{exterior} z^(-k) dA (apply Stokes
    to the z-bar antiderivative; the circle at infinity drops out for
    k >= 3).  Equals t3 for k = 3 and vanishes for every other k >= 1.
    The equispaced trapezoid sum converges geometrically: the pulled-back
    integrand is analytic in the annulus (a/r)^(1/3) < |w| < infinity.
    """
    if k < 1:
        raise ValueError("harmonic moments are defined for k >= 1")
    cf = domain.conformal
    with ctx.work():
        n = _MOMENT_NODES
        acc = mp.mpc(0)
        for j in range(n):
            th = 2 * mp.pi * j / n
            w = mp.e ** (1j * th)
            z = conformal_map(cf, w)
            dz = conformal_derivative(cf, w) * 1j * w
            acc += mp.conj(z) / z**k * dz
        return acc * (2 * mp.pi / n) / (2j * mp.pi)


def schwarz_residual(theta, domain, ctx=CTX_DEFAULT):
    """|xi1(h(w)) - conj(h(w))| at w = e^{i theta}: the Schwarz identity."""
    cf = domain.conformal
    with ctx.work():
        w = mp.e ** (1j * mp.mpf(theta))
        z = conformal_map(cf, w)
        xi = xi_branches(z, domain.params, ctx).xi1
        return abs(xi - mp.conj(z))


def min_boundary_derivative(domain):
    """min |h'(w)| over the sampled circle -- the cusp detector."""
    w = np.exp(1j * domain.thetas)
    hp = float(domain.conformal.r) - 2 * float(domain.conformal.a) / w**3
    return float(np.abs(hp).min())


def boundary_is_simple(domain):
    """Winding number one about the origin and no segment self-crossing."""
    z = domain.boundary
    dphi = np.angle(np.roll(z, -1) / z)
    if round(dphi.sum() / (2 * np.pi)) != 1:
        return False
    # O(n^2) segment-pair crossing test, vectorized per segment
    p = z
    q = np.roll(z, -1)
    d = q - p
    n = len(z)
    for i in range(n - 2):
        j0 = i + 2
        j1 = n if i > 0 else n - 1   # skip shared-endpoint neighbours
        pj, dj = p[j0:j1], d[j0:j1]
        cr = np.imag(np.conj(d[i]) * (pj - p[i]))
        cs = np.imag(np.conj(d[i]) * (pj + dj - p[i]))
        cp = np.imag(np.conj(dj) * (p[i] - pj))
        cq = np.imag(np.conj(dj) * (p[i] + d[i] - pj))
        hit = (cr * cs < 0) & (cp * cq < 0)
        if hit.any():
            return False
    return True


def is_exterior(z, domain):
    """Winding-number test of z against the sampled boundary."""
    zf = complex(z)
    rel = domain.boundary - zf
    winding = round(float(np.angle(np.roll(rel, -1) / rel).sum()
                          / (2 * np.pi)))
    return winding == 0


def _polar_radius(domain, phis):
    """Boundary radius R(phi) by monotone interpolation of arg h(e^{i t}).

    Subcritical Omega is starlike about the origin, so theta -> arg h is
    strictly increasing and invertible.
    """
    th = np.linspace(0.0, 2 * np.pi, 8192, endpoint=False)
    w = np.exp(1j * th)
    zb = float(domain.conformal.r) * w + float(domain.conformal.a) / w**2
    ph = np.unwrap(np.angle(zb))
    ph -= ph[0]
    if np.any(np.diff(ph) <= 0):
        raise ValueError("boundary is not starlike about the origin")
    base = np.angle(zb[0])
    rads = np.abs(zb)
    # periodic extension for interpolation
    ph_ext = np.concatenate([ph, [2 * np.pi]])
    r_ext = np.concatenate([rads, [rads[0]]])
    return np.interp((phis - base) % (2 * np.pi), ph_ext, r_ext)


def exterior_potential_residual(z, domain, ctx=CTX_DEFAULT,
                                n_rho=200, n_phi=400):
    """|F_mu1(z) - (1/pi t0) integral_Omega dA(zeta)/(z - zeta)|.

    The measure side is the cached density grid through the collapsed
    Cauchy kernel 3 z^2/(z^3 - y^3); the domain side is a tensor Gauss
    grid in polar coordinates (starlike boundary radius per angle).
    Double precision throughout: the quadrature budget, not the
    arithmetic, dominates the error.
    """
    from .measures import _tables
    from .numerics import gauss_legendre_nodes

    if not is_exterior(z, domain):
        raise InsideDomain(f"z = {complex(z):.6g} is not exterior")
    zf = complex(z)
    tab = _tables(domain.params, ctx.bits)
    wy = np.array([float(v) for v in tab.wy])
    y3 = np.array([float(v) for v in tab.y3])
    f_measure = (3 * zf**2 / (zf**3 - y3)) @ wy

    xg, wg = gauss_legendre_nodes(n_rho, 53)
    xg = np.array([float(v) for v in xg])
    wg = np.array([float(v) for v in wg])
    phis = (np.arange(n_phi) + 0.5) * (2 * np.pi / n_phi)
    R = _polar_radius(domain, phis)
    # map [-1,1] Gauss nodes to [0, R(phi)] per angle
    rho = 0.5 * R[None, :] * (xg[:, None] + 1)
    wts = 0.5 * R[None, :] * wg[:, None] * (2 * np.pi / n_phi)
    zeta = rho * np.exp(1j * phis[None, :])
    f_domain = np.sum(wts * rho / (zf - zeta))
    t0 = float(domain.params.t0)
    return abs(f_measure - f_domain / (np.pi * t0))


def sheet_one_preimage(z, domain, ctx=CTX_DEFAULT):
    """The unique |w| > 1 solution of r w^3 - z w^2 + a = 0."""
    cf = domain.conformal
    with ctx.work():
        roots = mp.polyroots([cf.r, -mp.mpc(z), mp.mpf(0), cf.a],
                             extraprec=ctx.bits)
        outside = [w for w in roots if abs(w) > 1 + mp.mpf(10) ** (-12)]
        if len(outside) != 1 or any(abs(abs(w) - 1) <= mp.mpf(10) ** (-12)
                                    for w in roots):
            raise SheetAmbiguity(
                f"no unique exterior preimage for z = {complex(z):.6g}")
        return outside[0]


def m11(z, domain, ctx=CTX_DEFAULT):
    """Global-parametrix entry on the exterior sheet.

    In the w coordinate this is (w^3 / (w^3 - 2a/r))^(1/2), the
    exponential of the unique sphere differential with simple poles of
    residue -1/2 at the three interior critical points and +3/2 at the
    origin, normalized to 1 at infinity.  For |w| > 1 the ratio stays in
    the right half-plane, so the principal square root is the analytic
    branch.
    """
    cf = domain.conformal
    with ctx.work():
        w = sheet_one_preimage(z, domain, ctx)
        c = 2 * cf.a / cf.r
        return mp.sqrt(w**3 / (w**3 - c))


def m11_by_path(z, domain, ctx=CTX_DEFAULT):
    """m11 by numeric integration of the residue differential.

    Pulls the normalization in from a far anchor point along the ray
    through w(z); mutual oracle for the closed form.
    """
    cf = domain.conformal
    with ctx.work():
        w = sheet_one_preimage(z, domain, ctx)
        c = 2 * cf.a / cf.r
        poles = [mp.cbrt(c) * mp.e ** (2j * mp.pi * j / 3) for j in range(3)]
        # the anchor below is the exact log at any radius, so the ray
        # segment can start at a moderate multiple of |w|; starting much
        # farther would bury the u^-4 integrand in an unresolved layer
        far = 32 * w

        def omega(u):
            return 3 / (2 * u) - sum(1 / (2 * (u - p)) for p in poles)

        seg, _ = quad_segment(lambda t: omega(far + t * (w - far)) * (w - far),
                              0, 1, ctx=ctx)
        anchor = mp.mpf(3) / 2 * mp.log(far) \
            - sum(mp.log(far - p) / 2 for p in poles)
        return mp.e ** (seg + anchor)

"""Weight-function integrals for the stencil coefficients.

Everything here integrates the kernel weight w(xi) = |xi|^expo * e^(-lam*|xi|)
with expo = gamma - (d + alpha): closed radial forms in 1D, tensor
Gauss-Legendre over boxes away from the origin, a polar / spherical change of
variables on the origin element (the radial factor then integrates in closed
form against a smooth angular remainder), and the semi-infinite integral over
the complement of the near-field cube.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy import special as sp

from .special import upper_incomplete_gamma

__all__ = [
    "WeightSpec",
    "Box",
    "ToleranceError",
    "radial_weight_integral",
    "box_weight_integral",
    "exterior_integral",
    "element_integrals",
]


class ToleranceError(RuntimeError):
    """Quadrature could not certify the requested relative tolerance.

    Carries the best available estimate in ``estimate``.
    """

    def __init__(self, message: str, estimate: float):
        super().__init__(message)
        self.estimate = estimate


@dataclass(frozen=True)
class WeightSpec:
    """Parameters of the weight |xi|^(gamma-(d+alpha)) * exp(-lam*|xi|)."""

    d: int
    alpha: float
    gamma: float
    lam: float

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"d must be 1, 2 or 3, got {self.d}")
        if not 0.0 < self.alpha < 2.0:
            raise ValueError(f"alpha must be in (0, 2), got {self.alpha}")
        if not self.alpha < self.gamma <= 2.0:
            raise ValueError(
                f"gamma must satisfy alpha < gamma <= 2, got gamma={self.gamma}, alpha={self.alpha}"
            )
        if self.lam < 0.0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")

    @property
    def exponent(self) -> float:
        return self.gamma - (self.d + self.alpha)

    @property
    def nu(self) -> float:
        return self.gamma - self.alpha


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in the closed positive orthant."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise ValueError("lower and upper must have the same dimension")
        if any(lo < 0.0 for lo in self.lower):
            raise ValueError(f"box must lie in the positive orthant, got lower={self.lower}")
        if any(hi <= lo for lo, hi in zip(self.lower, self.upper)):
            raise ValueError(f"box must have positive extents, got {self.lower}..{self.upper}")

    @property
    def d(self) -> int:
        return len(self.lower)

    def touches_origin(self) -> bool:
        return all(lo == 0.0 for lo in self.lower)


# ---------------------------------------------------------------------------
# 1D radial integrals
# ---------------------------------------------------------------------------

def radial_weight_integral(a: float, b: float, nu: float, lam: float) -> float:
    """Integral of xi^(nu-1) * exp(-lam*xi) over (a, b).

    Closed forms throughout: the power rule for lam = 0 and incomplete-gamma
    identities for lam > 0, with the regularized lower/upper variants picked
    so the subtraction never cancels badly.
    """
    if not 0.0 <= a < b:
        raise ValueError(f"need 0 <= a < b, got a={a}, b={b}")
    if lam < 0.0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    if nu <= 0.0 and a == 0.0:
        raise ValueError(f"integral diverges at 0 for nu = {nu} <= 0")
    if lam == 0.0:
        if nu == 0.0:
            return math.log(b / a)
        return (b**nu - a**nu) / nu
    if a > 0.0 and b - a <= 0.5 * a and lam * (b - a) <= 2.0:
        # narrow interval: the gamma differences would cancel, while the
        # integrand is analytic with radius >= a, so GL is machine-exact
        t, w = _gl_rule(24)
        x = a + (b - a) * t
        return float(np.dot(w, x ** (nu - 1.0) * np.exp(-lam * x))) * (b - a)
    x1, x2 = lam * a, lam * b
    scale = lam**-nu
    if nu <= 0.0:
        # a > 0 here; generic upper-gamma difference
        return scale * (upper_incomplete_gamma(nu, x1) - upper_incomplete_gamma(nu, x2))
    if a == 0.0:
        return scale * sp.gamma(nu) * sp.gammainc(nu, x2)
    cut = nu + 1.0
    if x2 <= cut:
        diff = sp.gammainc(nu, x2) - sp.gammainc(nu, x1)
    elif x1 >= cut:
        diff = sp.gammaincc(nu, x1) - sp.gammaincc(nu, x2)
    else:
        # straddles the P/Q crossover; split there so each side is one-sided
        diff = (sp.gammainc(nu, cut) - sp.gammainc(nu, x1)) + (
            sp.gammaincc(nu, cut) - sp.gammaincc(nu, x2)
        )
    return scale * sp.gamma(nu) * float(diff)


# ---------------------------------------------------------------------------
# tensor Gauss-Legendre on boxes
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _gl_rule(p: int):
    x, w = np.polynomial.legendre.leggauss(p)
    return 0.5 * (x + 1.0), 0.5 * w  # mapped to [0, 1]


def _weight_values(r2: np.ndarray, expo: float, lam: float) -> np.ndarray:
    r = np.sqrt(r2)
    vals = r**expo
    if lam > 0.0:
        vals *= np.exp(-lam * r)
    return vals


def _gl_box_value(lower, upper, expo: float, lam: float, p: int) -> float:
    """Order-p tensor Gauss-Legendre value on one smooth box."""
    t, w = _gl_rule(p)
    axes = [lo + (hi - lo) * t for lo, hi in zip(lower, upper)]
    widths = math.prod(hi - lo for lo, hi in zip(lower, upper))
    grids = np.meshgrid(*axes, indexing="ij", sparse=True)
    r2 = sum(g * g for g in grids)
    vals = _weight_values(r2, expo, lam)
    for _ in range(len(lower)):
        vals = vals @ w
    return float(vals) * widths


def _adaptive_box(lower, upper, expo, lam, tol, depth=0):
    """Adaptive tensor GL with bisection along the widest axis."""
    coarse = _gl_box_value(lower, upper, expo, lam, 12)
    fine = _gl_box_value(lower, upper, expo, lam, 20)
    if abs(fine - coarse) <= tol * abs(fine) or depth >= 40:
        converged = abs(fine - coarse) <= tol * abs(fine)
        return fine, converged
    ax = int(np.argmax([hi - lo for lo, hi in zip(lower, upper)]))
    mid = 0.5 * (lower[ax] + upper[ax])
    up1 = list(upper)
    up1[ax] = mid
    lo2 = list(lower)
    lo2[ax] = mid
    v1, ok1 = _adaptive_box(lower, tuple(up1), expo, lam, tol, depth + 1)
    v2, ok2 = _adaptive_box(tuple(lo2), upper, expo, lam, tol, depth + 1)
    return v1 + v2, ok1 and ok2


# ---------------------------------------------------------------------------
# origin element: polar / spherical transform
# ---------------------------------------------------------------------------

def _quad(f, a, b, tol):
    val, err = integrate.quad(f, a, b, epsabs=0.0, epsrel=min(tol, 1e-12), limit=200)[:2]
    return val, err


def _origin_square(s: float, nu: float, lam: float, tol: float) -> float:
    """Weight integral over [0, s]^2 via polar coordinates.

    The radial factor r^(nu-1) e^(-lam r) integrates in closed form up to
    the square boundary R(theta) = s / cos(theta); by symmetry twice the
    octant theta in [0, pi/4].
    """
    def integrand(theta):
        return radial_weight_integral(0.0, s / math.cos(theta), nu, lam)

    val, _ = _quad(integrand, 0.0, math.pi / 4.0, tol)
    return 2.0 * val


def _origin_cube(s: float, nu: float, lam: float, tol: float) -> float:
    """Weight integral over [0, s]^3 via spherical coordinates.

    Six congruent pieces by symmetry; within one piece the ray exits through
    the face z = s, so with t = cos(theta) the polar integral becomes a
    smooth 1D integral of the closed-form radial part.
    """
    def inner(phi):
        tmin = math.cos(math.atan(1.0 / math.cos(phi)))

        def f(t):
            return radial_weight_integral(0.0, s / t, nu, lam)

        val, _ = _quad(f, tmin, 1.0, tol)
        return val

    val, _ = _quad(inner, 0.0, math.pi / 4.0, tol)
    return 6.0 * val


def box_weight_integral(spec: WeightSpec, box: Box, tol: float = 1e-12) -> float:
    """Integral of e^(-lam |xi|) |xi|^(gamma-(d+alpha)) over an axis-aligned box.

    Smooth boxes use adaptive tensor-product Gauss-Legendre.  A box whose
    closure contains the origin is reduced to the largest origin-cornered
    cube (handled in polar / spherical coordinates) plus smooth remainders.

    Raises ToleranceError when the adaptive scheme cannot certify ``tol``;
    the error carries the achieved estimate.
    """
    if spec.d not in (2, 3):
        raise ValueError(f"box integrals are defined for d = 2, 3, got {spec.d}")
    if box.d != spec.d:
        raise ValueError(f"box dimension {box.d} does not match spec dimension {spec.d}")
    expo, lam = spec.exponent, spec.lam

    if box.touches_origin():
        s = min(box.upper)
        if spec.d == 2:
            total = _origin_square(s, spec.nu, lam, tol)
        else:
            total = _origin_cube(s, spec.nu, lam, tol)
        # remainders [0,s]^d extended along each axis, carved greedily
        lower = [0.0] * spec.d
        upper = [s] * spec.d
        for ax in range(spec.d):
            if box.upper[ax] > s:
                lo = list(lower)
                hi = list(upper)
                lo[ax] = s
                hi[ax] = box.upper[ax]
                part, ok = _adaptive_box(tuple(lo), tuple(hi), expo, lam, tol)
                if not ok:
                    raise ToleranceError("box quadrature did not converge", total + part)
                total += part
                upper[ax] = box.upper[ax]
        return total

    val, ok = _adaptive_box(box.lower, box.upper, expo, lam, tol)
    if not ok:
        raise ToleranceError("box quadrature did not converge", val)
    return val


# ---------------------------------------------------------------------------
# exterior integral over the orthant minus the cube [0, L]^d
# ---------------------------------------------------------------------------

def _radial_tail(R: float, alpha: float, lam: float) -> float:
    """Integral of r^(-1-alpha) e^(-lam r) over (R, inf)."""
    if lam == 0.0:
        return R**-alpha / alpha
    return lam**alpha * upper_incomplete_gamma(-alpha, lam * R)


def _cap_overlap(L: float, r: float, tol: float) -> float:
    """Solid angle (within the octant) where two coordinates of a radius-r
    direction both exceed L.  Nonzero for r > L*sqrt(2)."""
    c = L / r
    phi0 = math.asin(c)
    if phi0 >= math.pi / 4.0:
        return 0.0

    def f(phi):
        q = c / math.sin(phi)
        return math.sqrt(max(0.0, 1.0 - q * q))

    val, _ = _quad(f, phi0, math.pi / 4.0, tol)
    return 2.0 * val


def exterior_integral(d: int, L: float, alpha: float, lam: float, tol: float = 1e-12) -> float:
    """Integral of e^(-lam |xi|) |xi|^(-(d+alpha)) over R_+^d minus [0, L]^d.

    Split into a fully radial tail beyond |xi| = L*sqrt(d) (closed form times
    the orthant angular measure) and a band correction over L < |xi| <
    L*sqrt(d) weighted by the angular measure mu_d(r) of directions whose
    radius-r point lies outside the cube.
    """
    if L <= 0.0:
        raise ValueError(f"L must be > 0, got {L}")
    if d == 1:
        return _radial_tail(L, alpha, lam)

    orthant = math.pi / 2.0  # quarter circle (d=2) and octant (d=3) alike
    tail = orthant * _radial_tail(L * math.sqrt(d), alpha, lam)

    if d == 2:
        # band via r = L / cos(psi): mu_2(r) = 2 psi, smooth integrand
        def f(psi):
            c = math.cos(psi)
            r = L / c
            return 2.0 * psi * math.exp(-lam * r) * r**(-1.0 - alpha) * L * math.sin(psi) / (c * c)

        band, _ = _quad(f, 0.0, math.pi / 4.0, tol)
        return tail + band

    if d == 3:
        quarter_cap = math.pi / 2.0

        def mu3(r):
            m = 3.0 * quarter_cap * (1.0 - L / r)
            if r > L * math.sqrt(2.0):
                m -= 3.0 * _cap_overlap(L, r, tol)
            return m

        def f(r):
            return mu3(r) * math.exp(-lam * r) * r**(-1.0 - alpha)

        band1, _ = _quad(f, L, L * math.sqrt(2.0), tol)
        band2, _ = _quad(f, L * math.sqrt(2.0), L * math.sqrt(3.0), tol)
        return tail + band1 + band2

    raise ValueError(f"d must be 1, 2 or 3, got {d}")


# ---------------------------------------------------------------------------
# bulk element integrals on the uniform xi-grid
# ---------------------------------------------------------------------------

def _order_bump(lam_h: float) -> int:
    """Extra GL order when the exponential is stiff on one element."""
    if lam_h <= 0.5:
        return 0
    if lam_h <= 1.5:
        return 4
    if lam_h <= 3.0:
        return 8
    return 8 + 2 * math.ceil(lam_h)


def element_integrals(spec: WeightSpec, N: int, h: float, tol: float = 1e-12) -> np.ndarray:
    """Weight integrals over every grid element [k*h, (k+1)*h]^d, k in {0..N-1}^d.

    Vectorized tensor Gauss-Legendre with the order tiered by the element's
    index distance from the origin; the origin element goes through the
    polar / spherical closed-radial route.  Returns an array of shape (N,)*d.
    """
    d, expo, lam = spec.d, spec.exponent, spec.lam
    if d == 1:
        out = np.empty(N)
        for k in range(N):
            out[k] = radial_weight_integral(k * h, (k + 1) * h, spec.nu, lam)
        return out

    bump = _order_bump(lam * h)
    out = np.zeros((N,) * d)
    cheb = np.max(np.indices((N,) * d), axis=0)

    orders = np.full((N,) * d, 7)
    orders[cheb < 16] = 10
    orders[cheb < 4] = 16
    orders[cheb < 2] = 24
    for p in np.unique(orders):
        mask = (orders == p) & (cheb >= 1)
        ks = np.argwhere(mask)
        if ks.size:
            out[mask] = _bulk_gl(ks, h, expo, lam, p + bump)

    if d == 2:
        out[(0,) * d] = _origin_square(h, spec.nu, lam, tol)
    else:
        out[(0,) * d] = _origin_cube(h, spec.nu, lam, tol)
    return out


def _bulk_gl(ks: np.ndarray, h: float, expo: float, lam: float, p: int) -> np.ndarray:
    """Order-p tensor GL over the unit elements with integer corners ``ks``.

    ks has shape (n_elements, d).  Evaluation is chunked so the node tensor
    stays within a bounded memory footprint.
    """
    t, w = _gl_rule(p)
    d = ks.shape[1]
    n = ks.shape[0]
    scale = h**d
    out = np.empty(n)
    chunk = max(1, int(8_000_000 // p**d))
    for s in range(0, n, chunk):
        kc = ks[s : s + chunk]
        m = kc.shape[0]
        r2 = np.zeros((m,) + (p,) * d)
        for ax in range(d):
            nodes = (kc[:, ax, None] + t[None, :]) * h  # (m, p)
            shape = [m] + [1] * d
            shape[1 + ax] = p
            r2 += (nodes**2).reshape(shape)
        vals = _weight_values(r2, expo, lam)
        for _ in range(d):
            vals = vals @ w
        out[s : s + m] = vals * scale
    return out

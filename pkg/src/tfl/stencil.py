"""Coefficient tensors of the finite difference scheme.

For a grid with spacing h on the reference cube [0, L]^d, each off-center
coefficient couples a node pair at index offset k and equals the weight
integral over the elements touching xi_k, scaled by 2^(#zeros in k) /
(2^d |xi_k|^gamma); near the origin the gamma = 2 limit adds corrections
proportional to the origin-element integral.  The center coefficient absorbs
the exterior integral and balances the row sums.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .quadrature import WeightSpec, element_integrals, exterior_integral, radial_weight_integral

__all__ = ["SchemeParams", "StencilTensor", "build_stencil"]


def _default_domain(d: int) -> tuple:
    return tuple((-1.0, 1.0) for _ in range(d))


@dataclass(frozen=True)
class SchemeParams:
    """Full description of one discretization.

    The mesh size is h = L/N with L the largest domain extent; per-axis node
    counts are the smallest integers whose span covers each extent.
    """

    d: int
    alpha: float
    lam: float
    N: int
    gamma: float = 2.0
    domain: tuple = None

    def __post_init__(self):
        if self.domain is None:
            object.__setattr__(self, "domain", _default_domain(self.d))
        else:
            object.__setattr__(
                self, "domain", tuple((float(a), float(b)) for a, b in self.domain)
            )
        if len(self.domain) != self.d:
            raise ValueError(f"domain has {len(self.domain)} axes, expected {self.d}")
        if any(b <= a for a, b in self.domain):
            raise ValueError(f"domain extents must be positive, got {self.domain}")
        if self.N < 2:
            raise ValueError(f"N must be >= 2, got {self.N}")
        # WeightSpec validates d, alpha, gamma, lam
        self.weight_spec()

    def weight_spec(self) -> WeightSpec:
        return WeightSpec(self.d, self.alpha, self.gamma, self.lam)

    @property
    def L(self) -> float:
        return max(b - a for a, b in self.domain)

    @property
    def h(self) -> float:
        return self.L / self.N

    @property
    def counts(self) -> tuple:
        """Nodes per axis: smallest N_i with a_i + N_i h >= b_i."""
        h = self.h
        return tuple(
            max(2, math.ceil((b - a) / h - 1e-12)) for a, b in self.domain
        )

    @property
    def interior_dims(self) -> tuple:
        """Interior unknowns per axis, ordered (x, y, z)."""
        return tuple(n - 1 for n in self.counts)

    def axis_nodes(self, axis: int) -> np.ndarray:
        a, _ = self.domain[axis]
        return a + self.h * np.arange(self.counts[axis] + 1)

    def interior_points(self) -> list:
        """Interior node coordinates per axis, ordered (x, y, z)."""
        return [self.axis_nodes(ax)[1:-1] for ax in range(self.d)]


@dataclass(frozen=True)
class StencilTensor:
    """Coefficient tensor: off-center entries indexed by {0..N}^d minus 0,
    plus the (negative) center coefficient."""

    params: SchemeParams
    offdiag: np.ndarray = field(repr=False)
    center: float

    @property
    def d(self) -> int:
        return self.params.d

    def kernel(self) -> np.ndarray:
        """Offsets tensor with the center placed at index 0, axes (x, y, z)."""
        kern = self.offdiag.copy()
        kern[(0,) * self.d] = self.center
        return kern


def build_stencil(params: SchemeParams, tol: float = 1e-12) -> StencilTensor:
    if params.d == 1:
        return _build_1d(params)
    return _build_nd(params, tol)


def _build_1d(params: SchemeParams) -> StencilTensor:
    N, h, L = params.N, params.h, params.L
    gamma, lam, nu = params.gamma, params.lam, params.gamma - params.alpha
    a = np.zeros(N + 1)
    for m in range(1, N + 1):
        if m == 1 and gamma == 2.0:
            val = radial_weight_integral(0.0, 2.0 * h, nu, lam) + radial_weight_integral(
                0.0, h, nu, lam
            )
        else:
            # the m = N element set is clipped at L
            val = radial_weight_integral((m - 1) * h, min((m + 1) * h, L), nu, lam)
        a[m] = val / (2.0 * m**gamma * h**gamma)
    ext = exterior_integral(1, L, params.alpha, lam)
    center = -2.0 * ext - 2.0 * math.fsum(a[1:])
    return StencilTensor(params, a, center)


def _build_nd(params: SchemeParams, tol: float) -> StencilTensor:
    d, N, h, L = params.d, params.N, params.h, params.L
    gamma, lam, alpha = params.gamma, params.lam, params.alpha
    spec = params.weight_spec()

    E = element_integrals(spec, N, h, tol)

    # node-accumulated element sums: T[k] = sum of E over elements with
    # vertex xi_k, i.e. element indices k-1 and k per axis, clipped to the grid
    T = np.zeros((N + 1,) * d)
    for shifts in np.ndindex(*((2,) * d)):
        sl = tuple(slice(s, s + N) for s in shifts)
        T[sl] += E
    origin = E[(0,) * d]

    idx = np.indices((N + 1,) * d)
    sigma = sum(ax == 0 for ax in idx)
    xi_pow = (h * np.sqrt(sum(ax.astype(float) ** 2 for ax in idx))) ** gamma
    xi_pow[(0,) * d] = 1.0  # center handled separately

    bracket = T.copy()
    if math.floor(gamma / 2.0) == 1:
        near = np.ones((N + 1,) * d, dtype=bool)
        for ax in idx:
            near &= ax <= 1
        cbar = np.zeros((N + 1,) * d)
        if d == 2:
            cbar[near & (sigma == 1)] = 1.0
            cbar[near & (sigma == 0)] = -1.0
            bracket += cbar * origin
        else:
            cbar[near & (sigma == 2)] = -5.0 / 3.0
            cbar[near & (sigma <= 1)] = 1.0
            bracket -= cbar * origin

    a = (2.0**sigma) / (2.0**d * xi_pow) * bracket
    a[(0,) * d] = 0.0

    ext = exterior_integral(d, L, alpha, lam, tol)
    center = -(2.0**d) * ext
    if d == 2:
        center -= 2.0 * math.fsum(a[1:, 0]) + 2.0 * math.fsum(a[0, 1:])
        center -= 4.0 * math.fsum(a[1:, 1:].ravel())
    else:
        center -= 2.0 * (
            math.fsum(a[1:, 0, 0]) + math.fsum(a[0, 1:, 0]) + math.fsum(a[0, 0, 1:])
        )
        center -= 4.0 * (
            math.fsum(a[0, 1:, 1:].ravel())
            + math.fsum(a[1:, 0, 1:].ravel())
            + math.fsum(a[1:, 1:, 0].ravel())
        )
        center -= 8.0 * math.fsum(a[1:, 1:, 1:].ravel())
    return StencilTensor(params, a, center)

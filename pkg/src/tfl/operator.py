"""Grid fields and the FFT-accelerated discrete operator.

The scheme couples unknowns through componentwise absolute index offsets, so
the assembled matrix is symmetric (multilevel) Toeplitz.  Embedding its first
column into a circulant of twice the size per axis turns every apply into a
pair of FFTs; a direct dense route is kept as a verification oracle.
"""

from dataclasses import dataclass, field

import numpy as np

from .special import normalization_constant
from .stencil import SchemeParams, StencilTensor, build_stencil

__all__ = ["GridFunction", "TemperedOperator", "build_operator", "DENSE_CAP"]

# apply_dense refuses problems larger than this many unknowns
DENSE_CAP = 20_000


def _good_fft_size(n: int) -> int:
    """Smallest 5-smooth integer >= n."""
    best = 1 << (n - 1).bit_length()
    p5 = 1
    while p5 < best:
        p3 = p5
        while p3 < best:
            p2 = p3
            while p2 < n:
                p2 *= 2
            best = min(best, p2)
            p3 *= 3
        p5 *= 5
    return best


@dataclass
class GridFunction:
    """Interior nodal values of a field; the exterior is identically zero.

    ``values`` has shape (nz, ny, nx) trimmed to dimension, C order, so the
    flattened vector runs x fastest, matching the operator's block layout.
    """

    params: SchemeParams
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        expect = self.params.interior_dims[::-1]
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != expect:
            raise ValueError(
                f"values shape {self.values.shape} does not match interior {expect}"
            )

    @property
    def d(self) -> int:
        return self.params.d

    @property
    def dims(self) -> tuple:
        """Interior counts ordered (x, y, z)."""
        return self.params.interior_dims

    @classmethod
    def zeros(cls, params: SchemeParams) -> "GridFunction":
        return cls(params, np.zeros(params.interior_dims[::-1]))

    @classmethod
    def sample(cls, params: SchemeParams, fn) -> "GridFunction":
        """Evaluate ``fn`` on the interior nodes.

        ``fn`` takes d arrays (x, then y, then z) and must broadcast.
        """
        axes = params.interior_points()
        grids = np.meshgrid(*axes[::-1], indexing="ij", sparse=True)  # (z, y, x)
        shape = params.interior_dims[::-1]
        vals = np.broadcast_to(np.asarray(fn(*grids[::-1]), dtype=float), shape)
        return cls(params, vals.copy())

    def copy(self) -> "GridFunction":
        return GridFunction(self.params, self.values.copy())


def _check_match(op: "TemperedOperator", u: GridFunction):
    if u.values.shape != op.shape:
        raise ValueError(f"field shape {u.values.shape} does not match operator {op.shape}")


class TemperedOperator:
    """The discrete tempered fractional Laplacian bound to one grid.

    Immutable once built; concurrent applies only touch per-call scratch.
    """

    def __init__(self, stencil: StencilTensor):
        self.stencil = stencil
        params = stencil.params
        self.params = params
        self.scale = -normalization_constant(params.d, params.alpha, params.lam)
        self.shape = params.interior_dims[::-1]  # (nz, ny, nx) trimmed

        kern = stencil.kernel()
        # first column in array axis order: offsets along (z, y, x)
        first = kern[tuple(slice(0, n) for n in params.interior_dims)]
        first = first.transpose(tuple(range(params.d))[::-1])
        self.first_column = self.scale * first
        # circulant embedding per axis: [a_0 .. a_{n-1}, zeros, a_{n-1} .. a_1],
        # padded from 2n up to the next 5-smooth FFT size
        emb_shape = tuple(_good_fft_size(2 * n) for n in self.shape)
        maps = [np.minimum(np.arange(s), s - np.arange(s)) for s in emb_shape]
        mesh = np.meshgrid(*maps, indexing="ij", sparse=True)
        valid = np.ones(emb_shape, dtype=bool)
        for m, n in zip(mesh, self.shape):
            valid &= m <= n - 1
        emb = first[tuple(np.minimum(m, n - 1) for m, n in zip(mesh, self.shape))]
        emb[~valid] = 0.0
        self._emb_shape = emb_shape
        self._axes = tuple(range(params.d))
        self.spectrum = np.fft.rfftn(emb)

    def apply_raw(self, values: np.ndarray) -> np.ndarray:
        """FFT apply on a bare interior array: O(M log M) per call."""
        pad = np.zeros(self._emb_shape)
        pad[tuple(slice(0, n) for n in self.shape)] = values
        conv = np.fft.irfftn(
            np.fft.rfftn(pad) * self.spectrum, s=self._emb_shape, axes=self._axes
        )
        return self.scale * conv[tuple(slice(0, n) for n in self.shape)]

    def apply(self, u: GridFunction) -> GridFunction:
        """FFT apply through the circulant embedding."""
        _check_match(self, u)
        return GridFunction(u.params, self.apply_raw(u.values))

    def apply_dense(self, u: GridFunction, cap: int = DENSE_CAP) -> GridFunction:
        """Direct evaluation of the scheme sums, independent of the FFT path."""
        _check_match(self, u)
        M = int(np.prod(self.shape))
        if M > cap:
            raise ValueError(f"dense apply capped at {cap} unknowns, got {M}")
        kern = self.stencil.kernel()
        vec = u.values.ravel()
        multi = np.unravel_index(np.arange(M), self.shape)  # (z, y, x) indices
        cols = [ax.copy() for ax in multi]
        out = np.empty(M)
        chunk = max(1, 2_000_000 // max(M, 1))
        for s in range(0, M, chunk):
            sl = slice(s, min(s + chunk, M))
            offs = tuple(
                np.abs(ax[sl, None] - col[None, :]) for ax, col in zip(multi, cols)
            )
            block = kern[tuple(offs[::-1])]  # kernel axes are (x, y, z)
            out[sl] = block @ vec
        return GridFunction(u.params, (self.scale * out).reshape(self.shape))

    def dense_matrix(self, cap: int = 4096) -> np.ndarray:
        """Explicit matrix realization for small problems (eigen checks)."""
        M = int(np.prod(self.shape))
        if M > cap:
            raise ValueError(f"dense matrix capped at {cap} unknowns, got {M}")
        kern = self.stencil.kernel()
        multi = np.unravel_index(np.arange(M), self.shape)
        offs = tuple(np.abs(ax[:, None] - ax[None, :]) for ax in multi)
        return self.scale * kern[tuple(offs[::-1])]


def build_operator(params: SchemeParams, tol: float = 1e-12) -> TemperedOperator:
    return TemperedOperator(build_stencil(params, tol))

"""Linear solves and time stepping on top of the discrete operator.

Poisson problems go through matrix-free conjugate gradients (the assembled
operator is symmetric positive definite).  Reaction-diffusion systems use a
Crank-Nicolson step for the stiff nonlocal part and a second-order explicit
extrapolation of the reaction, so each step costs one SPD solve per field.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .operator import GridFunction, TemperedOperator, build_operator
from .stencil import SchemeParams

__all__ = [
    "CGConfig",
    "CGError",
    "AllenCahnSpec",
    "GrayScottSpec",
    "TimeStepperState",
    "cg_solve",
    "solve_poisson",
    "cn_step",
    "run_allen_cahn",
    "run_gray_scott",
]


@dataclass(frozen=True)
class CGConfig:
    rel_tol: float = 1e-10
    max_iter: int = 10_000

    def __post_init__(self):
        if self.rel_tol <= 0.0:
            raise ValueError("rel_tol must be > 0")


class CGError(RuntimeError):
    """Conjugate gradients hit max_iter; carries the state reached."""

    def __init__(self, iterations: int, residual: float):
        super().__init__(f"CG failed to converge in {iterations} iterations (relres {residual:.3e})")
        self.iterations = iterations
        self.residual = residual


def cg_solve(
    action,
    rhs: np.ndarray,
    cfg: CGConfig = CGConfig(),
    x0: np.ndarray = None,
    precond=None,
    callback=None,
):
    """(Preconditioned) conjugate gradients for a symmetric positive definite
    ``action``.

    Returns (x, iterations, final relative residual).  ``precond`` is an
    optional SPD approximate inverse; ``callback(it, x, relres)`` runs once
    per iteration.
    """
    rhs_norm = math.sqrt(float(np.vdot(rhs, rhs)))
    if rhs_norm == 0.0:
        return np.zeros_like(rhs), 0, 0.0
    x = np.zeros_like(rhs) if x0 is None else x0.astype(float, copy=True)
    r = rhs - action(x)
    z = r if precond is None else precond(r)
    p = z.copy()
    rz = float(np.vdot(r, z))
    for it in range(1, cfg.max_iter + 1):
        relres = math.sqrt(float(np.vdot(r, r))) / rhs_norm
        if callback is not None:
            callback(it - 1, x, relres)
        if relres <= cfg.rel_tol:
            return x, it - 1, relres
        ap = action(p)
        alpha = rz / float(np.vdot(p, ap))
        x += alpha * p
        r -= alpha * ap
        z = r if precond is None else precond(r)
        rz_new = float(np.vdot(r, z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    relres = math.sqrt(float(np.vdot(r, r))) / rhs_norm
    if relres <= cfg.rel_tol:
        return x, cfg.max_iter, relres
    raise CGError(cfg.max_iter, relres)


def circulant_preconditioner(op: TemperedOperator, shift: float = 0.0, coeff: float = 1.0):
    """Approximate inverse of shift*I + coeff*A via the optimal multilevel
    circulant: each Toeplitz level's first column t is mapped to
    c_k = ((n-k) t_k + k t_{n-k}) / n, then inverted in Fourier space."""
    col = coeff * op.first_column
    col[(0,) * col.ndim] += shift
    for ax, n in enumerate(col.shape):
        k = np.arange(n)
        rev = col.take((n - k) % n, axis=ax)
        kk = k.reshape([n if a == ax else 1 for a in range(col.ndim)])
        col = ((n - kk) * col + kk * rev) / n
    eigs = np.maximum(np.abs(np.fft.rfftn(col).real), 1e-12 * np.max(np.abs(col)))
    shape = col.shape
    axes = tuple(range(col.ndim))

    def apply_inv(v):
        return np.fft.irfftn(np.fft.rfftn(v) / eigs, s=shape, axes=axes)

    return apply_inv


def solve_poisson(
    params: SchemeParams,
    f: GridFunction,
    cfg: CGConfig = CGConfig(),
    operator: TemperedOperator = None,
) -> GridFunction:
    """Solve A u = f with extended homogeneous Dirichlet exterior."""
    op = operator if operator is not None else build_operator(params)
    if f.values.shape != op.shape:
        raise ValueError("right-hand side does not match the operator grid")
    x, _, _ = cg_solve(
        op.apply_raw, f.values, cfg, precond=circulant_preconditioner(op)
    )
    return GridFunction(params, x)


# ---------------------------------------------------------------------------
# reaction specs (shifted variables with homogeneous exterior)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AllenCahnSpec:
    """Allen-Cahn reaction in the shifted variable w = u + 1.

    The exterior value u = -1 maps to w = 0, so one field with a single
    diffusion coefficient of 1.
    """

    epsilon: float
    alpha: float

    def __post_init__(self):
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be > 0")

    kappas = (1.0,)

    def rates(self, fields):
        (w,) = fields
        u = w - 1.0
        return (-u * (u * u - 1.0) / self.epsilon**self.alpha,)


@dataclass(frozen=True)
class GrayScottSpec:
    """Gray-Scott reactions in shifted variables (w, v) = (u - 1, v).

    The exterior state (u, v) = (1, 0) maps to (0, 0); the feed a and
    depletion b sit in the explicit part.
    """

    kappa1: float = 2e-5
    kappa2: float = 1e-5
    a: float = 0.04
    b: float = 0.065

    def __post_init__(self):
        if min(self.kappa1, self.kappa2, self.a, self.b) <= 0.0:
            raise ValueError("Gray-Scott parameters must be positive")

    @property
    def kappas(self):
        return (self.kappa1, self.kappa2)

    def rates(self, fields):
        w, v = fields
        uvv = (w + 1.0) * v * v
        return (-uvv - self.a * w, uvv - (self.a + self.b) * v)


@dataclass
class TimeStepperState:
    """Time, shifted fields, and the previous reaction evaluation."""

    t: float
    fields: tuple
    prev_rates: tuple = None


def cn_step(
    ops,
    state: TimeStepperState,
    dt: float,
    reaction,
    cfg: CGConfig = CGConfig(),
) -> TimeStepperState:
    """One Crank-Nicolson / explicit-extrapolation step.

    Per field: (I + dt/2 k A) w' = (I - dt/2 k A) w + dt * Rhat, where Rhat
    is (3/2) R(w^n) - (1/2) R(w^{n-1}) after the first step and R(w^0) on it.
    """
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    if isinstance(ops, TemperedOperator):
        ops = (ops,) * len(state.fields)
    kappas = reaction.kappas
    rates = reaction.rates(tuple(f.values for f in state.fields))
    if state.prev_rates is None:
        rhat = rates
    else:
        rhat = tuple(1.5 * r - 0.5 * rp for r, rp in zip(rates, state.prev_rates))

    new_fields = []
    for op, f, kap, rh in zip(ops, state.fields, kappas, rhat):
        half = 0.5 * dt * kap

        def action(v, _op=op, _half=half):
            return v + _half * _op.apply_raw(v)

        rhs = f.values - half * op.apply_raw(f.values) + dt * rh
        x, _, _ = cg_solve(
            action, rhs, cfg, x0=f.values,
            precond=_cn_precond(op, half),
        )
        new_fields.append(GridFunction(f.params, x))
    return TimeStepperState(state.t + dt, tuple(new_fields), rates)


def _cn_precond(op, half):
    cache = op.__dict__.setdefault("_cn_precond_cache", {})
    if half not in cache:
        if len(cache) > 8:
            cache.clear()
        cache[half] = circulant_preconditioner(op, shift=1.0, coeff=half)
    return cache[half]


def _run(ops, state, reaction, dt, t_end, snapshot_times, unshift, cfg):
    """March to t_end, emitting unshifted snapshots at the requested times."""
    remaining = sorted(snapshot_times)
    snaps = []

    def grab(s):
        while remaining and remaining[0] <= s.t + dt * 1e-9:
            snaps.append((remaining.pop(0), unshift(s)))

    grab(state)
    n_steps = int(round(t_end / dt))
    for _ in range(n_steps):
        if state.t >= t_end - dt * 1e-9:
            break
        state = cn_step(ops, state, dt, reaction, cfg)
        grab(state)
    return snaps, state


def run_allen_cahn(
    params: SchemeParams,
    epsilon: float,
    dt: float,
    t_end: float,
    snapshot_times=(),
    centers=((0.4, 0.4), (0.6, 0.6)),
    radius: float = 0.12,
    cfg: CGConfig = CGConfig(),
    operator: TemperedOperator = None,
):
    """Kissing-bubbles Allen-Cahn run; snapshots are in the unshifted u."""
    op = operator if operator is not None else build_operator(params)
    spec = AllenCahnSpec(epsilon, params.alpha)

    def initial(*coords):
        u = np.ones(np.broadcast_shapes(*(np.shape(c) for c in coords)))
        for c0 in centers:
            dist = np.sqrt(sum((c - cc) ** 2 for c, cc in zip(coords, c0)))
            u = u - np.tanh((dist - radius) / epsilon)
        return u

    u0 = GridFunction.sample(params, initial)
    state = TimeStepperState(0.0, (GridFunction(params, u0.values + 1.0),))

    def unshift(s):
        return (GridFunction(params, s.fields[0].values - 1.0),)

    return _run((op,), state, spec, dt, t_end, snapshot_times, unshift, cfg)[0]


def run_gray_scott(
    params: SchemeParams,
    dt: float,
    t_end: float,
    snapshot_times=(),
    spec: GrayScottSpec = GrayScottSpec(),
    perturb_box=None,
    perturb_values=(0.5, 0.25),
    cfg: CGConfig = CGConfig(),
    operator: TemperedOperator = None,
):
    """Gray-Scott run from the trivial state with a centered perturbation.

    Snapshots are (u, v) in the unshifted variables.  ``perturb_box`` is a
    per-axis (lo, hi) tuple; None keeps the trivial state exactly.
    """
    op = operator if operator is not None else build_operator(params)
    u = np.ones(params.interior_dims[::-1])
    v = np.zeros(params.interior_dims[::-1])
    if perturb_box is not None:
        axes = params.interior_points()
        grids = np.meshgrid(*axes[::-1], indexing="ij", sparse=True)  # (z, y, x)
        inside = np.ones(u.shape, dtype=bool)
        for g, (lo, hi) in zip(grids[::-1], perturb_box):
            inside &= (g >= lo) & (g <= hi)
        u[inside] = perturb_values[0]
        v[inside] = perturb_values[1]
    state = TimeStepperState(
        0.0, (GridFunction(params, u - 1.0), GridFunction(params, v))
    )

    def unshift(s):
        return (
            GridFunction(params, s.fields[0].values + 1.0),
            GridFunction(params, s.fields[1].values.copy()),
        )

    return _run((op, op), state, spec, dt, t_end, snapshot_times, unshift, cfg)[0]

"""Experiment driver: test functions, error norms, convergence studies, I/O.

Reference ("exact") solutions are the same scheme on a nested finer grid, so
coarse nodes coincide with fine ones and restriction is exact.  Tables are
serialized to CSV with a fixed column set; fields go to raw float64
snapshots with a JSON metadata sidecar.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .operator import GridFunction, build_operator
from .solver import CGConfig, solve_poisson
from .stencil import SchemeParams

__all__ = [
    "TestFunctionSpec",
    "ErrorTable",
    "error_norms",
    "least_squares_order",
    "operator_convergence",
    "poisson_convergence",
    "write_csv",
    "read_csv",
    "write_snapshot",
    "read_snapshot",
]

CSV_COLUMNS = ("alpha", "lambda", "gamma", "h", "err_inf", "err_l2", "order_inf", "order_l2")


@dataclass(frozen=True)
class TestFunctionSpec:
    """Separable bump u(x) = prod_i (1 - x_i^2)_+^p, supported on (-1,1)^d."""

    p: float
    d: int
    family: str = "bracket_power"

    def __post_init__(self):
        if self.family != "bracket_power":
            raise ValueError(f"unknown family {self.family!r}")
        if self.p <= 0.0:
            raise ValueError("p must be > 0")

    def __call__(self, *coords):
        out = 1.0
        for c in coords:
            out = out * np.maximum(0.0, 1.0 - np.asarray(c) ** 2) ** self.p
        return out


@dataclass
class ErrorTable:
    """Rows of (alpha, lambda, gamma, h, errors, fitted orders)."""

    rows: list = field(default_factory=list)

    def add(self, alpha, lam, gamma, h, err_inf, err_l2):
        order_inf = order_l2 = None
        prev = self.rows[-1] if self.rows else None
        if (
            prev is not None
            and (prev["alpha"], prev["lambda"], prev["gamma"]) == (alpha, lam, gamma)
            and prev["h"] > h
        ):
            if prev["err_inf"] > 0 and err_inf > 0:
                order_inf = math.log2(prev["err_inf"] / err_inf) / math.log2(prev["h"] / h)
            if prev["err_l2"] > 0 and err_l2 > 0:
                order_l2 = math.log2(prev["err_l2"] / err_l2) / math.log2(prev["h"] / h)
        self.rows.append(
            {
                "alpha": alpha,
                "lambda": lam,
                "gamma": gamma,
                "h": h,
                "err_inf": err_inf,
                "err_l2": err_l2,
                "order_inf": order_inf,
                "order_l2": order_l2,
            }
        )

    def series(self, alpha, lam=None, gamma=None):
        """(h, err_inf, err_l2) arrays of one parameter series."""
        sel = [
            r
            for r in self.rows
            if r["alpha"] == alpha
            and (lam is None or r["lambda"] == lam)
            and (gamma is None or r["gamma"] == gamma)
        ]
        hs = np.array([r["h"] for r in sel])
        return hs, np.array([r["err_inf"] for r in sel]), np.array([r["err_l2"] for r in sel])

    def fitted_order(self, alpha, norm="inf", lam=None):
        hs, e_inf, e_l2 = self.series(alpha, lam)
        errs = e_inf if norm == "inf" else e_l2
        return least_squares_order(hs, errs)


def least_squares_order(hs, errs) -> float:
    """Least-squares slope of log2(err) against log2(h)."""
    x = np.log2(np.asarray(hs, dtype=float))
    y = np.log2(np.asarray(errs, dtype=float))
    if len(x) < 2:
        raise ValueError("need at least two levels to fit an order")
    xbar, ybar = x.mean(), y.mean()
    return float(((x - xbar) * (y - ybar)).sum() / ((x - xbar) ** 2).sum())


def error_norms(u: GridFunction, v: GridFunction):
    """(max, scaled-l2) norms of u - v over the interior nodes.

    The 2-norm is h^(d/2) times the Euclidean norm, i.e. the discrete L2 norm.
    """
    if u.values.shape != v.values.shape:
        raise ValueError("grid functions have mismatched shapes")
    diff = u.values - v.values
    inf = float(np.max(np.abs(diff))) if diff.size else 0.0
    l2 = float(u.params.h ** (u.d / 2.0) * np.linalg.norm(diff.ravel()))
    return inf, l2


def _restrict(fine: GridFunction, coarse_params: SchemeParams) -> GridFunction:
    """Pointwise restriction of a fine-grid field to nested coarse nodes."""
    ratio = fine.params.N // coarse_params.N
    if coarse_params.N * ratio != fine.params.N:
        raise ValueError(
            f"grids are not nested: N_fine={fine.params.N}, N_coarse={coarse_params.N}"
        )
    if fine.params.domain != coarse_params.domain:
        raise ValueError("reference and target domains differ")
    sel = tuple(
        slice(ratio - 1, None, ratio) for _ in range(fine.d)
    )  # coarse node i -> fine node i*ratio -> interior index i*ratio - 1
    return GridFunction(coarse_params, fine.values[sel].copy())


def operator_convergence(
    fn_spec: TestFunctionSpec,
    alphas,
    lam: float,
    N_list,
    N_ref: int,
    gamma: float = 2.0,
    domain=None,
    tol: float = 1e-12,
) -> ErrorTable:
    """Errors of the discrete operator applied to a fixed function.

    The reference is the same scheme at N_ref; every N in N_list must divide
    it so the grids nest.
    """
    table = ErrorTable()
    for alpha in alphas:
        ref_params = SchemeParams(fn_spec.d, alpha, lam, N_ref, gamma, domain)
        ref_op = build_operator(ref_params, tol)
        ref_val = ref_op.apply(GridFunction.sample(ref_params, fn_spec))
        for N in sorted(N_list):
            params = SchemeParams(fn_spec.d, alpha, lam, N, gamma, domain)
            coarse = build_operator(params, tol).apply(GridFunction.sample(params, fn_spec))
            inf, l2 = error_norms(coarse, _restrict(ref_val, params))
            table.add(alpha, lam, gamma, params.h, inf, l2)
    return table


def poisson_convergence(
    problem,
    alphas,
    lam: float,
    N_list,
    N_ref: int,
    gamma: float = 2.0,
    domain=None,
    cfg: CGConfig = CGConfig(),
    tol: float = 1e-12,
) -> ErrorTable:
    """Errors in solving A u = f on a sweep of grids.

    ``problem`` is either a TestFunctionSpec (manufactured solution: f is the
    reference-grid operator applied to it, errors are against the exact
    function) or the string "constant" (f = 1, self-convergence against the
    N_ref solution).
    """
    manufactured = isinstance(problem, TestFunctionSpec)
    table = ErrorTable()
    d = problem.d if manufactured else 2
    for alpha in alphas:
        ref_params = SchemeParams(d, alpha, lam, N_ref, gamma, domain)
        if manufactured:
            ref_op = build_operator(ref_params, tol)
            f_ref = ref_op.apply(GridFunction.sample(ref_params, problem))
        else:
            ref_op = build_operator(ref_params, tol)
            ones = GridFunction(ref_params, np.ones(ref_params.interior_dims[::-1]))
            u_ref = solve_poisson(ref_params, ones, cfg, operator=ref_op)
        for N in sorted(N_list):
            params = SchemeParams(d, alpha, lam, N, gamma, domain)
            op = build_operator(params, tol)
            if manufactured:
                f = _restrict(f_ref, params)
                u_h = solve_poisson(params, f, cfg, operator=op)
                exact = GridFunction.sample(params, problem)
            else:
                f = GridFunction(params, np.ones(params.interior_dims[::-1]))
                u_h = solve_poisson(params, f, cfg, operator=op)
                exact = _restrict(u_ref, params)
            inf, l2 = error_norms(u_h, exact)
            table.add(alpha, lam, gamma, params.h, inf, l2)
    return table


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return ""
    return repr(float(x))


def write_csv(table: ErrorTable, path) -> None:
    lines = [",".join(CSV_COLUMNS)]
    for r in table.rows:
        lines.append(",".join(_fmt(r[c]) for c in CSV_COLUMNS))
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path) -> ErrorTable:
    text = Path(path).read_text().strip().splitlines()
    if not text or text[0].strip() != ",".join(CSV_COLUMNS):
        raise ValueError(f"unexpected CSV header in {path}")
    table = ErrorTable()
    for line in text[1:]:
        parts = line.split(",")
        if len(parts) != len(CSV_COLUMNS):
            raise ValueError(f"malformed CSV row: {line!r}")
        row = {
            c: (None if p == "" else float(p)) for c, p in zip(CSV_COLUMNS, parts)
        }
        table.rows.append(row)
    return table


def _sidecar(path: Path) -> Path:
    base = path.with_suffix("") if path.suffix else path
    return base.with_name(base.name + ".meta.json")


def write_snapshot(fields, path, t: float = 0.0, names=None) -> None:
    """Raw little-endian float64 payload plus a <name>.meta.json sidecar.

    ``fields`` is one GridFunction or a sequence sharing a grid; multi-field
    payloads are concatenated in order.
    """
    if isinstance(fields, GridFunction):
        fields = [fields]
    params = fields[0].params
    if names is None:
        names = ["u", "v", "w"][: len(fields)]
    if any(f.values.shape != fields[0].values.shape for f in fields):
        raise ValueError("all fields in one snapshot must share a grid")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = b"".join(np.ascontiguousarray(f.values, dtype="<f8").tobytes() for f in fields)
    path.write_bytes(payload)
    meta = {
        "d": params.d,
        "dims": list(params.interior_dims),
        "domain": [list(ab) for ab in params.domain],
        "h": params.h,
        "alpha": params.alpha,
        "lambda": params.lam,
        "gamma": params.gamma,
        "N": params.N,
        "t": t,
        "fields": list(names),
    }
    _sidecar(path).write_text(json.dumps(meta, indent=1) + "\n")


def read_snapshot(path):
    """Inverse of write_snapshot: (fields, metadata dict)."""
    path = Path(path)
    meta = json.loads(_sidecar(path).read_text())
    params = SchemeParams(
        meta["d"],
        meta["alpha"],
        meta["lambda"],
        meta["N"],
        meta["gamma"],
        tuple(tuple(ab) for ab in meta["domain"]),
    )
    shape = tuple(meta["dims"][::-1])
    count = int(np.prod(shape))
    raw = np.frombuffer(path.read_bytes(), dtype="<f8")
    n_fields = len(meta["fields"])
    if raw.size != count * n_fields:
        raise ValueError(
            f"payload holds {raw.size} values, expected {count * n_fields} "
            f"({n_fields} field(s) of shape {shape})"
        )
    fields = [
        GridFunction(params, raw[i * count : (i + 1) * count].reshape(shape).copy())
        for i in range(n_fields)
    ]
    return fields, meta

"""Command line front end.

Every subcommand reads an optional JSON config (selected by a top-level
"experiment" key) with flags taking precedence, exits 0 on success, and on
failure prints one machine-readable JSON error line to stderr.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .harness import (
    TestFunctionSpec,
    operator_convergence,
    poisson_convergence,
    read_snapshot,
    write_csv,
    write_snapshot,
)
from .operator import GridFunction, build_operator
from .solver import run_allen_cahn, run_gray_scott, solve_poisson
from .stencil import SchemeParams, build_stencil

# Allen-Cahn dt sits under the stability bound of the explicit reaction
# extrapolation, dt * 2 / epsilon^alpha < 1, for the default epsilon = 0.03.
_PRESETS = {
    "allen-cahn": {"desk": dict(n=256, dt=5e-4), "paper": dict(n=1024, dt=5e-4)},
    "gray-scott": {"desk": dict(n=256, dt=0.5), "paper": dict(n=1024, dt=0.5)},
}


def _parse_domain(text, d):
    if text is None:
        return None
    pairs = [tuple(float(v) for v in part.split(",")) for part in text.split(";")]
    if len(pairs) == 1:
        pairs = pairs * d
    return tuple(pairs)


def _params_from(args, d=None):
    d = d if d is not None else args.d
    return SchemeParams(
        d, args.alpha, args.lam, args.n, args.gamma, _parse_domain(args.domain, d)
    )


def _merge_config(args, argv):
    """Fill argument defaults from the JSON config; explicit flags win."""
    if not getattr(args, "config", None):
        return args
    cfg = json.loads(Path(args.config).read_text())
    cfg.pop("experiment", None)
    given = {a.split("=")[0] for a in argv if a.startswith("--")}
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if dest == "lambda":
            dest = "lam"
        if f"--{key}" in given or f"--{key.replace('_', '-')}" in given:
            continue
        if not hasattr(args, dest):
            raise ValueError(f"unknown config key {key!r}")
        setattr(args, dest, value)
    return args


def _cmd_coeffs(args):
    params = _params_from(args)
    st = build_stencil(params)
    kern = st.kernel()
    cols = ["m", "n", "s"][: params.d]
    lines = [",".join(cols + ["value"])]
    for k in np.ndindex(kern.shape):
        lines.append(",".join(str(i) for i in k) + "," + repr(float(kern[k])))
    Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"wrote {len(lines) - 1} coefficients to {args.out}")


def _cmd_apply(args):
    fields, meta = read_snapshot(args.infile)
    op = build_operator(fields[0].params)
    out = [op.apply(f) for f in fields]
    write_snapshot(out, args.out, t=meta.get("t", 0.0), names=meta["fields"])
    print(f"wrote operator image to {args.out}")


def _cmd_poisson(args):
    params = _params_from(args)
    op = build_operator(params)
    if args.rhs_one:
        f = GridFunction(params, np.ones(params.interior_dims[::-1]))
    else:
        spec = TestFunctionSpec(args.solution_p, params.d)
        ref_params = SchemeParams(
            params.d, args.alpha, args.lam, args.ref_n, args.gamma,
            _parse_domain(args.domain, params.d),
        )
        ref_op = build_operator(ref_params)
        ratio = args.ref_n // args.n
        if ratio * args.n != args.ref_n:
            raise ValueError("ref-n must be a multiple of n")
        fine_f = ref_op.apply(GridFunction.sample(ref_params, spec))
        sel = tuple(slice(ratio - 1, None, ratio) for _ in range(params.d))
        f = GridFunction(params, fine_f.values[sel].copy())
    u = solve_poisson(params, f, operator=op)
    write_snapshot(u, args.out, names=["u"])
    print(f"wrote solution to {args.out}")


def _cmd_convergence(args):
    alphas = [float(a) for a in str(args.alphas).split(",")]
    ns = [int(n) for n in str(args.ns).split(",")]
    if args.mode == "operator":
        spec = TestFunctionSpec(args.p, args.d)
        table = operator_convergence(
            spec, alphas, args.lam, ns, args.ref_n, args.gamma,
            _parse_domain(args.domain, args.d),
        )
    else:
        problem = "constant" if args.rhs_one else TestFunctionSpec(args.p, args.d)
        table = poisson_convergence(
            problem, alphas, args.lam, ns, args.ref_n, args.gamma,
            _parse_domain(args.domain, args.d),
        )
    write_csv(table, args.out)
    print(f"wrote {len(table.rows)} rows to {args.out}")


def _apply_preset(args, kind):
    preset = _PRESETS[kind][args.preset]
    if args.preset == "paper":
        print("note: paper-scale preset is long-running", file=sys.stderr)
    for key, value in preset.items():
        if getattr(args, key) is None:
            setattr(args, key, value)


def _snapshot_series(snaps, out, names):
    for t, fields in snaps:
        path = f"{out}_t{t:g}.bin"
        write_snapshot(list(fields), path, t=t, names=names)
        print(f"wrote {path}")


def _cmd_allen_cahn(args):
    _apply_preset(args, "allen-cahn")
    params = SchemeParams(2, args.alpha, args.lam, args.n, args.gamma,
                          _parse_domain(args.domain, 2) or ((0.0, 1.0), (0.0, 1.0)))
    times = [float(t) for t in str(args.snapshots).split(",")]
    snaps = run_allen_cahn(params, args.epsilon, args.dt, max(times), times)
    _snapshot_series(snaps, args.out, ["u"])


def _cmd_gray_scott(args):
    _apply_preset(args, "gray-scott")
    domain = _parse_domain(args.domain, args.d) or tuple(((0.0, 2.5),) * args.d)
    params = SchemeParams(args.d, args.alpha, args.lam, args.n, args.gamma, domain)
    times = [float(t) for t in str(args.snapshots).split(",")]
    box = ((1.201, 1.299),) * 2 if args.d == 2 else ((1.152, 1.348),) * 3
    snaps = run_gray_scott(params, args.dt, max(times), times, perturb_box=box)
    _snapshot_series(snaps, args.out, ["u", "v"])


def _add_scheme_flags(p, n_default=None):
    p.add_argument("--alpha", type=float, default=1.5)
    p.add_argument("--lambda", dest="lam", type=float, default=0.5)
    p.add_argument("--gamma", type=float, default=2.0)
    p.add_argument("--n", type=int, default=n_default)
    p.add_argument("--domain", help='per-axis "a,b" pairs joined by ";"')
    p.add_argument("--config", help="JSON config; flags override its values")


def build_parser():
    parser = argparse.ArgumentParser(prog="tfl",
                                     description="tempered fractional Laplacian toolbox")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("coeffs", help="dump stencil coefficients to CSV")
    _add_scheme_flags(p, 16)
    p.add_argument("--d", type=int, default=1, choices=(1, 2, 3))
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_coeffs)

    p = sub.add_parser("apply", help="apply the operator to a field snapshot")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.set_defaults(func=_cmd_apply)

    p = sub.add_parser("poisson", help="solve the fractional Poisson problem")
    _add_scheme_flags(p, 32)
    p.add_argument("--d", type=int, default=2, choices=(1, 2, 3))
    p.add_argument("--rhs-one", action="store_true", help="use f = 1")
    p.add_argument("--solution-p", type=float, default=2.0,
                   help="manufactured bracket-power exponent")
    p.add_argument("--ref-n", type=int, default=256, help="grid for preparing f")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_poisson)

    p = sub.add_parser("convergence", help="operator or Poisson convergence study")
    _add_scheme_flags(p)
    p.add_argument("--d", type=int, default=2, choices=(1, 2, 3))
    p.add_argument("--mode", choices=("operator", "poisson"), default="poisson")
    p.add_argument("--alphas", default="0.5,1,1.5")
    p.add_argument("--ns", default="16,32,64")
    p.add_argument("--ref-n", type=int, default=256)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--rhs-one", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_convergence)

    p = sub.add_parser("allen-cahn", help="kissing-bubbles Allen-Cahn run")
    _add_scheme_flags(p)
    p.add_argument("--preset", choices=("desk", "paper"), default="desk")
    p.add_argument("--epsilon", type=float, default=0.03)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--snapshots", default="5")
    p.add_argument("--out", required=True, help="output path prefix")
    p.set_defaults(func=_cmd_allen_cahn, alpha=1.9, lam=0.2)

    p = sub.add_parser("gray-scott", help="Gray-Scott pattern run")
    _add_scheme_flags(p)
    p.add_argument("--d", type=int, default=2, choices=(2, 3))
    p.add_argument("--preset", choices=("desk", "paper"), default="desk")
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--snapshots", default="100")
    p.add_argument("--out", required=True, help="output path prefix")
    p.set_defaults(func=_cmd_gray_scott, alpha=1.8, lam=5.0)
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else [str(a) for a in argv]
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _merge_config(args, argv)
        args.func(args)
        return 0
    except Exception as exc:  # fail with one machine-readable line
        print(json.dumps({"error": str(exc), "type": type(exc).__name__}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command line front end.

Subcommands: validate a problem file, emit a mesh, solve (optionally with
the smooth/layer split and certificates), and run convergence studies for
one parameter choice (converge) or across a parameter grid (sweep).

Exit codes: 0 ok, 2 unreadable or malformed input, 3 problem validation
failure, 4 mesh construction failure, 5 requested convergence band not met.
All numbers are written with 17 significant digits, so output is
byte-identical across runs and floats round-trip exactly.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

from .analysis import (
    MODE_EXACT,
    MODE_TWO_MESH,
    MeshNestingError,
    OracleUnavailableError,
    convergence_study,
    default_eps_grid,
    eps_label,
    uniform_sweep,
)
from .mesh import MeshError, build_mesh
from .problem import (
    DEFAULT_SAMPLE_COUNT,
    ProblemFormatError,
    ProblemValidationError,
    load_problem,
    validate,
)
from .solver import (
    RHS_GIVEN,
    STEP_RESIDUAL_RTOL,
    certify_max_principle,
    certify_stability,
    decompose,
    march,
)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_MESH = 4
EXIT_BAND = 5


def _fmt(x):
    return format(float(x), ".17g")


def _csv_line(fields):
    buf = io.StringIO()
    csv.writer(buf, lineterminator="").writerow([str(f) for f in fields])
    return buf.getvalue()


def _emit(lines, out_path):
    text = "\n".join(lines) + "\n"
    if out_path is None or out_path == "-":
        sys.stdout.write(text)
    else:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _existing_file(path):
    if not os.path.isfile(path):
        raise argparse.ArgumentTypeError(f"no such file: {path}")
    return path


def _int_list(text):
    try:
        values = [int(part) for part in text.split(",") if part]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text}") from exc
    if not values:
        raise argparse.ArgumentTypeError("empty mesh size list")
    return values


def _eps_grid_arg(text):
    if text == "default":
        return "default"
    try:
        return [tuple(float(v) for v in group.split(",")) for group in text.split(";") if group]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not an eps grid: {text}") from exc


def _mode_value(text):
    return MODE_EXACT if text == "exact" else MODE_TWO_MESH


def _load_validated(args):
    spec = load_problem(args.problem)
    return validate(spec, args.samples)


def _cmd_validate(args):
    vp = _load_validated(args)
    spec = vp.spec
    if args.json:
        print(json.dumps({
            "alpha": vp.alpha,
            "n": spec.n,
            "T": spec.T,
            "eps": list(spec.eps),
            "sample_count": vp.sample_count,
        }))
    else:
        print("alpha = %s" % _fmt(vp.alpha))
    return EXIT_OK


def _cmd_mesh(args):
    vp = _load_validated(args)
    mesh = build_mesh(vp, args.N)
    lines = [
        "# sigmas = " + ",".join(_fmt(s) for s in mesh.sigmas),
        "# b = " + ",".join(str(bit) for bit in mesh.b),
        "j,t_j,delta_j",
        _csv_line(["0", _fmt(mesh.points[0]), ""]),
    ]
    for j in range(1, mesh.N + 1):
        lines.append(_csv_line([j, _fmt(mesh.points[j]), _fmt(mesh.deltas[j - 1])]))
    _emit(lines, args.out)
    return EXIT_OK


def _cmd_solve(args):
    vp = _load_validated(args)
    mesh = build_mesh(vp, args.N)
    grid = march(vp, mesh, vp.spec.u0, RHS_GIVEN, kind="full",
                 residual_rtol=args.residual_rtol)
    n = vp.spec.n
    lines = ["# alpha = %s" % _fmt(vp.alpha)]
    certificates_ok = True
    if args.certify:
        nonneg = certify_max_principle(vp, grid)
        stability = certify_stability(vp, grid)
        certificates_ok = nonneg and stability.ok
        lines += [
            "# max_principle = %s" % ("ok" if nonneg else "violated"),
            "# stability_bound = %s" % _fmt(stability.bound),
            "# stability_max_norm = %s" % _fmt(stability.max_norm),
            "# stability_ok = %s" % ("true" if stability.ok else "false"),
        ]
    header = ["j", "t_j"] + ["U_%d" % (i + 1) for i in range(n)]
    parts = None
    if args.decompose:
        parts = decompose(vp, mesh)
        header += ["V_%d" % (i + 1) for i in range(n)]
        header += ["W_%d" % (i + 1) for i in range(n)]
    lines.append(_csv_line(header))
    for j in range(mesh.N + 1):
        fields = [j, _fmt(mesh.points[j])]
        fields += [_fmt(grid.values[i, j]) for i in range(n)]
        if parts is not None:
            fields += [_fmt(parts.smooth.values[i, j]) for i in range(n)]
            fields += [_fmt(parts.singular.values[i, j]) for i in range(n)]
        lines.append(_csv_line(fields))
    _emit(lines, args.out)
    if not certificates_ok:
        print("error: a solve certificate failed; see the header comments", file=sys.stderr)
        return 1
    return EXIT_OK


def _report_lines(lines, report):
    for row in report.rows:
        lines.append(_csv_line([
            report.eps_label,
            row.N,
            _fmt(row.error),
            "" if row.p is None else _fmt(row.p),
            _fmt(row.c_fit),
        ]))


def _uniform_lines(lines, rows):
    for row in rows:
        lines.append(_csv_line([
            "uniform",
            row.N,
            _fmt(row.error),
            "" if row.p is None else _fmt(row.p),
            _fmt(row.c_fit),
        ]))


def _row_dict(row):
    return {"N": row.N, "error": row.error, "p": row.p, "c_fit": row.c_fit}


def _report_dict(report):
    return {
        "eps_label": report.eps_label,
        "rows": [_row_dict(row) for row in report.rows],
    }


def _min_present_p(rows):
    ps = [row.p for row in rows if row.p is not None]
    return min(ps) if ps else None


def _cmd_converge(args):
    vp = _load_validated(args)
    report = convergence_study(vp, args.N, args.mode)
    if args.json:
        _emit([json.dumps({"mode": report.mode, **_report_dict(report)}, indent=2)], args.out)
    else:
        lines = ["# mode = %s" % report.mode, "eps_label,N,D,p,C_fit"]
        _report_lines(lines, report)
        _emit(lines, args.out)
    if args.min_p is not None:
        worst = _min_present_p(report.rows)
        if worst is None or worst < args.min_p:
            print(
                "error: observed order %s is below the requested band %s"
                % ("absent" if worst is None else _fmt(worst), _fmt(args.min_p)),
                file=sys.stderr,
            )
            return EXIT_BAND
    return EXIT_OK


def _cmd_sweep(args):
    spec = load_problem(args.problem)
    grid = default_eps_grid(spec.n) if args.eps_grid == "default" else args.eps_grid
    sweep = uniform_sweep(spec, grid, args.N, args.mode,
                          sample_count=args.samples, jobs=args.jobs)
    if args.json:
        payload = {
            "mode": sweep.mode,
            "reports": [_report_dict(r) for r in sweep.reports],
            "uniform": [_row_dict(row) for row in sweep.uniform_rows],
        }
        _emit([json.dumps(payload, indent=2)], args.out)
    else:
        lines = ["# mode = %s" % sweep.mode, "eps_label,N,D,p,C_fit"]
        for report in sweep.reports:
            _report_lines(lines, report)
        _uniform_lines(lines, sweep.uniform_rows)
        _emit(lines, args.out)
    if args.min_p_uniform is not None:
        worst = _min_present_p(sweep.uniform_rows)
        if worst is None or worst < args.min_p_uniform:
            print(
                "error: robust order %s is below the requested band %s"
                % ("absent" if worst is None else _fmt(worst), _fmt(args.min_p_uniform)),
                file=sys.stderr,
            )
            return EXIT_BAND
    return EXIT_OK


def _add_problem_options(sub):
    sub.add_argument("--problem", required=True, type=_existing_file,
                     help="problem file (JSON)")
    sub.add_argument("--samples", type=int, default=DEFAULT_SAMPLE_COUNT,
                     help="validation sample count (default %(default)s)")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="layerode",
        description="Layer-adapted implicit solver for stiff linear ODE systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a problem file and report alpha")
    _add_problem_options(p)
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("mesh", help="emit mesh points and widths as CSV")
    _add_problem_options(p)
    p.add_argument("--N", required=True, type=int, help="number of mesh intervals")
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.set_defaults(func=_cmd_mesh)

    p = sub.add_parser("solve", help="solve and emit the grid as CSV")
    _add_problem_options(p)
    p.add_argument("--N", required=True, type=int, help="number of mesh intervals")
    p.add_argument("--decompose", action="store_true",
                   help="append smooth (V) and layer (W) columns")
    p.add_argument("--certify", action="store_true",
                   help="add nonnegativity and stability certificates to the header")
    p.add_argument("--residual-rtol", type=float, default=STEP_RESIDUAL_RTOL,
                   help="per-step residual guard (default %(default)s)")
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("converge", help="convergence study for one problem")
    _add_problem_options(p)
    p.add_argument("--N", required=True, type=_int_list,
                   help="doubling mesh sizes, comma separated")
    p.add_argument("--mode", choices=("exact", "two_mesh"), default="two_mesh",
                   help="error measure (default %(default)s)")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--min-p", type=float, default=None,
                   help="exit 5 if the smallest observed order is below this")
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.set_defaults(func=_cmd_converge)

    p = sub.add_parser("sweep", help="convergence studies across a parameter grid")
    _add_problem_options(p)
    p.add_argument("--N", required=True, type=_int_list,
                   help="doubling mesh sizes, comma separated")
    p.add_argument("--mode", choices=("exact", "two_mesh"), default="two_mesh",
                   help="error measure (default %(default)s)")
    p.add_argument("--eps-grid", type=_eps_grid_arg, default="default",
                   help="'default' or groups like '0.015625,0.25;0.0625,1'")
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel workers for independent studies (default 1)")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--min-p-uniform", type=float, default=None,
                   help="exit 5 if the smallest robust order is below this")
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.set_defaults(func=_cmd_sweep)

    return parser


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        args.mode = _mode_value(args.mode) if hasattr(args, "mode") else None
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ProblemValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (MeshError, MeshNestingError) as exc:
        print(f"mesh error: {exc}", file=sys.stderr)
        return EXIT_MESH
    except (ProblemFormatError, OracleUnavailableError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()

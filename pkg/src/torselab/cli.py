"""Command-line interface.

Exit codes: 0 when every expectation is met, 1 on an expectation mismatch or
a contradicted theorem, 2 on input errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from torselab import config
from torselab.deform import D_ISOMETRIC, KINDS
from torselab.errors import ScenarioError, SchemaError, TorselabError
from torselab.report import DEFAULT_SAMPLES, DEFAULT_SEED, run_report
from torselab.scenario import DeformSpec, builtin_names, check_file, load_scenario

EXIT_OK, EXIT_MISMATCH, EXIT_INPUT = 0, 1, 2


def _overrides(items: list[str] | None) -> dict[str, str]:
    out = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep or not name.strip():
            raise SchemaError(f"--set expects NAME=EXPR, got {item!r}")
        out[name.strip()] = value.strip()
    return out


def _tolerances(args) -> config.Tolerances:
    tol = config.from_env()
    return tol.with_overrides(fit=args.tol_fit, identity=args.tol_id)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("scenario", help="built-in name or path to a scenario file")
    p.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--set", action="append", metavar="NAME=EXPR", help="override a [params] or [let] entry")
    p.add_argument("--tol-fit", type=float, default=None, help="fit residual tolerance")
    p.add_argument("--tol-id", type=float, default=None, help="identity tolerance")
    p.add_argument("--points", action="store_true", help="include the per-point table in text output")
    p.add_argument("--timing", action="store_true", help="include wall time in the output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="torselab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list", help="list built-in scenarios")

    p = sub.add_parser("classify", help="classify the scenario's vector field")
    _common(p)

    p = sub.add_parser("deform", help="apply one deformation and check its theorems")
    _common(p)
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--sigma", default=None, help="conformal factor (defaults to the scenario's)")

    p = sub.add_parser("verify", help="full report including theorem checks")
    _common(p)

    p = sub.add_parser("check-file", help="validate a scenario file without running it")
    p.add_argument("path")
    return parser


def _emit(report, args) -> int:
    if args.format == "json":
        print(report.to_json(include_timing=args.timing))
    else:
        print(report.render_text(include_points=args.points))
        if args.timing:
            print(f"  wall time {report.wall_time:.3f}s")
    return EXIT_OK if report.ok else EXIT_MISMATCH


def _deform_scenario(s, kind: str, sigma_src: str | None):
    if sigma_src is not None:
        if kind == D_ISOMETRIC:
            raise SchemaError("d-isometric deformation takes no sigma")
        spec = DeformSpec(kind, kind, s.parse_expr(sigma_src, "--sigma"))
    else:
        matches = [d for d in s.deformations if d.kind == kind]
        if matches:
            spec = matches[0]
        elif kind == D_ISOMETRIC:
            spec = DeformSpec(kind, kind)
        else:
            raise SchemaError(f"scenario {s.name} declares no {kind} deformation; pass --sigma")
    # a user-supplied sigma invalidates the file's expectation for that deformation
    keep = ("class",) if sigma_src is not None else ("class", spec.label)
    expected = {k: v for k, v in s.expected.items() if k in keep}
    return dataclasses.replace(s, deformations=(spec,), expected=expected)


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "list":
            for name in builtin_names():
                s = load_scenario(name)
                print(f"{name:<24} {s.description}")
            return EXIT_OK
        if args.command == "check-file":
            s = check_file(args.path)
            print(f"ok: {s.name} ({s.dim}-dimensional, {len(s.deformations)} deformation(s))")
            return EXIT_OK

        tol = _tolerances(args)
        s = load_scenario(args.scenario, overrides=_overrides(args.set))
        if args.command == "classify":
            s = dataclasses.replace(s, expected={k: v for k, v in s.expected.items() if k == "class"})
            return _emit(run_report(s, args.samples, args.seed, tol, theorems=False), args)
        if args.command == "deform":
            s = _deform_scenario(s, args.kind, args.sigma)
        return _emit(run_report(s, args.samples, args.seed, tol), args)
    except (TorselabError, ValueError) as exc:
        kind = "input error" if isinstance(exc, (ScenarioError, ValueError)) else type(exc).__name__
        print(f"torselab: {kind}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

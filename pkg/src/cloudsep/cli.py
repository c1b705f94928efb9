"""Command line entry point.

Subcommands mirror the pipeline stages: ``synth`` writes ground-truth moments
and samples for a measure spec, ``separate`` recovers cloud moments from an
input measure, ``reconstruct`` fits the cloud shape, ``perturb`` runs a
robustness experiment, and ``report`` collates artifacts.

Every flag falls back to an environment variable with the ``CLOUDSEP_``
prefix (flag beats environment beats built-in default).  Exit codes: 2 for
input or configuration problems (nothing partial is written), 3 when a trace
fails to converge, 4 when the rational fit is too ill conditioned to trust.
"""

from __future__ import annotations

import argparse
import os
import sys

from .errors import (
    CentroidUndefined,
    CloudSepError,
    DegreeOutOfRange,
    EmptyMeasure,
    FitIllConditioned,
    NoConvergence,
    NotAMomentMatrix,
    OutsideDomainRequired,
    QuadratureFailure,
    RankDeficient,
)
from .pipeline import (
    RunConfig,
    cmd_perturb,
    cmd_reconstruct,
    cmd_report,
    cmd_separate,
    cmd_synth,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NO_CONVERGENCE = 3
EXIT_ILL_CONDITIONED = 4

_VALIDATION_ERRORS = (
    ValueError,
    OSError,
    EmptyMeasure,
    QuadratureFailure,
    NotAMomentMatrix,
    RankDeficient,
    DegreeOutOfRange,
    CentroidUndefined,
    OutsideDomainRequired,
)


def _env(name: str):
    return os.environ.get("CLOUDSEP_" + name)


def _env_or(name: str, fallback, conv):
    raw = _env(name)
    if raw is None:
        return fallback
    try:
        return conv(raw)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"CLOUDSEP_{name}={raw!r}: {exc}") from None


def _parse_grid(text: str):
    """Parse ``NXxNY`` or ``NXxNY:x0,x1,y0,y1`` into (resolution, box|None)."""
    text = text.strip()
    box = None
    if ":" in text:
        res_part, box_part = text.split(":", 1)
        vals = [float(v) for v in box_part.split(",")]
        if len(vals) != 4:
            raise ValueError(f"grid box needs 4 numbers, got {box_part!r}")
        x0, x1, y0, y1 = vals
        if not (x0 < x1 and y0 < y1):
            raise ValueError(f"grid box {vals} is not ordered")
        box = (x0, x1, y0, y1)
    else:
        res_part = text
    parts = res_part.lower().split("x")
    if len(parts) != 2:
        raise ValueError(f"grid resolution must look like 41x41, got {res_part!r}")
    nx, ny = int(parts[0]), int(parts[1])
    if nx < 2 or ny < 2:
        raise ValueError("grid resolution must be at least 2x2")
    return (nx, ny), box


def _parse_bump(text: str):
    parts = [p.strip() for p in text.split(",")]
    if len(parts) not in (3, 4):
        raise ValueError(f"bump must be row,col,re[,im], got {text!r}")
    row, col = int(parts[0]), int(parts[1])
    re = float(parts[2])
    im = float(parts[3]) if len(parts) == 4 else 0.0
    return [row, col, [re, im]]


def _add_common(p: argparse.ArgumentParser, *, method=False, grid=False):
    p.add_argument(
        "--degree",
        type=int,
        default=_env_or("DEGREE", 6, int),
        help="cloud-moment degree window (default 6)",
    )
    p.add_argument(
        "--cutoff",
        type=int,
        default=_env_or("CUTOFF", 200, int),
        help="trace summation cutoff J (default 200)",
    )
    p.add_argument(
        "--margin",
        type=int,
        default=_env_or("MARGIN", 8, int),
        help="extra truncation rows beyond the provable minimum (default 8)",
    )
    p.add_argument(
        "--precision",
        choices=("auto", "double", "extended"),
        default=_env_or("PRECISION", "auto", str),
        help="trace accumulation arithmetic (default auto)",
    )
    p.add_argument(
        "--seed",
        type=int,
        default=_env_or("SEED", 0, int),
        help="random seed where sampling is involved (default 0)",
    )
    p.add_argument(
        "--out",
        default=_env_or("OUT", ".", str),
        help="output directory (default current directory)",
    )
    if method:
        p.add_argument(
            "--method",
            choices=("pade", "christoffel", "both"),
            default=_env_or("METHOD", "both", str),
            help="reconstruction route (default both)",
        )
    if grid:
        p.add_argument(
            "--grid",
            default=_env_or("GRID", "41x41", str),
            help="classification grid: NXxNY or NXxNY:x0,x1,y0,y1 "
            "(box defaults to the inferred support box inflated 1.5x)",
        )


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="cloudsep",
        description="Separate a planar measure's diffuse cloud from point "
        "outliers using its power moments, then reconstruct the cloud shape.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("synth", help="write exact moments/samples for a spec")
    ps.add_argument("input", help="measure spec JSON")
    ps.add_argument(
        "--degree", type=int, default=_env_or("DEGREE", 8, int),
        help="moment degree to tabulate (default 8)",
    )
    ps.add_argument(
        "--samples", type=int, default=0,
        help="also draw this many weighted samples (default 0: none)",
    )
    ps.add_argument("--seed", type=int, default=_env_or("SEED", 0, int))
    ps.add_argument("--out", default=_env_or("OUT", ".", str))

    psep = sub.add_parser("separate", help="recover cloud moments from a measure")
    psep.add_argument("input", help="spec JSON, sample CSV, or moment JSON")
    _add_common(psep)

    prec = sub.add_parser("reconstruct", help="fit the cloud shape")
    prec.add_argument("input", help="measure input or cloud_moments.json")
    _add_common(prec, method=True, grid=True)
    prec.add_argument(
        "--pade-order",
        type=int,
        default=None,
        help="node count of the rational model (default: numerical rank)",
    )
    prec.add_argument("--svg", action="store_true", help="also render shape.svg")

    pp = sub.add_parser("perturb", help="trace robustness experiment")
    pp.add_argument("input", help="spec JSON, sample CSV, or moment JSON")
    _add_common(pp)
    pp.add_argument(
        "--bump",
        action="append",
        default=None,
        metavar="ROW,COL,RE[,IM]",
        help="finite-rank entry bump (repeatable)",
    )
    pp.add_argument(
        "--eps",
        type=float,
        default=None,
        help="scaled random perturbation size (uses --seed)",
    )

    pr = sub.add_parser("report", help="collate artifacts in the output directory")
    pr.add_argument("--out", default=_env_or("OUT", ".", str))
    pr.add_argument("--svg", action="store_true")

    return p


def _config_from(args) -> RunConfig:
    cfg = RunConfig(
        input=args.input,
        out=args.out,
        degree=args.degree,
        cutoff=args.cutoff,
        margin=args.margin,
        precision=args.precision,
        seed=args.seed,
    )
    if hasattr(args, "method"):
        cfg.method = args.method
    if hasattr(args, "grid"):
        res, box = _parse_grid(args.grid)
        cfg.grid_res = res
        cfg.grid_box = box
    if getattr(args, "pade_order", None) is not None:
        if args.pade_order < 1:
            raise ValueError("--pade-order must be at least 1")
        cfg.pade_order = args.pade_order
    if getattr(args, "svg", False):
        cfg.svg = True
    return cfg


def _perturbation_from(args) -> dict:
    if args.bump and args.eps is not None:
        raise ValueError("give either --bump or --eps, not both")
    if args.bump:
        return {
            "kind": "finite_rank",
            "entries": [_parse_bump(b) for b in args.bump],
        }
    if args.eps is not None:
        return {"kind": "scaled_random", "eps": args.eps, "seed": args.seed}
    raise ValueError("perturb needs --bump or --eps")


def _dispatch(args) -> int:
    if args.command == "synth":
        written = cmd_synth(
            args.input,
            args.out,
            degree=args.degree,
            samples=args.samples,
            seed=args.seed,
        )
        for key, val in written.items():
            print(f"{key}: {val}")
        return EXIT_OK
    if args.command == "report":
        cfg = RunConfig(out=args.out, svg=getattr(args, "svg", False))
        report = cmd_report(cfg)
        print(f"report.json written with sections: {', '.join(sorted(report))}")
        return EXIT_OK
    cfg = _config_from(args)
    if args.command == "separate":
        rep = cmd_separate(cfg)
        tag = "absent" if rep["cloud_absent"] else "present"
        print(
            f"cloud {tag}: area {rep['area']:.6g} "
            f"(envelope {rep['area_envelope']:.2g}), J={rep['J']}, N={rep['N']}"
        )
        return EXIT_OK
    if args.command == "reconstruct":
        summary = cmd_reconstruct(cfg)
        if "pade" in summary:
            nodes = summary["pade"]["nodes"]
            print(
                f"rational model: order {summary['pade']['order']}, "
                f"residual {summary['pade']['residual']:.3g}, "
                f"nodes {['%.4g%+.4gj' % (x, y) for x, y in nodes]}"
            )
        if "christoffel" in summary:
            c = summary["christoffel"]
            print(
                f"classification: {c['components']} interior component(s), "
                f"cells {c['cells']}"
            )
        return EXIT_OK
    if args.command == "perturb":
        perturbation = _perturbation_from(args)
        rep = cmd_perturb(cfg, perturbation)
        verdict = "within envelopes" if rep["passed"] else "exceeded envelopes"
        print(f"perturbation {verdict} ({len(rep['pairs'])} pairs checked)")
        return EXIT_OK
    raise ValueError(f"unknown command {args.command!r}")


def main(argv=None) -> int:
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        return _dispatch(args)
    except NoConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except FitIllConditioned as exc:
        print(f"error: rational fit unusable: {exc}", file=sys.stderr)
        return EXIT_ILL_CONDITIONED
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except CloudSepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry point: ``curvequad --input net.json --out mesh.msh``."""

from __future__ import annotations

import argparse
import math
import sys
import warnings
from pathlib import Path

from .io.formats import InputError, parse_input, write_mesh_json, write_report
from .io.msh import write_msh
from .io.svg import render_mesh
from .pipeline import PipelineConfig, StageError, run

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_PIPELINE = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise _UsageError(message)


def _order(text: str):
    if text == "auto":
        return "auto"
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'auto', got {text!r}") from None
    return value


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="curvequad", description="High-order quadrilateral meshing of curve networks.")
    p.add_argument("--input", required=True, metavar="PATH", help="input network (JSON)")
    p.add_argument("--out", required=True, metavar="PATH",
                   help="mesh output; .msh writes MSH 4.1 plus a .json sidecar, .json writes the sidecar only")
    p.add_argument("--svg", metavar="PATH", help="SVG rendering colored by min J_m")
    p.add_argument("--report", metavar="PATH", help="JSON quality report with config echo")
    p.add_argument("--lt", type=float, default=0.05, metavar="F", help="target length (default 0.05 x bbox)")
    p.add_argument("--eps", type=float, default=0.001, metavar="F", help="geometric tolerance (default 0.001 x bbox)")
    p.add_argument("--tau", type=float, default=math.pi / 4, metavar="F", help="sector angle limit in radians")
    p.add_argument("--alpha", type=float, default=2.3, metavar="F", help="proximity density parameter (> 1)")
    p.add_argument("--order", type=_order, default="auto", metavar="N|auto", help="element order")
    p.add_argument("--absolute-units", action="store_true", help="read --lt and --eps as absolute lengths")
    p.add_argument("--debug-stages", metavar="DIR", help="write SVGs of intermediate stages")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError:
        return EXIT_INPUT
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        cfg = PipelineConfig(lt=args.lt, eps=args.eps, tau=args.tau, alpha=args.alpha, order=args.order,
                             absolute_units=args.absolute_units)
        net = parse_input(args.input)
    except (InputError, ValueError) as exc:
        print(f"curvequad: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        result = run(net, cfg, debug_dir=args.debug_stages)
    except ValueError as exc:
        print(f"curvequad: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except StageError as exc:
        print(f"curvequad: {exc}", file=sys.stderr)
        return EXIT_PIPELINE

    out = Path(args.out)
    mesh = result.mesh
    if out.suffix.lower() == ".json":
        write_mesh_json(mesh, out)
    else:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            write_msh(mesh, out)
        for w in caught:
            print(f"curvequad: warning: {w.message}", file=sys.stderr)
        write_mesh_json(mesh, out.with_suffix(".json"))
    if args.svg:
        render_mesh(mesh, args.svg, "Jm", result.report)
    if args.report:
        write_report(result.report, cfg, args.report)
    r = result.report
    print(f"{r.element_count} elements, min Jm {r.min_jm:.3f}, avg Jm {r.avg_jm:.3f}, "
          f"b_e {r.b_e:.2e}, {r.wall_time_seconds:.2f} s")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

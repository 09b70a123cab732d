"""plotviz command line: render figures from simulator output files.

Subcommands
-----------
plot-traj   trajectory CSV -> sphere3d or timeseries figure
plot-orbit  orbit JSON -> multiplier figure

Output format (PNG/SVG/PDF) follows the --out extension.
"""

from __future__ import annotations

import argparse
import sys

from .figures import FigureRequest, render
from .io import SchemaError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plotviz", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    traj = sub.add_parser("plot-traj", help="render a trajectory CSV")
    traj.add_argument("--in", dest="input_path", required=True)
    traj.add_argument("--out", dest="output_path", required=True)
    traj.add_argument("--kind", choices=("sphere3d", "timeseries"), default="sphere3d")
    traj.add_argument("--stride", type=int, default=1, help="plot every n-th sample")
    traj.add_argument("--elev", type=float, default=20.0, help="3D view elevation (deg)")
    traj.add_argument("--azim", type=float, default=-60.0, help="3D view azimuth (deg)")
    traj.add_argument("--lab-frame", action="store_true",
                      help="plot the lab-frame y instead of y - h")

    orbit = sub.add_parser("plot-orbit", help="render an orbit JSON multiplier map")
    orbit.add_argument("--in", dest="input_path", required=True)
    orbit.add_argument("--out", dest="output_path", required=True)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    kind = "multipliers" if args.command == "plot-orbit" else args.kind
    request = FigureRequest(
        input_path=args.input_path,
        kind=kind,
        output_path=args.output_path,
        elev=getattr(args, "elev", 20.0),
        azim=getattr(args, "azim", -60.0),
        stride=getattr(args, "stride", 1),
        lab_frame=getattr(args, "lab_frame", False),
    )
    try:
        path = render(request)
    except (SchemaError, OSError, ValueError) as exc:
        print(f"plotviz: {exc}", file=sys.stderr)
        return 2
    print(f"plotviz: wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

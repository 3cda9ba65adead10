"""Command line entry point: render figures from run-log CSVs."""

import argparse
import sys

from .errors import PlotError
from .figures import KINDS, PlotSpec, render


def build_parser():
    parser = argparse.ArgumentParser(
        prog="plots",
        description="Render figures from pinch-grasp run logs (CSV).")
    parser.add_argument("--in", dest="inputs", nargs="+", required=True,
                        metavar="CSV",
                        help="input run log(s); several are overlaid")
    parser.add_argument("--kinds", default=",".join(KINDS),
                        help="comma-separated figure kinds "
                             f"({', '.join(KINDS)})")
    parser.add_argument("--out", default=".", metavar="DIR",
                        help="output directory (created if missing)")
    parser.add_argument("--format", dest="fmt", default="png",
                        choices=("png", "pdf"), help="figure file format")
    parser.add_argument("--fd", type=float, default=4.0,
                        help="desired grasp force for the reference line (N)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    spec = PlotSpec(
        inputs=args.inputs,
        kinds=[k for k in args.kinds.split(",") if k],
        out_dir=args.out,
        fmt=args.fmt,
        f_d=args.fd,
    )
    try:
        written = render(spec)
    except (PlotError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())

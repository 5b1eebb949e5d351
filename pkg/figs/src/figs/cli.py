"""One command-line script per figure kind.

Usage pattern:  figs-<kind> MANIFEST [MANIFEST ...] --out PREFIX
Each writes PREFIX.svg and PREFIX.png; exit code 1 on bad inputs.
"""

from __future__ import annotations

import argparse
import sys

from .loader import InputError
from .render import FigureSpec, render


def _run(kind: str, description: str, n_inputs: str = "+") -> int:
    parser = argparse.ArgumentParser(description=description)
    parser.add_argument("manifests", nargs=n_inputs,
                        help="manifest JSON path(s)")
    parser.add_argument("--out", required=True, help="output path prefix")
    parser.add_argument("--title", default="")
    args = parser.parse_args(sys.argv[1:])
    try:
        written = render(FigureSpec(inputs=list(args.manifests), kind=kind,
                                    output=args.out, title=args.title))
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


def main_trace() -> int:
    return _run("trace", "Displacement-vs-time panel from a simulate run")


def main_amplitude() -> int:
    return _run("amplitude",
                "Amplitude vs distance-to-onset with theory overlay "
                "(sweep manifest(s) plus an analyze manifest)")


def main_error() -> int:
    return _run("error",
                "Relative amplitude errors against a reference sweep "
                "(comparison sweeps first, reference sweep last, plus an "
                "analyze manifest)")


def main_sensitivity() -> int:
    return _run("sensitivity", "Amplitude/frequency panels of one parameter scan")


def main_clusters() -> int:
    return _run("clusters", "N-row displacement traces colored by cluster")

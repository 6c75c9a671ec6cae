"""``hankel-lti`` command line.

Exit codes: 0 success, 1 usage error, 2 verification failure (or a replay
whose outputs differ from the manifest).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from typing import Optional, Sequence

from . import __version__
from .experiments import COMMANDS, UsageError, replay, resolve_seed, write_run
from .plotting import PLOT_KINDS, CsvFormatError, emit_svg

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _globals() -> argparse.ArgumentParser:
    # defaults are suppressed so flags given before or after the command both work
    g = argparse.ArgumentParser(add_help=False)
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                   help=f"RNG seed (default: ${'{'}HANKEL_LTI_SEED{'}'} or a fixed value)")
    g.add_argument("--out", default=argparse.SUPPRESS, help="output directory (default: .)")
    g.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker threads (default: 1)")
    g.add_argument("--format", choices=("csv", "json"), default=argparse.SUPPRESS, help="table format")
    g.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    return g


def build_parser() -> argparse.ArgumentParser:
    common = _globals()
    p = _Parser(prog="hankel-lti", parents=[common],
                description="Hankel singular value experiments for LTI systems and Markov-parameter kernels.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def cmd(name, help_):
        return sub.add_parser(name, parents=[common], help=help_, description=help_)

    def svg_flag(sp):
        sp.add_argument("--svg", action="store_true", help="also render an SVG figure")

    def gamma_flags(sp):
        sp.add_argument("--alpha", type=float, default=1.0, help="boundary exponent for gamma2-alpha")
        sp.add_argument("--s-max", type=float, default=None, help="gamma1 frequency band")
        sp.add_argument("--r-min", type=float, default=None, help="gamma1 smallest |Re a|")
        sp.add_argument("--r-max", type=float, default=None, help="gamma1 largest |Re a|")

    sp = cmd("eps-rank-sweep", "median/mean/p10/p90 eps-rank across state sizes")
    sp.add_argument("--scheme", required=True)
    sp.add_argument("--n-list", type=_int_list, default=[16, 32, 64, 128, 256])
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--eps", type=float, default=0.01)
    gamma_flags(sp)
    svg_flag(sp)

    sp = cmd("perturb", "relative Hankel spectra before and after random perturbations")
    sp.add_argument("--scheme", required=True)
    sp.add_argument("--n", type=int, default=64)
    sp.add_argument("--magnitudes", type=_float_list, default=[0.001, 0.01])
    sp.add_argument("--trials", type=int, default=20)
    sp.add_argument("--eps", type=float, default=0.01)
    gamma_flags(sp)
    svg_flag(sp)

    sp = cmd("memory", "impulse-response magnitude quantiles")
    sp.add_argument("--scheme", required=True, choices=("s4d-like", "hope"))
    sp.add_argument("--n", type=int, default=64)
    sp.add_argument("--T", type=int, default=None, help="horizon (default 2n)")
    sp.add_argument("--dt", type=float, default=0.1)
    sp.add_argument("--count", type=int, default=512)
    sp.add_argument("--fit-window", type=int, default=None, help="log-linear fit over t in [1, W) (default n)")
    svg_flag(sp)

    sp = cmd("verify", "Monte-Carlo check of a bound; exit 2 on any violation")
    sp.add_argument("--theorem", required=True, choices=("2", "4", "rom", "kernel"))
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--L", type=int, default=None)
    sp.add_argument("--slack", type=float, default=None, help="grid slack (default 1e-6)")
    sp.add_argument("--kernel-tol", type=float, default=None, help="kernel max-error tolerance (default 1e-8)")

    sp = cmd("histogram", "pooled relative Hankel singular values")
    sp.add_argument("--scheme", default="gamma3")
    sp.add_argument("--count", type=int, default=512)
    sp.add_argument("--n", type=int, default=64)
    sp.add_argument("--bins", type=int, default=40)
    sp.add_argument("--log-floor", type=float, default=1e-8)
    sp.add_argument("--params", default=None, help="Markov-parameter JSON fixture instead of sampling")
    gamma_flags(sp)
    svg_flag(sp)

    sp = cmd("kernel", "impulse response of a Markov-parameter kernel")
    sp.add_argument("--n", type=int, default=16)
    sp.add_argument("--L", type=int, default=256)
    sp.add_argument("--dt", type=float, default=1.0)
    sp.add_argument("--mode", choices=("causal", "paper-exact"), default="causal")
    sp.add_argument("--params", default=None, help="Markov-parameter JSON file")
    svg_flag(sp)

    sp = cmd("plot", "render a CSV table as SVG")
    sp.add_argument("csv")
    sp.add_argument("--kind", required=True, choices=PLOT_KINDS)
    sp.add_argument("-o", "--output", default=None, help="SVG path (default: CSV name with .svg)")
    sp.add_argument("--x", default=None)
    sp.add_argument("--y", default=None, help="comma-separated columns")
    sp.add_argument("--log-x", action="store_true")
    sp.add_argument("--log-y", action="store_true")

    sp = cmd("replay", "re-run a manifest and compare output hashes")
    sp.add_argument("manifest")
    return p


_GLOBAL_DEFAULTS = {"out": ".", "threads": 1, "format": "csv", "verbose": False}
_NOT_PARAMS = {"command", "out", "format", "svg", "verbose", "csv", "kind", "output", "manifest"}


def _params(ns: argparse.Namespace) -> dict:
    params = {k: v for k, v in vars(ns).items() if k not in _NOT_PARAMS}
    if ns.command == "memory" and params.get("T") is None:
        params["T"] = 2 * params["n"]
    return params


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        for k, v in _GLOBAL_DEFAULTS.items():
            if not hasattr(ns, k):
                setattr(ns, k, v)
        ns.seed = resolve_seed(getattr(ns, "seed", None))
        logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if ns.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        if ns.threads < 1:
            raise UsageError("--threads must be >= 1")
        if ns.command == "plot":
            return _plot(ns)
        if ns.command == "replay":
            return _replay(ns)
        res = write_run(ns.command, _params(ns), ns.out, ns.format, getattr(ns, "svg", False))
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CsvFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    summary = json.dumps(res.table.summary, sort_keys=True, default=str)
    print(f"{ns.command}: wrote {', '.join(res.outputs)}; {summary}")
    if res.table.passed is False:
        print(f"{ns.command}: FAILED ({res.table.summary.get('violations')} violations)", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _plot(ns) -> int:
    try:
        with open(ns.csv, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {ns.csv}: {exc.strerror}") from exc
    out = ns.output or os.path.splitext(ns.csv)[0] + ".svg"
    ys = [c for c in ns.y.split(",") if c] if ns.y else None
    emit_svg(text, ns.kind, out, x=ns.x, y=ys, log_x=ns.log_x, log_y=ns.log_y)
    print(f"plot: wrote {out}")
    return EXIT_OK


def _replay(ns) -> int:
    if not os.path.exists(ns.manifest):
        raise UsageError(f"no such manifest: {ns.manifest}")
    out = ns.out if ns.out != "." else tempfile.mkdtemp(prefix="hankel-lti-replay-")
    rep = replay(ns.manifest, out)
    for name, ok in sorted(rep.matches.items()):
        print(f"{'identical' if ok else 'DIFFERS  '} {name}")
    print(f"replay: outputs in {rep.out_dir}")
    return EXIT_OK if rep.identical else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())

"""``proxista`` command line.

Subcommands::

    proxista gallery     penalty and threshold tables/charts
    proxista solve       run the spec's solver set (no reference minimizer)
    proxista experiment  full reproduction run with reference and charts
    proxista verify      operator-property suite, written as verify.json

Exit codes: 0 success, 1 spec error, 2 divergence, 3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .errors import DivergenceError, SpecError
from .experiments import (default_spec, load_spec, plot_penalty_gallery, run_experiment,
                          verify_claims)

EXIT_OK, EXIT_SPEC, EXIT_DIVERGENCE, EXIT_VERIFY = 0, 1, 2, 3


def _spec(args, fallback):
    if args.spec:
        spec = load_spec(args.spec)
    else:
        spec = default_spec(fallback)
    if args.seed is not None:
        spec.setdefault("noise", {})["seed"] = args.seed
        if "signal" in spec and "values" not in spec["signal"]:
            spec["signal"]["seed"] = args.seed
    return spec


def _cmd_gallery(args):
    spec = _spec(args, "firm-gallery")
    plot_penalty_gallery(spec, alphas=args.alpha, out=args.out, fmt=args.format)
    print(f"gallery written to {args.out}")
    return EXIT_OK


def _run(args, fallback, reference):
    spec = _spec(args, fallback)
    res = run_experiment(spec, args.out, fmt=args.format, reference=reference)
    for name, entry in res.manifest["solvers"].items():
        tag = " (diverged)" if name in res.diverged else ""
        print(f"{name:9s} alpha={entry['alpha']:.6g} iters={entry['iterations']} "
              f"cost={entry['final_cost']:.12g}{tag}")
    bad = res.unexpected_divergence
    if bad:
        print(f"unexpected divergence: {', '.join(bad)}", file=sys.stderr)
        return EXIT_DIVERGENCE
    return EXIT_OK


def _cmd_verify(args):
    spec = _spec(args, "sparse-deconv")
    bundle = verify_claims(spec, args.out)
    for r in bundle.reports:
        print(f"{'PASS' if r.verdict else 'FAIL'} {r.property} worst={r.worst:.6g}")
    for k, why in bundle.skipped.items():
        print(f"SKIP {k}: {why}")
    return EXIT_OK if bundle.passed else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="proxista", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"proxista {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, default_out):
        p.add_argument("--spec", help="JSON spec file (or a run manifest)")
        p.add_argument("--out", default=default_out, help="output directory")
        p.add_argument("--seed", type=int, help="override the noise and signal seeds")
        p.add_argument("--format", choices=("csv", "svg", "both"), default="both")
        return p

    g = common(sub.add_parser("gallery", help="penalty/threshold gallery"), "gallery")
    g.add_argument("--alpha", type=float, action="append", help="step size (repeatable)")
    g.set_defaults(func=_cmd_gallery)
    common(sub.add_parser("solve", help="solver comparison"), "solve").set_defaults(
        func=lambda a: _run(a, "sparse-deconv", reference=False))
    common(sub.add_parser("experiment", help="full reproduction run"), "experiment").set_defaults(
        func=lambda a: _run(a, "sparse-deconv", reference=True))
    common(sub.add_parser("verify", help="operator-property suite"), "verify").set_defaults(
        func=_cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print("spec error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_SPEC
    try:
        return args.func(args)
    except SpecError as e:
        print(f"spec error: {e}", file=sys.stderr)
        return EXIT_SPEC
    except DivergenceError as e:
        print(f"divergence: {e}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except json.JSONDecodeError as e:
        print(f"spec error: {e}", file=sys.stderr)
        return EXIT_SPEC


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry point ``gradflow``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .. import rates
from ..core import _jsonable
from .config import ConfigError, ExperimentConfig, load_config
from .experiments import run_batch

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gradflow", description="Gradient flow experiments and audits.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="run every experiment of a config file")
    r.add_argument("config")

    q = sub.add_parser("rates", help="decay regime and extinction time for one parameter set")
    q.add_argument("--p", type=float, required=True)
    q.add_argument("--alpha", type=float, required=True)
    q.add_argument("--c", type=float, required=True)
    q.add_argument("--e0", type=float, required=True)
    q.add_argument("--t0", type=float, default=0.0)

    k = sub.add_parser("certify-kl", help="build and verify a KL certificate for a sample cloud")
    k.add_argument("cloud")
    k.add_argument("--C", type=float, default=2.0)
    k.add_argument("--bins", type=int, default=32)
    k.add_argument("--out", default="out")

    t = sub.add_parser("tv", help="total variation flow")
    t.add_argument("bc", choices=["dirichlet", "neumann"])
    t.add_argument("target", help="preset name (disc, box, half) or config file")
    t.add_argument("--out", default="out")

    w = sub.add_parser("wflow", help="1D Wasserstein flow")
    w.add_argument("target", help="preset name or config file")
    w.add_argument("--out", default="out")
    return ap


def _single_or_config(target: str, kind: str, out: str, extra=None) -> list:
    if Path(target).is_file():
        cfgs = load_config(target)
        return [c for c in cfgs if c.kind == kind] or cfgs
    params = {"preset": target}
    params.update(extra or {})
    return [ExperimentConfig(f"{kind}-{target}", kind, params, out)]


def _report(results) -> int:
    ok = True
    for res in results:
        for c in res["criteria"]:
            extra = f"  ({c['error']})" if "error" in c else ""
            print(f"{c['status']}  {res['name']}: {c['name']}  slack={c['slack']:.6g}{extra}")
        ok = ok and res["passed"]
        if res.get("directory"):
            print(f"      artifacts: {res['directory']}")
    return 0 if ok else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "rates":
            pred = rates.predict(args.p, args.alpha, args.c, args.t0, args.e0)
            print(json.dumps(_jsonable(pred.to_dict()), indent=2, sort_keys=True))
            return 0
        if args.cmd == "run":
            cfgs = load_config(args.config)
        elif args.cmd == "certify-kl":
            cfgs = [ExperimentConfig(f"certify-{Path(args.cloud).stem}", "certify-kl",
                                     {"cloud": str(Path(args.cloud).resolve()), "C": args.C,
                                      "bins": args.bins}, args.out)]
        elif args.cmd == "tv":
            cfgs = _single_or_config(args.target, f"tv-{args.bc}", args.out)
        else:
            cfgs = _single_or_config(args.target, "wflow", args.out)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return _report(run_batch(cfgs))


if __name__ == "__main__":
    sys.exit(main())

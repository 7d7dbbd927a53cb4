"""Command line: ``stratnoise {decompose,run,pools,oracle}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import channels as ch
from .experiment import (
    ConfigError, ExperimentConfig, build_protocol, channel_at, emit, logical_infidelity, run_experiment, to_json,
    to_table,
)
from .harness.steane import LABELS, build_steane_protocol
from .oracle import exact_expectation
from .sampling.pools import list_pools


def _config(args) -> ExperimentConfig:
    text = Path(args.config).read_text() if args.config else ""
    try:
        d = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if getattr(args, "seed", None) is not None:
        d["seed"] = args.seed
    if getattr(args, "workers", None) is not None:
        d["workers"] = args.workers
    if getattr(args, "channel", None):
        d["channel"] = json.loads(args.channel)
    if getattr(args, "epsilon", None):
        d["epsilons"] = args.epsilon
    return ExperimentConfig.from_dict(d)


def cmd_decompose(args) -> int:
    cfg = _config(args)
    rows = []
    for e in cfg.sweep:
        c = channel_at(cfg.channel, e)
        dec = ch.decompose(c)
        rep = ch.channel_report(c).to_dict()
        rows.append({"epsilon": e, "channel": c.name, "worst_infidelity": rep.pop("epsilon"), **rep,
                     "terms": [[t.label, float(v)] for t, v in dec.terms]})
    print(json.dumps(rows, indent=1))
    return 0


def cmd_run(args) -> int:
    cfg = _config(args)
    if args.pool_dir:
        cfg.pool_dir = args.pool_dir
    say = (lambda m: print(m, file=sys.stderr)) if not args.quiet else None
    res = run_experiment(cfg, say)
    if not res.records:
        print("empty sweep: nothing to do", file=sys.stderr)
        return 0
    if args.out:
        for p in emit(res, args.out, args.format):
            print(p)
    else:
        print(to_table(res) if args.format == "csv" else to_json(res))
    return 0


def cmd_pools(args) -> int:
    directory = args.pool_dir or (_config(args).pool_dir if args.config else None)
    if not directory:
        print("no pool directory given", file=sys.stderr)
        return 2
    for path, header, count in list_pools(directory):
        print(f"{Path(path).name}\tk={header['k']}\trecords={count}\tcircuit={header['circuit']}"
              f"\tlayout={header['layout']}\tseed={header['seed']}")
    return 0


def cmd_oracle(args) -> int:
    """Dense ground truth for small circuits (Steane per input state, or a custom circuit)."""
    cfg = _config(args)
    out = []
    for e in cfg.sweep:
        c = channel_at(cfg.channel, e)
        if cfg.protocol == "steane":
            states = [cfg.input_state] if cfg.input_state else list(LABELS)
            fids = {s: float(exact_expectation(build_steane_protocol(s), c)[0]) for s in states}
            out.append({"epsilon": e, "average_infidelity": 1.0 - float(np.mean(list(fids.values()))),
                        "fidelity": fids})
        elif cfg.protocol == "circuit":
            spec = build_protocol(cfg)
            f = exact_expectation(spec, c)
            out.append({"epsilon": e, "readout": f.tolist(), **logical_infidelity(spec, f, None)})
        else:
            raise ConfigError("the dense oracle supports the steane and circuit protocols")
    print(json.dumps(out, indent=1))
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="stratnoise", description=__doc__)
    sub = ap.add_subparsers(dest="verb", required=True)

    def common(p):
        p.add_argument("--config", help="experiment config (JSON)")
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--channel", help='channel family as JSON, e.g. \'{"name": "amplitude_damping"}\'')
        p.add_argument("--epsilon", type=float, action="append", help="physical infidelity (repeatable)")

    p = sub.add_parser("decompose", help="stabilizer decomposition report per sweep point")
    common(p)
    p.set_defaults(fn=cmd_decompose)
    p = sub.add_parser("run", help="run an experiment sweep")
    common(p)
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", choices=("json", "csv", "both"), default="json")
    p.add_argument("--pool-dir")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(fn=cmd_run)
    p = sub.add_parser("pools", help="list reference pools")
    p.add_argument("--config")
    p.add_argument("--pool-dir")
    p.set_defaults(fn=cmd_pools)
    p = sub.add_parser("oracle", help="dense ground truth for small configs")
    common(p)
    p.set_defaults(fn=cmd_oracle)
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ch.ChannelError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

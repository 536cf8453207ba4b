"""Command-line entry point: ``blindauction <verb> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import random
import sys
from pathlib import Path

import yaml

from . import fixture_path
from . import pairing as pg
from . import threshold
from . import verifier
from . import workloads as wl
from .vda import Solution


def _scenario_path(value: str) -> Path:
    # bundled fixtures can be named directly: "intro", "proofs"
    path = Path(value)
    if not path.exists() and not path.suffix:
        bundled = fixture_path(value)
        if bundled.is_file():
            return Path(str(bundled))
    return path


def _write(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def cmd_keygen(args) -> int:
    rng = random.Random(args.seed)
    denominations = [int(d) for d in args.denominations.split(",")]
    doc = {"version": 1, "t": args.t, "n": args.n, "denominations": {}}
    for d in denominations:
        ks = threshold.ttp_keygen(pg.setup(), args.t, args.n, rng)
        doc["denominations"][d] = {
            "verify_key": pg.g2_to_bytes(ks.master_verify_key).hex(),
            "shares": [{"index": s.index, "secret": hex(s.secret_share), "verify_share": pg.g2_to_bytes(s.verify_share).hex()}
                       for s in ks.shares],
        }
    _write(yaml.safe_dump(doc, sort_keys=False), args.out)
    return 0


def cmd_run(args) -> int:
    sc = wl.load_scenario(_scenario_path(args.scenario))
    if args.seed is not None:
        sc.seed = args.seed
    report = wl.run_scenario(sc, timings=args.timings, events_path=args.events)
    _write(wl.report_json(report), args.out)
    return 0


def cmd_audit(args) -> int:
    sc = wl.load_scenario(_scenario_path(args.scenario))
    sol = Solution.from_dict(json.loads(Path(args.solution).read_text()))
    world = wl.prepare(sc)
    v, r = world.ledger.valuations, world.ledger.reserves
    proof = verifier.audit(sol, v, r)
    result = {"proof": None if proof is None else {"kind": type(proof).__name__, **proof.__dict__}}
    result["vcg"] = verifier.check_vcg(sol, v, r) if proof is None else False
    _write(json.dumps(result, sort_keys=True), args.out)
    return 0 if proof is None and result["vcg"] else 1


def cmd_bench(args) -> int:
    counts = [int(c) for c in args.bidders.split(",")]
    seeds = [int(s) for s in args.seeds.split(",")]
    rows = wl.bench(counts, args.items, seeds)
    _write(wl.rows_to_csv(rows), args.out)
    return 0


def cmd_gas_report(args) -> int:
    sc = wl.load_scenario(_scenario_path(args.scenario))
    world = wl.build_world(sc)
    wl.run_world(world)
    rows = wl.gas_report(world.ledger, args.rate)
    _write(json.dumps(rows, indent=2) if args.json else wl.format_gas_table(rows), args.out)
    return 0


def cmd_generate(args) -> int:
    sc = wl.generate_filecoin_workload(args.seed, args.items, args.bidders)
    text = yaml.safe_dump(wl.scenario_to_dict(sc), sort_keys=False)
    _write(text, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blindauction", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="deal threshold keys for each denomination")
    p.add_argument("--t", type=int, default=2)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--denominations", default="1,2,5,10,20,50,100")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("run", help="run a scenario end to end and print the report")
    p.add_argument("scenario", help="scenario file, or the name of a bundled fixture")
    p.add_argument("--seed", type=int)
    p.add_argument("--timings", action="store_true", help="include wall-clock timings (makes the report vary)")
    p.add_argument("--events", help="write the ledger event log here")
    p.add_argument("--out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("audit", help="audit a solution against a scenario's revealed market")
    p.add_argument("scenario")
    p.add_argument("solution", help="JSON file with assignment, prices and score")
    p.add_argument("--out")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("bench", help="time solving and auditing on generated storage markets")
    p.add_argument("--bidders", default="500,1000,2000")
    p.add_argument("--items", type=int, default=100)
    p.add_argument("--seeds", default="0")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gas-report", help="per-operation gas of a scenario run")
    p.add_argument("scenario")
    p.add_argument("--rate", type=float, default=wl.DEFAULT_CURRENCY_PER_GAS, help="currency per unit of gas")
    p.add_argument("--json", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_gas_report)

    p = sub.add_parser("generate", help="write a storage-market scenario")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--items", type=int, default=10)
    p.add_argument("--bidders", type=int, default=50)
    p.add_argument("--out")
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except wl.ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())

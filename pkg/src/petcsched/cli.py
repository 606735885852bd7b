"""Command-line front end: ``petcsched {abstract,synthesize,simulate,export-uppaal,validate}``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import List, Optional

from . import config as config_mod
from . import pipeline
from .errors import PetcError
from .sim import ARBITERS, conflict_scan, trace_statistics
from .uppaal import QUERY, export_uppaal

EXIT_OK, EXIT_ERROR, EXIT_SYNTHESIS, EXIT_CONFLICT, EXIT_VALIDATION = 0, 1, 2, 3, 4

log = logging.getLogger("petcsched")


def _load_config(args) -> config_mod.ProjectConfig:
    cfg = config_mod.load(args.config)
    if args.tol is not None:
        cfg.abstraction.tol = args.tol
    if args.threads is not None:
        cfg.abstraction.threads = args.threads
    if args.arbiter is not None:
        cfg.simulation.arbiter = args.arbiter
    if args.seed is not None:
        cfg.simulation.seed = args.seed
        cfg.validation.seed = args.seed
    return cfg


def _out(args, cfg) -> str:
    out = args.out or cfg.output
    os.makedirs(out, exist_ok=True)
    return out


def cmd_abstract(args) -> int:
    cfg = _load_config(args)
    out = _out(args, cfg)
    for a in pipeline.run_abstract(cfg, out):
        print(f"{a.model.loop_id}: regions Q{a.spec.k_min}..Q{a.spec.k_max}, "
              f"{len(a.model.trigger_edges)} trigger / {len(a.model.early_edges)} early edges, "
              f"{a.seconds:.1f} s")
    return EXIT_OK


def cmd_synthesize(args) -> int:
    cfg = _load_config(args)
    out = _out(args, cfg)
    g, st = pipeline.run_synthesize(cfg, out)
    print(f"game states: {len(g.states)}, winning: {len(st.winning)}, "
          f"losing initial: {len(st.losing_initial)}")
    if not st.success:
        for s in st.losing_initial[:20]:
            print(f"losing initial state: {s.describe()}", file=sys.stderr)
        return EXIT_SYNTHESIS
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    out = _out(args, cfg)
    trace = pipeline.run_simulate(cfg, out)
    stats = trace_statistics(trace)
    with open(os.path.join(out, "trace_statistics.csv"), "w") as fh:
        fh.write("key,value\n")
        for k, v in stats.as_rows(trace.loop_ids):
            fh.write(f"{k},{v}\n")
    scanned = conflict_scan(trace)
    print(f"events: {stats.events}, early fraction: {stats.early_fraction:.3f}, "
          f"conflicts: {len(scanned)}")
    if scanned or trace.conflicts:
        return EXIT_CONFLICT
    return EXIT_OK


def cmd_export_uppaal(args) -> int:
    cfg = _load_config(args)
    out = _out(args, cfg)
    models = pipeline.load_models(cfg, out)
    path = os.path.join(out, f"{cfg.name}.xml")
    with open(path, "w") as fh:
        fh.write(export_uppaal(models, cfg.network(), cfg.earliness, cfg.base_tick))
    with open(os.path.join(out, f"{cfg.name}.q"), "w") as fh:
        fh.write(QUERY + "\n")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _load_config(args)
    out = _out(args, cfg)
    res = pipeline.run_validate(cfg, out)
    bad = [r for r in res.rows if r.missing]
    for r in bad[:20]:
        print(f"{r.loop_id}: Q{r.i} at k={r.k} reaches {list(r.missing)} outside the model",
              file=sys.stderr)
    for lid, c in res.conformance.items():
        print(f"{lid}: conformance {c.steps_checked} steps, {len(c.violations)} violations")
    print("validation", "PASS" if res.ok else "FAIL")
    return EXIT_OK if res.ok else EXIT_VALIDATION


COMMANDS = {
    "abstract": cmd_abstract,
    "synthesize": cmd_synthesize,
    "simulate": cmd_simulate,
    "export-uppaal": cmd_export_uppaal,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="petcsched", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="project YAML file")
    common.add_argument("--out", help="output directory (default: config 'output')")
    common.add_argument("--seed", type=int, help="simulation / validation seed")
    common.add_argument("--tol", type=float, help="SDP feasibility tolerance")
    common.add_argument("--threads", type=int, help="worker processes for the SDP batch")
    common.add_argument("--arbiter", choices=ARBITERS, help="simulation arbiter")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except PetcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

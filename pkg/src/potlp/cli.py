"""Command-line entry point: ``potlp <subcommand> ...``."""
from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from .estimate import (DegenerateData, FeatureModel, gen_training_data, read_records, train_feature_model,
                       write_records)
from .planner import PlannerConfig
from .scenarios import GENERATORS, SPECS, ParamError, generate
from .scltl import (SpecSyntaxError, StateExplosion, UnknownProposition, _tokenize, canonical_sigma, compile_dfa,
                    parse_spec)
from .sim import (PLANNERS, SATISFIED, ConfigError, DEFAULT_RADIUS, TrialConfig, format_summary, run_bench,
                  run_trial, write_bench)
from .world import GridMap, MapFormatError

log = logging.getLogger("potlp")

EXIT_OK, EXIT_CONFIG, EXIT_UNSATISFIED = 0, 2, 3


class UsageError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _name_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _positive(kind):
    def conv(text):
        v = kind(text)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v
    return conv


def _non_negative_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return v


def _writable(path: str) -> str:
    parent = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(parent):
        raise UsageError(f"directory for {path} does not exist")
    return path


def _readable(path: str) -> str:
    if not os.path.isfile(path):
        raise UsageError(f"no such file: {path}")
    return path


def _load_model(path: str | None) -> FeatureModel | None:
    if path is None:
        return None
    try:
        return FeatureModel.load(_readable(path))
    except (ValueError, IndexError) as err:
        raise UsageError(f"cannot load model {path}: {err}") from err


def _resolve_spec(text: str, sigma) -> str:
    """A bare integer names a built-in task for whichever scenario uses ``sigma``."""
    if not text.strip().isdigit():
        return text
    sid = int(text)
    for scenario, specs in SPECS.items():
        probe = GENERATORS[scenario](0)
        if tuple(probe.sigma) == tuple(sigma) and sid in specs:
            return specs[sid]
    raise UsageError(f"no built-in spec {sid} for propositions {','.join(sigma)}")


def _gen_params(args) -> dict:
    params = {}
    if getattr(args, "room_size", None) is not None:
        if args.scenario != "firefighting":
            raise UsageError("--room-size applies to the firefighting scenario only")
        params["room_size"] = args.room_size
    if getattr(args, "cue_correlation", None) is not None:
        if args.scenario != "firefighting":
            raise UsageError("--cue-correlation applies to the firefighting scenario only")
        params["cue_correlation"] = args.cue_correlation
    return params


def _planner_config(args) -> PlannerConfig:
    kw = {"seed": args.seed}
    if getattr(args, "sims", None) is not None:
        kw["n_sims"] = args.sims
    if getattr(args, "c_ucb", None) is not None:
        kw["c_ucb"] = args.c_ucb
    return PlannerConfig(**kw)


# --------------------------------------------------------------------------
# Subcommands

def cmd_compile(args) -> int:
    if args.sigma:
        sigma = canonical_sigma(_name_list(args.sigma))
    else:
        sigma = canonical_sigma(w for k, w, _ in _tokenize(args.spec) if k == "ident" and w not in ("true", "false"))
    dfa = compile_dfa(parse_spec(args.spec, sigma), sigma)
    print(f"states={len(dfa.states)} accepting={sorted(dfa.accepting)}")
    if args.dot:
        with open(_writable(args.dot), "w") as fh:
            fh.write(dfa.to_dot())
    if args.out:
        with open(_writable(args.out), "w") as fh:
            fh.write(dfa.serialize())
    return EXIT_OK


def cmd_run(args) -> int:
    with open(_readable(args.map)) as fh:
        truth = GridMap.from_text(fh.read())
    spec = _resolve_spec(args.spec, truth.sigma)
    cfg = TrialConfig(truth, spec, args.planner, args.radius, _planner_config(args), _load_model(args.model),
                      trace=args.trace)
    res = run_trial(cfg)
    for line in res.trace:
        print(line)
    print(f"cost={res.cost} outcome={res.outcome}")
    return EXIT_OK if res.outcome == SATISFIED else EXIT_UNSATISFIED


def cmd_bench(args) -> int:
    out = args.out
    if os.path.exists(out) and not os.path.isdir(out):
        raise UsageError(f"{out} exists and is not a directory")
    result = run_bench(args.scenario, args.spec_id, args.trials, args.planners, args.seed, args.radius,
                       _planner_config(args), _load_model(args.model), args.jobs, _gen_params(args))
    paths = write_bench(result, out)
    print(format_summary(result))
    log.info("wrote %s", ", ".join(paths))
    return EXIT_OK


def cmd_gen_data(args) -> int:
    _writable(args.out)
    records, names = gen_training_data(args.scenario, args.specs, args.trials, args.seed, args.radius,
                                       _gen_params(args))
    if args.records is not None and args.records < len(records):
        keep = np.sort(np.random.default_rng(args.seed).choice(len(records), args.records, replace=False))
        records = [records[i] for i in keep]
    write_records(records, names, args.out)
    log.info("wrote %d records to %s", len(records), args.out)
    print(f"records={len(records)}")
    return EXIT_OK


def cmd_train(args) -> int:
    records, names = read_records(_readable(args.data))
    _writable(args.out)
    model = train_feature_model(records, names, l2=args.l2, epochs=args.epochs, lr=args.lr)
    model.save(args.out)
    acc = float(np.mean((model.predict_p([r.features for r in records]) > 0.5) == (np.array([r.p for r in records]) == 1)))
    print(f"records={len(records)} train_accuracy={acc:.4f}")
    return EXIT_OK


def cmd_gen_map(args) -> int:
    truth = generate(args.scenario, args.seed, **_gen_params(args))
    text = truth.to_text()
    if args.out:
        with open(_writable(args.out), "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="potlp", description="Temporal-logic task planning in partially revealed grids.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compile", help="compile a specification to an automaton")
    c.add_argument("--spec", required=True)
    c.add_argument("--sigma", help="comma-separated propositions (default: those in the spec)")
    c.add_argument("--dot", help="write a Graphviz rendering here")
    c.add_argument("--out", help="write the serialized automaton here")
    c.set_defaults(func=cmd_compile)

    r = sub.add_parser("run", help="execute one task on a map file")
    r.add_argument("--map", required=True)
    r.add_argument("--spec", required=True, help="specification text or a built-in spec id")
    r.add_argument("--planner", required=True, choices=PLANNERS)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--radius", type=_positive(float), default=DEFAULT_RADIUS)
    r.add_argument("--sims", type=_positive(int))
    r.add_argument("--c-ucb", type=_positive(float))
    r.add_argument("--model", help="trained parameters for potlp-feature")
    r.add_argument("--trace", action="store_true", help="print the chosen action at every replan")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bench", help="paired planner comparison on generated maps")
    b.add_argument("--scenario", required=True, choices=sorted(SPECS))
    b.add_argument("--spec-id", type=_int_list, required=True, help="comma-separated spec ids")
    b.add_argument("--trials", type=_non_negative_int, required=True)
    b.add_argument("--planners", type=_name_list, required=True)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", required=True, help="output directory")
    b.add_argument("--radius", type=_positive(float), default=DEFAULT_RADIUS)
    b.add_argument("--sims", type=_positive(int))
    b.add_argument("--c-ucb", type=_positive(float))
    b.add_argument("--model")
    b.add_argument("--jobs", type=_positive(int), default=1)
    b.add_argument("--room-size", type=_positive(int))
    b.add_argument("--cue-correlation", type=float)
    b.set_defaults(func=cmd_bench)

    g = sub.add_parser("gen-data", help="label baseline-visited actions for training")
    g.add_argument("--scenario", default="firefighting", choices=sorted(SPECS))
    g.add_argument("--specs", type=_int_list, default=None, help="spec ids cycled over trials")
    g.add_argument("--trials", type=_non_negative_int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--radius", type=_positive(float), default=DEFAULT_RADIUS)
    g.add_argument("--cue-correlation", type=float)
    g.add_argument("--room-size", type=_positive(int))
    g.add_argument("--records", type=_non_negative_int, help="keep a seeded random subset of this size")
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="fit the feature model")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--l2", type=float, default=1e-3)
    t.add_argument("--epochs", type=_non_negative_int, default=2000)
    t.add_argument("--lr", type=_positive(float), default=0.5)
    t.set_defaults(func=cmd_train)

    m = sub.add_parser("gen-map", help="write a generated map file")
    m.add_argument("--scenario", required=True, choices=sorted(SPECS))
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out")
    m.add_argument("--room-size", type=_positive(int))
    m.set_defaults(func=cmd_gen_map)
    return p


def _setup_logging() -> None:
    level = os.environ.get("POTLP_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    if getattr(args, "specs", "unset") is None:
        args.specs = sorted(SPECS[args.scenario])
    try:
        return args.func(args)
    except (UsageError, ConfigError, ParamError, MapFormatError, SpecSyntaxError, UnknownProposition,
            StateExplosion, DegenerateData, OSError) as err:
        print(f"potlp {args.command}: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

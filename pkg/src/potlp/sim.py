"""The observe, plan, act loop and the paired benchmark harness."""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.stats import binomtest

from .actions import HighLevelAction, enumerate_actions
from .baseline import baseline_select
from .estimate import FeatureModel, make_estimator
from .planner import PlannerConfig, build_problem, pouct_search, render_pair
from .product import ImmediateViolation, ProductState, initial_product_state, known_map_optimum, pa_dijkstra
from .scenarios import SPECS, generate
from .scltl import Dfa, compile_dfa, parse_spec
from .world import BeliefMap, GridMap, extract_frontiers, reveal

log = logging.getLogger(__name__)

PLANNERS = ("potlp-oracle", "potlp-feature", "potlp-heuristic", "baseline", "known-map")
ESTIMATOR_OF = {"potlp-oracle": "oracle", "potlp-feature": "feature", "potlp-heuristic": "heuristic"}
SATISFIED, IMPOSSIBLE, BUDGET = "satisfied", "violatedImpossible", "budgetExceeded"
DEFAULT_RADIUS = 4.0


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TrialConfig:
    truth: GridMap
    spec: str
    planner: str = "baseline"
    radius: float = DEFAULT_RADIUS
    planner_config: PlannerConfig = field(default_factory=PlannerConfig)
    model: FeatureModel | None = None
    trace: bool = False
    # called at every replan with (belief, dfa, frontiers, actions)
    observer: Callable | None = field(default=None, compare=False)


@dataclass
class TrialResult:
    cost: int
    outcome: str
    steps: list = field(default_factory=list)
    word: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    replans: int = 0


def _dfa_for(cfg: TrialConfig) -> Dfa:
    try:
        return compile_dfa(parse_spec(cfg.spec, cfg.truth.sigma), cfg.truth.sigma)
    except ValueError as err:
        raise ConfigError(f"spec {cfg.spec!r}: {err}") from err


def _validate(cfg: TrialConfig) -> None:
    if cfg.planner not in PLANNERS:
        raise ConfigError(f"unknown planner {cfg.planner!r}; expected one of {', '.join(PLANNERS)}")
    if cfg.radius < 1:
        raise ConfigError("sensor radius must be at least 1")
    if cfg.planner == "potlp-feature" and cfg.model is None:
        raise ConfigError("potlp-feature needs a trained model")


def run_trial(cfg: TrialConfig, dfa: Dfa | None = None) -> TrialResult:
    """Execute one task from the map's start cell until acceptance, impossibility or budget."""
    _validate(cfg)
    dfa = dfa or _dfa_for(cfg)
    truth = cfg.truth
    omniscient = cfg.planner == "known-map" or cfg.radius >= truth.diameter
    belief = BeliefMap.full(truth) if omniscient else BeliefMap.blank(truth)
    pose = truth.start
    if not omniscient:
        reveal(belief, truth, pose, cfg.radius)
    word = [truth.label(pose)]
    try:
        z = initial_product_state(belief, dfa, pose).z
    except ImmediateViolation:
        return TrialResult(0, IMPOSSIBLE, word=word)
    pc = cfg.planner_config
    fail_cost = pc.fail_cost if pc.fail_cost is not None else 4.0 * (truth.width + truth.height)
    budget = 50 * (truth.width + truth.height)
    res = TrialResult(0, SATISFIED, word=word)
    path: list[ProductState] = []
    replan = True
    while z not in dfa.accepting:
        if replan:
            action = _decide(cfg, dfa, belief, ProductState(pose, z), res.replans, fail_cost)
            if action is None:
                res.outcome = IMPOSSIBLE
                break
            if cfg.trace:
                res.trace.append(f"replan={res.replans} pose={pose[0]},{pose[1]} z={z} action={action}")
            res.replans += 1
            path = list(action.path[1:])
            if not path:
                raise RuntimeError(f"action {action} has an empty route at {pose}")
            replan = False
        if len(res.steps) >= budget:
            res.outcome = BUDGET
            break
        nxt = path.pop(0)
        pose = nxt.cell
        lab = truth.label(pose)
        z = dfa.step(z, lab)
        if z != nxt.z:
            raise RuntimeError(f"automaton left the planned route at {pose}")
        res.steps.append(pose)
        word.append(lab)
        grew = False if omniscient else bool(reveal(belief, truth, pose, cfg.radius)[1])
        replan = grew or not path
    res.cost = len(res.steps)
    return res


def _decide(cfg: TrialConfig, dfa: Dfa, belief: BeliefMap, start: ProductState, index: int,
            fail_cost: float) -> HighLevelAction | None:
    frontiers = extract_frontiers(belief)
    search = pa_dijkstra(belief, dfa, start)
    actions = enumerate_actions(belief, dfa, start, frontiers, search)
    if cfg.observer is not None:
        cfg.observer(belief, dfa, frontiers, actions)
    if not actions:
        return None
    if len(actions) == 1 or cfg.planner in ("baseline", "known-map"):
        return baseline_select(dfa, actions)
    est = make_estimator(ESTIMATOR_OF[cfg.planner], belief, frontiers, dfa, truth=cfg.truth, model=cfg.model)
    pc = cfg.planner_config
    prob, codes = build_problem(belief, dfa, start, frontiers, actions, est, fail_cost, pc.max_depth)
    seeded = replace(pc, seed=pc.seed * 7919 + index)
    found = pouct_search(prob, seeded)
    log.debug("replan %d: %s q=%s", index, render_pair(prob, found.action),
              {render_pair(prob, a): round(v, 2) for a, v in found.q.items()})
    return codes[found.action]


def safe_word(dfa: Dfa, word: Sequence[int]) -> bool:
    """True iff running the word never visits a dead automaton state."""
    z = dfa.initial
    for m in word:
        z = dfa.step(z, m)
        if not dfa.is_live(z):
            return False
    return True


# --------------------------------------------------------------------------
# Benchmark

@dataclass(frozen=True)
class TrialRow:
    seed: int
    planner: str
    spec: int
    cost: int
    outcome: str


@dataclass(frozen=True)
class SummaryRow:
    spec: int
    planner: str
    reference: str
    pairs: int
    excluded: int
    known_mean: float
    base_mean: float
    ours_mean: float
    net_savings: float
    per_trial_mean: float
    per_trial_se: float
    sign_p: float


@dataclass
class BenchResult:
    rows: list[TrialRow]
    known: dict[tuple[int, int], float]
    summary: list[SummaryRow]


def _bench_unit(args) -> tuple[list[TrialRow], tuple[int, int, float]]:
    scenario, spec_id, trial_seed, planners, radius, pc, model, gen_params = args
    truth = generate(scenario, trial_seed, **gen_params)
    text = SPECS[scenario][spec_id]
    dfa = compile_dfa(parse_spec(text, truth.sigma), truth.sigma)
    rows = []
    for planner in planners:
        cfg = TrialConfig(truth, text, planner, radius, replace(pc, seed=trial_seed), model)
        res = run_trial(cfg, dfa)
        rows.append(TrialRow(trial_seed, planner, spec_id, res.cost, res.outcome))
    return rows, (trial_seed, spec_id, known_map_optimum(truth, dfa))


def reference_planner(planners: Sequence[str]) -> str:
    return "baseline" if "baseline" in planners else planners[-1]


def run_bench(scenario: str, spec_ids: Sequence[int], trials: int, planners: Sequence[str], seed: int,
              radius: float = DEFAULT_RADIUS, planner_config: PlannerConfig | None = None,
              model: FeatureModel | None = None, jobs: int = 1, gen_params: dict | None = None) -> BenchResult:
    """Run every planner on the same generated map for each trial seed ``seed + i``."""
    if scenario not in SPECS:
        raise ConfigError(f"unknown scenario {scenario!r}")
    if not planners:
        raise ConfigError("no planners given")
    for p in planners:
        if p not in PLANNERS:
            raise ConfigError(f"unknown planner {p!r}")
    for s in spec_ids:
        if s not in SPECS[scenario]:
            raise ConfigError(f"unknown spec id {s} for {scenario}")
    if "potlp-feature" in planners and model is None:
        raise ConfigError("potlp-feature needs a trained model")
    distinct = list(dict.fromkeys(planners))
    pc = planner_config or PlannerConfig()
    units = [(scenario, s, seed + i, distinct, radius, pc, model, gen_params or {})
             for s in spec_ids for i in range(trials)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            done = list(pool.map(_bench_unit, units, chunksize=4))
    else:
        done = [_bench_unit(u) for u in units]
    rows = sorted((r for rs, _ in done for r in rs), key=lambda r: (r.seed, r.planner, r.spec))
    known = {(s, spec): k for _, (s, spec, k) in done}
    return BenchResult(rows, known, summarize(rows, known, spec_ids, planners))


def summarize(rows: Sequence[TrialRow], known: dict, spec_ids: Sequence[int],
              planners: Sequence[str]) -> list[SummaryRow]:
    ref = reference_planner(planners)
    others = [p for p in dict.fromkeys(planners) if p != ref] or [ref]
    table = {(r.seed, r.spec, r.planner): r for r in rows}
    out = []
    for spec in spec_ids:
        seeds = sorted({r.seed for r in rows if r.spec == spec})
        for planner in others:
            ours, base, opt = [], [], []
            excluded = 0
            for s in seeds:
                a, b = table[(s, spec, planner)], table[(s, spec, ref)]
                k = known[(s, spec)]
                if a.outcome == SATISFIED and b.outcome == SATISFIED and math.isfinite(k):
                    ours.append(a.cost)
                    base.append(b.cost)
                    opt.append(k)
                else:
                    excluded += 1
            out.append(_summary_row(spec, planner, ref, ours, base, opt, excluded))
    return out


def _summary_row(spec, planner, ref, ours, base, opt, excluded) -> SummaryRow:
    n = len(ours)
    if n == 0:
        nan = float("nan")
        return SummaryRow(spec, planner, ref, 0, excluded, nan, nan, nan, nan, nan, nan, nan)
    ours_a, base_a = np.array(ours, dtype=float), np.array(base, dtype=float)
    net = 1.0 - ours_a.sum() / base_a.sum() if base_a.sum() > 0 else 0.0
    per = np.where(base_a > 0, (base_a - ours_a) / np.where(base_a > 0, base_a, 1.0), 0.0)
    se = float(per.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    wins, losses = int((per > 0).sum()), int((per < 0).sum())
    p = float(binomtest(wins, wins + losses, 0.5, alternative="greater").pvalue) if wins + losses else 1.0
    return SummaryRow(spec, planner, ref, n, excluded, float(np.mean(opt)), float(base_a.mean()),
                      float(ours_a.mean()), 100.0 * net, 100.0 * float(per.mean()), 100.0 * se, p)


SUMMARY_COLUMNS = ("spec", "planner", "reference", "pairs", "excluded", "knownMapMean", "baselineMean",
                   "oursMean", "netSavingsPct", "perTrialMeanPct", "perTrialSEPct", "signTestP")


def _summary_fields(r: SummaryRow) -> list[str]:
    return [str(r.spec), r.planner, r.reference, str(r.pairs), str(r.excluded),
            f"{r.known_mean:.3f}", f"{r.base_mean:.3f}", f"{r.ours_mean:.3f}", f"{r.net_savings:.3f}",
            f"{r.per_trial_mean:.3f}", f"{r.per_trial_se:.3f}", f"{r.sign_p:.3g}"]


def write_bench(result: BenchResult, out_dir) -> tuple[str, str]:
    os.makedirs(out_dir, exist_ok=True)
    trials = os.path.join(out_dir, "trials.tsv")
    summary = os.path.join(out_dir, "summary.tsv")
    with open(trials, "w") as fh:
        fh.write("v1\ttrialSeed\tplanner\tspec\tcost\toutcome\n")
        for r in result.rows:
            fh.write(f"{r.seed}\t{r.planner}\t{r.spec}\t{r.cost}\t{r.outcome}\n")
    with open(summary, "w") as fh:
        fh.write("\t".join(("v1",) + SUMMARY_COLUMNS) + "\n")
        for r in result.summary:
            fh.write("\t".join(_summary_fields(r)) + "\n")
    return trials, summary


def format_summary(result: BenchResult) -> str:
    head = ["spec", "planner", "pairs", "known", "baseline", "ours", "net%", "per-trial% (SE)", "sign p"]
    lines = ["  ".join(f"{h:>10}" for h in head)]
    for r in result.summary:
        cells = [str(r.spec), r.planner, str(r.pairs), f"{r.known_mean:.2f}", f"{r.base_mean:.2f}",
                 f"{r.ours_mean:.2f}", f"{r.net_savings:.1f}", f"{r.per_trial_mean:.1f} ({r.per_trial_se:.1f})",
                 f"{r.sign_p:.3g}"]
        lines.append("  ".join(f"{c:>10}" for c in cells))
    return "\n".join(lines)

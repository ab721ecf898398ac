"""Acceptance criteria 1-11, each at its stated tolerance.

Every test records a PASS/FAIL line through the ``verdict`` fixture before
asserting, so the summary lists failures as well as passes.
"""
import math
import time

import numpy as np
import pytest

from potlp.cli import main as cli_main
from potlp.estimate import (encoding_width, gen_training_data, logistic_loss_and_grad, train_feature_model)
from potlp.planner import Pair, PlannerConfig, PlanningProblem, exact_expectimax, pouct_search
from potlp.estimate import EstimateTriple
from potlp.product import ImmediateViolation, initial_product_state, known_map_optimum, pa_dijkstra
from potlp.scenarios import DELIVERY_SPECS, FIREFIGHTING_SPECS, SPECS, generate
from potlp.scltl import accepts, compile_dfa, eval_scltl, letter, parse_spec, transition_encoding
from potlp.sim import PLANNERS, SATISFIED, TrialConfig, run_bench, run_trial, safe_word, summarize
from potlp.world import BeliefMap, reveal

from helpers import random_grid, random_problem
from oracles import (WordBatch, all_words, dfa_accepts_batch, formulas_up_to_depth, materialize_product,
                     product_bfs, random_formula)


# -- 1. automaton vs semantic oracle

def test_c1_dfa_oracle_equivalence(verdict):
    start = time.perf_counter()
    mismatches, checked = 0, 0
    # exhaustive part: vectorized strong-satisfaction oracle over all words, spot-checked against eval_scltl
    for n in (1, 2):
        sigma = ("a", "b")[:n]
        words = all_words(n, 5)
        batch = WordBatch(words, sigma)
        rng = np.random.default_rng(n)
        for k, f in enumerate(formulas_up_to_depth(sigma, 3, constants=True)):
            got = dfa_accepts_batch(compile_dfa(f, sigma), batch)
            want = batch.good_prefix(f)
            mismatches += int((got != want).sum())
            checked += len(words)
            if k % 97 == 0:
                for i in rng.choice(len(words), 4, replace=False):
                    named = [[p for j, p in enumerate(sigma) if m >> j & 1] for m in words[i]]
                    mismatches += eval_scltl(f, named) != bool(want[i])
    # random part: eval_scltl directly
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        n = int(rng.integers(1, 5))
        sigma = ("a", "b", "c", "d")[:n]
        f = random_formula(rng, sigma, int(rng.integers(1, 6)))
        word = [[p for p in sigma if rng.random() < 0.5] for _ in range(int(rng.integers(0, 9)))]
        dfa = compile_dfa(f, sigma)
        mismatches += accepts(dfa, [letter(w, sigma) for w in word]) != eval_scltl(f, word)
        checked += 1
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 60
    verdict(1, ok, f"{checked} (formula, word) checks, {mismatches} mismatches, {elapsed:.1f}s (< 60s)")
    assert ok


# -- 2. firefighting automaton fixture

def test_c2_firefighting_fixture(verdict):
    sigma = ("ext", "fire")
    dfa = compile_dfa(parse_spec("(!fire U ext) & (F fire)", sigma), sigma)
    e, f = letter(["ext"], sigma), letter(["fire"], sigma)
    z0 = dfa.initial
    z1, top, bot = dfa.step(z0, e), dfa.step(z0, e | f), dfa.step(z0, f)
    table = {z: [dfa.step(z, m) for m in (0, e, f, e | f)] for z in (z0, z1)}
    enc = transition_encoding(dfa, z0, z1)
    ok = (len(dfa.states) == 4 and len({z0, z1, top, bot}) == 4
          and dfa.accepting == {top} and dfa.sink == bot
          and table[z0] == [z0, z1, bot, top] and table[z1] == [z1, z1, top, top]
          and str(dfa.formulas[z1]) == str(parse_spec("F fire", sigma))
          and enc.stay == (-1, -1) and enc.go == (1, -1))
    verdict(2, ok, f"4-state table and encoding stay={list(enc.stay)} go={list(enc.go)}")
    assert ok


# -- 3. product Dijkstra vs brute force

SMALL_DFAS = ["F a", "!c U b", "(!c U a) & F b", "F (a & X F b)", "a U (b | X c)"]


def test_c3_product_dijkstra(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(33)
    sigma = ("a", "b", "c")
    dfas = [compile_dfa(parse_spec(s, sigma), sigma) for s in SMALL_DFAS]
    mismatches = cases = 0
    for _ in range(100):
        truth = random_grid(rng, int(rng.integers(1, 9)), int(rng.integers(1, 9)), sigma)
        full = BeliefMap.full(truth)
        part, _ = reveal(BeliefMap.blank(truth), truth, truth.start, float(rng.integers(1, 4)))
        for dfa in dfas:
            for belief in (full, part):
                try:
                    s = initial_product_state(belief, dfa, truth.start)
                except ImmediateViolation:
                    continue
                edges = materialize_product(belief.known == 1, belief.labels, belief.blocking_mask, dfa)
                mismatches += pa_dijkstra(belief, dfa, s).dist != product_bfs(edges, (s.cell, s.z))
                cases += 1
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 120
    verdict(3, ok, f"{cases} (map, automaton, belief) cases, {mismatches} mismatches, {elapsed:.1f}s (< 120s)")
    assert ok


# -- 4. expectimax fixture

def test_c4_expectimax_fixture(verdict):
    pairs = [Pair(0, 0, 1, EstimateTriple(0.5, 2, 4), 1), Pair(1, 0, 1, EstimateTriple(1, 1, 0), 3)]
    prob = PlanningProblem(pairs, [[0, 2], [2, 0]], 0, frozenset({1}), 100.0)
    value, best, qs = exact_expectimax(prob)
    ok = qs == {0: 5.5, 1: 4.0} and best == 1 and value == 4.0
    verdict(4, ok, f"Q(a1)={qs.get(0)} Q(a2)={qs.get(1)}")
    assert ok


# -- 5. PO-UCT convergence

C5_FAIL_COST = 100.0


def test_c5_pouct_convergence(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(0)
    agree = close = 0
    for i in range(50):
        prob = random_problem(rng, fail_cost=C5_FAIL_COST)
        value, best, _ = exact_expectimax(prob)
        res = pouct_search(prob, PlannerConfig(n_sims=100_000, seed=i, c_ucb=C5_FAIL_COST))
        agree += res.action == best
        close += abs(res.q[res.action] - value) <= 0.02 * abs(value)
    elapsed = time.perf_counter() - start
    ok = agree >= 48 and close >= 45 and elapsed < 300
    verdict(5, ok, f"argmin agreement {agree}/50 (>= 95%), value within 2% {close}/50 (>= 90%), "
                   f"{elapsed:.0f}s (< 300s)")
    assert ok


# -- 6. safety over mixed trials

def test_c6_safety(verdict):
    models = {}
    for scenario in SPECS:
        recs, names = gen_training_data(scenario, sorted(SPECS[scenario]), 10, 900)
        models[scenario] = train_feature_model(recs, names)
    runs = [("firefighting", sid, 6000 + s) for sid in sorted(FIREFIGHTING_SPECS) for s in range(20)]
    runs += [("delivery", sid, 6000 + s) for sid in sorted(DELIVERY_SPECS) for s in range(20)]
    trials = unsafe = wrong = 0
    outcomes = {}
    for scenario, sid, seed in runs:
        truth = generate(scenario, seed)
        text = SPECS[scenario][sid]
        dfa = compile_dfa(parse_spec(text, truth.sigma), truth.sigma)
        for planner in PLANNERS:
            res = run_trial(TrialConfig(truth, text, planner, 4.0, PlannerConfig(seed=seed), models[scenario]), dfa)
            trials += 1
            outcomes[res.outcome] = outcomes.get(res.outcome, 0) + 1
            unsafe += not safe_word(dfa, res.word)
            wrong += (res.outcome == SATISFIED) != accepts(dfa, res.word)
    ok = trials >= 500 and unsafe == 0 and wrong == 0
    verdict(6, ok, f"{trials} trials {outcomes}, {unsafe} unsafe words, {wrong} outcome/word disagreements")
    assert ok


# -- 7. full-knowledge optimality

def test_c7_full_knowledge(verdict):
    off = 0
    total = 0
    specs = sorted(FIREFIGHTING_SPECS)
    for i in range(100):
        truth = generate("firefighting", 7000 + i)
        text = FIREFIGHTING_SPECS[specs[i % len(specs)]]
        dfa = compile_dfa(parse_spec(text, truth.sigma), truth.sigma)
        opt = known_map_optimum(truth, dfa)
        for planner in ("potlp-oracle", "potlp-heuristic", "baseline", "known-map"):
            res = run_trial(TrialConfig(truth, text, planner, truth.diameter, PlannerConfig(seed=i)), dfa)
            got = res.cost if res.outcome == SATISFIED else math.inf
            off += got != opt
            total += 1
    ok = off == 0
    verdict(7, ok, f"{total} trials at radius >= diameter, {off} differ from the known-map optimum")
    assert ok


# -- 8. oracle planner vs baseline

# Returns span a few hundred cost units on these maps (fail cost 124), so the
# exploration constant is set on that scale rather than the library default.
BENCH_C_UCB = 250.0


def bench_with_pairs(specs, need, planners, seed, **kw):
    """Run consecutive seeds per spec until each has ``need`` pairs where both planners succeed."""
    rows, known = [], {}
    for spec in specs:
        nxt, batch = seed, need
        while batch > 0:
            res = run_bench("firefighting", [spec], batch, planners, nxt, **kw)
            rows += res.rows
            known.update(res.known)
            nxt += batch
            have = summarize(rows, known, [spec], planners)[0].pairs
            batch = need - have
    return summarize(rows, known, specs, planners)


def test_c8_cost_improvement(verdict):
    start = time.perf_counter()
    summary = bench_with_pairs([1, 2, 3, 4], 200, ["potlp-oracle", "baseline"], 8000,
                               planner_config=PlannerConfig(c_ucb=BENCH_C_UCB))
    elapsed = time.perf_counter() - start
    rows = {r.spec: r for r in summary}
    ok = all(r.net_savings > 0 and r.per_trial_mean > 0 and r.sign_p < 0.05 for r in rows.values())
    ok = ok and all(r.pairs >= 200 for r in rows.values()) and elapsed < 900
    detail = "; ".join(f"spec {s}: net {r.net_savings:.1f}% per-trial {r.per_trial_mean:.1f}% "
                       f"(SE {r.per_trial_se:.1f}) p={r.sign_p:.2g} pairs={r.pairs} excluded={r.excluded}"
                       for s, r in rows.items())
    verdict(8, ok, f"{detail}; {elapsed:.0f}s (< 900s)")
    assert ok


# -- 9. learned estimator

C9_GEN = {"room_size": 9, "cue_correlation": 1.0}
C9_RADIUS = 10.0


def test_c9_learned_estimator(verdict):
    pool, names = gen_training_data("firefighting", [1, 2, 3, 4], 100, 20000, C9_RADIUS, C9_GEN)
    keep = np.sort(np.random.default_rng(0).choice(len(pool), 2000, replace=False))
    model = train_feature_model([pool[i] for i in keep], names)
    held, _ = gen_training_data("firefighting", [1, 2, 3, 4], 40, 30000, C9_RADIUS, C9_GEN)
    pred = model.predict_p([r.features for r in held]) > 0.5
    acc = float(np.mean(pred == np.array([r.p == 1 for r in held])))
    summary = bench_with_pairs([1, 2, 3, 4], 50, ["potlp-feature", "baseline"], 1000, radius=C9_RADIUS,
                               model=model, gen_params=C9_GEN, planner_config=PlannerConfig(c_ucb=BENCH_C_UCB))
    pairs = sum(r.pairs for r in summary)
    ours = sum(r.ours_mean * r.pairs for r in summary)
    base = sum(r.base_mean * r.pairs for r in summary)
    net = 100.0 * (1 - ours / base)
    ok = acc >= 0.90 and net > 0 and pairs >= 200
    per_spec = ", ".join(f"spec {r.spec} {r.net_savings:.1f}%" for r in summary)
    verdict(9, ok, f"held-out accuracy {acc:.3f} on {len(held)} records (>= 0.90); "
                   f"net savings {net:.1f}% over {pairs} pairs ({per_spec})")
    assert ok


# -- 10. gradient check

def test_c10_gradient_check(verdict):
    rng = np.random.default_rng(10)
    worst = 0.0
    for _ in range(20):
        n, d = int(rng.integers(5, 40)), int(rng.integers(2, 12))
        X = np.hstack([np.ones((n, 1)), rng.normal(size=(n, d))])
        y = (rng.random(n) < 0.5).astype(float)
        w, l2 = rng.normal(size=d + 1), float(rng.uniform(0, 0.1))
        _, g = logistic_loss_and_grad(w, X, y, l2)
        h = 1e-6
        num = np.array([(logistic_loss_and_grad(w + h * e, X, y, l2)[0]
                         - logistic_loss_and_grad(w - h * e, X, y, l2)[0]) / (2 * h) for e in np.eye(d + 1)])
        worst = max(worst, float(np.linalg.norm(g - num) / np.linalg.norm(num)))
    ok = worst <= 1e-5
    verdict(10, ok, f"max relative gradient error {worst:.2e} over 20 batches (<= 1e-5)")
    assert ok


# -- 11. determinism

def test_c11_bench_determinism(verdict, tmp_path, capsys):
    outs = []
    for name in ("first", "second"):
        out = tmp_path / name
        code = cli_main(["bench", "--scenario", "firefighting", "--spec-id", "1,3", "--trials", "4",
                         "--planners", "potlp-oracle,potlp-heuristic,baseline", "--seed", "11",
                         "--jobs", "1", "--out", str(out)])
        assert code == 0
        outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    capsys.readouterr()
    ok = outs[0] == outs[1] and set(outs[0]) == {"trials.tsv", "summary.tsv"}
    verdict(11, ok, f"two bench runs, files {sorted(outs[0])} byte-identical: {outs[0] == outs[1]}")
    assert ok

"""Outcome estimates (P_S, R_S, R_F) for explore actions.

Three estimators share one interface: the ground-truth oracle, a
non-informative heuristic, and a small feature model (logistic regression
for the success probability, ridge-regularized linear fits for the costs).
The model sees the raw features plus a context block gated per transition
encoding, so one fit can serve several automaton transitions at once.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .actions import HighLevelAction
from .scltl import Dfa
from .world import MOVES, UNKNOWN, BeliefMap, Frontier, GridMap

EPS = 1e-3
CUE_RADIUS = 3
UNKNOWN_RADIUS = 5


class DegenerateData(ValueError):
    pass


class EstimateTriple(NamedTuple):
    p: float
    cs: float
    cf: float


def clamp(est: EstimateTriple, eps: float = EPS) -> EstimateTriple:
    return EstimateTriple(min(max(est.p, eps), 1.0 - eps), max(est.cs, 0.0), max(est.cf, 0.0))


Estimator = Callable[[HighLevelAction], EstimateTriple]


# --------------------------------------------------------------------------
# Oracle and heuristic

def oracle_flood(truth: GridMap, belief: BeliefMap, dfa: Dfa, action: HighLevelAction):
    """Flood fill from the subgoal point into unknown space that keeps the automaton in z'.

    Besides unknown cells the fill may cross the cells of the action's own
    frontier, since the point alone need not touch open unknown space.
    Returns ``(distance to the nearest trigger cell or None, unknown cells
    swept)``.  A trigger cell is one whose label moves z' to z''.
    """
    z1, z2 = action.z1, action.z2
    delta = dfa.delta[z1]
    blocking = truth.blocking_mask
    src = action.point
    region = set(action.region)
    dist = {src: 0}
    queue = deque([src])
    swept = 0
    while queue:
        cur = queue.popleft()
        c, r = cur
        cur_blocked = blocking and truth.labels[r, c] & blocking
        for dc, dr in MOVES:
            nc, nr = c + dc, r + dr
            nxt = (nc, nr)
            if nxt in dist or not truth.is_free(nxt):
                continue
            unknown = belief.known[nr, nc] == UNKNOWN
            if not unknown and nxt not in region:
                continue
            lab = int(truth.labels[nr, nc])
            if cur_blocked and lab & blocking:
                continue
            dist[nxt] = dist[cur] + 1
            t = delta[lab]
            if t == z2:
                return dist[nxt], swept
            if t == z1:
                swept += unknown
                queue.append(nxt)
    return None, swept


def oracle_estimate(truth: GridMap, belief: BeliefMap, dfa: Dfa, action: HighLevelAction) -> EstimateTriple:
    hit, swept = oracle_flood(truth, belief, dfa, action)
    if hit is not None:
        return EstimateTriple(1.0, float(hit), 0.0)
    return EstimateTriple(0.0, 0.0, 2.0 * swept)


def heuristic_estimate(belief: BeliefMap, action: HighLevelAction, p0: float = 0.5,
                       alpha: float = 1.0) -> EstimateTriple:
    root = math.sqrt(belief.unknown_count())
    return clamp(EstimateTriple(p0, alpha * root, 2.0 * alpha * root))


# --------------------------------------------------------------------------
# Features

def feature_names(sigma: Sequence[str], cue_set: Sequence[str]) -> list[str]:
    return ([f"stay_{p}" for p in sigma] + [f"go_{p}" for p in sigma] + ["D", "frontier_size"]
            + [f"cue_{q}" for q in cue_set] + ["unknown_near"])


def featurize(belief: BeliefMap, action: HighLevelAction, frontiers: Sequence[Frontier]) -> np.ndarray:
    """Raw (unnormalized) features of an explore action; see :func:`feature_names`."""
    size = next(f.size for f in frontiers if f.id == action.frontier)
    c, r = action.point
    h, w = belief.height, belief.width
    known = belief.known[max(r - CUE_RADIUS, 0):r + CUE_RADIUS + 1, max(c - CUE_RADIUS, 0):c + CUE_RADIUS + 1]
    cues = belief.cues[max(r - CUE_RADIUS, 0):r + CUE_RADIUS + 1, max(c - CUE_RADIUS, 0):c + CUE_RADIUS + 1]
    seen = cues[known != UNKNOWN]
    cue_counts = [int(((seen >> i) & 1).sum()) for i in range(len(belief.cue_set))]
    near = belief.known[max(r - UNKNOWN_RADIUS, 0):min(r + UNKNOWN_RADIUS + 1, h),
                        max(c - UNKNOWN_RADIUS, 0):min(c + UNKNOWN_RADIUS + 1, w)]
    enc = action.encoding
    return np.array(list(enc.stay) + list(enc.go) + [action.D, size] + cue_counts
                    + [int((near == UNKNOWN).sum())], dtype=float)


class TrainingRecord(NamedTuple):
    p: float
    cs: float
    cf: float
    features: tuple[float, ...]


def write_records(records: Sequence[TrainingRecord], names: Sequence[str], path) -> None:
    with open(path, "w") as fh:
        fh.write("\t".join(["v1", "p", "cs", "cf", *names]) + "\n")
        for rec in records:
            fh.write("\t".join(_fmt(v) for v in (rec.p, rec.cs, rec.cf, *rec.features)) + "\n")


def read_records(path) -> tuple[list[TrainingRecord], list[str]]:
    with open(path) as fh:
        head = fh.readline().rstrip("\n").split("\t")
        if head[:4] != ["v1", "p", "cs", "cf"]:
            raise ValueError(f"{path}: not a v1 training-record file")
        out = []
        for line in fh:
            if line.strip():
                vals = [float(v) for v in line.rstrip("\n").split("\t")]
                out.append(TrainingRecord(vals[0], vals[1], vals[2], tuple(vals[3:])))
    return out, head[4:]


def _fmt(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


# --------------------------------------------------------------------------
# Feature model

def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def logistic_loss_and_grad(w: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float):
    """Mean cross-entropy plus ``l2/2 * |w[1:]|^2``; column 0 of ``X`` is the bias."""
    z = X @ w
    # log(1 + e^z) - y z, computed stably
    loss = np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * np.dot(w[1:], w[1:])
    grad = X.T @ (sigmoid(z) - y) / len(y)
    grad[1:] += l2 * w[1:]
    return float(loss), grad


def encoding_width(names: Sequence[str]) -> int:
    return sum(1 for n in names if n.startswith(("stay_", "go_")))


def context_block(F: np.ndarray, names: Sequence[str]) -> np.ndarray:
    """Per-record context: a constant, one presence flag per cue, and log-scaled sizes."""
    col = {n: i for i, n in enumerate(names)}
    cues = [col[n] for n in names if n.startswith("cue_")]
    cols = [np.ones(len(F))] + [(F[:, i] > 0).astype(float) for i in cues]
    cols += [np.log1p(np.maximum(F[:, col[n]], 0.0)) for n in ("D", "frontier_size", "unknown_near")]
    return np.stack(cols, axis=1)


def expand(F, names: Sequence[str], vocab: Sequence[tuple]) -> np.ndarray:
    """Raw features followed by the context block gated by a one-hot of the transition encoding.

    The gating gives each (stay, go) pattern seen in training its own
    response to cues and distances; unseen patterns fall back to the raw
    features alone.
    """
    F = np.atleast_2d(np.asarray(F, dtype=float))
    k = encoding_width(names)
    index = {tuple(v): i for i, v in enumerate(vocab)}
    onehot = np.zeros((len(F), len(vocab)))
    for row, enc in enumerate(F[:, :k]):
        i = index.get(tuple(enc.tolist()))
        if i is not None:
            onehot[row, i] = 1.0
    ctx = context_block(F, names)
    return np.hstack([F, (onehot[:, :, None] * ctx[:, None, :]).reshape(len(F), -1)])


@dataclass(frozen=True)
class FeatureModel:
    names: tuple[str, ...]
    vocab: tuple[tuple[float, ...], ...]
    mean: np.ndarray
    std: np.ndarray
    w_p: np.ndarray
    w_cs: np.ndarray
    w_cf: np.ndarray

    def design(self, features) -> np.ndarray:
        X = (expand(features, self.names, self.vocab) - self.mean) / self.std
        return np.hstack([np.ones((len(X), 1)), X])

    def predict_p(self, features) -> np.ndarray:
        return sigmoid(self.design(features) @ self.w_p)

    def estimate(self, features) -> EstimateTriple:
        X = self.design(features)
        return clamp(EstimateTriple(float(sigmoid(X @ self.w_p)[0]), float((X @ self.w_cs)[0]),
                                    float((X @ self.w_cf)[0])))

    def save(self, path) -> None:
        def row(tag, values):
            return tag + " " + " ".join(repr(float(v)) for v in values)
        lines = ["model v1 features=" + ",".join(self.names)]
        lines += ["encoding " + ",".join(_fmt(v) for v in enc) for enc in self.vocab]
        lines += ["norm " + " ".join(f"{m!r},{s!r}" for m, s in zip(self.mean.tolist(), self.std.tolist())),
                  row("head p", self.w_p), row("head cs", self.w_cs), row("head cf", self.w_cf)]
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "FeatureModel":
        with open(path) as fh:
            lines = [ln.split() for ln in fh if ln.strip()]
        if not lines or lines[0][:2] != ["model", "v1"] or not lines[0][2].startswith("features="):
            raise ValueError(f"{path}: not a v1 model file")
        names = tuple(lines[0][2].split("=", 1)[1].split(","))
        vocab = tuple(tuple(float(v) for v in ln[1].split(",")) for ln in lines if ln[0] == "encoding")
        norm = next(ln for ln in lines if ln[0] == "norm")
        pairs = [tuple(float(v) for v in tok.split(",")) for tok in norm[1:]]
        heads = {ln[1]: np.array([float(v) for v in ln[2:]]) for ln in lines if ln[0] == "head"}
        width = len(names) + len(vocab) * (4 + sum(n.startswith("cue_") for n in names))
        if len(pairs) != width or any(len(heads.get(k, ())) != width + 1 for k in ("p", "cs", "cf")):
            raise ValueError(f"{path}: dimensions do not match the feature list")
        return cls(names, vocab, np.array([m for m, _ in pairs]), np.array([s for _, s in pairs]),
                   heads["p"], heads["cs"], heads["cf"])


def _ridge(X: np.ndarray, y: np.ndarray, l2: float) -> np.ndarray:
    """Linear fit with an unpenalized intercept; X is already centered."""
    b = float(y.mean())
    A = X.T @ X + l2 * len(y) * np.eye(X.shape[1])
    w = np.linalg.solve(A, X.T @ (y - b))
    return np.concatenate([[b], w])


def train_feature_model(records: Sequence[TrainingRecord], names: Sequence[str], l2: float = 1e-3,
                        epochs: int = 2000, lr: float = 0.5) -> FeatureModel:
    """Full-batch gradient descent from zero weights; deterministic."""
    ys = np.array([r.p for r in records], dtype=float)
    if not records or ys.min() == ys.max():
        raise DegenerateData("training data needs both success and failure records")
    F = np.array([r.features for r in records], dtype=float)
    k = encoding_width(names)
    vocab = tuple(sorted({tuple(row) for row in F[:, :k].tolist()}))
    B = expand(F, names, vocab)
    mean = B.mean(axis=0)
    std = B.std(axis=0)
    std[std == 0] = 1.0
    Z = (B - mean) / std
    X = np.hstack([np.ones((len(Z), 1)), Z])
    w = np.zeros(X.shape[1])
    for _ in range(epochs):
        _, g = logistic_loss_and_grad(w, X, ys, l2)
        w -= lr * g
    ok, bad = ys == 1, ys == 0
    cs = np.array([r.cs for r in records])
    cf = np.array([r.cf for r in records])
    # the cost heads see each class's own centering so a constant label is fit exactly
    w_cs = _ridge(Z[ok] - Z[ok].mean(axis=0), cs[ok], max(l2, 1e-9))
    w_cs[0] -= float(w_cs[1:] @ (Z[ok].mean(axis=0)))
    w_cf = _ridge(Z[bad] - Z[bad].mean(axis=0), cf[bad], max(l2, 1e-9))
    w_cf[0] -= float(w_cf[1:] @ (Z[bad].mean(axis=0)))
    return FeatureModel(tuple(names), vocab, mean, std, w, w_cs, w_cf)


# --------------------------------------------------------------------------
# Estimator factories used by the planners

def make_estimator(kind: str, belief: BeliefMap, frontiers: Sequence[Frontier], dfa: Dfa,
                   truth: GridMap | None = None, model: FeatureModel | None = None,
                   heuristic: dict | None = None) -> Estimator:
    if kind == "oracle":
        return lambda a: oracle_estimate(truth, belief, dfa, a)
    if kind == "heuristic":
        return lambda a: heuristic_estimate(belief, a, **(heuristic or {}))
    if kind == "feature":
        if model is None:
            raise ValueError("the feature estimator needs a trained model")
        return lambda a: model.estimate(featurize(belief, a, frontiers))
    raise ValueError(f"unknown estimator {kind!r}")


# --------------------------------------------------------------------------
# Training data

def gen_training_data(scenario: str, spec_ids: Sequence[int], n_trials: int, seed: int,
                      radius: float | None = None, gen_params: dict | None = None
                      ) -> tuple[list[TrainingRecord], list[str]]:
    """Run the baseline on maps ``seed + i`` and label every explore action with the oracle.

    Trial ``i`` uses spec ``spec_ids[i % len(spec_ids)]``.
    """
    from .scenarios import SPECS, generate
    from .sim import DEFAULT_RADIUS, TrialConfig, run_trial

    records: list[TrainingRecord] = []
    names: list[str] | None = None
    for i in range(n_trials):
        truth = generate(scenario, seed + i, **(gen_params or {}))
        names = feature_names(truth.sigma, truth.cue_set)

        def observe(belief, dfa, frontiers, actions, truth=truth):
            for a in actions:
                if a.is_finish:
                    continue
                label = oracle_estimate(truth, belief, dfa, a)
                records.append(TrainingRecord(label.p, label.cs, label.cf,
                                              tuple(featurize(belief, a, frontiers).tolist())))

        spec = SPECS[scenario][spec_ids[i % len(spec_ids)]]
        run_trial(TrialConfig(truth, spec, "baseline", radius or DEFAULT_RADIUS, observer=observe))
    if names is None:
        from .scenarios import GENERATORS
        probe = GENERATORS[scenario](seed, **(gen_params or {}))
        names = feature_names(probe.sigma, probe.cue_set)
    return records, names

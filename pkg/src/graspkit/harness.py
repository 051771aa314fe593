"""End-to-end experiments: policy comparison, metric consistency, classification accuracy.

Every experiment is a pure function of its inputs and seeds.  Reports carry no
timestamps or wall times so repeated runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .dataset import Dataset, LabelScheme, project_labels
from .learning import evaluate, preset_config, train
from .pipeline import PlanningError, plan
from .scene import (DEFAULT_ORACLE, GraspConfiguration, ObjectSpec, OracleConfig, Scene,
                    ground_truth_outcome, place_objects_random, render_scene)
from .shake import ContactScenario, endurance_score, sample_scenarios, simulate_shake
from .tactile import DEFAULT_PARAMS, grasp_score

SUCCESS_THRESHOLD = DEFAULT_PARAMS.stable_boundary
DEFAULT_MIX = (0.1, 0.3, 0.6)
MIN_BENCHMARK = 10
MIN_ACCURACY_RECORDS = 100
TABLE_COLUMNS = ("object", "policy", "trials", "successes", "rate")

# A policy maps (scene, seed) to a configuration or raises PlanningError.
Policy = Callable[[Scene, int], GraspConfiguration]


def derive_seed(*words: int) -> int:
    return int(np.random.SeedSequence([int(w) for w in words]).generate_state(1, np.uint64)[0] >> 1)


@dataclass
class ModelPolicy:
    """Two-phase planner with a fixed region model and configuration model."""

    tag: str
    region_model: object
    config_model: object

    def __call__(self, scene: Scene, seed: int) -> GraspConfiguration:
        return plan(scene, self.region_model, self.config_model, seed).config


def bayesian_policy(gre, scg) -> ModelPolicy:
    return ModelPolicy("bayesian", gre, scg)


def vision_policy(gre, vision) -> ModelPolicy:
    return ModelPolicy("vision", gre, vision)


# -- trials -------------------------------------------------------------------

@dataclass(frozen=True)
class TrialOutcome:
    object_id: str
    policy: str
    config: Optional[GraspConfiguration]
    error: Optional[str]
    score: float
    seed: int

    @property
    def success(self) -> bool:
        return self.score > SUCCESS_THRESHOLD


def trial_scene(world: Sequence[ObjectSpec], seed: int) -> Tuple[Scene, int]:
    """The scene a trial sees, plus the seed for planning and sensing."""
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    place_seed, run_seed = (int(x) for x in rng.integers(0, 2**63, size=2))
    poses = place_objects_random(world, place_seed)
    return render_scene(world, poses), run_seed


def run_trial(world: Sequence[ObjectSpec], policy: Policy, seed: int, *,
              oracle: OracleConfig = DEFAULT_ORACLE, tag: Optional[str] = None) -> TrialOutcome:
    """Place, plan, execute and score one grasp.  Planning errors score 0."""
    scene, run_seed = trial_scene(world, seed)
    tag = tag or getattr(policy, "tag", "policy")
    object_id = world[0].id if len(world) == 1 else "+".join(o.id for o in world)
    try:
        config = policy(scene, run_seed)
    except PlanningError as exc:
        return TrialOutcome(object_id, tag, None, type(exc).__name__, 0.0, int(seed))
    scenario = ground_truth_outcome(scene, config, oracle, seed=run_seed)
    return TrialOutcome(object_id, tag, config, None, grasp_score(simulate_shake(scenario)), int(seed))


# -- policy comparison ----------------------------------------------------------

@dataclass
class ComparisonReport:
    objects: List[str]
    trials: int
    seed: int
    outcomes: Dict[str, List[TrialOutcome]] = field(default_factory=dict)

    def successes(self, policy: str, object_id: str) -> int:
        return sum(o.success for o in self.outcomes[policy] if o.object_id == object_id)

    def rate(self, policy: str, object_id: str) -> float:
        return self.successes(policy, object_id) / self.trials

    def errors(self, policy: str, object_id: str) -> Dict[str, int]:
        out: Dict[str, int] = {}
        for o in self.outcomes[policy]:
            if o.object_id == object_id and o.error:
                out[o.error] = out.get(o.error, 0) + 1
        return dict(sorted(out.items()))

    def relative_improvement(self, object_id: str) -> Optional[float]:
        b, v = self.rate("bayesian", object_id), self.rate("vision", object_id)
        return None if v == 0 else (b - v) / v

    def mean_rate(self, policy: str) -> float:
        return float(np.mean([self.rate(policy, o) for o in self.objects]))

    @property
    def point_gain(self) -> float:
        """Mean Bayesian rate minus mean vision rate, in percentage points."""
        return 100.0 * (self.mean_rate("bayesian") - self.mean_rate("vision"))

    @property
    def mean_relative_improvement(self) -> Optional[float]:
        vals = [r for r in (self.relative_improvement(o) for o in self.objects) if r is not None]
        return float(np.mean(vals)) if vals else None

    def summary(self) -> dict:
        rows = []
        for oid in self.objects:
            rows.append({
                "object": oid,
                "bayesian_rate": self.rate("bayesian", oid),
                "vision_rate": self.rate("vision", oid),
                "relative_improvement": self.relative_improvement(oid),
                "point_gain": 100.0 * (self.rate("bayesian", oid) - self.rate("vision", oid)),
                "errors": {p: self.errors(p, oid) for p in sorted(self.outcomes)},
            })
        mv = self.mean_rate("vision")
        return {
            "trials_per_object": self.trials,
            "seed": self.seed,
            "success_threshold": SUCCESS_THRESHOLD,
            "objects": rows,
            "mean_bayesian_rate": self.mean_rate("bayesian"),
            "mean_vision_rate": mv,
            "point_gain": self.point_gain,
            "mean_relative_improvement": self.mean_relative_improvement,
            "relative_improvement_of_means": None if mv == 0 else (self.mean_rate("bayesian") - mv) / mv,
        }

    def table_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TABLE_COLUMNS)
        for oid in self.objects:
            for policy in ("vision", "bayesian"):
                s = self.successes(policy, oid)
                w.writerow([oid, policy, self.trials, s, repr(s / self.trials)])
        return buf.getvalue()

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True) + "\n"

    def write(self, directory: Union[str, Path]) -> Path:
        root = Path(directory)
        root.mkdir(parents=True, exist_ok=True)
        (root / "table.csv").write_text(self.table_csv(), encoding="utf-8")
        (root / "summary.json").write_text(self.summary_json(), encoding="utf-8")
        return root


def run_comparison(world: Sequence[ObjectSpec], gre, scg, vision, trials_per_object: int, seed: int, *,
                   oracle: OracleConfig = DEFAULT_ORACLE) -> ComparisonReport:
    """Paired trials: both policies face the same scene and seed for each (object, trial)."""
    if trials_per_object < 1:
        raise ValueError("trials_per_object must be >= 1")
    policies = (bayesian_policy(gre, scg), vision_policy(gre, vision))
    report = ComparisonReport([o.id for o in world], int(trials_per_object), int(seed),
                              {p.tag: [] for p in policies})
    for oi, spec in enumerate(world):
        for k in range(trials_per_object):
            trial_seed = derive_seed(seed, oi, k)
            for policy in policies:
                report.outcomes[policy.tag].append(run_trial([spec], policy, trial_seed, oracle=oracle))
    return report


# -- metric consistency -----------------------------------------------------------

def average_ranks(x: Sequence[float]) -> np.ndarray:
    """1-based ranks with ties sharing their mean rank."""
    x = np.asarray(x, dtype=float)
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x))
    sx = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(x: Sequence[float], y: Sequence[float]) -> Tuple[float, bool]:
    """Spearman's rho on average ranks; (0.0, True) when either side is constant."""
    rx, ry = average_ranks(x), average_ranks(y)
    if len(rx) != len(ry):
        raise ValueError("samples must have equal length")
    dx, dy = rx - rx.mean(), ry - ry.mean()
    den = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if den == 0:
        return 0.0, True
    return float(np.clip(dx @ dy / den, -1.0, 1.0)), False


@dataclass
class MetricBenchmark:
    scenarios: List[ContactScenario]
    grasp_scores: np.ndarray
    endurance_scores: np.ndarray
    rho: float
    degenerate: bool

    def pairs_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "mode", "param", "seed", "grasp_score", "endurance_score"])
        for j, (s, g, e) in enumerate(zip(self.scenarios, self.grasp_scores, self.endurance_scores)):
            w.writerow([j, s.mode.value, repr(float(s.param)), s.seed, repr(float(g)), repr(float(e))])
        return buf.getvalue()


def benchmark_scenarios(scenarios: Sequence[ContactScenario]) -> MetricBenchmark:
    if len(scenarios) < MIN_BENCHMARK:
        raise ValueError(f"need at least {MIN_BENCHMARK} scenarios for a rank correlation")
    g = np.array([grasp_score(simulate_shake(s)) for s in scenarios])
    e = np.array([endurance_score(s) for s in scenarios])
    rho, degenerate = spearman(g, e)
    return MetricBenchmark(list(scenarios), g, e, rho, degenerate)


def benchmark_metric(n: int, mix: Sequence[float] = DEFAULT_MIX, seed: int = 0, *,
                     noise_std: float = 0.5) -> MetricBenchmark:
    if n < MIN_BENCHMARK:
        raise ValueError(f"n must be >= {MIN_BENCHMARK}")
    return benchmark_scenarios(sample_scenarios(n, mix, seed, noise_std=noise_std))


# -- classification accuracy --------------------------------------------------------

@dataclass
class AccuracyReport:
    scheme: LabelScheme
    train_accuracy: float
    test_accuracy: float
    per_object: Dict[str, Tuple[float, int]]
    n_train: int
    n_test: int
    first_loss: float
    final_loss: float

    def to_dict(self) -> dict:
        return {"scheme": self.scheme.value, "train_accuracy": self.train_accuracy,
                "test_accuracy": self.test_accuracy, "n_train": self.n_train, "n_test": self.n_test,
                "per_object": {k: {"accuracy": a, "n": n} for k, (a, n) in self.per_object.items()},
                "first_loss": self.first_loss, "final_loss": self.final_loss}


def split_indices(dataset: Dataset, split_seed: int, test_fraction: float = 0.2,
                  holdout_objects: Optional[Sequence[str]] = None) -> Tuple[List[int], List[int]]:
    """Train/test indices.  Augmented copies always follow their source record.

    Without ``holdout_objects`` each object contributes ``round(test_fraction * pairs)``
    pairs to the test side; with it, those objects form the whole test side.
    """
    recs = dataset.records
    group = [r.source_id or r.record_id for r in recs]
    if holdout_objects is not None:
        held = set(holdout_objects)
        test_groups = {g for g, r in zip(group, recs) if r.object_id in held}
    else:
        rng = np.random.default_rng(np.random.SeedSequence(int(split_seed)))
        test_groups = set()
        for oid in sorted({r.object_id for r in recs}):
            pairs = sorted({g for g, r in zip(group, recs) if r.object_id == oid})
            k = int(round(test_fraction * len(pairs)))
            test_groups.update(pairs[j] for j in rng.permutation(len(pairs))[:k])
    test = [i for i, g in enumerate(group) if g in test_groups]
    train_idx = [i for i, g in enumerate(group) if g not in test_groups]
    if not test or not train_idx:
        raise ValueError("split leaves one side empty")
    return train_idx, test


def _fit_and_score(train_view, test_view, scheme: LabelScheme, **overrides) -> AccuracyReport:
    model, rep = train(train_view, preset_config(scheme, **overrides))
    per_object = {}
    for oid in sorted(set(test_view.object_ids)):
        idx = [j for j, o in enumerate(test_view.object_ids) if o == oid]
        per_object[oid] = (evaluate(model, test_view.subset(idx))["accuracy"], len(idx))
    return AccuracyReport(scheme, rep.train_accuracy, evaluate(model, test_view)["accuracy"], per_object,
                          len(train_view), len(test_view), rep.epoch_losses[0], rep.epoch_losses[-1])


def run_accuracy(dataset: Dataset, scheme, split_seed: int = 0, *,
                 holdout_objects: Optional[Sequence[str]] = None, **overrides) -> AccuracyReport:
    """Seeded 80/20 split stratified by object, or whole-object holdout."""
    if len(dataset) < MIN_ACCURACY_RECORDS:
        raise ValueError(f"run_accuracy needs at least {MIN_ACCURACY_RECORDS} records")
    scheme = LabelScheme(scheme)
    view = project_labels(dataset, scheme)
    tr, te = split_indices(dataset, split_seed, holdout_objects=holdout_objects)
    return _fit_and_score(view.subset(tr), view.subset(te), scheme, **overrides)


def novel_object_accuracy(known: Dataset, novel: Dataset, scheme, **overrides) -> AccuracyReport:
    """Train on every known record, test on objects never seen in training."""
    shared = {r.object_id for r in known.records} & {r.object_id for r in novel.records}
    if shared:
        raise ValueError(f"objects present on both sides: {sorted(shared)}")
    if len(known) == 0 or len(novel) == 0:
        raise ValueError("split leaves one side empty")
    scheme = LabelScheme(scheme)
    return _fit_and_score(project_labels(known, scheme), project_labels(novel, scheme), scheme, **overrides)


def leave_one_object_out(dataset: Dataset, scheme, **overrides) -> Dict[str, float]:
    """Held-out accuracy with each object in turn removed from training."""
    out = {}
    for oid in sorted({r.object_id for r in dataset.records}):
        out[oid] = run_accuracy(dataset, scheme, holdout_objects=[oid], **overrides).test_accuracy
    return out


def train_presets(dataset: Dataset, **overrides) -> Dict[LabelScheme, object]:
    """One reference model per label scheme, each trained on the whole dataset."""
    return {s: train(project_labels(dataset, s), preset_config(s, **overrides))[0] for s in LabelScheme}

"""Synthetic oracle, experiment grids, retraining campaigns and their reports.

All randomness flows from one integer seed.  :func:`derive_seed` turns
``(seed, *keys)`` into an independent child seed, and every stage keys its
stream by what it is (``"sample"``, ``"split"``, ``"attack"`` ...) and by the
cell it belongs to, so any single cell can be recomputed on its own.
"""

from __future__ import annotations

import io
import json
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import attack as atk
from . import classifier
from .data import Dataset, balance_with_centroids, split_stratified
from .errors import CalibrationError, ConfevadeError, ParseError, PreconditionError, StructuralError
from .vm import sample_random

STEP_SIZES = (1e-6, 1e-4, 1e-2, 1.0, 1e2, 1e4, 1e6)
NB_DISPS = (20, 50, 100)
RQ2_STEP_SIZES = (1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1)


def _key_int(k):
    if isinstance(k, (bool, np.bool_)):
        return int(k)
    if isinstance(k, (int, np.integer)) and k >= 0:
        return int(k)
    return zlib.crc32(repr(k).encode())


def derive_seed(seed, *keys):
    """Child seed for the stream named by ``keys`` under ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key_int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


# -- oracle -----------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticOracle:
    """Threshold labeler over a sparse score.

    ``score(x) = sum_i weights[i] * x[i] + sum_j squared[j] * x[j]**2`` and a
    configuration is non-acceptable (+1) when the score reaches the threshold.
    """

    n_features: int
    weights: dict = field(default_factory=dict)
    squared: dict = field(default_factory=dict)
    threshold: float = 0.0

    def __post_init__(self):
        for idx in list(self.weights) + list(self.squared):
            if not 0 <= int(idx) < self.n_features:
                raise PreconditionError(f"oracle index {idx} outside [0, {self.n_features})")
        object.__setattr__(self, "weights", {int(k): float(v) for k, v in sorted(self.weights.items())})
        object.__setattr__(self, "squared", {int(k): float(v) for k, v in sorted(self.squared.items())})

    def score(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim not in (1, 2) or X.shape[-1] != self.n_features:
            raise StructuralError(f"input of shape {X.shape} does not match oracle over {self.n_features}")
        s = np.zeros(X.shape[:-1])
        for i, w in self.weights.items():
            s = s + w * X[..., i]
        for j, w in self.squared.items():
            s = s + w * X[..., j] ** 2
        return s

    def to_dict(self):
        return {"n_features": self.n_features, "threshold": self.threshold,
                "weights": {str(k): v for k, v in self.weights.items()},
                "squared": {str(k): v for k, v in self.squared.items()}}

    @classmethod
    def from_dict(cls, doc):
        try:
            extra = set(doc) - {"n_features", "threshold", "weights", "squared"}
            if extra:
                raise ParseError(f"oracle: unknown field(s) {sorted(extra)}")
            return cls(int(doc["n_features"]), {int(k): v for k, v in doc.get("weights", {}).items()},
                       {int(k): v for k, v in doc.get("squared", {}).items()}, float(doc["threshold"]))
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise ParseError(f"bad oracle document: {exc}") from exc

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path):
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON: {exc}") from exc
        return cls.from_dict(doc)


def oracle_label(oracle, x):
    """+1 when the score is at or above the threshold, else -1."""
    s = oracle.score(x)
    out = np.where(s >= oracle.threshold, 1, -1)
    return int(out) if out.ndim == 0 else out


def calibrate_oracle(oracle, model, target_ratio, n, seed):
    """Set the threshold so that ``target_ratio`` of random configurations score +1."""
    if not 0 < target_ratio < 1:
        raise PreconditionError("target_ratio must be in (0, 1)")
    if model.n_features != oracle.n_features:
        raise StructuralError("oracle and model dimensions differ")
    scores = oracle.score(sample_random(model, n, seed))
    if np.ptp(scores) == 0:
        raise CalibrationError("all sampled configurations have the same score")
    threshold = float(np.quantile(scores, 1.0 - target_ratio))
    return SyntheticOracle(oracle.n_features, oracle.weights, oracle.squared, threshold)


def quality_oracle(model, seed, n_quality=8, curvature=0.02):
    """Uncalibrated oracle over ``n_quality`` randomly chosen Real features.

    Each chosen feature gets a linear weight in [0.5, 2] and a squared term of
    ``curvature`` times that weight, so values pushed far below the domain
    also read as degraded quality.
    """
    rng = np.random.default_rng(seed)
    if n_quality > len(model.real_idx):
        raise PreconditionError("not enough Real features for the requested quality subset")
    chosen = np.sort(rng.choice(model.real_idx, size=n_quality, replace=False))
    w = rng.uniform(0.5, 2.0, size=n_quality)
    weights = {int(i): float(v) for i, v in zip(chosen, w)}
    squared = {int(i): float(curvature * v) for i, v in zip(chosen, w)} if curvature else {}
    return SyntheticOracle(model.n_features, weights, squared, 0.0)


def benchmark_oracle(model, seed, target_ratio=0.1, n=4500, **kw):
    """The calibrated quality oracle used by the default campaigns."""
    return calibrate_oracle(quality_oracle(model, derive_seed(seed, "oracle"), **kw),
                            model, target_ratio, n, derive_seed(seed, "calibrate"))


def labeled_sample(model, oracle, n, seed):
    X = sample_random(model, n, seed)
    return Dataset(model, X, oracle_label(oracle, X))


# -- reports ----------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    step_sizes: tuple = STEP_SIZES
    nb_disps: tuple = NB_DISPS
    balanced: tuple = (False, True)
    repetitions: int = 5
    n_attacks: int = 400

    def __post_init__(self):
        for name in ("step_sizes", "nb_disps", "balanced"):
            val = tuple(getattr(self, name))
            if not val:
                raise PreconditionError(f"grid {name} must be non-empty")
            object.__setattr__(self, name, val)
        if any(not t > 0 for t in self.step_sizes):
            raise PreconditionError("step sizes must be > 0")
        if any(int(d) != d or d < 1 for d in self.nb_disps):
            raise PreconditionError("displacement budgets must be positive integers")
        if self.repetitions < 1:
            raise PreconditionError("repetitions must be >= 1")
        if self.n_attacks < 0:
            raise PreconditionError("n_attacks must be >= 0")

    @classmethod
    def full_scale(cls, **kw):
        kw.setdefault("repetitions", 10)
        kw.setdefault("n_attacks", 4000)
        return cls(**kw)


@dataclass
class CampaignReport:
    kind: str
    settings: dict
    records: list
    baselines: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    def save(self, path):
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def from_dict(cls, doc):
        try:
            return cls(doc["kind"], doc["settings"], doc["records"], doc.get("baselines", []),
                       doc.get("errors", []))
        except (KeyError, TypeError) as exc:
            raise ParseError(f"bad report document: {exc}") from exc

    @classmethod
    def load(cls, path):
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON: {exc}") from exc
        return cls.from_dict(doc)


def _map(fn, tasks, jobs):
    if jobs and jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, tasks))
    return [fn(t) for t in tasks]


# -- RQ1 --------------------------------------------------------------------

def prepare_split(full, train_n, seed, rep, balanced):
    """Training and test sets for one repetition, optionally centroid-balanced."""
    train, test = split_stratified(full, train_n, derive_seed(seed, "split", rep))
    if balanced:
        train = balance_with_centroids(train, derive_seed(seed, "balance-train", rep))
        test = balance_with_centroids(test, derive_seed(seed, "balance-test", rep))
    return train, test


def _rq1_group(task):
    (model, full, grid, kind, seed, source_label, train_n, params, rep, balanced) = task
    records, errors = [], []
    try:
        train, test = prepare_split(full, train_n, seed, rep, balanced)
        p = replace(params, seed=derive_seed(seed, "train", rep, balanced))
        svm = classifier.train(train, p)
        seeds = atk.attack_pool_seeds(svm, test, source_label)
        if len(seeds) == 0:
            raise PreconditionError("no correctly classified test row of the source class")
    except ConfevadeError as exc:
        errors.append({"repetition": rep, "balanced": balanced, "error": f"{type(exc).__name__}: {exc}"})
        return [], errors, None
    baseline = {"repetition": rep, "balanced": balanced, "accuracy": classifier.accuracy(svm, test),
                "train_rows": len(train), "test_rows": len(test), "n_seeds": int(len(seeds))}
    for t in grid.step_sizes:
        for nd in grid.nb_disps:
            ap = atk.AttackParams(float(t), int(nd), source_label)
            try:
                results = atk.run_attack_pool(model, svm, seeds, grid.n_attacks, ap,
                                              derive_seed(seed, "attack", kind, rep, balanced, t, nd), kind)
            except ConfevadeError as exc:
                errors.append({"repetition": rep, "balanced": balanced, "t": float(t), "nb_disp": int(nd),
                               "error": f"{type(exc).__name__}: {exc}"})
                continue
            failed = [r.error for r in results if r.error is not None]
            if failed:
                errors.append({"repetition": rep, "balanced": balanced, "t": float(t), "nb_disp": int(nd),
                               "error": f"{len(failed)} attacks failed: {failed[0]}"})
            mis, valid = atk.summarize_results(model, svm, results, source_label)
            records.append({"t": float(t), "nb_disp": int(nd), "balanced": bool(balanced), "repetition": rep,
                            "n_misclassified": mis, "n_valid": valid, "n_attacks": grid.n_attacks})
    return records, errors, baseline


def _cell_key(r):
    return (r.get("balanced", False), r.get("t", 0.0), r.get("nb_disp", 0), r.get("repetition", 0))


def rq1_campaign(model, oracle, grid, attack_kind=atk.EVASION, seed=0, source_label=1,
                 n_samples=4500, train_n=500, train_params=classifier.TrainParams(), jobs=1):
    """Success and validity counts over a grid of step sizes and budgets.

    One labeled sample of ``n_samples`` configurations is drawn; each
    repetition re-splits it, trains a classifier (per balanced flag) and runs
    one attack pool per (t, nb_disp) cell from the correctly classified test
    rows of ``source_label``.
    """
    if attack_kind not in (atk.EVASION, atk.RANDOM):
        raise PreconditionError(f"unknown attack kind {attack_kind!r}")
    full = labeled_sample(model, oracle, n_samples, derive_seed(seed, "sample"))
    tasks = [(model, full, grid, attack_kind, seed, source_label, train_n, train_params, rep, bool(b))
             for rep in range(grid.repetitions) for b in grid.balanced]
    records, errors, baselines = [], [], []
    for recs, errs, base in _map(_rq1_group, tasks, jobs):
        records += recs
        errors += errs
        if base is not None:
            baselines.append(base)
    records.sort(key=_cell_key)
    baselines.sort(key=lambda b: (b["balanced"], b["repetition"]))
    settings = {"attack_kind": attack_kind, "seed": seed, "source_label": source_label,
                "n_samples": n_samples, "train_n": train_n, "train_params": asdict(train_params),
                "grid": {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(grid).items()}}
    return CampaignReport("rq1", settings, records, baselines, errors)


# -- RQ2 --------------------------------------------------------------------

def _rq2_cell(task):
    (model, oracle, base_train, test, svm, seeds, t, rep, n_adv, nb_disp, source_label,
     label_mode, params, seed) = task
    ap = atk.AttackParams(float(t), int(nb_disp), source_label)
    results = atk.run_attack_pool(model, svm, seeds, n_adv, ap, derive_seed(seed, "rq2-attack", t, rep))
    finals = np.array([r.final for r in results]).reshape(-1, model.n_features)
    if label_mode == "oracle":
        labels = oracle_label(oracle, finals) if len(finals) else np.empty(0, dtype=int)
    else:
        labels = np.full(len(finals), source_label)
    retrained = classifier.train(base_train.with_rows(finals, labels), params)
    return {"t": float(t), "repetition": rep, "accuracy": classifier.accuracy(retrained, test),
            "n_adv": n_adv, "n_relabeled": int(np.sum(np.asarray(labels) != source_label)),
            "n_misclassified": atk.summarize_results(model, svm, results, source_label)[0]}


def rq2_retrain(model, oracle, base_train, test, t_list=RQ2_STEP_SIZES, n_adv=25, repetitions=5, seed=0,
                nb_disp=20, source_label=1, label_mode="oracle", train_params=classifier.TrainParams(),
                jobs=1):
    """Accuracy on ``test`` after retraining with ``n_adv`` injected evasion points.

    Injected points are labeled by the oracle (``label_mode="oracle"``) or
    keep the source class (``label_mode="source"``).  The classifier is
    retrained with the same parameters as the baseline.
    """
    if n_adv < 0:
        raise PreconditionError("n_adv must be >= 0")
    if label_mode not in ("oracle", "source"):
        raise PreconditionError("label_mode must be 'oracle' or 'source'")
    if repetitions < 1:
        raise PreconditionError("repetitions must be >= 1")
    svm = classifier.train(base_train, train_params)
    baseline = classifier.accuracy(svm, test)
    seeds = atk.attack_pool_seeds(svm, base_train, source_label)
    if len(seeds) == 0:
        raise PreconditionError("no correctly classified training row of the source class")
    tasks = [(model, oracle, base_train, test, svm, seeds, float(t), rep, n_adv, nb_disp, source_label,
              label_mode, train_params, seed) for t in t_list for rep in range(repetitions)]
    records = sorted(_map(_rq2_cell, tasks, jobs), key=_cell_key)
    settings = {"seed": seed, "n_adv": n_adv, "nb_disp": nb_disp, "repetitions": repetitions,
                "source_label": source_label, "label_mode": label_mode, "t_list": [float(t) for t in t_list],
                "train_rows": len(base_train), "test_rows": len(test), "train_params": asdict(train_params)}
    return CampaignReport("rq2", settings, records, [{"accuracy": baseline}])


# -- summaries --------------------------------------------------------------

STATS = ("min", "q1", "median", "q3", "max")


def five_numbers(values):
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise PreconditionError("cannot summarize an empty cell")
    q = np.percentile(v, [0, 25, 50, 75, 100], method="linear")
    return dict(zip(STATS, (float(x) for x in q)))


def summarize(report):
    """Five-number summaries over repetitions, per grid cell and metric.

    Keys are ``(t, nb_disp, balanced)``; RQ2 cells take ``nb_disp`` and
    ``balanced`` from the report settings.
    """
    if report.kind == "rq1":
        metrics = ("n_misclassified", "n_valid")
        key = lambda r: (r["t"], r["nb_disp"], r["balanced"])  # noqa: E731
    elif report.kind == "rq2":
        metrics = ("accuracy",)
        nd = report.settings.get("nb_disp")
        key = lambda r: (r["t"], nd, False)  # noqa: E731
    else:
        raise ParseError(f"unknown report kind {report.kind!r}")
    cells = {}
    for r in report.records:
        cells.setdefault(key(r), []).append(r)
    return {k: {m: five_numbers([r[m] for r in rows]) for m in metrics} for k, rows in sorted(cells.items())}


def summary_csv(report):
    """Plot-ready long-format CSV: ``t,nb_disp,balanced,stat,value``."""
    buf = io.StringIO()
    buf.write("t,nb_disp,balanced,stat,value\n")
    for (t, nd, bal), metrics in summarize(report).items():
        for m, stats in metrics.items():
            for s in STATS:
                buf.write(f"{t!r},{nd},{int(bal)},{m}_{s},{stats[s]!r}\n")
    return buf.getvalue()


def median_by_cell(report, metric):
    return {k: v[metric]["median"] for k, v in summarize(report).items()}

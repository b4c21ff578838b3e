"""Gradient-descent evasion attack, random-perturbation baseline, attack pools.

Every attack performs a fixed budget of ``nb_disp`` displacements of length
``t``; there is no convergence test.  After each displacement the Boolean and
enumeration entries are type-repaired, Reals are never clamped.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import classifier
from .errors import DegenerateGradientError, PreconditionError
from .vm import check_shape, repair_types, valid_mask

EVASION = "evasion"
RANDOM = "random"

_CHUNK = 256  # attacks advanced together inside one pool level


@dataclass(frozen=True)
class AttackParams:
    step_size: float
    nb_disp: int
    source_label: int = 1
    repair_each_step: bool = True
    sign_per_step: bool = True  # random baseline only: redraw the sign every step

    def __post_init__(self):
        if not self.step_size > 0:
            raise PreconditionError("step_size must be > 0")
        if int(self.nb_disp) != self.nb_disp or self.nb_disp < 1:
            raise PreconditionError("nb_disp must be a positive integer")
        if self.source_label not in (-1, 1):
            raise PreconditionError("source_label must be -1 or +1")


@dataclass(frozen=True, eq=False)
class AttackResult:
    start: np.ndarray
    final: np.ndarray
    trajectory_len: int
    g_start: float
    g_final: float
    error: str | None = None

    def __eq__(self, other):
        if not isinstance(other, AttackResult):
            return NotImplemented
        return (np.array_equal(self.start, other.start) and np.array_equal(self.final, other.final)
                and self.trajectory_len == other.trajectory_len and self.g_start == other.g_start
                and self.g_final == other.g_final and self.error == other.error)


def _unit_gradient(svm, x):
    grad = classifier.gradient(svm, x)
    norm = np.linalg.norm(grad)
    if not norm > 0:
        raise DegenerateGradientError("the discriminant gradient is zero; no attack direction")
    return grad / norm


def _finish(model, svm, start, x, params):
    if not params.repair_each_step:
        x = repair_types(model, x)
    return AttackResult(start, x, params.nb_disp, float(classifier.discriminant(svm, start)),
                        float(classifier.discriminant(svm, x)))


def evasion_attack(model, svm, start, params):
    """Move ``start`` ``nb_disp`` times by ``t`` along the unit gradient.

    The direction points away from the source class, i.e. each step is
    ``x <- x - source_label * t * grad / ||grad||``.
    """
    start = np.array(check_shape(model, start), dtype=float)
    classifier.gradient(svm, start)
    x = start
    for _ in range(params.nb_disp):
        x = x - (params.source_label * params.step_size) * _unit_gradient(svm, x)
        if params.repair_each_step:
            x = repair_types(model, x)
    return _finish(model, svm, start, x, params)


def random_directions(rng, nb_disp, d, sign_per_step=True):
    """Unit directions and signs for the random baseline.

    Each feature is modified with probability 1/2 by a Uniform[0, 1] amount;
    an all-zero draw is redrawn.
    """
    mask = rng.random((nb_disp, d)) < 0.5
    mag = rng.random((nb_disp, d))
    dirs = mask * mag
    empty = ~dirs.any(axis=1)
    while empty.any():
        k = int(empty.sum())
        dirs[empty] = (rng.random((k, d)) < 0.5) * rng.random((k, d))
        empty = ~dirs.any(axis=1)
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    if sign_per_step:
        signs = np.where(rng.random(nb_disp) < 0.5, 1.0, -1.0)
    else:
        signs = np.full(nb_disp, 1.0 if rng.random() < 0.5 else -1.0)
    return dirs, signs


def random_attack(model, svm, start, params, rng):
    """Random-perturbation baseline with the same budget as the evasion attack."""
    start = np.array(check_shape(model, start), dtype=float)
    _unit_gradient(svm, start)
    dirs, signs = random_directions(rng, params.nb_disp, model.n_features, params.sign_per_step)
    x = start
    for m in range(params.nb_disp):
        x = x + (signs[m] * params.step_size) * dirs[m]
        if params.repair_each_step:
            x = repair_types(model, x)
    return _finish(model, svm, start, x, params)


def is_successful(svm, result, source_label):
    """True when the classifier no longer assigns the source class."""
    return classifier.predict(svm, result.final) != source_label


def pool_start_indices(n_seeds, n_attacks, rng):
    """Pool index each attack starts from; the pool grows by one per attack."""
    return np.array([rng.integers(0, n_seeds + k) for k in range(n_attacks)], dtype=np.intp)


def run_attack_pool(model, svm, seeds, n_attacks, params, rng_seed, kind=EVASION):
    """Run ``n_attacks`` attacks whose starts are drawn from a growing pool.

    Each start is drawn uniformly from the seeds plus every final point
    produced so far.  Results equal running :func:`evasion_attack` (or
    :func:`random_attack` with per-attack generators) one after another;
    internally, attacks that do not depend on each other advance together.
    """
    seeds = np.atleast_2d(check_shape(model, seeds))
    if len(seeds) == 0:
        raise PreconditionError("the seed pool is empty")
    if kind not in (EVASION, RANDOM):
        raise PreconditionError(f"unknown attack kind {kind!r}")
    classifier.gradient(svm, seeds[0])
    S, d = seeds.shape
    ss = np.random.SeedSequence(rng_seed)
    start_ss, *attack_ss = ss.spawn(1 + (n_attacks if kind == RANDOM else 0))
    starts = pool_start_indices(S, n_attacks, np.random.default_rng(start_ss))

    pool = np.empty((S + n_attacks, d))
    pool[:S] = seeds
    depth = np.zeros(n_attacks, dtype=np.intp)
    for k in range(n_attacks):
        if starts[k] >= S:
            depth[k] = depth[starts[k] - S] + 1

    try:
        unit = _unit_gradient(svm, seeds[0])
    except DegenerateGradientError as exc:
        return [AttackResult(pool[starts[k]].copy(), pool[starts[k]].copy(), 0,
                             float(classifier.discriminant(svm, pool[starts[k]])),
                             float(classifier.discriminant(svm, pool[starts[k]])), str(exc))
                for k in range(n_attacks)]

    step = params.source_label * params.step_size
    for level in range(int(depth.max()) + 1 if n_attacks else 0):
        members = np.flatnonzero(depth == level)
        for lo in range(0, len(members), _CHUNK):
            ks = members[lo: lo + _CHUNK]
            X = pool[starts[ks]].copy()
            if kind == EVASION:
                for _ in range(params.nb_disp):
                    X = X - step * unit
                    if params.repair_each_step:
                        X = repair_types(model, X)
            else:
                draws = [random_directions(np.random.default_rng(attack_ss[k]), params.nb_disp, d,
                                           params.sign_per_step) for k in ks]
                dirs = np.stack([dr for dr, _ in draws])
                signs = np.stack([sg for _, sg in draws])
                for m in range(params.nb_disp):
                    X = X + (signs[:, m, None] * params.step_size) * dirs[:, m, :]
                    if params.repair_each_step:
                        X = repair_types(model, X)
            if not params.repair_each_step:
                X = repair_types(model, X)
            pool[S + ks] = X

    finals = pool[S:]
    start_pts = pool[starts]
    g0 = classifier.discriminant(svm, start_pts) if n_attacks else []
    g1 = classifier.discriminant(svm, finals) if n_attacks else []
    return [AttackResult(start_pts[k].copy(), finals[k].copy(), params.nb_disp, float(g0[k]), float(g1[k]))
            for k in range(n_attacks)]


def attack_pool_seeds(svm, dataset, source_label):
    """Rows of ``dataset`` labeled ``source_label`` that the classifier also assigns to it."""
    mask = (dataset.y == source_label)
    if mask.any():
        mask &= classifier.predict(svm, dataset.X) == source_label
    return dataset.X[mask]


def summarize_results(model, svm, results, source_label):
    """(n_misclassified, n_valid) over a list of attack results."""
    ok = [r for r in results if r.error is None]
    if not ok:
        return 0, 0
    finals = np.array([r.final for r in ok])
    misclassified = int(np.sum(classifier.predict(svm, finals) != source_label))
    valid = int(np.sum(valid_mask(model, finals)))
    return misclassified, valid


def save_results_csv(model, svm, results, source_label, path):
    """Write start values, final values, g_start, g_final, success and validity."""
    header = ([f"start_{n}" for n in model.names] + [f"final_{n}" for n in model.names]
              + ["g_start", "g_final", "success", "valid"])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in results:
            valid = bool(valid_mask(model, r.final)[0])
            w.writerow([repr(float(v)) for v in r.start] + [repr(float(v)) for v in r.final]
                       + [repr(r.g_start), repr(r.g_final),
                          int(is_successful(svm, r, source_label)), int(valid)])

"""Linear max-margin classifier trained by stochastic subgradient descent.

The primal objective is the soft-margin SVM one,

    J(w, b) = 0.5 * ||w||^2 + C * sum_i max(0, 1 - y_i (w . x_i + b)),

over raw configurations.  Two seeded stochastic solvers are available:

* ``"smo"`` (default): sequential minimal optimization of the dual, solved
  to a KKT tolerance.  Deterministic and exact up to that tolerance, so a
  retrained model differs from the original only where the data differ.
* ``"sgd"``: seeded Pegasos-style subgradient steps with a 1/t learning-rate
  decay and iterate averaging, preconditioned by per-feature standard
  deviations.  Rows are visited in a per-epoch order that is stable under
  appending rows.

The bias is never penalized.  Both solvers run on mean-centered rows;
returned weights act on raw configurations.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, PreconditionError, StructuralError, TrainingError


SOLVERS = ("smo", "sgd")


@dataclass(frozen=True)
class TrainParams:
    regularization: float = 1.0  # C, the hinge-loss weight
    epochs: int = 50  # sgd passes; smo may use up to 1000 * epochs pair updates
    learning_rate: float = 0.1  # sgd only: initial rate, decays as 1/t
    seed: int = 0
    scale: bool = False  # optional min-max scaling before training
    solver: str = "smo"
    tolerance: float = 1e-6  # smo only: stop once the maximal KKT violation is below this

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise PreconditionError(f"solver must be one of {SOLVERS}")
        if not self.regularization > 0:
            raise PreconditionError("regularization must be > 0")
        if self.epochs < 1:
            raise PreconditionError("epochs must be >= 1")
        if not self.tolerance >= 0:
            raise PreconditionError("tolerance must be >= 0")
        if not self.learning_rate > 0:
            raise PreconditionError("learning_rate must be > 0")


@dataclass(frozen=True, eq=False)
class LinearSvm:
    weights: np.ndarray
    bias: float
    params: TrainParams = field(default_factory=TrainParams)
    feature_names: tuple[str, ...] = ()

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))
        names = tuple(self.feature_names) or tuple(f"f{i + 1}" for i in range(len(w)))
        if len(names) != len(w):
            raise StructuralError("feature_names and weights differ in length")
        object.__setattr__(self, "feature_names", names)

    @property
    def n_features(self):
        return len(self.weights)

    def to_dict(self):
        return {
            "weights": [float(v) for v in self.weights],
            "bias": self.bias,
            "params": asdict(self.params),
            "feature_names": list(self.feature_names),
        }

    @classmethod
    def from_dict(cls, doc):
        try:
            return cls(np.array(doc["weights"], dtype=float), float(doc["bias"]),
                       TrainParams(**doc.get("params", {})), tuple(doc.get("feature_names", ())))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad classifier document: {exc}") from exc

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path):
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON: {exc}") from exc
        return cls.from_dict(doc)


def _check(svm, x):
    x = np.asarray(x, dtype=float)
    if x.ndim not in (1, 2) or x.shape[-1] != svm.n_features:
        raise StructuralError(f"input of shape {x.shape} does not match {svm.n_features} weights")
    return x


def hinge_objective(w, b, X, y, C):
    margins = y * (X @ w + b)
    return 0.5 * float(w @ w) + C * float(np.maximum(0.0, 1.0 - margins).sum())


def _epoch_order(seed, epoch, n):
    # One key per row from a per-epoch stream; appending rows keeps the
    # relative visiting order of the existing ones.
    keys = np.random.default_rng([seed, epoch]).random(n)
    return np.argsort(keys, kind="stable")


def _smo(Xc, y, C, tol, max_iter, history=None):
    # Sequential minimal optimization on the dual with second-order working
    # set selection; the equality constraint keeps the bias unpenalized.
    # score[k] = -y_k * dJ/dalpha_k is maintained instead of the gradient.
    n = len(Xc)
    K = Xc @ Xc.T
    KD = np.diag(K).copy()
    alpha = np.zeros(n)
    score = y.astype(float).copy()
    pos = y > 0
    up = np.ones(n, dtype=bool)  # alpha may move toward the +y side
    low = np.zeros(n, dtype=bool)
    low[~pos] = True
    tau = 1e-12
    for it in range(max_iter):
        i = int(np.argmax(np.where(up, score, -np.inf)))
        gmax = score[i]
        gmin = np.where(low, score, np.inf).min()
        if not gmax - gmin >= tol:
            break
        diff = gmax - score
        quad = KD[i] + KD - 2.0 * K[i]
        gain = np.where(low & (diff > 0), -(diff * diff) / np.where(quad > 0, quad, tau), np.inf)
        j = int(np.argmin(gain))
        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            delta = (score[i] - score[j]) * y[i] / max(quad[j], tau)
            d = ai - aj
            ni, nj = ai + delta, aj + delta
            if d > 0:
                if nj < 0:
                    nj, ni = 0.0, d
                if ni > C:
                    ni, nj = C, C - d
            else:
                if ni < 0:
                    ni, nj = 0.0, -d
                if nj > C:
                    nj, ni = C, C + d
        else:
            delta = (score[j] - score[i]) * y[i] / max(quad[j], tau)
            total = ai + aj
            ni, nj = ai - delta, aj + delta
            if total > C:
                if ni > C:
                    ni, nj = C, total - C
                if nj > C:
                    nj, ni = C, total - C
            else:
                if nj < 0:
                    nj, ni = 0.0, total
                if ni < 0:
                    ni, nj = 0.0, total
        score -= K[i] * (y[i] * (ni - ai)) + K[j] * (y[j] * (nj - aj))
        alpha[i], alpha[j] = ni, nj
        for k in (i, j):
            up[k] = alpha[k] < C if pos[k] else alpha[k] > 0
            low[k] = alpha[k] > 0 if pos[k] else alpha[k] < C
        if history is not None and (it + 1) % n == 0:
            history.append(_smo_point(Xc, y, alpha, score, C))
    w, b = _smo_point(Xc, y, alpha, score, C)
    if history is not None:
        history.append((w, b))
    return w, b


def _smo_point(Xc, y, alpha, score, C):
    w = (alpha * y) @ Xc
    yG = -score
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = float(yG[free].mean())
    else:
        at_c = alpha >= C
        ub_mask = np.where(y > 0, ~at_c, at_c)
        lb_mask = ~ub_mask
        ub = yG[ub_mask].min() if ub_mask.any() else np.inf
        lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
        rho = float((ub + lb) / 2) if np.isfinite(ub) and np.isfinite(lb) else 0.0
    return w, -rho


def _sgd(Z, y, reg, params, history=None):
    # Z holds standardized rows; reg[i] is the per-coordinate ridge strength
    # that keeps the objective identical to the raw-space one.
    n, d = Z.shape
    eta0 = params.learning_rate
    lam = float(np.median(reg))
    v = np.zeros(d)
    b = 0.0
    v_avg = np.zeros(d)
    b_avg = 0.0
    n_avg = 0
    burn_in = n if params.epochs > 1 else 0
    rows = list(Z)
    t = 0
    for epoch in range(params.epochs):
        for i in _epoch_order(params.seed, epoch, n):
            eta = eta0 / (1.0 + lam * eta0 * t)
            zi, yi = rows[i], y[i]
            margin = yi * (zi @ v + b)
            v *= 1.0 - eta * reg
            if margin < 1.0:
                v += (eta * yi) * zi
                b += eta * yi
            t += 1
            if t > burn_in:
                n_avg += 1
                v_avg += (v - v_avg) / n_avg
                b_avg += (b - b_avg) / n_avg
        if history is not None:
            history.append((v_avg.copy(), b_avg) if n_avg else (v.copy(), b))
    if n_avg:
        return v_avg, b_avg
    return v, b


def train_arrays(X, y, params=TrainParams(), feature_names=(), history=None):
    """Fit a :class:`LinearSvm` on raw arrays; see :func:`train`."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise PreconditionError("training needs a non-empty 2-D array")
    if set(np.unique(y)) != {-1.0, 1.0}:
        raise TrainingError("both classes must be present to train a max-margin classifier")
    if params.scale:
        lo = X.min(axis=0)
        span = X.max(axis=0) - lo
        span[span == 0] = 1.0
    else:
        lo = np.zeros(X.shape[1])
        span = np.ones(X.shape[1])
    U = (X - lo) / span
    mu = U.mean(axis=0)
    hist = [] if history is not None else None
    if params.solver == "smo":
        sd = np.ones(X.shape[1])
        v, b = _smo(U - mu, y, params.regularization, params.tolerance, 1000 * params.epochs, hist)
    else:
        sd = U.std(axis=0)
        sd[sd == 0] = 1.0
        lam = 1.0 / (params.regularization * len(X))
        v, b = _sgd((U - mu) / sd, y, lam / sd**2, params, hist)
    if not np.all(np.isfinite(v)) or not np.isfinite(b):
        raise TrainingError("training diverged")

    def to_raw(v, b):
        # v . ((x - lo)/span - mu)/sd + b  ==  w . x + (b - w . lo - (v/sd) . mu)
        w = v / sd / span
        return w, b - float(w @ lo) - float((v / sd) @ mu)

    if history is not None:
        history.extend(to_raw(vh, bh) for vh, bh in hist)
    w_raw, b_raw = to_raw(v, b)
    return LinearSvm(w_raw, b_raw, params, tuple(feature_names))


def train(dataset, params=TrainParams(), history=None):
    """Train on a :class:`~confevade.data.Dataset`.

    If ``history`` is a list, the (weights, bias) pair in raw feature space is
    appended after every epoch.
    """
    if len(dataset) == 0:
        raise PreconditionError("cannot train on an empty dataset")
    return train_arrays(dataset.X, dataset.y, params, dataset.model.names, history)


def discriminant(svm, x):
    """g(x) = w . x + b, for one configuration or a batch.

    Rows of a batch are reduced exactly like a single configuration, so the
    value does not depend on how many rows are evaluated together.
    """
    x = _check(svm, x)
    return (x * svm.weights).sum(axis=-1) + svm.bias


def predict(svm, x):
    """Sign of the discriminant; an exact zero is assigned to +1."""
    g = discriminant(svm, x)
    out = np.where(g >= 0, 1, -1)
    return int(out) if out.ndim == 0 else out


def gradient(svm, x=None):
    """Gradient of the discriminant, which is the weight vector everywhere."""
    if x is not None:
        _check(svm, x)
    return np.array(svm.weights)


def accuracy(svm, dataset):
    if len(dataset) == 0:
        raise PreconditionError("accuracy of an empty dataset is undefined")
    return float(np.mean(predict(svm, dataset.X) == dataset.y))


def top_features(svm, k):
    """The ``k`` features with largest |weight|; ties keep model order."""
    if not 0 <= k <= svm.n_features:
        raise PreconditionError(f"k must be in [0, {svm.n_features}]")
    mag = np.abs(svm.weights)
    order = np.lexsort((np.arange(len(mag)), -mag))[:k]
    return [(svm.feature_names[i], float(mag[i])) for i in order]

"""Labeled configuration datasets: CSV I/O, splitting, balancing, dummification."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import AugmentationError, InversionError, ParseError, PreconditionError, StructuralError
from .vm import BOOLEAN, ENUMERATION, FeatureDef, VariabilityModel, check_shape, repair_types, valid_mask

ACCEPTABLE = -1
NON_ACCEPTABLE = 1
LABELS = (ACCEPTABLE, NON_ACCEPTABLE)


class LabeledConfig(NamedTuple):
    config: np.ndarray
    label: int


@dataclass(frozen=True, eq=False)
class Dataset:
    """Rows of configurations ``X`` with labels ``y`` in {-1, +1}."""

    model: VariabilityModel
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.size == 0:
            X = X.reshape(0, self.model.n_features)
        y = np.asarray(self.y, dtype=int).reshape(-1)
        if X.ndim != 2 or X.shape[1] != self.model.n_features:
            raise StructuralError(f"dataset shape {X.shape} does not match {self.model.n_features} features")
        if len(X) != len(y):
            raise StructuralError(f"{len(X)} rows but {len(y)} labels")
        if not np.isin(y, LABELS).all():
            raise PreconditionError("labels must be -1 or +1")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    def __len__(self):
        return len(self.y)

    def __iter__(self):
        for x, label in zip(self.X, self.y):
            yield LabeledConfig(x, int(label))

    def class_counts(self):
        return {label: int(np.sum(self.y == label)) for label in LABELS}

    def subset(self, idx):
        return Dataset(self.model, self.X[idx], self.y[idx])

    def with_rows(self, X, y):
        """A new dataset with extra rows appended after the existing ones."""
        if np.size(X) == 0:
            X = np.empty((0, self.model.n_features))
        X = np.atleast_2d(check_shape(self.model, X))
        return Dataset(self.model, np.vstack([self.X, X]), np.concatenate([self.y, np.asarray(y, dtype=int)]))


# -- CSV --------------------------------------------------------------------

def _fmt(feature, v):
    if feature.kind == BOOLEAN or feature.kind == ENUMERATION:
        if float(v).is_integer():
            return str(int(v))
        return repr(float(v))
    s = f"{v:.{feature.decimals}f}"
    if s.startswith("-") and float(s) == 0.0:
        s = s[1:]
    return s


def dumps_csv(dataset):
    buf = io.StringIO()
    feats = dataset.model.features
    buf.write(",".join(dataset.model.names + ("label",)) + "\n")
    for x, label in zip(dataset.X, dataset.y):
        buf.write(",".join([_fmt(f, v) for f, v in zip(feats, x)] + [str(int(label))]) + "\n")
    return buf.getvalue()


def save_csv(dataset, path):
    Path(path).write_text(dumps_csv(dataset), encoding="utf-8", newline="\n")


def loads_csv(model, text, check_valid=True):
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty CSV file") from None
    expected = list(model.names) + ["label"]
    if len(header) != len(expected):
        raise StructuralError(f"CSV has {len(header)} columns, the model needs {len(expected)}")
    if header != expected:
        raise ParseError(f"header does not match the model: expected {len(expected)} columns "
                         f"'{','.join(expected[:3])},...,label'", row=1)
    rows, labels = [], []
    for lineno, rec in enumerate(reader, start=2):
        if not rec:
            continue
        if len(rec) != len(expected):
            raise ParseError(f"expected {len(expected)} cells, found {len(rec)}", row=lineno)
        vals = []
        for name, cell in zip(expected, rec[:-1]):
            try:
                vals.append(float(cell))
            except ValueError:
                raise ParseError(f"non-numeric cell {cell!r}", row=lineno, column=name) from None
        lab = rec[-1].strip()
        if lab not in ("-1", "1", "+1"):
            raise ParseError(f"label {lab!r} not in {{-1, +1}}", row=lineno, column="label")
        rows.append(vals)
        labels.append(int(lab))
    X = np.array(rows, dtype=float).reshape(-1, model.n_features)
    if check_valid and len(X):
        bad = np.flatnonzero(~valid_mask(model, X))
        if len(bad):
            raise ParseError("configuration violates the variability model", row=int(bad[0]) + 2)
    return Dataset(model, X, np.array(labels, dtype=int))


def load_csv(model, path, check_valid=True):
    """Read a dataset written by :func:`save_csv`.

    Every row must be a valid configuration unless ``check_valid`` is off
    (attack outputs usually are not).
    """
    return loads_csv(model, Path(path).read_text(encoding="utf-8"), check_valid=check_valid)


def save_configs(model, X, path):
    """Write unlabeled configurations (header without the label column)."""
    X = np.atleast_2d(check_shape(model, X)) if np.size(X) else np.empty((0, model.n_features))
    lines = [",".join(model.names)]
    lines += [",".join(_fmt(f, v) for f, v in zip(model.features, x)) for x in X]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def load_configs(model, path, check_valid=True):
    """Read configurations written by :func:`save_configs` or a labeled CSV.

    A trailing ``label`` column, if present, is ignored.
    """
    reader = csv.reader(io.StringIO(Path(path).read_text(encoding="utf-8")))
    header = next(reader, None)
    if header is None:
        raise ParseError("empty CSV file")
    names = list(model.names)
    width = len(header) - (header[-1:] == ["label"])
    if width != len(names):
        raise StructuralError(f"CSV has {width} feature columns, the model needs {len(names)}")
    if header[:width] != names:
        raise ParseError("header does not match the model", row=1)
    rows = []
    for lineno, rec in enumerate(reader, start=2):
        if not rec:
            continue
        if len(rec) != len(header):
            raise ParseError(f"expected {len(header)} cells, found {len(rec)}", row=lineno)
        try:
            rows.append([float(c) for c in rec[:width]])
        except ValueError:
            raise ParseError("non-numeric cell", row=lineno) from None
    X = np.array(rows, dtype=float).reshape(-1, len(names))
    if check_valid and len(X):
        bad = np.flatnonzero(~valid_mask(model, X))
        if len(bad):
            raise ParseError("configuration violates the variability model", row=int(bad[0]) + 2)
    return X


# -- splitting and balancing ------------------------------------------------

def split_stratified(dataset, train_n, seed):
    """Stratified split into ``train_n`` training rows and the rest.

    Per-class quotas use largest remainders, so each class is within one row
    of its proportional share.  Both parts keep the original row order.
    """
    n = len(dataset)
    if not 0 < train_n < n:
        raise PreconditionError(f"train_n must be in (0, {n}), got {train_n}")
    rng = np.random.default_rng(seed)
    counts = [int(np.sum(dataset.y == c)) for c in LABELS]
    exact = [train_n * c / n for c in counts]
    quota = [int(np.floor(e)) for e in exact]
    order = sorted(range(len(LABELS)), key=lambda k: (-(exact[k] - quota[k]), k))
    for k in order[: train_n - sum(quota)]:
        quota[k] += 1
    train_idx = []
    for c, q in zip(LABELS, quota):
        members = np.flatnonzero(dataset.y == c)
        train_idx.append(rng.permutation(members)[:q])
    train_mask = np.zeros(n, dtype=bool)
    train_mask[np.concatenate(train_idx)] = True
    return dataset.subset(train_mask), dataset.subset(~train_mask)


def centroid_rows(model, pool, n_new, rng, seen=(), max_retries=1000):
    """Grow ``pool`` by ``n_new`` repaired midpoints of random pairs.

    Returns the new rows and, for each, the pair of parent rows it was built
    from.  Each new row joins the pool as soon as it is created.  Midpoints
    that duplicate a known row or break a cross constraint are redrawn.
    """
    pool = [np.asarray(r, dtype=float) for r in pool]
    if len(pool) < 2 and n_new > 0:
        raise AugmentationError("centroids need at least two rows to start from")
    seen = set(seen) | {r.tobytes() for r in pool}
    new, parents = [], []
    for _ in range(n_new):
        for _attempt in range(max_retries):
            i, j = rng.choice(len(pool), size=2, replace=False)
            c = repair_types(model, (pool[i] + pool[j]) / 2.0) + 0.0
            key = c.tobytes()
            if key not in seen and valid_mask(model, c)[0]:
                break
        else:
            raise AugmentationError(f"no new valid centroid after {max_retries} draws")
        seen.add(key)
        parents.append((pool[i], pool[j]))
        pool.append(c)
        new.append(c)
    X_new = np.array(new).reshape(-1, model.n_features)
    return X_new, parents


def balance_with_centroids(dataset, seed, max_retries=1000, return_parents=False):
    """Add minority-class centroids until both classes have the same size."""
    counts = dataset.class_counts()
    minority, majority = sorted(LABELS, key=lambda c: (counts[c], c))
    if counts[minority] == 0:
        raise PreconditionError("both classes must be present to balance")
    if counts[minority] >= counts[majority]:
        raise PreconditionError("classes are already balanced")
    rng = np.random.default_rng(seed)
    seen = {(r + 0.0).tobytes() for r in dataset.X}
    X_new, parents = centroid_rows(
        dataset.model, dataset.X[dataset.y == minority], counts[majority] - counts[minority],
        rng, seen=seen, max_retries=max_retries,
    )
    out = dataset.with_rows(X_new, np.full(len(X_new), minority))
    if return_parents:
        return out, parents
    return out


# -- dummification ----------------------------------------------------------

def dummify_model(model):
    feats = []
    for f in model.features:
        if f.kind == ENUMERATION:
            feats.extend(FeatureDef(f"{f.name}={j}", BOOLEAN) for j in range(f.cardinality))
        else:
            feats.append(f)
    return VariabilityModel(tuple(feats), model.constraints)


def dummify_array(model, X):
    X = np.atleast_2d(check_shape(model, X))
    cols = []
    for i, f in enumerate(model.features):
        if f.kind == ENUMERATION:
            cols.append((X[:, [i]] == np.arange(f.cardinality)).astype(float))
        else:
            cols.append(X[:, [i]])
    return np.hstack(cols)


def undummify_array(model, X_dummy):
    X_dummy = np.atleast_2d(np.asarray(X_dummy, dtype=float))
    out = np.empty((len(X_dummy), model.n_features))
    col = 0
    for i, f in enumerate(model.features):
        if f.kind == ENUMERATION:
            block = X_dummy[:, col: col + f.cardinality]
            one_hot = ((block == 0) | (block == 1)).all(axis=1) & (block.sum(axis=1) == 1)
            if not one_hot.all():
                row = int(np.flatnonzero(~one_hot)[0])
                raise InversionError(f"row {row}: literals of {f.name!r} are not one-hot")
            out[:, i] = block.argmax(axis=1)
            col += f.cardinality
        else:
            out[:, i] = X_dummy[:, col]
            col += 1
    if col != X_dummy.shape[1]:
        raise StructuralError(f"dummified rows have {X_dummy.shape[1]} columns, expected {col}")
    return out


def dummify(model, dataset):
    """One-hot expand every enumeration; all literals are emitted."""
    if not len(model.enum_idx):
        raise PreconditionError("model has no enumeration to dummify")
    dmodel = dummify_model(model)
    return dmodel, Dataset(dmodel, dummify_array(model, dataset.X), dataset.y)


def undummify(model, dummy_model, dataset):
    if dataset.model != dummy_model:
        raise StructuralError("dataset was not built on the given dummified model")
    return Dataset(model, undummify_array(model, dataset.X), dataset.y)

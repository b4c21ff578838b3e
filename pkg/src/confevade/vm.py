"""Typed variability models and the configuration vectors they define.

A configuration is a plain ``numpy`` float vector whose i-th entry is the
value of the i-th feature of the model.  Batches of configurations are 2-D
arrays with one configuration per row; every vectorized helper below accepts
either shape.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import (
    ParseError,
    PreconditionError,
    SamplingExhaustedError,
    StructuralError,
)

BOOLEAN = "boolean"
ENUMERATION = "enumeration"
REAL = "real"
KINDS = (BOOLEAN, ENUMERATION, REAL)

REQUIRES = "requires"
EXCLUDES = "excludes"


@dataclass(frozen=True)
class FeatureDef:
    name: str
    kind: str
    cardinality: int | None = None
    min: float | None = None
    max: float | None = None
    precision: float | None = None

    def __post_init__(self):
        if not self.name:
            raise PreconditionError("feature name must be non-empty")
        if self.kind == BOOLEAN:
            if any(v is not None for v in (self.cardinality, self.min, self.max, self.precision)):
                raise PreconditionError(f"boolean feature {self.name!r} takes no domain fields")
        elif self.kind == ENUMERATION:
            if self.cardinality is None or int(self.cardinality) != self.cardinality or self.cardinality < 2:
                raise PreconditionError(f"enumeration {self.name!r} needs an integer cardinality >= 2")
            object.__setattr__(self, "cardinality", int(self.cardinality))
        elif self.kind == REAL:
            if self.min is None or self.max is None:
                raise PreconditionError(f"real feature {self.name!r} needs min and max")
            if not self.min < self.max:
                raise PreconditionError(f"real feature {self.name!r}: min must be < max")
            if self.precision is None:
                object.__setattr__(self, "precision", 1e-5)
            if not self.precision > 0:
                raise PreconditionError(f"real feature {self.name!r}: precision must be > 0")
            object.__setattr__(self, "min", float(self.min))
            object.__setattr__(self, "max", float(self.max))
            object.__setattr__(self, "precision", float(self.precision))
        else:
            raise PreconditionError(f"unknown feature kind {self.kind!r}")

    @property
    def decimals(self):
        """Digits after the decimal point used when writing a Real value."""
        if self.kind != REAL:
            return 0
        return max(0, math.ceil(-math.log10(self.precision) - 1e-9))

    def domain_size(self):
        if self.kind == BOOLEAN:
            return 2.0
        if self.kind == ENUMERATION:
            return float(self.cardinality)
        return max(1.0, (self.max - self.min) / self.precision)


@dataclass(frozen=True)
class CrossConstraint:
    kind: str
    a: str
    b: str

    def __post_init__(self):
        if self.kind not in (REQUIRES, EXCLUDES):
            raise PreconditionError(f"unknown constraint kind {self.kind!r}")
        if self.a == self.b:
            raise PreconditionError("a constraint cannot relate a feature to itself")

    def __str__(self):
        return f"{self.kind}({self.a}, {self.b})"


@dataclass(frozen=True)
class VariabilityModel:
    features: tuple[FeatureDef, ...]
    constraints: tuple[CrossConstraint, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise PreconditionError("feature names must be unique")
        kinds = {f.name: f.kind for f in self.features}
        for c in self.constraints:
            for ref in (c.a, c.b):
                if ref not in kinds:
                    raise PreconditionError(f"constraint {c} references unknown feature {ref!r}")
                if kinds[ref] != BOOLEAN:
                    raise PreconditionError(f"constraint {c} must relate Boolean features")

    def __len__(self):
        return len(self.features)

    @property
    def n_features(self):
        return len(self.features)

    @cached_property
    def names(self):
        return tuple(f.name for f in self.features)

    @cached_property
    def index(self):
        return {name: i for i, name in enumerate(self.names)}

    def _idx(self, kind):
        return np.array([i for i, f in enumerate(self.features) if f.kind == kind], dtype=np.intp)

    @cached_property
    def boolean_idx(self):
        return self._idx(BOOLEAN)

    @cached_property
    def enum_idx(self):
        return self._idx(ENUMERATION)

    @cached_property
    def real_idx(self):
        return self._idx(REAL)

    @cached_property
    def enum_card(self):
        return np.array([self.features[i].cardinality for i in self.enum_idx], dtype=float)

    @cached_property
    def real_bounds(self):
        lo = np.array([self.features[i].min for i in self.real_idx], dtype=float)
        hi = np.array([self.features[i].max for i in self.real_idx], dtype=float)
        return lo, hi

    @cached_property
    def _constraint_pairs(self):
        return [(c.kind, self.index[c.a], self.index[c.b]) for c in self.constraints]

    def counts(self):
        """Number of features of each kind."""
        return {k: sum(f.kind == k for f in self.features) for k in KINDS}

    # -- JSON ---------------------------------------------------------------

    def to_dict(self):
        feats = []
        for f in self.features:
            d = {"name": f.name, "kind": f.kind}
            if f.kind == ENUMERATION:
                d["cardinality"] = f.cardinality
            elif f.kind == REAL:
                d.update(min=f.min, max=f.max, precision=f.precision)
            feats.append(d)
        cons = [{"kind": c.kind, "a": c.a, "b": c.b} for c in self.constraints]
        return {"features": feats, "constraints": cons}

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise ParseError("model document must be a JSON object")
        _reject_unknown(doc, {"features", "constraints"}, "model")
        if "features" not in doc or not isinstance(doc["features"], list):
            raise ParseError("model needs a 'features' list")
        feats = []
        for i, fd in enumerate(doc["features"]):
            if not isinstance(fd, dict):
                raise ParseError(f"feature #{i} must be an object")
            _reject_unknown(fd, {"name", "kind", "cardinality", "min", "max", "precision"}, f"feature #{i}")
            if "name" not in fd or "kind" not in fd:
                raise ParseError(f"feature #{i} needs 'name' and 'kind'")
            try:
                feats.append(FeatureDef(**fd))
            except (PreconditionError, TypeError) as exc:
                raise ParseError(f"feature #{i}: {exc}") from exc
        cons = []
        for i, cd in enumerate(doc.get("constraints", [])):
            if not isinstance(cd, dict):
                raise ParseError(f"constraint #{i} must be an object")
            _reject_unknown(cd, {"kind", "a", "b"}, f"constraint #{i}")
            if set(cd) != {"kind", "a", "b"}:
                raise ParseError(f"constraint #{i} needs 'kind', 'a' and 'b'")
            try:
                cons.append(CrossConstraint(**cd))
            except PreconditionError as exc:
                raise ParseError(f"constraint #{i}: {exc}") from exc
        try:
            return cls(tuple(feats), tuple(cons))
        except PreconditionError as exc:
            raise ParseError(str(exc)) from exc

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def save(self, path):
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path):
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON: {exc}") from exc
        return cls.from_dict(doc)


def _reject_unknown(doc, allowed, what):
    extra = set(doc) - allowed
    if extra:
        raise ParseError(f"{what}: unknown field(s) {sorted(extra)}")


@dataclass(frozen=True)
class ValidityReport:
    valid: bool
    violations: list[tuple[str, str]] = field(default_factory=list)


def check_shape(model, x):
    x = np.asarray(x, dtype=float)
    if x.ndim not in (1, 2) or x.shape[-1] != model.n_features:
        raise StructuralError(
            f"configuration has shape {x.shape}, model has {model.n_features} features"
        )
    return x


def validate(model, config):
    """Check one configuration against its model's domains and constraints."""
    x = check_shape(model, config)
    if x.ndim != 1:
        raise StructuralError("validate takes a single configuration")
    violations = []
    for f, v in zip(model.features, x.tolist()):
        if f.kind == BOOLEAN:
            if v not in (0.0, 1.0):
                violations.append((f.name, f"boolean value {v!r} not in {{0, 1}}"))
        elif f.kind == ENUMERATION:
            if not float(v).is_integer():
                violations.append((f.name, f"enumeration value {v!r} is not an integer"))
            elif v < 0:
                violations.append((f.name, f"enumeration value {v!r} below 0"))
            elif v > f.cardinality - 1:
                violations.append((f.name, f"enumeration value {v!r} above {f.cardinality - 1}"))
        else:
            if not np.isfinite(v):
                violations.append((f.name, f"real value {v!r} is not finite"))
            elif v < f.min:
                violations.append((f.name, f"real value {v!r} below min {f.min}"))
            elif v > f.max:
                violations.append((f.name, f"real value {v!r} above max {f.max}"))
    for c, (kind, a, b) in zip(model.constraints, model._constraint_pairs):
        if kind == REQUIRES and x[a] == 1 and x[b] != 1:
            violations.append((str(c), f"{c.a} is selected but {c.b} is not"))
        elif kind == EXCLUDES and x[a] == 1 and x[b] == 1:
            violations.append((str(c), f"{c.a} and {c.b} are both selected"))
    return ValidityReport(not violations, violations)


def constraints_ok(model, X):
    """Row-wise cross-constraint satisfaction for a batch."""
    X = np.atleast_2d(X)
    ok = np.ones(len(X), dtype=bool)
    for kind, a, b in model._constraint_pairs:
        if kind == REQUIRES:
            ok &= ~((X[:, a] == 1) & (X[:, b] != 1))
        else:
            ok &= ~((X[:, a] == 1) & (X[:, b] == 1))
    return ok


def valid_mask(model, X):
    """Vectorized ``validate(...).valid`` over the rows of ``X``."""
    X = np.atleast_2d(check_shape(model, X))
    ok = np.ones(len(X), dtype=bool)
    if len(model.boolean_idx):
        B = X[:, model.boolean_idx]
        ok &= ((B == 0) | (B == 1)).all(axis=1)
    if len(model.enum_idx):
        E = X[:, model.enum_idx]
        ok &= ((E == np.floor(E)) & (E >= 0) & (E <= model.enum_card - 1)).all(axis=1)
    if len(model.real_idx):
        lo, hi = model.real_bounds
        R = X[:, model.real_idx]
        ok &= ((R >= lo) & (R <= hi)).all(axis=1)
    return ok & constraints_ok(model, X)


def repair_types(model, config):
    """Coerce Boolean and enumeration entries back to their value types.

    Booleans snap to the nearest of {0, 1} (0.5 goes to 1), enumerations round
    half away from zero with negatives reset to 0.  Enumerations above their
    last literal and Reals outside their interval are deliberately left alone.
    """
    x = np.array(check_shape(model, config), dtype=float, copy=True)
    if len(model.boolean_idx):
        b = x[..., model.boolean_idx]
        x[..., model.boolean_idx] = np.where(b >= 0.5, 1.0, 0.0)
    if len(model.enum_idx):
        e = x[..., model.enum_idx]
        x[..., model.enum_idx] = np.where(e < 0, 0.0, np.floor(e + 0.5))
    return x


def sample_random(model, n, seed, max_rounds=200):
    """Draw ``n`` valid configurations uniformly per feature domain.

    Cross constraints are enforced by rejection; the batch is returned as an
    ``(n, d)`` array.
    """
    if n < 0:
        raise PreconditionError("n must be >= 0")
    rng = np.random.default_rng(seed)
    d = model.n_features
    out = np.empty((0, d))
    for _ in range(max_rounds):
        if len(out) >= n:
            break
        m = max(2 * (n - len(out)), 16)
        X = np.empty((m, d))
        if len(model.boolean_idx):
            X[:, model.boolean_idx] = rng.integers(0, 2, size=(m, len(model.boolean_idx)))
        if len(model.enum_idx):
            X[:, model.enum_idx] = np.floor(rng.random((m, len(model.enum_idx))) * model.enum_card)
        if len(model.real_idx):
            lo, hi = model.real_bounds
            X[:, model.real_idx] = rng.uniform(lo, hi, size=(m, len(model.real_idx)))
        out = np.vstack([out, X[constraints_ok(model, X)]])
    if len(out) < n:
        raise SamplingExhaustedError(
            f"only {len(out)} of {n} samples satisfied the constraints after {max_rounds} rounds"
        )
    return out[:n]


def gen_motiv_like(seed=0, n_boolean=20, n_enum=46, n_real=42, cardinality=7,
                   real_max=27.64, precision=1e-5, n_constraints=3):
    """Synthetic model with the option typology of an industrial video generator.

    Defaults give 20 Booleans, 46 seven-literal enumerations and 42 Reals on
    [0, 27.64] at 1e-5 precision, plus a few random requires/excludes
    constraints among the Booleans.
    """
    rng = np.random.default_rng(seed)
    feats = [FeatureDef(f"b{i:02d}", BOOLEAN) for i in range(n_boolean)]
    feats += [FeatureDef(f"e{i:02d}", ENUMERATION, cardinality=cardinality) for i in range(n_enum)]
    feats += [FeatureDef(f"r{i:02d}", REAL, min=0.0, max=real_max, precision=precision)
              for i in range(n_real)]
    cons = []
    seen = set()
    if n_constraints and n_boolean < 2:
        raise PreconditionError("constraints need at least two Boolean features")
    while len(cons) < n_constraints:
        a, b = rng.choice(n_boolean, size=2, replace=False)
        if (a, b) in seen or (b, a) in seen:
            continue
        seen.add((a, b))
        kind = REQUIRES if rng.random() < 0.5 else EXCLUDES
        cons.append(CrossConstraint(kind, f"b{a:02d}", f"b{b:02d}"))
    return VariabilityModel(tuple(feats), tuple(cons))


def config_space_log10(model):
    """log10 of the configuration-space size, ignoring cross constraints."""
    return float(sum(math.log10(f.domain_size()) for f in model.features))

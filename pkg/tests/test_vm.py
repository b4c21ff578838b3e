import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from confevade.errors import ParseError, PreconditionError, SamplingExhaustedError, StructuralError
from confevade.vm import (BOOLEAN, ENUMERATION, REAL, CrossConstraint, FeatureDef, VariabilityModel,
                          config_space_log10, gen_motiv_like, repair_types, sample_random, validate,
                          valid_mask)


def reasons(report):
    return [r for _, r in report.violations]


class TestFeatureDefs:
    def test_enumeration_needs_two_literals(self):
        with pytest.raises(PreconditionError):
            FeatureDef("e", ENUMERATION, cardinality=1)

    def test_real_needs_ordered_bounds(self):
        with pytest.raises(PreconditionError):
            FeatureDef("r", REAL, min=1.0, max=1.0)

    def test_real_precision_default_and_decimals(self):
        f = FeatureDef("r", REAL, min=0, max=1)
        assert f.precision == 1e-5
        assert f.decimals == 5

    def test_constraint_on_itself_rejected(self):
        with pytest.raises(PreconditionError):
            CrossConstraint("requires", "a", "a")

    def test_duplicate_names_rejected(self):
        with pytest.raises(PreconditionError):
            VariabilityModel((FeatureDef("a", BOOLEAN), FeatureDef("a", BOOLEAN)))

    def test_constraint_must_reference_known_boolean(self):
        feats = (FeatureDef("a", BOOLEAN), FeatureDef("e", ENUMERATION, cardinality=3))
        with pytest.raises(PreconditionError):
            VariabilityModel(feats, (CrossConstraint("requires", "a", "zz"),))
        with pytest.raises(PreconditionError):
            VariabilityModel(feats, (CrossConstraint("requires", "a", "e"),))


class TestValidate:
    def test_real_above_max(self, small_model):
        rep = validate(small_model, [1, 1, 0, 27.65])
        assert not rep.valid
        assert any("above max" in r for r in reasons(rep))

    def test_real_at_max_is_fine(self, small_model):
        assert validate(small_model, [1, 1, 0, 27.64]).valid

    def test_enumeration_edge(self, small_model):
        assert validate(small_model, [0, 0, 6.0, 1.0]).valid
        rep = validate(small_model, [0, 0, 7.0, 1.0])
        assert [name for name, _ in rep.violations] == ["c"]

    def test_requires_violation(self, small_model):
        rep = validate(small_model, [1, 0, 0, 1.0])
        assert not rep.valid
        assert rep.violations[0][0] == "requires(a, b)"

    def test_excludes_violation(self):
        m = VariabilityModel((FeatureDef("a", BOOLEAN), FeatureDef("b", BOOLEAN)),
                             (CrossConstraint("excludes", "a", "b"),))
        assert not validate(m, [1, 1]).valid
        assert validate(m, [1, 0]).valid

    def test_boolean_half_is_invalid(self, small_model):
        assert not validate(small_model, [0.5, 1, 0, 1.0]).valid

    def test_valid_iff_no_violations(self, small_model, rng):
        for _ in range(200):
            x = rng.normal(size=4) * 5
            rep = validate(small_model, x)
            assert rep.valid == (not rep.violations)

    def test_length_mismatch(self, small_model):
        with pytest.raises(StructuralError):
            validate(small_model, [0, 0, 0])

    def test_batch_mask_agrees_with_validate(self, small_model, rng):
        X = np.column_stack([rng.integers(0, 2, 500), rng.integers(0, 2, 500),
                             rng.integers(-1, 9, 500), rng.uniform(-3, 30, 500)]).astype(float)
        X[::7, 0] = 0.3
        expected = [validate(small_model, x).valid for x in X]
        assert valid_mask(small_model, X).tolist() == expected


class TestRepair:
    def test_boolean_rounds(self, small_model):
        assert repair_types(small_model, [0.7, 0.2, 0, 0])[:2].tolist() == [1.0, 0.0]

    def test_boolean_half_goes_up(self, small_model):
        assert repair_types(small_model, [0.5, -3, 0, 0])[:2].tolist() == [1.0, 0.0]

    def test_negative_enumeration_reset(self, small_model):
        assert repair_types(small_model, [0, 0, -2.3, 0])[2] == 0.0

    def test_no_upper_clamp(self, small_model):
        x = repair_types(small_model, [0, 0, 8.6, 0])
        assert x[2] == 9.0
        assert not validate(small_model, x).valid

    def test_half_away_from_zero(self, small_model):
        assert repair_types(small_model, [0, 0, 2.5, 0])[2] == 3.0

    def test_reals_untouched(self, small_model):
        assert repair_types(small_model, [0, 0, 0, -123.456])[3] == -123.456

    @given(st.lists(st.floats(-1e6, 1e6), min_size=4, max_size=4))
    def test_idempotent(self, values):
        m = VariabilityModel((FeatureDef("a", BOOLEAN), FeatureDef("b", BOOLEAN),
                              FeatureDef("c", ENUMERATION, cardinality=7),
                              FeatureDef("r", REAL, min=0.0, max=1.0)))
        once = repair_types(m, values)
        assert np.array_equal(repair_types(m, once), once)
        rep = validate(m, once)
        assert not any("boolean" in r for r in reasons(rep))

    def test_batch_matches_rows(self, small_model, rng):
        X = rng.normal(size=(50, 4)) * 4
        rows = np.array([repair_types(small_model, x) for x in X])
        assert np.array_equal(repair_types(small_model, X), rows)


class TestSampling:
    def test_empty(self, small_model):
        assert sample_random(small_model, 0, 1).shape == (0, 4)

    def test_motiv_like_all_valid(self):
        m = gen_motiv_like(0)
        X = sample_random(m, 4500, 7)
        assert X.shape == (4500, 108)
        assert all(validate(m, x).valid for x in X[:300])
        assert valid_mask(m, X).all()

    def test_deterministic(self, small_model):
        assert np.array_equal(sample_random(small_model, 50, 3), sample_random(small_model, 50, 3))

    def test_marginals_uniform(self):
        m = VariabilityModel((FeatureDef("a", BOOLEAN), FeatureDef("c", ENUMERATION, cardinality=7),
                              FeatureDef("r", REAL, min=2.0, max=4.0)))
        X = sample_random(m, 20000, 0)
        assert abs(X[:, 0].mean() - 0.5) < 0.02
        counts = np.bincount(X[:, 1].astype(int), minlength=7) / len(X)
        assert np.allclose(counts, 1 / 7, atol=0.015)
        assert abs(X[:, 2].mean() - 3.0) < 0.02

    def test_practically_unsatisfiable_constraints(self):
        # "x requires y" plus "x excludes y" forces x = 0, so a random draw
        # survives with probability 2**-40
        feats = tuple(FeatureDef(f"x{i}", BOOLEAN) for i in range(40)) + (FeatureDef("y", BOOLEAN),)
        cons = []
        for i in range(40):
            cons += [CrossConstraint("requires", f"x{i}", "y"), CrossConstraint("excludes", f"x{i}", "y")]
        m = VariabilityModel(feats, tuple(cons))
        assert validate(m, np.zeros(41)).valid
        with pytest.raises(SamplingExhaustedError):
            sample_random(m, 10, 0, max_rounds=5)

    def test_negative_n(self, small_model):
        with pytest.raises(PreconditionError):
            sample_random(small_model, -1, 0)


class TestGenerator:
    def test_counts(self):
        m = gen_motiv_like(0)
        assert m.n_features == 108
        assert m.counts() == {BOOLEAN: 20, ENUMERATION: 46, REAL: 42}
        assert len(m.constraints) == 3

    def test_domains(self):
        m = gen_motiv_like(3)
        enums = [f for f in m.features if f.kind == ENUMERATION]
        reals = [f for f in m.features if f.kind == REAL]
        assert {f.cardinality for f in enums} == {7}
        assert {(f.min, f.max, f.precision) for f in reals} == {(0.0, 27.64, 1e-5)}

    def test_deterministic(self):
        assert gen_motiv_like(5) == gen_motiv_like(5)

    def test_constraint_count_configurable(self):
        assert len(gen_motiv_like(0, n_constraints=0).constraints) == 0
        assert len(gen_motiv_like(0, n_constraints=7).constraints) == 7


class TestSpaceSize:
    def test_motiv_like(self):
        v = config_space_log10(gen_motiv_like(0))
        assert 314 - 2 <= v <= 316 + 2
        # independent arithmetic: 20 bits, 46 seven-way choices, 42 grids of 2,764,000 points
        assert v == pytest.approx(20 * math.log10(2) + 46 * math.log10(7) + 42 * math.log10(27.64 / 1e-5))

    def test_one_boolean(self):
        assert config_space_log10(VariabilityModel((FeatureDef("a", BOOLEAN),))) == pytest.approx(math.log10(2))

    def test_two_enums(self):
        m = VariabilityModel((FeatureDef("a", ENUMERATION, cardinality=7),
                              FeatureDef("b", ENUMERATION, cardinality=7)))
        assert config_space_log10(m) == pytest.approx(2 * math.log10(7))

    def test_narrow_real_counts_as_one(self):
        m = VariabilityModel((FeatureDef("r", REAL, min=0, max=1e-7, precision=1e-5),))
        assert config_space_log10(m) == 0.0

    def test_additive(self):
        a = (FeatureDef("a", BOOLEAN), FeatureDef("e", ENUMERATION, cardinality=5))
        b = (FeatureDef("r", REAL, min=0, max=3, precision=0.01),)
        whole = config_space_log10(VariabilityModel(a + b))
        parts = config_space_log10(VariabilityModel(a)) + config_space_log10(VariabilityModel(b))
        assert whole == pytest.approx(parts)


class TestModelJson:
    def test_round_trip(self, tmp_path):
        m = gen_motiv_like(2)
        m.save(tmp_path / "m.json")
        assert VariabilityModel.load(tmp_path / "m.json") == m

    def test_unknown_field_rejected(self):
        doc = gen_motiv_like(0).to_dict()
        doc["features"][0]["colour"] = "red"
        with pytest.raises(ParseError):
            VariabilityModel.from_dict(doc)

    def test_unknown_top_level_field_rejected(self):
        doc = gen_motiv_like(0).to_dict()
        doc["extra"] = 1
        with pytest.raises(ParseError):
            VariabilityModel.from_dict(doc)

    def test_truncated_file(self, tmp_path):
        p = tmp_path / "m.json"
        p.write_text(gen_motiv_like(0).to_json()[:200])
        with pytest.raises(ParseError):
            VariabilityModel.load(p)

    def test_field_spellings(self):
        doc = json.loads(gen_motiv_like(0).to_json())
        assert set(doc) == {"features", "constraints"}
        assert set(doc["features"][-1]) == {"name", "kind", "min", "max", "precision"}
        assert set(doc["constraints"][0]) == {"kind", "a", "b"}

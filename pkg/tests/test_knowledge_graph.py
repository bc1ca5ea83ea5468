import json

import pytest

from adventure.elo import Level
from adventure.knowledge_graph import (
    Concept,
    DanglingReferenceError,
    GraphParseError,
    KnowledgeGraph,
    load_graph,
    parse_graph,
    serialize_graph,
    validate_graph,
)

from conftest import tiny_identity_graph


def minimal_doc():
    return {
        "concepts": [
            {"id": "c1", "name": "loops", "upper_concept": None, "order_index": 0,
             "language": "python"}
        ],
        "exercises": [
            {
                "id": f"e-{level.lower()}",
                "concept_id": "c1",
                "language_id": "python",
                "level": level,
                "statements": {"en": f"{level} question"},
                "hints": [],
                "required_markers": [["print"]],
                "test_cases": [{"inputs": [], "expected_output": ["1"]}],
                "reference_solution": "print(1)\n",
            }
            for level in ("Easy", "Standard", "Difficult")
        ],
    }


class TestLoadGraph:
    def test_minimal_round_trip(self, tmp_path):
        path = tmp_path / "kg.json"
        path.write_text(json.dumps(minimal_doc()), encoding="utf-8")
        kg = load_graph(path)
        assert len(kg.concepts) == 1
        assert len(kg.exercises) == 3

    def test_dangling_concept_named(self, tmp_path):
        doc = minimal_doc()
        doc["exercises"][0]["concept_id"] = "X"
        path = tmp_path / "kg.json"
        path.write_text(json.dumps(doc), encoding="utf-8")
        with pytest.raises(DanglingReferenceError) as err:
            load_graph(path)
        assert "'X'" in str(err.value)

    def test_dangling_lists_all_offenders(self):
        doc = minimal_doc()
        doc["exercises"][0]["concept_id"] = "X"
        doc["exercises"][1]["concept_id"] = "Y"
        with pytest.raises(DanglingReferenceError) as err:
            parse_graph(doc)
        assert "'X'" in str(err.value) and "'Y'" in str(err.value)

    def test_parse_error_carries_location(self, tmp_path):
        path = tmp_path / "kg.json"
        path.write_text('{"concepts": [', encoding="utf-8")
        with pytest.raises(GraphParseError) as err:
            load_graph(path)
        assert "line 1" in str(err.value)

    def test_unknown_fields_rejected(self):
        doc = minimal_doc()
        doc["exercises"][0]["bonus"] = True
        with pytest.raises(GraphParseError) as err:
            parse_graph(doc)
        assert "bonus" in str(err.value)

    def test_missing_en_statement_rejected(self):
        doc = minimal_doc()
        doc["exercises"][0]["statements"] = {"th": "?"}
        with pytest.raises(GraphParseError):
            parse_graph(doc)

    def test_empty_test_cases_rejected(self):
        doc = minimal_doc()
        doc["exercises"][0]["test_cases"] = []
        with pytest.raises(GraphParseError):
            parse_graph(doc)

    def test_empty_expected_output_rejected(self):
        doc = minimal_doc()
        doc["exercises"][0]["test_cases"] = [{"inputs": [], "expected_output": []}]
        with pytest.raises(GraphParseError):
            parse_graph(doc)

    def test_empty_marker_set_rejected(self):
        doc = minimal_doc()
        doc["exercises"][0]["required_markers"] = [[]]
        with pytest.raises(GraphParseError):
            parse_graph(doc)

    def test_difficulty_override(self):
        doc = minimal_doc()
        doc["exercises"][0]["difficulty"] = -0.25
        kg = parse_graph(doc)
        assert kg.exercises["e-easy"].rating.d == -0.25

    def test_seed_difficulties_by_level(self):
        kg = parse_graph(minimal_doc())
        assert kg.exercises["e-easy"].rating.d == -1.0
        assert kg.exercises["e-standard"].rating.d == 0.0
        assert kg.exercises["e-difficult"].rating.d == 1.0

    def test_shipped_sample_graph_is_clean(self, sample_kg):
        assert len(sample_kg.concepts) >= 3
        assert len(sample_kg.exercises) >= 27
        assert validate_graph(sample_kg) == []


class TestValidate:
    def test_valid_graph_empty_list(self):
        assert validate_graph(parse_graph(minimal_doc())) == []

    def test_self_upper_cycle(self):
        kg = parse_graph(minimal_doc())
        kg.concepts["c1"] = Concept(
            id="c1", name="loops", language="python", order_index=0, upper_concept="c1"
        )
        codes = [v.code for v in validate_graph(kg)]
        assert "concept.upper_cycle" in codes

    def test_two_node_upper_cycle(self):
        kg = parse_graph(minimal_doc())
        kg.concepts["c1"] = Concept("c1", "loops", "python", 0, upper_concept="c2")
        kg.concepts["c2"] = Concept("c2", "vars", "python", 1, upper_concept="c1")
        codes = [v.code for v in validate_graph(kg)]
        assert "concept.upper_cycle" in codes

    def test_missing_level_coverage_warns(self):
        doc = minimal_doc()
        doc["exercises"] = [e for e in doc["exercises"] if e["level"] != "Difficult"]
        kg = parse_graph(doc)
        violations = validate_graph(kg)
        assert any(
            v.code == "coverage.missing_level" and v.severity == "warning" and "Difficult" in v.message
            for v in violations
        )

    def test_order_index_clash(self):
        kg = parse_graph(minimal_doc())
        kg.concepts["c2"] = Concept("c2", "vars", "python", 0, upper_concept=None)
        codes = [v.code for v in validate_graph(kg)]
        assert "concept.order_clash" in codes


class TestSerializeRoundTrip:
    def test_semantic_identity(self, sample_kg):
        doc = serialize_graph(sample_kg)
        kg2 = parse_graph(doc)
        assert serialize_graph(kg2) == doc
        assert set(kg2.exercises) == set(sample_kg.exercises)
        for ex_id, ex in sample_kg.exercises.items():
            other = kg2.exercises[ex_id]
            assert other.statements == ex.statements
            assert other.test_cases == ex.test_cases
            assert other.required_markers == ex.required_markers
            assert other.reference_solution == ex.reference_solution
            assert other.rating.d == ex.rating.d


class TestNextConcept:
    def setup_method(self):
        self.kg = tiny_identity_graph(concept_count=3)  # c0 < c1 < c2

    def test_next_in_order(self):
        assert self.kg.next_concept("identity", "c0", {"c0"}) == "c1"

    def test_all_mastered_none(self):
        assert self.kg.next_concept("identity", "c0", {"c0", "c1", "c2"}) is None

    def test_skips_mastered(self):
        assert self.kg.next_concept("identity", "c0", {"c0", "c1"}) == "c2"

    def test_never_returns_mastered_or_earlier(self):
        for current in ("c0", "c1", "c2"):
            for mastered in ({"c0"}, {"c1"}, {"c0", "c1"}, set()):
                nxt = self.kg.next_concept("identity", current, mastered)
                if nxt is not None:
                    assert nxt not in mastered
                    assert (
                        self.kg.concepts[nxt].order_index
                        > self.kg.concepts[current].order_index
                    )

    def test_unknown_concept(self):
        with pytest.raises(KeyError):
            self.kg.next_concept("identity", "nope", set())


class TestExercisesFor:
    def setup_method(self):
        self.kg = tiny_identity_graph(n_per_level=1)

    def test_exclusion(self):
        ids = [e.id for e in self.kg.exercises_for("identity", "c0", exclude={"c0-easy-0"})]
        assert ids == ["c0-difficult-0", "c0-standard-0"]

    def test_level_filter(self):
        ids = [e.id for e in self.kg.exercises_for("identity", "c0", level=Level.EASY)]
        assert ids == ["c0-easy-0"]

    def test_exclude_all(self):
        everything = set(self.kg.exercises)
        assert self.kg.exercises_for("identity", "c0", exclude=everything) == []

    def test_sorted_and_unique(self, sample_kg):
        for concept in sample_kg.concepts.values():
            ids = [e.id for e in sample_kg.exercises_for(concept.language, concept.id)]
            assert ids == sorted(ids)
            assert len(ids) == len(set(ids))

    def test_unknown_concept(self):
        with pytest.raises(KeyError):
            self.kg.exercises_for("identity", "zzz")

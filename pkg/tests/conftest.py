import pytest

from adventure import assessment, elo
from adventure.config import default_kg_path
from adventure.events import EventLog, LogicalClock
from adventure.feedback import ChatMemoryStore
from adventure.knowledge_graph import KnowledgeGraph, load_graph, parse_graph
from adventure.llm import ReferenceLlm
from adventure.session import Mode, SessionEngine


@pytest.fixture(scope="session")
def sample_kg() -> KnowledgeGraph:
    return load_graph(default_kg_path())


@pytest.fixture()
def runner() -> assessment.RunnerConfig:
    return assessment.RunnerConfig.with_defaults()


def tiny_identity_graph(n_per_level: int = 1, concept_count: int = 1) -> KnowledgeGraph:
    """Minimal identity-language graph for focused state-machine tests."""
    concepts = []
    exercises = []
    for c in range(concept_count):
        cid = f"c{c}"
        concepts.append(
            {"id": cid, "name": f"concept {c}", "upper_concept": None, "order_index": c,
             "language": "identity"}
        )
        for level in ("Easy", "Standard", "Difficult"):
            for i in range(n_per_level):
                text = f"{cid} {level.lower()} text {i}"
                exercises.append(
                    {
                        "id": f"{cid}-{level.lower()}-{i}",
                        "concept_id": cid,
                        "language_id": "identity",
                        "level": level,
                        "statements": {"en": f"Produce: {text}"},
                        "hints": [{"concept": "exact output", "points": [f"{cid}_{level}"]}],
                        "required_markers": [[cid]],
                        "test_cases": [
                            {"inputs": ["x"], "expected_output": [text]},
                            {"inputs": ["y"], "expected_output": [text]},
                        ],
                        "reference_solution": text + "\n",
                    }
                )
    return parse_graph({"concepts": concepts, "exercises": exercises})


def make_engine(kg, mode: Mode, learner: str = "l1", llm=None, log=None, **kwargs):
    """Engine wired for hermetic tests: logical clock, in-memory log and memory."""
    runner_config = assessment.RunnerConfig.with_defaults()
    log = log or EventLog(clock=LogicalClock())
    engine = SessionEngine(
        kg=kg,
        params=kwargs.pop("params", elo.EloParams()),
        runner=runner_config,
        llm=llm if llm is not None else ReferenceLlm(kg, runner_config),
        memory=ChatMemoryStore(None),
        event_log=log,
        **kwargs,
    )
    engine.ensure_learner(learner, mode)
    return engine

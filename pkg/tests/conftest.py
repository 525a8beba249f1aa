from pathlib import Path

import numpy as np
import pytest

from scene_kge.kg import KnowledgeGraph, read_kg
from scene_kge.models import EmbeddingModel, ModelConfig

FIXTURES = Path(__file__).parent / "fixtures"

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def golden_kg():
    return read_kg(FIXTURES / "golden.tsv")


def make_model(algo, entity_vecs, relation_params, kg: KnowledgeGraph | None = None, **cfg):
    E = np.asarray(entity_vecs, dtype=np.float64)
    R = np.asarray(relation_params, dtype=np.float64)
    config = ModelConfig(algo, E.shape[1], **cfg)
    if kg is None:
        return EmbeddingModel(config, E, R)
    return EmbeddingModel(config, E, R, kg.entities, kg.relations)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

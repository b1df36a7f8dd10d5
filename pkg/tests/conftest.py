import json
import os
import random

import pytest

from clarienv.cdag import CDag, CDagOption, QuestionNode, parse_cdag
from clarienv.providers import HashedTokenEmbedder

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


@pytest.fixture(scope="session")
def data_dir() -> str:
    return DATA_DIR


@pytest.fixture(scope="session")
def consulting_text() -> str:
    with open(os.path.join(DATA_DIR, "consulting_cdag.json"), encoding="utf-8") as fh:
        return fh.read()


@pytest.fixture(scope="session")
def consulting_graph(consulting_text) -> CDag:
    return parse_cdag(consulting_text)


@pytest.fixture(scope="session")
def embedder() -> HashedTokenEmbedder:
    return HashedTokenEmbedder()


_WORDS = [
    "budget", "timeline", "scope", "audience", "region", "format", "depth",
    "metric", "vendor", "risk", "trend", "source", "cost", "growth", "policy",
]


def random_graph(rng: random.Random, max_nodes: int = 7) -> CDag:
    """A random valid C-DAG: acyclic by construction (edges only point to
    later ids in a fixed topological order)."""
    n = rng.randint(1, max_nodes)
    ids = [f"n{i}" for i in range(n)]
    nodes = {}
    for i, nid in enumerate(ids):
        later = ids[i + 1:]
        options = []
        for _ in range(rng.randint(2, 3)):
            children = rng.sample(later, rng.randint(0, min(2, len(later))))
            options.append(CDagOption(
                text=" ".join(rng.sample(_WORDS, 3)),
                next_node_ids=tuple(children),
            ))
        nodes[nid] = QuestionNode(
            id=nid,
            text=" ".join(rng.sample(_WORDS, 4)) + "?",
            options=tuple(options),
        )
    k = rng.randint(1, min(3, n))
    starts = tuple(sorted(rng.sample(ids, k)))
    return CDag(root_query="root task", start_node_ids=starts, nodes=nodes)


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20240817)


def write_json(path: str, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False)


def write_jsonl(path: str, rows: list) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")

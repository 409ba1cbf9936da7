import numpy as np
import pytest

from adj.datagen import random_graph, running_example_db, running_example_query
from adj.query import load_query
from adj.relation import Database


@pytest.fixture(scope="session")
def toy_db():
    return running_example_db()


@pytest.fixture(scope="session")
def toy_query():
    return running_example_query()


@pytest.fixture(scope="session")
def graph300():
    return random_graph(60, 300, seed=7)


@pytest.fixture(scope="session")
def graph500():
    return random_graph(80, 500, seed=11)


def db_for(query_name: str, graph):
    q = load_query(query_name)
    return q, Database.for_graph([a.name for a in q.atoms], graph)


@pytest.fixture(scope="session")
def q1_db300(graph300):
    return db_for("q1", graph300)


def rows_of(result) -> list[tuple]:
    if isinstance(result, set):
        return sorted(result)
    return sorted(map(tuple, np.asarray(result, dtype=np.int64)))

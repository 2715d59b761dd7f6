import time

import pytest

from nn2rules.datasets import load_benchmark
from nn2rules.extraction import extract_all
from nn2rules.model import TrainConfig, load_weights, train
from nn2rules.schema import load_schema

from oracles import DATA

TOMATO = DATA / "tomato"


@pytest.fixture
def tomato_schema():
    return load_schema(TOMATO / "tomato.schema")


@pytest.fixture
def tomato_net(tomato_schema):
    return load_weights(TOMATO / "tomato_net.json", tomato_schema)


class Benchmarks:
    """Trains each bundled dataset once per session with default settings."""

    def __init__(self):
        self._cache = {}

    def get(self, name):
        if name not in self._cache:
            t0 = time.perf_counter()
            schema, tr, te, edges = load_benchmark(name)
            net = train(tr, TrainConfig())
            t1 = time.perf_counter()
            ex = extract_all(net, schema)
            t2 = time.perf_counter()
            self._cache[name] = dict(schema=schema, train=tr, test=te, net=net, extraction=ex,
                                     rules=ex.rules, train_seconds=t1 - t0, extract_seconds=t2 - t1)
        return self._cache[name]


@pytest.fixture(scope="session")
def benchmarks():
    return Benchmarks()


# acceptance criteria report ------------------------------------------------

def pytest_configure(config):
    config._acceptance = {}


@pytest.fixture
def acceptance(request):
    """``acceptance(key, passed, detail)`` records one criterion line for the summary."""
    store = request.config._acceptance

    def record(key, passed, detail=""):
        store[key] = (bool(passed), detail)
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = getattr(config, "_acceptance", {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(store):
        ok, detail = store[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {key}: {detail}")


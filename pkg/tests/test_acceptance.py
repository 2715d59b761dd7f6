"""Acceptance criteria, one test per criterion (criterion 7 is split in three).

Each test records a PASS/FAIL line through the ``acceptance`` fixture; the
lines are printed in a summary section at the end of the run.
"""
import time

import numpy as np
import pytest

from nn2rules.evaluation import NetworkClassifier, accuracy, fidelity, prune_by_support, support_ordered, \
    tradeoff_curve, verify_exhaustive
from nn2rules.extraction import WeightBuckets, extract, extract_all, merge_partitions, select_weights
from nn2rules.model import random_network
from nn2rules.schema import load_schema
from oracles import (
    DATA, canonical_buckets, cover_counts, every_instance, hidden_relu, minimal_prefixes, reachable_tau, small_schema,
)

pytestmark = pytest.mark.slow

DATASETS = ["cars", "nursery", "contraception", "adult"]
RANDOM_NETS = 50
SOUNDNESS_LIMIT = 20_000


# -- 1 ---------------------------------------------------------------------------

def test_c1_tomato_golden(acceptance, tomato_net):
    t0 = time.perf_counter()
    schema = load_schema(DATA / "tomato" / "tomato.schema")
    rules = extract(tomato_net, schema)
    elapsed = time.perf_counter() - t0
    positive = {r for r, c in zip(rules.rules(), rules.labels) if c == 1}
    X = every_instance(schema)
    zero_elsewhere = all(c == 0 for x, c in zip(map(tuple, X), rules.predict_many(X)) if x not in positive)
    ok = positive == {(0, 1), (0, 2)} and zero_elsewhere and elapsed < 1.0
    acceptance("1", ok, f"class-1 rules {sorted(positive)}, {elapsed * 1000:.1f} ms")
    assert ok


# -- 2 and 5: trained [6,3] nets and random nets on every schema ------------------

def intermediate_lists(ex):
    """Every rule list or merged partition built during one extraction."""
    for k, layer in enumerate(ex.hidden):
        for j, rl in enumerate(layer):
            yield f"layer {k + 1} neuron {j}", rl.lo, rl.length
        part = merge_partitions(layer)
        yield f"layer {k + 1} merged", part.lo, part.length
    yield "output behaviors", ex.output_raw.lo, ex.output_raw.length
    yield "class list", ex.rules.lo, ex.rules.length


def audit(net, schema, ex):
    """Verification mismatches, partition failures and worst hidden-behavior error."""
    res = verify_exhaustive(ex.rules, net, schema)
    bad_lists = [name for name, lo, length in intermediate_lists(ex)
                 if not np.all(cover_counts(lo, length, schema) == 1)]
    err = None
    if schema.num_assignments <= SOUNDNESS_LIMIT:
        X, relu = hidden_relu(net, schema)
        err = 0.0
        for k, layer in enumerate(ex.hidden):
            for j, rl in enumerate(layer):
                err = max(err, float(np.max(np.abs(rl.evaluate_many(X) - relu[k][:, j]))))
    return res.mismatches, bad_lists, err


def random_widths(rng):
    if rng.random() < 0.2:
        return [int(rng.integers(1, 9))]
    return [int(rng.integers(1, 9)), int(rng.integers(1, 5))]


@pytest.fixture(scope="module")
def sweep(benchmarks):
    """Audit of the trained net and RANDOM_NETS untrained nets for each dataset schema."""
    out = {}
    for name in DATASETS:
        b = benchmarks.get(name)
        schema = b["schema"]
        t0 = time.perf_counter()
        trained = audit(b["net"], schema, b["extraction"])
        verify_seconds = time.perf_counter() - t0
        rng = np.random.default_rng(7)
        randoms = []
        for i in range(RANDOM_NETS):
            widths = [8, 4] if i == 0 else random_widths(rng)
            net = random_network(schema.n, widths, seed=1000 + i)
            randoms.append((widths, audit(net, schema, extract_all(net, schema))))
        out[name] = dict(schema=schema, trained=trained, randoms=randoms,
                         seconds=b["train_seconds"] + b["extract_seconds"] + verify_seconds)
    return out


def test_c2_exhaustive_fidelity(acceptance, sweep):
    expected_sizes = {"cars": 1728, "nursery": 12960, "contraception": 18432, "adult": 108864}
    lines, ok = [], True
    total = 0.0
    for name, s in sweep.items():
        trained_mm = s["trained"][0]
        random_mm = sum(a[0] for _, a in s["randoms"])
        widest = max(tuple(w) for w, _ in s["randoms"])
        size_ok = s["schema"].num_assignments == expected_sizes[name]
        ok &= trained_mm == 0 and random_mm == 0 and size_ok and len(s["randoms"]) >= 50
        total += s["seconds"]
        lines.append(f"{name} ({s['schema'].num_assignments}): trained {trained_mm}, "
                     f"{len(s['randoms'])} random {random_mm} mismatches (widest {list(widest)})")
    ok &= total < 600
    acceptance("2", ok, "; ".join(lines) + f"; trained runs {total:.0f} s")
    assert ok


def test_c5_partition_and_soundness(acceptance, sweep):
    lines, ok = [], True
    for name, s in sweep.items():
        audits = [s["trained"]] + [a for _, a in s["randoms"]]
        bad = sum(len(a[1]) for a in audits)
        errs = [a[2] for a in audits if a[2] is not None]
        worst = max(errs) if errs else None
        ok &= bad == 0 and (worst is None or worst <= 1e-9)
        if s["schema"].num_assignments <= SOUNDNESS_LIMIT:
            ok &= len(errs) == len(audits)
        lines.append(f"{name}: {bad} non-partition lists" +
                     (f", max hidden error {worst:.1e}" if worst is not None else ", soundness n/a"))
    acceptance("5", ok, "; ".join(lines))
    assert ok


# -- 3 ---------------------------------------------------------------------------

def test_c3_accuracy_identity(acceptance, benchmarks):
    lines, ok = [], True
    for name in DATASETS:
        b = benchmarks.get(name)
        a_rules = accuracy(b["rules"], b["test"])
        a_net = accuracy(NetworkClassifier(b["net"], b["schema"]), b["test"])
        ok &= a_rules == a_net
        lines.append(f"{name} {a_rules!r} vs {a_net!r}")
    acceptance("3", ok, "; ".join(lines))
    assert ok


# -- 4 ---------------------------------------------------------------------------

def test_c4_select_weights_oracle(acceptance):
    cases = 1200
    bad = {"swap": 0, "dfs": 0}
    on_sum = ties = 0
    for seed in range(cases):
        rng = np.random.default_rng(seed)
        sizes = list(rng.integers(1, 5, int(rng.integers(1, 6))))
        integer = rng.random() < 0.6
        buckets = canonical_buckets(rng, sizes, integer)
        ties += any(len(set(b)) < len(b) for b in buckets)
        if rng.random() < 0.6:
            tau = reachable_tau(rng, buckets)
            on_sum += 1
        else:
            tau = float(rng.uniform(-0.5, 6.0))
        strict = bool(rng.random() < 0.3)
        expected = minimal_prefixes(buckets, tau, strict)
        wb = WeightBuckets.from_canonical(buckets)
        for strategy in bad:
            if select_weights(wb, tau, strict, strategy=strategy) != expected:
                bad[strategy] += 1
    ok = all(v == 0 for v in bad.values()) and cases >= 1000
    acceptance("4", ok, f"{cases} instances ({ties} with ties, {on_sum} with tau on a reachable sum); "
                        f"mismatches {bad}")
    assert ok


# -- 6 ---------------------------------------------------------------------------

def test_c6_curve_endpoints(acceptance, benchmarks):
    lines, ok = [], True
    for name in DATASETS:
        b = benchmarks.get(name)
        curve = tradeoff_curve(support_ordered(b["rules"], b["train"]), b["net"], b["test"])
        neg = float(np.mean(NetworkClassifier(b["net"], b["schema"]).predict_many(b["test"].X) == 0))
        first, last = curve[0], curve[-1]
        ok &= first.percent == 0 and last.percent == 100
        ok &= last.fidelity == 1.0 and first.fidelity == neg
        lines.append(f"{name}: 100% fidelity {last.fidelity}, 0% fidelity {first.fidelity:.4f} "
                     f"(negative rate {neg:.4f})")
    acceptance("6", ok, "; ".join(lines))
    assert ok


# -- 7 ---------------------------------------------------------------------------

def support_fidelity(b):
    sup = prune_by_support(b["rules"], b["train"])
    return fidelity(sup, b["net"], b["test"].X, b["schema"]), len(sup)


@pytest.mark.parametrize("name", ["adult", "contraception"])
def test_c7_support_fidelity(acceptance, benchmarks, name):
    b = benchmarks.get(name)
    fid, _ = support_fidelity(b)
    ok = fid >= 0.90
    acceptance(f"7 ({name} support fidelity)", ok, f"{fid:.4f} (threshold 0.90)")
    assert ok


def test_c7_rule_contraction(acceptance, benchmarks):
    lines, ok = [], True
    for name in ["adult", "contraception"]:
        b = benchmarks.get(name)
        full = int(b["rules"].labels.sum())
        _, n_sup = support_fidelity(b)
        ratio = full / max(n_sup, 1)
        ok &= ratio >= 2.0
        lines.append(f"{name} {full} -> {n_sup} ({ratio:.1f}x)")
    acceptance("7 (contraction)", ok, "; ".join(lines))
    assert ok


# -- 8 ---------------------------------------------------------------------------

def test_c8_literal_vs_restricted(acceptance):
    same = 0
    nets = 100
    for seed in range(nets):
        rng = np.random.default_rng(seed)
        schema = small_schema(list(rng.integers(2, 5, int(rng.integers(1, 5)))))
        widths = [int(w) for w in rng.integers(1, 5, int(rng.integers(1, 3)))]
        net = random_network(schema.n, widths, seed=seed)
        a = extract(net, schema)
        b = extract(net, schema, literal=True)
        same += (np.array_equal(a.lo, b.lo) and np.array_equal(a.length, b.length)
                 and np.array_equal(a.labels, b.labels))
    ok = same == nets
    acceptance("8", ok, f"{same}/{nets} identical")
    assert ok

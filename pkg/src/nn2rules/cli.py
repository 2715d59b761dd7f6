"""Command-line pipeline: train, extract, verify, evaluate, reproduce.

Exit codes: 0 success, 1 verification failure, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import TreeConfig, train_tree_on, trepan_lite
from .datasets import BENCHMARKS, DATA_ROOT
from .evaluation import (DEFAULT_CAP, NetworkClassifier, VerificationCapExceeded, accuracy, error_set_fidelity,
                         fidelity, num_rules_max, num_rules_memorization, support_ordered, tradeoff_curve,
                         verify_exhaustive)
from .extraction import extract
from .model import TrainConfig, TrainingDiverged, load_weights, save_weights, train
from .rules import RuleListError, load_rule_list, save_rule_list, support_counts
from .schema import Dataset, FeatureSchema, load_binning_spec, load_schema, load_split

log = logging.getLogger("nn2rules")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Everything a command was run with; written to ``<command>_manifest.json``."""

    command: str
    schema: str | None = None
    data: str | None = None
    label: str | None = None
    positive_class: str | None = None
    bins: str | None = None
    test_fraction: float = 0.2
    split_seed: int = 42
    widths: list[int] = field(default_factory=lambda: [6, 3])
    train: dict = field(default_factory=dict)
    weights: str | None = None
    rules: str | None = None
    out: str = "."
    cap: int = DEFAULT_CAP
    sample: int | None = None
    curve_step: float = 5.0
    tree: dict = field(default_factory=dict)
    version: str = __version__


# ---------------------------------------------------------------------------
# argument helpers


def parse_widths(text: str) -> list[int]:
    try:
        widths = [int(w) for w in text.split(",") if w.strip()]
    except ValueError:
        raise UsageError(f"widths must be comma-separated integers, got {text!r}")
    if not widths or any(w < 1 for w in widths):
        raise UsageError(f"every hidden width must be >= 1, got {text!r}")
    return widths


def require_file(path, what: str) -> Path:
    if path is None:
        raise UsageError(f"missing --{what}")
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} file not found: {p}")
    return p


def fill_dataset_defaults(args) -> None:
    """``--dataset NAME`` fills in the bundled schema/data/label/bins."""
    name = getattr(args, "dataset", None)
    if not name:
        return
    if name not in BENCHMARKS:
        raise UsageError(f"unknown dataset {name!r}; choose from {', '.join(BENCHMARKS)}")
    spec = BENCHMARKS[name]
    root = Path(args.data_root) if args.data_root else DATA_ROOT
    args.schema = args.schema or str(spec.schema_path(root))
    if hasattr(args, "data"):
        args.data = args.data or str(spec.csv_path(root))
        args.label = args.label or spec.label
        args.positive_class = args.positive_class or spec.positive
        if spec.numeric and not args.bins:
            args.bins = str(spec.bins_path(root))


def load_data(cfg: RunConfig, schema: FeatureSchema) -> tuple[Dataset, Dataset, dict]:
    data = require_file(cfg.data, "data")
    if not cfg.label:
        raise UsageError("missing --label")
    binning = load_binning_spec(require_file(cfg.bins, "bins")) if cfg.bins else {}
    if not 0.0 < cfg.test_fraction < 1.0:
        raise UsageError("--test-fraction must lie in (0, 1)")
    return load_split(data, schema, cfg.label, positive=cfg.positive_class, binning=binning,
                      test_fraction=cfg.test_fraction, seed=cfg.split_seed)


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def fmt(x: float) -> str:
    return f"{x:.6f}"


def out_dir(cfg: RunConfig) -> Path:
    p = Path(cfg.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def config_from(args, command: str) -> RunConfig:
    fill_dataset_defaults(args)
    cfg = RunConfig(command=command)
    for k in ("schema", "data", "label", "positive_class", "bins", "test_fraction", "split_seed", "weights",
              "rules", "out", "cap", "sample", "curve_step"):
        if hasattr(args, k):
            setattr(cfg, k, getattr(args, k))
    if hasattr(args, "widths"):
        cfg.widths = parse_widths(args.widths)
        cfg.train = TrainConfig(hidden=tuple(cfg.widths), learning_rate=args.lr, batch_size=args.batch_size,
                                epochs=args.epochs, seed=args.seed).to_dict()
    if hasattr(args, "max_depth"):
        cfg.tree = asdict(TreeConfig(max_depth=None if args.max_depth < 0 else args.max_depth,
                                     min_leaf=args.min_leaf))
    return cfg


# ---------------------------------------------------------------------------
# pipeline steps


def step_train(cfg: RunConfig, schema, train_set, test_set, edges, out: Path):
    t0 = time.perf_counter()
    tc = TrainConfig(**{**cfg.train, "hidden": tuple(cfg.train["hidden"])})
    net = train(train_set, tc)
    save_weights(net, out / "weights.json")
    net_clf = NetworkClassifier(net, schema)
    summary = {"train_accuracy": accuracy(net_clf, train_set),
               "test_accuracy": accuracy(net_clf, test_set) if len(test_set) else None,
               "train_rows": len(train_set), "test_rows": len(test_set), "bin_edges": edges}
    log.info("trained %s in %.1fs: test accuracy %s", cfg.train["hidden"], time.perf_counter() - t0,
             summary["test_accuracy"])
    return net, summary


def step_extract(net, schema, train_set, out: Path):
    t0 = time.perf_counter()
    rules = extract(net, schema)
    sup = support_counts(rules, train_set) if train_set is not None else None
    save_rule_list(rules, out / "rules.txt", sup)
    n_pos = int(rules.labels.sum())
    log.info("extracted %d entries (%d class-1) in %.2fs; num rules max %d", len(rules), n_pos,
             time.perf_counter() - t0, num_rules_max(schema))
    return rules, {"entries": len(rules), "positive_rules": n_pos, "num_rules_max": num_rules_max(schema)}


def step_verify(rules, net, schema, cfg: RunConfig, out: Path):
    t0 = time.perf_counter()
    res = verify_exhaustive(rules, net, schema, cap=cfg.cap, sample=cfg.sample)
    report = {"passed": res.passed, "checked": res.checked, "mismatches": res.mismatches, "sampled": res.sampled}
    write_json(out / "verify.json", report)
    cex = out / "counterexamples.txt"
    if res.passed:
        cex.unlink(missing_ok=True)
    else:
        cex.write_text("".join(schema.describe(x) + "\n" for x in res.counterexamples))
    log.info("verify: %s, %d checked, %d mismatches (%.2fs)", "pass" if res.passed else "FAIL", res.checked,
             res.mismatches, time.perf_counter() - t0)
    return res


METRIC_HEADER = ["dataset", "method", "fidelity", "accuracy", "error_set_fidelity", "no_errors", "num_rules"]
COUNT_HEADER = ["dataset", "num_rules_max", "num_rules_memorization", "nn2rules_full", "nn2rules_support",
                "tree_leaves", "trepan_leaves", "network_accuracy"]
CURVE_HEADER = ["percent", "num_rules", "fidelity", "accuracy"]


def step_evaluate(name: str, net, rules, schema, train_set, test_set, cfg: RunConfig, out: Path):
    if not len(test_set):
        raise UsageError("evaluation needs a non-empty test split")
    tcfg = TreeConfig(**cfg.tree) if cfg.tree else TreeConfig()
    ordered = support_ordered(rules, train_set)
    support = ordered.nonzero()
    tree = train_tree_on(train_set, tcfg)
    surrogate = trepan_lite(net, train_set, tcfg)
    (out / "tree.txt").write_text(tree.to_text(schema))
    (out / "trepan.txt").write_text(surrogate.to_text(schema))
    save_rule_list(support.as_rule_list(), out / "rules_support.txt", support.supports[np.argsort(support.lo)])

    methods = [("decision_tree", tree, tree.num_positive_leaves()),
               ("trepan", surrogate, surrogate.num_positive_leaves()),
               ("nn2rules_full", rules, int(rules.labels.sum())),
               ("nn2rules_support", support, len(support))]
    rows = []
    for method, model, count in methods:
        esf, empty = error_set_fidelity(model, net, test_set)
        rows.append([name, method, fmt(fidelity(model, net, test_set.X, schema)), fmt(accuracy(model, test_set)),
                     fmt(esf), int(empty), count])
    write_csv(out / "metrics.csv", METRIC_HEADER, rows)

    net_acc = accuracy(NetworkClassifier(net, schema), test_set)
    counts = [name, num_rules_max(schema), num_rules_memorization(train_set), int(rules.labels.sum()),
              len(support), tree.num_leaves(), surrogate.num_leaves(), fmt(net_acc)]
    write_csv(out / "rule_counts.csv", COUNT_HEADER, [counts])

    steps = np.arange(0.0, 100.0 + 1e-9, cfg.curve_step)
    if steps[-1] != 100.0:
        steps = np.append(steps, 100.0)
    curve = tradeoff_curve(ordered, net, test_set, steps)
    write_csv(out / "curve.csv", CURVE_HEADER,
              [[f"{p.percent:g}", p.num_rules, fmt(p.fidelity), fmt(p.accuracy)] for p in curve])
    return rows, counts, curve


# ---------------------------------------------------------------------------
# commands


def cmd_train(args) -> int:
    cfg = config_from(args, "train")
    schema = load_schema(require_file(cfg.schema, "schema"))
    train_set, test_set, edges = load_data(cfg, schema)
    out = out_dir(cfg)
    _, summary = step_train(cfg, schema, train_set, test_set, edges, out)
    write_json(out / f"{cfg.command}_manifest.json", {"config": asdict(cfg), "result": summary})
    print(f"weights: {out / 'weights.json'}  test accuracy: {summary['test_accuracy']}")
    return 0


def cmd_extract(args) -> int:
    cfg = config_from(args, "extract")
    schema = load_schema(require_file(cfg.schema, "schema"))
    net = load_weights(require_file(cfg.weights, "weights"), schema)
    train_set = load_data(cfg, schema)[0] if cfg.data else None
    out = out_dir(cfg)
    _, summary = step_extract(net, schema, train_set, out)
    write_json(out / f"{cfg.command}_manifest.json", {"config": asdict(cfg), "result": summary})
    print(f"rules: {out / 'rules.txt'}  {summary['positive_rules']} class-1 rules "
          f"of {summary['entries']} entries (num rules max {summary['num_rules_max']})")
    return 0


def cmd_verify(args) -> int:
    cfg = config_from(args, "verify")
    schema = load_schema(require_file(cfg.schema, "schema"))
    net = load_weights(require_file(cfg.weights, "weights"), schema)
    rules, _ = load_rule_list(require_file(cfg.rules, "rules"), schema)
    out = out_dir(cfg)
    try:
        res = step_verify(rules, net, schema, cfg, out)
    except VerificationCapExceeded as e:
        raise UsageError(str(e))
    write_json(out / f"{cfg.command}_manifest.json", {"config": asdict(cfg)})
    if res.passed:
        print(f"PASS: {res.checked} assignments, 0 mismatches")
        return 0
    print(f"FAIL: {res.mismatches} mismatches of {res.checked}; see {out / 'counterexamples.txt'}")
    return 1


def cmd_evaluate(args) -> int:
    cfg = config_from(args, "evaluate")
    schema = load_schema(require_file(cfg.schema, "schema"))
    net = load_weights(require_file(cfg.weights, "weights"), schema)
    train_set, test_set, _ = load_data(cfg, schema)
    rules = load_rule_list(require_file(cfg.rules, "rules"), schema)[0] if cfg.rules else extract(net, schema)
    out = out_dir(cfg)
    name = args.dataset or Path(cfg.data).stem
    rows, _, _ = step_evaluate(name, net, rules, schema, train_set, test_set, cfg, out)
    write_json(out / f"{cfg.command}_manifest.json", {"config": asdict(cfg)})
    for r in rows:
        print(f"{r[1]:<18} fidelity {r[2]}  accuracy {r[3]}  error-set fidelity {r[4]}  rules {r[6]}")
    return 0


def cmd_reproduce(args) -> int:
    names = [n.strip() for n in args.datasets.split(",") if n.strip()]
    for n in names:
        if n not in BENCHMARKS:
            raise UsageError(f"unknown dataset {n!r}; choose from {', '.join(BENCHMARKS)}")
    root = Path(args.out)
    metrics, counts, status = [], [], 0
    for name in names:
        args.dataset = name
        for k in ("schema", "data", "label", "positive_class", "bins"):
            setattr(args, k, None)
        args.out = str(root / name)
        cfg = config_from(args, "reproduce")
        log.info("== %s", name)
        schema = load_schema(require_file(cfg.schema, "schema"))
        train_set, test_set, edges = load_data(cfg, schema)
        out = out_dir(cfg)
        net, summary = step_train(cfg, schema, train_set, test_set, edges, out)
        rules, ex = step_extract(net, schema, train_set, out)
        res = step_verify(rules, net, schema, cfg, out)
        status |= 0 if res.passed else 1
        rows, cnt, _ = step_evaluate(name, net, rules, schema, train_set, test_set, cfg, out)
        write_json(out / f"{cfg.command}_manifest.json", {"config": asdict(cfg), "result": {**summary, **ex,
                                                                              "verified": res.passed}})
        metrics += rows
        counts.append(cnt)
    write_csv(root / "metrics.csv", METRIC_HEADER, metrics)
    write_csv(root / "rule_counts.csv", COUNT_HEADER, counts)
    (root / "report.md").write_text(render_report(metrics, counts))
    print((root / "report.md").read_text())
    return status


def render_report(metrics, counts) -> str:
    lines = ["# Reproduction report", "", "| dataset | method | fidelity | accuracy | error-set fidelity | rules |",
             "|---|---|---|---|---|---|"]
    lines += [f"| {r[0]} | {r[1]} | {r[2]} | {r[3]} | {r[4]} | {r[6]} |" for r in metrics]
    lines += ["", "| " + " | ".join(COUNT_HEADER) + " |", "|" + "---|" * len(COUNT_HEADER)]
    lines += ["| " + " | ".join(str(c) for c in row) + " |" for row in counts]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nn2rules", description="Exact rule lists from ReLU networks.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def schema_args(sp, data=True):
        sp.add_argument("--dataset", help=f"bundled dataset ({', '.join(BENCHMARKS)}); fills the paths below")
        sp.add_argument("--data-root", help="directory holding the bundled datasets")
        sp.add_argument("--schema")
        if data:
            sp.add_argument("--data", help="CSV with a header row")
            sp.add_argument("--label", help="label column")
            sp.add_argument("--positive-class", help="label value meaning 1 (default: labels are 0/1)")
            sp.add_argument("--bins", help="binning spec for numeric columns")
            sp.add_argument("--test-fraction", type=float, default=0.2)
            sp.add_argument("--split-seed", type=int, default=42)
        sp.add_argument("--out", default=".", help="output directory")

    def train_args(sp):
        d = TrainConfig()
        sp.add_argument("--widths", default=",".join(map(str, d.hidden)))
        sp.add_argument("--seed", type=int, default=d.seed)
        sp.add_argument("--epochs", type=int, default=d.epochs)
        sp.add_argument("--lr", type=float, default=d.learning_rate)
        sp.add_argument("--batch-size", type=int, default=d.batch_size)

    def verify_args(sp):
        sp.add_argument("--cap", type=int, default=DEFAULT_CAP, help="largest space checked exhaustively")
        sp.add_argument("--sample", type=int, help="check this many random assignments when over the cap")

    def eval_args(sp):
        d = TreeConfig()
        sp.add_argument("--max-depth", type=int, default=d.max_depth, help="tree depth limit; -1 for none")
        sp.add_argument("--min-leaf", type=int, default=d.min_leaf)
        sp.add_argument("--curve-step", type=float, default=5.0, help="tradeoff curve resolution in percent")

    sp = sub.add_parser("train", help="train a network")
    schema_args(sp)
    train_args(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("extract", help="extract the rule list of a network")
    schema_args(sp)
    sp.add_argument("--weights")
    sp.set_defaults(func=cmd_extract)

    sp = sub.add_parser("verify", help="check a rule list against a network on every assignment")
    schema_args(sp, data=False)
    sp.add_argument("--weights")
    sp.add_argument("--rules")
    verify_args(sp)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("evaluate", help="fidelity, accuracy, rule counts and tradeoff curve")
    schema_args(sp)
    sp.add_argument("--weights")
    sp.add_argument("--rules", help="rule list file (default: extract from --weights)")
    eval_args(sp)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("reproduce", help="train, extract, verify and evaluate the bundled datasets")
    sp.add_argument("--datasets", default=",".join(BENCHMARKS))
    sp.add_argument("--data-root")
    sp.add_argument("--out", default="reproduction")
    sp.add_argument("--test-fraction", type=float, default=0.2)
    sp.add_argument("--split-seed", type=int, default=42)
    train_args(sp)
    verify_args(sp)
    eval_args(sp)
    sp.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, RuleListError, OSError, ValueError, KeyError) as e:
        # schema, data, weight and rule-file errors are all ValueErrors
        print(f"error: {e}", file=sys.stderr)
        return 2
    except TrainingDiverged as e:
        print(f"error: training diverged: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

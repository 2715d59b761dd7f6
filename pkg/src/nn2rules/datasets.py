"""Registry of the bundled benchmark datasets under ``data/``."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .schema import Dataset, FeatureSchema, load_binning_spec, load_schema, load_split

DATA_ROOT = Path(__file__).resolve().parents[2] / "data"


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    label: str
    positive: str | None = None
    numeric: bool = False  # ships a .bins file
    synthetic_labels: bool = False

    def directory(self, root: Path | None = None) -> Path:
        return Path(root or DATA_ROOT) / self.name

    def schema_path(self, root=None) -> Path:
        return self.directory(root) / f"{self.name}.schema"

    def csv_path(self, root=None) -> Path:
        return self.directory(root) / f"{self.name}.csv"

    def bins_path(self, root=None) -> Path | None:
        return self.directory(root) / f"{self.name}.bins" if self.numeric else None


BENCHMARKS = {
    "adult": DatasetSpec("adult", "income", positive=">50K", numeric=True),
    "contraception": DatasetSpec("contraception", "contraceptive_use", numeric=True),
    "nursery": DatasetSpec("nursery", "admitted", synthetic_labels=True),
    "cars": DatasetSpec("cars", "acceptable", synthetic_labels=True),
}


def load_benchmark(name: str, *, test_fraction: float = 0.2, seed: int = 42,
                   root: Path | None = None) -> tuple[FeatureSchema, Dataset, Dataset, dict]:
    spec = BENCHMARKS[name]
    schema = load_schema(spec.schema_path(root))
    binning = load_binning_spec(spec.bins_path(root)) if spec.numeric else {}
    train, test, edges = load_split(spec.csv_path(root), schema, spec.label, positive=spec.positive,
                                    binning=binning, test_fraction=test_fraction, seed=seed)
    return schema, train, test, edges

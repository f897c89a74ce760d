"""Simulation database: generation, CSV persistence, splitting, statistics.

A database pairs grid-sampled thickness vectors with their evaluated
objectives.  It is written as a CSV (header t1..tN,ea_ss,ea_f,mass,pcf with
full-precision decimal floats) plus a sidecar JSON carrying the design space
and provenance, so a load reproduces the save exactly.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .design_space import ArityError, DesignSpace, ThicknessVector
from .fileio import atomic_write_text
from .oracle import ObjectiveTriple, OracleConfig, evaluate

OUTPUT_NAMES = ("ea_ss", "ea_f", "mass")


class DatasetError(ValueError):
    """Malformed database file or degenerate data."""


@dataclass(frozen=True)
class SimulationRecord:
    t: ThicknessVector
    objectives: ObjectiveTriple


@dataclass(frozen=True)
class Database:
    space: DesignSpace
    records: tuple[SimulationRecord, ...]
    provenance: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.records)

    def thickness_matrix(self) -> np.ndarray:
        return np.array([r.t.values for r in self.records], dtype=float)

    def output_matrix(self) -> np.ndarray:
        """Rows of (ea_ss, ea_f, mass)."""
        return np.array(
            [[r.objectives.ea_ss, r.objectives.ea_f, r.objectives.mass] for r in self.records]
        )


def generate(space: DesignSpace, oracle_config: OracleConfig, n: int, seed) -> Database:
    """Evaluate ``n`` uniform grid samples; deterministic for a fixed seed."""
    if n <= 0:
        raise ValueError(f"n must be positive, got {n}")
    rng = np.random.default_rng(seed)
    samples = [space.random_grid_sample(rng) for _ in range(n)]
    records = tuple(SimulationRecord(t, evaluate(oracle_config, t)) for t in samples)
    provenance = {"source": "synthetic", "seed": seed, "timestamp": None}
    return Database(space, records, provenance)


def _meta_path(path) -> Path:
    p = Path(path)
    return p.with_name(p.name + ".meta.json")


def save_csv(db: Database, path):
    """Write records plus the sidecar; floats keep full round-trip precision.

    Both files are written atomically (temp file + rename).
    """
    path = Path(path)
    header = list(db.space.names) + ["ea_ss", "ea_f", "mass", "pcf"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for r in db.records:
        o = r.objectives
        pcf = "" if o.pcf is None else repr(o.pcf)
        writer.writerow(
            [repr(v) for v in r.t.values] + [repr(o.ea_ss), repr(o.ea_f), repr(o.mass), pcf]
        )
    atomic_write_text(path, buf.getvalue())
    meta = json.dumps({"space": db.space.to_json_obj(), "provenance": db.provenance}, indent=2)
    atomic_write_text(_meta_path(path), meta + "\n")


def load_csv(path, space: DesignSpace | None = None) -> Database:
    """Load a database; the design space comes from the sidecar unless given."""
    path = Path(path)
    provenance = {}
    if space is None:
        meta = _meta_path(path)
        if not meta.exists():
            raise DatasetError(f"missing sidecar {meta}; pass the design space explicitly")
        with open(meta, encoding="utf-8") as f:
            obj = json.load(f)
        space = DesignSpace.from_json_obj(obj["space"])
        provenance = obj.get("provenance", {})

    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: no records (empty file)") from None
        expected = list(space.names) + ["ea_ss", "ea_f", "mass", "pcf"]
        missing = [c for c in expected if c not in header]
        if missing:
            raise DatasetError(f"{path}: missing column(s) {', '.join(missing)}")
        col = {name: header.index(name) for name in expected}
        records = []
        for lineno, row in enumerate(reader, start=2):
            try:
                t = ThicknessVector.of(row[col[name]] for name in space.names)
                pcf_raw = row[col["pcf"]]
                triple = ObjectiveTriple(
                    float(row[col["ea_ss"]]),
                    float(row[col["ea_f"]]),
                    float(row[col["mass"]]),
                    None if pcf_raw == "" else float(pcf_raw),
                )
            except (IndexError, ValueError) as exc:
                raise DatasetError(f"{path}: malformed row at line {lineno}: {exc}") from exc
            if len(t) != len(space):
                raise DatasetError(f"{path}: arity mismatch at line {lineno}")
            records.append(SimulationRecord(t, triple))
    if not records:
        raise DatasetError(f"{path}: no records")
    return Database(space, tuple(records), provenance)


def split(db: Database, fraction: float, seed) -> tuple[Database, Database]:
    """Seeded shuffle into disjoint train/test parts; |train| = round(f*n)."""
    if not 0 < fraction < 1:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(db.records))
    n_train = int(round(fraction * len(db.records)))
    train_idx, test_idx = order[:n_train], order[n_train:]
    prov = dict(db.provenance)
    train = Database(db.space, tuple(db.records[i] for i in train_idx), {**prov, "split": "train"})
    test = Database(db.space, tuple(db.records[i] for i in test_idx), {**prov, "split": "test"})
    return train, test


@dataclass(frozen=True)
class StandardizationStats:
    """Per-output z-score statistics for (ea_ss, ea_f, mass)."""

    mean: tuple[float, ...]
    std: tuple[float, ...]

    def __post_init__(self):
        if any(s <= 0 for s in self.std):
            raise DatasetError("standardization requires positive std for every output")

    def apply(self, y) -> np.ndarray:
        return (np.asarray(y, dtype=float) - np.asarray(self.mean)) / np.asarray(self.std)

    def invert(self, z) -> np.ndarray:
        return np.asarray(z, dtype=float) * np.asarray(self.std) + np.asarray(self.mean)

    def to_json_obj(self) -> dict:
        return {"mean": list(self.mean), "std": list(self.std)}

    @classmethod
    def from_json_obj(cls, obj) -> "StandardizationStats":
        return cls(tuple(obj["mean"]), tuple(obj["std"]))


def fit_standardizer(train: Database) -> StandardizationStats:
    """Population mean/std of the three outputs over the training records."""
    if len(train) < 2:
        raise DatasetError("need at least 2 records to fit a standardizer")
    y = train.output_matrix()
    mean = y.mean(axis=0)
    std = y.std(axis=0)
    for name, s in zip(OUTPUT_NAMES, std):
        if s == 0:
            raise DatasetError(f"output {name} has zero variance; cannot standardize")
    return StandardizationStats(tuple(mean), tuple(std))


def correlation_matrix(db: Database) -> tuple[list[str], np.ndarray]:
    """Pearson correlations over (t1..tN, ea_ss, ea_f, mass).

    Zero-variance columns get NaN entries (undefined) without poisoning the
    rest of the matrix; the diagonal stays 1.
    """
    if len(db) < 3:
        raise DatasetError("need at least 3 records for a correlation matrix")
    cols = np.hstack([db.thickness_matrix(), db.output_matrix()])
    names = list(db.space.names) + list(OUTPUT_NAMES)
    centered = cols - cols.mean(axis=0)
    norms = np.sqrt((centered**2).sum(axis=0))
    k = cols.shape[1]
    out = np.full((k, k), np.nan)
    for i in range(k):
        out[i, i] = 1.0
        for j in range(i + 1, k):
            if norms[i] > 0 and norms[j] > 0:
                r = float(centered[:, i] @ centered[:, j] / (norms[i] * norms[j]))
                out[i, j] = out[j, i] = min(1.0, max(-1.0, r))
    return names, out

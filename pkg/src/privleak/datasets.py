"""CSV ingestion: column roles, one-hot encoding and standardisation."""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Dataset
from .errors import ConfigError, CsvParseError

__all__ = ["CsvSchema", "LoadedCsv", "load_csv", "train_test_split"]

ROLES = ("feature", "target-attribute", "response", "ignore")
MISSING = ("", "na", "nan", "null", "?")


@dataclass(frozen=True)
class CsvSchema:
    """How to read each column.

    Attributes:
        roles: column name to role; unlisted columns take ``default_role``.
        categorical: feature columns to one-hot encode (one indicator per level).
        standardize: scale numeric features to zero mean and unit variance.
        response_type: ``real`` or ``categorical`` (labels become 0..L-1 in sorted order).
    """

    roles: dict
    categorical: tuple = ()
    standardize: bool = True
    response_type: str = "real"
    default_role: str = "feature"
    missing_tokens: tuple = MISSING

    def __post_init__(self):
        problems = [f"column {c!r} has unknown role {r!r}" for c, r in self.roles.items() if r not in ROLES]
        n_resp = sum(r == "response" for r in self.roles.values())
        n_target = sum(r == "target-attribute" for r in self.roles.values())
        if n_resp != 1:
            problems.append(f"exactly one response column required, found {n_resp}")
        if n_target > 1:
            problems.append(f"at most one target-attribute column allowed, found {n_target}")
        if self.default_role not in ("feature", "ignore"):
            problems.append("default_role must be feature or ignore")
        if self.response_type not in ("real", "categorical"):
            problems.append("response_type must be real or categorical")
        if problems:
            raise ConfigError(problems)
        object.__setattr__(self, "categorical", tuple(self.categorical))

    @classmethod
    def from_dict(cls, d: dict) -> "CsvSchema":
        return cls(
            roles=dict(d["roles"]),
            categorical=tuple(d.get("categorical", ())),
            standardize=bool(d.get("standardize", True)),
            response_type=d.get("response_type", "real"),
            default_role=d.get("default_role", "feature"),
        )

    @classmethod
    def from_json(cls, path) -> "CsvSchema":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def role(self, column: str) -> str:
        return self.roles.get(column, self.default_role)


@dataclass
class LoadedCsv:
    dataset: Dataset
    feature_names: list
    stats: dict
    dropped_rows: int
    targets: tuple | None = None
    labels: tuple | None = None


def _is_missing(cell: str, tokens) -> bool:
    return cell.strip().lower() in tokens


def load_csv(path, schema: CsvSchema, quiet: bool = False) -> LoadedCsv:
    """Read ``path`` into a :class:`Dataset` following ``schema``.

    Rows with a missing value in any used column are dropped with a warning.
    Unparseable numeric cells raise :class:`CsvParseError` naming the line.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise CsvParseError(f"{path}: empty file, expected a header row") from None
        unknown = [c for c in schema.roles if c not in header]
        if unknown:
            raise ConfigError([f"schema names column {c!r} absent from header" for c in unknown])
        used = [c for c in header if schema.role(c) != "ignore"]
        col = {c: header.index(c) for c in used}
        rows, lines, dropped = [], [], 0
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise CsvParseError(f"{path}:{line_no}: expected {len(header)} fields, found {len(row)}")
            cells = {c: row[col[c]].strip() for c in used}
            if any(_is_missing(v, schema.missing_tokens) for v in cells.values()):
                dropped += 1
                continue
            rows.append(cells)
            lines.append(line_no)
    if dropped and not quiet:
        warnings.warn(f"{path}: dropped {dropped} rows with missing values", stacklevel=2)
    if not rows:
        raise CsvParseError(f"{path}: no complete rows")

    def numeric(c):
        out = np.empty(len(rows))
        for i, r in enumerate(rows):
            try:
                out[i] = float(r[c])
            except ValueError:
                raise CsvParseError(f"{path}:{lines[i]}: column {c!r} value {r[c]!r} is not numeric") from None
            if not math.isfinite(out[i]):
                raise CsvParseError(f"{path}:{lines[i]}: column {c!r} value {r[c]!r} is not finite")
        return out

    blocks, names, stats = [], [], {}
    for c in used:
        if schema.role(c) != "feature":
            continue
        if c in schema.categorical:
            levels = sorted({r[c] for r in rows})
            ind = np.array([[r[c] == lv for lv in levels] for r in rows], dtype=float)
            blocks.append(ind)
            names += [f"{c}={lv}" for lv in levels]
            stats[c] = {"kind": "categorical", "levels": levels, "counts": ind.sum(axis=0).astype(int).tolist()}
        else:
            x = numeric(c)
            mean, std = float(x.mean()), float(x.std())
            stats[c] = {"kind": "numeric", "mean": mean, "std": std, "min": float(x.min()), "max": float(x.max())}
            if schema.standardize:
                x = x - mean
                if std > 0:
                    x = x / std
                elif not quiet:
                    warnings.warn(f"column {c!r} is constant; centred but not scaled", stacklevel=2)
            blocks.append(x[:, None])
            names.append(c)
    V = np.hstack(blocks) if blocks else np.zeros((len(rows), 0))

    resp = next(c for c in used if schema.role(c) == "response")
    labels = None
    if schema.response_type == "categorical":
        labels = tuple(sorted({r[resp] for r in rows}))
        y = np.array([labels.index(r[resp]) for r in rows])
        stats[resp] = {"kind": "response", "levels": list(labels)}
    else:
        y = numeric(resp)
        stats[resp] = {"kind": "response", "mean": float(y.mean()), "std": float(y.std())}

    targets, t = None, None
    tcol = next((c for c in used if schema.role(c) == "target-attribute"), None)
    if tcol is not None:
        targets = tuple(sorted({r[tcol] for r in rows}))
        t = np.array([targets.index(r[tcol]) for r in rows])
        stats[tcol] = {"kind": "target-attribute", "levels": list(targets), "counts": np.bincount(t).tolist()}

    ds = Dataset(V, y, t, targets, schema.response_type, "csv")
    return LoadedCsv(ds, names, stats, dropped, targets, labels)


def train_test_split(ds: Dataset, fraction: float, rng: np.random.Generator) -> tuple[Dataset, Dataset]:
    """Random split with ``round(fraction * n)`` training rows (75-25 by default in the CLI)."""
    if not 0 < fraction < 1:
        raise ConfigError("train fraction must lie strictly between 0 and 1")
    perm = rng.permutation(ds.n)
    cut = int(round(fraction * ds.n))
    return ds.subset(np.sort(perm[:cut])), ds.subset(np.sort(perm[cut:]))

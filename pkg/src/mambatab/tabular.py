"""CSV ingestion, encoding, scaling, splits, and feature-subset plans.

Columns are typed automatically: anything that parses entirely as
numbers is numerical, everything else (including binary yes/no style
columns) is categorical and gets an ordinal code. Missing cells are
imputed with the column mode, then every column is min-max scaled to
[0, 1] using statistics fitted on the training split only.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

MISSING_TOKENS = {"", "?"}


class SchemaError(ValueError):
    """Dataset shape or schema does not match what was fitted or declared."""


@dataclass
class SchemaConfig:
    """Declares the label column and, optionally, forced column kinds.

    An empty ``label_column`` means the last CSV column is the label.
    """

    label_column: str
    positive_label: str
    kinds: dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_file(cls, path) -> "SchemaConfig":
        values = read_kv_file(path)
        if "positive_label" not in values:
            raise SchemaError(f"schema file {path} missing 'positive_label'")
        kinds = {}
        for key, val in values.items():
            if key.startswith("kind."):
                if val not in ("categorical", "numerical"):
                    raise SchemaError(f"unknown column kind '{val}' for {key}")
                kinds[key[len("kind."):]] = val
        return cls(values.get("label_column", ""), values["positive_label"], kinds)


def read_kv_file(path) -> dict[str, str]:
    """Parse a plain ``key = value`` text file; '#' starts a comment line."""
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise SchemaError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, _, val = line.partition("=")
            values[key.strip()] = val.strip()
    return values


@dataclass
class Table:
    """Raw tabular data: per-column cell vectors plus binary labels."""

    column_names: list[str]
    columns: list[list]          # cells are str | float | None
    labels: np.ndarray           # int array of {0, 1}
    split: str = ""

    def __post_init__(self):
        m = len(self.labels)
        for name, col in zip(self.column_names, self.columns):
            if len(col) != m:
                raise SchemaError(f"column '{name}' has {len(col)} rows, labels have {m}")
        if m and not np.isin(self.labels, (0, 1)).all():
            raise SchemaError("labels must contain only 0 and 1")

    @property
    def n_rows(self) -> int:
        return len(self.labels)

    @property
    def n_features(self) -> int:
        return len(self.columns)

    def select_rows(self, indices, split: str = "") -> "Table":
        indices = list(indices)
        return Table(
            column_names=list(self.column_names),
            columns=[[col[i] for i in indices] for col in self.columns],
            labels=self.labels[indices],
            split=split or self.split,
        )

    def select_columns(self, indices) -> "Table":
        return Table(
            column_names=[self.column_names[j] for j in indices],
            columns=[self.columns[j] for j in indices],
            labels=self.labels,
            split=self.split,
        )


def load_csv(path, schema: SchemaConfig) -> Table:
    """Read a comma-separated file with a header row into a Table.

    Cells equal to '' or '?' are missing. Label cells equal to the
    schema's positive value map to 1, everything else to 0.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if schema.label_column:
            if schema.label_column not in header:
                raise SchemaError(
                    f"{path}: label column '{schema.label_column}' not in header {header}")
            label_idx = header.index(schema.label_column)
        else:
            label_idx = len(header) - 1
        feature_names = [h for i, h in enumerate(header) if i != label_idx]
        columns: list[list] = [[] for _ in feature_names]
        labels: list[int] = []
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaError(f"{path}: row with {len(row)} cells, expected {len(header)}")
            cells = [c.strip() for c in row]
            labels.append(1 if cells[label_idx] == schema.positive_label else 0)
            j = 0
            for i, cell in enumerate(cells):
                if i == label_idx:
                    continue
                columns[j].append(None if cell in MISSING_TOKENS else cell)
                j += 1
    return Table(feature_names, columns, np.asarray(labels, dtype=np.int64))


def _parse_number(cell):
    if cell is None:
        return None
    if isinstance(cell, (int, float)):
        return float(cell)
    try:
        return float(cell)
    except ValueError:
        return None


def infer_column_kinds(table: Table, overrides: dict[str, str] | None = None) -> list[str]:
    """'numerical' when every observed cell parses as a number, else 'categorical'."""
    overrides = overrides or {}
    kinds = []
    for name, col in zip(table.column_names, table.columns):
        if name in overrides:
            kinds.append(overrides[name])
            continue
        observed = [c for c in col if c is not None]
        if not observed:
            raise SchemaError(f"column '{name}' has no observed values")
        numeric = all(_parse_number(c) is not None for c in observed)
        kinds.append("numerical" if numeric else "categorical")
    return kinds


def _mode(values: list) -> object:
    """Most frequent value; ties broken by sorted order."""
    counts: dict = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    best = max(counts.values())
    return sorted(v for v, c in counts.items() if c == best)[0]


@dataclass
class Preprocessor:
    """Fitted per-column encoding state; immutable after fit."""

    column_names: list[str]
    kinds: list[str]
    categories: list[list[str] | None]   # sorted category list per categorical column
    modes: list                           # raw-space mode per column
    mins: list[float]                     # post-encoding minima
    maxs: list[float]

    @property
    def n_features(self) -> int:
        return len(self.column_names)

    def to_dict(self) -> dict:
        return {
            "column_names": self.column_names,
            "kinds": self.kinds,
            "categories": self.categories,
            "modes": self.modes,
            "mins": self.mins,
            "maxs": self.maxs,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Preprocessor":
        return cls(
            column_names=list(d["column_names"]),
            kinds=list(d["kinds"]),
            categories=[list(c) if c is not None else None for c in d["categories"]],
            modes=list(d["modes"]),
            mins=[float(v) for v in d["mins"]],
            maxs=[float(v) for v in d["maxs"]],
        )


@dataclass
class EncodedMatrix:
    """Fully numeric rows scaled into [0, 1], ready for the model."""

    values: np.ndarray           # [m, n] float64
    labels: np.ndarray           # [m] int {0, 1}
    column_names: list[str]
    split: str = ""

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]


def fit(table: Table, overrides: dict[str, str] | None = None) -> Preprocessor:
    """Fit encoding state on the training split only."""
    kinds = infer_column_kinds(table, overrides)
    categories: list = []
    modes: list = []
    mins: list[float] = []
    maxs: list[float] = []
    for name, kind, col in zip(table.column_names, kinds, table.columns):
        observed = [c for c in col if c is not None]
        if not observed:
            raise SchemaError(f"column '{name}' is entirely missing")
        if kind == "categorical":
            as_str = [str(c) for c in observed]
            cats = sorted(set(as_str))
            categories.append(cats)
            modes.append(_mode(as_str))
            mins.append(0.0)
            maxs.append(float(len(cats) - 1))
        else:
            nums = [_parse_number(c) for c in observed]
            if any(v is None for v in nums):
                raise SchemaError(f"column '{name}' declared numerical but has non-numeric cells")
            categories.append(None)
            modes.append(_mode(nums))
            mins.append(float(min(nums)))
            maxs.append(float(max(nums)))
    return Preprocessor(list(table.column_names), kinds, categories, modes, mins, maxs)


def transform(pre: Preprocessor, table: Table) -> EncodedMatrix:
    """Encode and scale a table with fitted state.

    The table's columns may be any subset of the fitted schema (the
    feature-incremental path uses this); unknown names are an error.
    Unseen categories map to the training mode's index, out-of-range
    numericals clip to [0, 1], and constant columns scale to 0.
    """
    m = table.n_rows
    out = np.zeros((m, table.n_features), dtype=np.float64)
    for j, (name, col) in enumerate(zip(table.column_names, table.columns)):
        if name not in pre.column_names:
            raise SchemaError(f"column '{name}' was not present at fit time")
        k = pre.column_names.index(name)
        kind, mode = pre.kinds[k], pre.modes[k]
        lo, hi = pre.mins[k], pre.maxs[k]
        if kind == "categorical":
            cats = pre.categories[k]
            index = {c: i for i, c in enumerate(cats)}
            mode_idx = index[mode]
            codes = np.array(
                [index.get(str(c), mode_idx) if c is not None else mode_idx for c in col],
                dtype=np.float64,
            )
        else:
            parsed = [_parse_number(c) if c is not None else mode for c in col]
            if any(v is None for v in parsed):
                raise SchemaError(f"column '{name}' has non-numeric cells at transform time")
            codes = np.array(parsed, dtype=np.float64)
        if hi > lo:
            out[:, j] = np.clip((codes - lo) / (hi - lo), 0.0, 1.0)
        else:
            out[:, j] = 0.0
    return EncodedMatrix(out, table.labels.copy(), list(table.column_names), table.split)


def split(table: Table, seed: int) -> tuple[Table, Table, Table]:
    """Seeded shuffle into train 70% / validation 10% / test 20%.

    Train and validation sizes round down; the test split takes the
    remaining rows.
    """
    m = table.n_rows
    if m < 10:
        raise ValueError(f"need at least 10 rows to split, got {m}")
    perm = np.random.default_rng(seed).permutation(m)
    n_train = m * 7 // 10   # integer arithmetic: int(m * 0.7) misrounds e.g. m=690
    n_val = m // 10
    train_idx = perm[:n_train]
    val_idx = perm[n_train:n_train + n_val]
    test_idx = perm[n_train + n_val:]
    return (
        table.select_rows(train_idx, split="train"),
        table.select_rows(val_idx, split="val"),
        table.select_rows(test_idx, split="test"),
    )


@dataclass
class FeatureSubsetPlan:
    """Three disjoint column-index groups and their cumulative unions."""

    s1: list[int]
    s2: list[int]
    s3: list[int]

    @property
    def set1(self) -> list[int]:
        return sorted(self.s1)

    @property
    def set2(self) -> list[int]:
        return sorted(self.s1 + self.s2)

    @property
    def set3(self) -> list[int]:
        return sorted(self.s1 + self.s2 + self.s3)

    def cumulative(self) -> list[list[int]]:
        return [self.set1, self.set2, self.set3]


def make_incremental_plan(n_features: int, seed: int) -> FeatureSubsetPlan:
    """Seeded partition into three near-equal disjoint groups.

    Remainder columns go to the earliest groups, e.g. 10 -> 4/3/3.
    """
    if n_features < 3:
        raise ValueError(f"need at least 3 features for an incremental plan, got {n_features}")
    perm = list(np.random.default_rng(seed).permutation(n_features))
    base, rem = divmod(n_features, 3)
    sizes = [base + (1 if i < rem else 0) for i in range(3)]
    s1 = [int(i) for i in perm[:sizes[0]]]
    s2 = [int(i) for i in perm[sizes[0]:sizes[0] + sizes[1]]]
    s3 = [int(i) for i in perm[sizes[0] + sizes[1]:]]
    return FeatureSubsetPlan(s1, s2, s3)

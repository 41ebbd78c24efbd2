"""Loading delimited datasets under a declarative schema config, and splitting.

The config is a TOML document: top-level file/delimiter/header keys, one
``[[column]]`` table per input column, and optional ``[[group_pair]]`` tables
naming the advantaged and disadvantaged level of a sensitive column for
evaluation. Categorical level sets may be declared or inferred; inference
sorts levels lexicographically so encodings are stable across runs.
"""

from __future__ import annotations

import csv
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ParseError, SchemaError
from .metrics import GroupPair
from .tabular import (
    BINARY,
    REAL,
    AttributeColumn,
    Dataset,
    DecisionColumn,
    Schema,
    SensitiveColumn,
)

ROLES = ("sensitive", "attribute", "decision", "ignore")


@dataclass(frozen=True)
class ColumnConfig:
    name: str
    role: str
    # "categorical" | "numeric" for attributes, "binary" | "real" for decisions
    kind: str
    levels: tuple[str, ...] = ()
    positive_label: str = "1"
    correctable: bool = False
    # "none" | "minmax"
    normalize: str = "none"


@dataclass(frozen=True)
class SchemaConfig:
    columns: tuple[ColumnConfig, ...]
    file: str = ""
    delimiter: str = ","
    header: bool = True
    group_pairs: tuple[GroupPair, ...] = ()

    def __post_init__(self) -> None:
        decisions = [c for c in self.columns if c.role == "decision"]
        if len(decisions) != 1:
            raise SchemaError(
                f"config must declare exactly one decision column, got {len(decisions)}"
            )
        if not any(c.role == "sensitive" for c in self.columns):
            raise SchemaError("config must declare at least one sensitive column")
        for c in self.columns:
            if c.role not in ROLES:
                raise SchemaError(f"column {c.name!r}: unknown role {c.role!r}")


def load_schema_config(path: str | Path) -> SchemaConfig:
    """Parse a TOML schema config file."""
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    return schema_config_from_dict(doc)


def schema_config_from_dict(doc: Mapping) -> SchemaConfig:
    columns = []
    for c in doc.get("column", []):
        try:
            columns.append(
                ColumnConfig(
                    name=c["name"],
                    role=c["role"],
                    kind=c.get("kind", "categorical"),
                    levels=tuple(c.get("levels", ())),
                    positive_label=str(c.get("positive_label", "1")),
                    correctable=bool(c.get("correctable", False)),
                    normalize=c.get("normalize", "none"),
                )
            )
        except KeyError as exc:
            raise SchemaError(f"column table missing key {exc.args[0]!r}") from None
    pairs = tuple(
        GroupPair(p["column"], str(p["advantaged"]), str(p["disadvantaged"]))
        for p in doc.get("group_pair", [])
    )
    return SchemaConfig(
        columns=tuple(columns),
        file=doc.get("file", ""),
        delimiter=doc.get("delimiter", ","),
        header=bool(doc.get("header", True)),
        group_pairs=pairs,
    )


def _read_cells(path: str | Path, config: SchemaConfig) -> tuple[list[str], list[list[str]]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=config.delimiter)
        rows = [row for row in reader if row]
    if not rows:
        raise ParseError(f"{path}: file is empty")
    if config.header:
        header, rows = rows[0], rows[1:]
        header = [h.strip() for h in header]
    else:
        header = [c.name for c in config.columns]
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return header, rows


def load(
    config: SchemaConfig,
    path: str | Path | None = None,
    normalization: str = "apply",
) -> Dataset:
    """Load a delimited file into a Dataset with the configured roles.

    ``normalization="apply"`` fits min-max constants on this file and applies
    them (the constants are recorded on the dataset); ``"defer"`` leaves the
    raw values so a split-aware caller can fit constants on the training part
    only. Values in binary decision columns map to 1 when equal to the
    column's positive label.
    """
    if normalization not in ("apply", "defer"):
        raise ValueError(f"unknown normalization mode {normalization!r}")
    path = Path(path) if path is not None else Path(config.file)
    if not str(path):
        raise ParseError("no input file: config has no file and no path given")
    header, rows = _read_cells(path, config)

    positions = {}
    for c in config.columns:
        if c.role == "ignore":
            continue
        if c.name not in header:
            # scoring-only files may omit the decision column
            if c.role == "decision":
                continue
            raise ParseError(f"{path}: column {c.name!r} not found in header {header}")
        positions[c.name] = header.index(c.name)

    raw: dict[str, list[str]] = {name: [] for name in positions}
    for i, row in enumerate(rows):
        for name, j in positions.items():
            if j >= len(row):
                raise ParseError(f"{path}: row {i + 1} has no column {name!r}")
            raw[name].append(row[j].strip())

    columns: dict[str, np.ndarray] = {}
    sensitive = []
    attributes = []
    decision = None
    for c in config.columns:
        if c.role == "ignore":
            continue
        if c.role == "decision" and c.name not in raw:
            decision = DecisionColumn(c.name, c.kind)
            continue
        cells = raw[c.name]
        if c.role == "decision":
            if c.kind == BINARY:
                columns[c.name] = _parse_binary(cells, c, path)
            elif c.kind == REAL:
                columns[c.name] = _parse_numeric(cells, c.name, path)
            else:
                raise SchemaError(f"decision column kind must be binary or real")
            decision = DecisionColumn(c.name, c.kind)
        elif c.role == "sensitive":
            levels = c.levels or _inferred_levels(cells)
            _check_declared(cells, levels, c.name, path)
            sensitive.append(SensitiveColumn(c.name, levels))
            columns[c.name] = np.array(cells)
        else:
            if c.kind == "numeric":
                columns[c.name] = _parse_numeric(cells, c.name, path)
                attributes.append(
                    AttributeColumn(c.name, "numeric", (), c.correctable)
                )
            else:
                levels = c.levels or _inferred_levels(cells)
                _check_declared(cells, levels, c.name, path)
                attributes.append(AttributeColumn(c.name, "categorical", levels))
                columns[c.name] = np.array(cells)

    schema = Schema(tuple(sensitive), tuple(attributes), decision)
    data = Dataset(schema, columns)
    if normalization == "apply":
        constants = fit_normalization(data, config)
        data = apply_normalization(data, constants)
    return data


def _inferred_levels(cells: Sequence[str]) -> tuple[str, ...]:
    return tuple(sorted(set(cells)))


def _check_declared(
    cells: Sequence[str], levels: tuple[str, ...], name: str, path
) -> None:
    declared = set(levels)
    for i, v in enumerate(cells):
        if v not in declared:
            raise ParseError(
                f"{path}: row {i + 1}, column {name!r}: "
                f"value {v!r} is not a declared level"
            )


def _parse_numeric(cells: Sequence[str], name: str, path) -> np.ndarray:
    out = np.empty(len(cells))
    for i, v in enumerate(cells):
        try:
            out[i] = float(v)
        except ValueError:
            raise ParseError(
                f"{path}: row {i + 1}, column {name!r}: "
                f"cannot parse {v!r} as a number"
            ) from None
        if not np.isfinite(out[i]):
            raise ParseError(
                f"{path}: row {i + 1}, column {name!r}: non-finite value {v!r}"
            )
    return out


def _parse_binary(cells: Sequence[str], c: ColumnConfig, path) -> np.ndarray:
    return np.array([1.0 if v == c.positive_label else 0.0 for v in cells])


def fit_normalization(
    data: Dataset, config: SchemaConfig
) -> dict[str, tuple[float, float]]:
    """Min-max constants for every column the config marks normalize="minmax"."""
    constants = {}
    for c in config.columns:
        if c.role == "attribute" and c.kind == "numeric" and c.normalize == "minmax":
            col = data.columns[c.name]
            constants[c.name] = (float(col.min()), float(col.max()))
        elif c.normalize not in ("none", "minmax"):
            raise SchemaError(f"unknown normalize directive {c.normalize!r}")
    return constants


def apply_normalization(
    data: Dataset, constants: Mapping[str, tuple[float, float]]
) -> Dataset:
    """Rescale columns to (x - lo) / (hi - lo); constant columns map to 0."""
    if not constants:
        return data
    columns = dict(data.columns)
    for name, (lo, hi) in constants.items():
        col = np.asarray(columns[name], dtype=float)
        span = hi - lo
        columns[name] = (col - lo) / span if span > 0 else np.zeros_like(col)
    merged = dict(data.normalization)
    merged.update({k: (float(v[0]), float(v[1])) for k, v in constants.items()})
    return Dataset(data.schema, columns, merged)


def split(data: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded shuffle split into floor(n * fraction) training rows and the rest."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train fraction must be in (0, 1), got {train_fraction}")
    if data.n_rows == 0:
        raise ValueError("cannot split an empty dataset")
    rng = np.random.default_rng(seed)
    order = rng.permutation(data.n_rows)
    n_train = int(np.floor(data.n_rows * train_fraction))
    return data.subset(order[:n_train]), data.subset(order[n_train:])


def load_train_test(
    config: SchemaConfig,
    train_fraction: float,
    seed: int,
    path: str | Path | None = None,
) -> tuple[Dataset, Dataset]:
    """Load raw, split, then min-max normalize with train-only constants.

    Fitting the constants on the training part alone keeps the test rows from
    leaking into the preprocessing.
    """
    raw = load(config, path, normalization="defer")
    train, test = split(raw, train_fraction, seed)
    constants = fit_normalization(train, config)
    return apply_normalization(train, constants), apply_normalization(test, constants)


def default_group_pairs(schema: Schema) -> tuple[GroupPair, ...]:
    """One pair per sensitive column: last declared level vs first."""
    return tuple(
        GroupPair(c.name, c.levels[-1], c.levels[0]) for c in schema.sensitive
    )


def format_float(x: float) -> str:
    """Full-precision decimal text that round-trips float64 exactly."""
    return repr(float(x))


def write_csv(data: Dataset, path: str | Path) -> None:
    """Write the canonical CSV form: header row, '.'-decimal full precision."""
    names = [n for n in data.schema.column_names if n in data.columns]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for i in range(data.n_rows):
            writer.writerow([_cell(data, name, i) for name in names])


def _cell(data: Dataset, name: str, i: int) -> str:
    col = data.columns[name]
    if col.dtype.kind == "f":
        if name == data.schema.decision.name and data.schema.decision.kind == BINARY:
            return str(int(col[i]))
        return format_float(float(col[i]))
    return str(col[i])


def write_jsonl(data: Dataset, path: str | Path) -> None:
    """One JSON object per row, columns in schema order."""
    names = [n for n in data.schema.column_names if n in data.columns]
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(data.n_rows):
            row = {}
            for name in names:
                col = data.columns[name]
                row[name] = float(col[i]) if col.dtype.kind == "f" else str(col[i])
            fh.write(json.dumps(row) + "\n")


def simulated_config() -> SchemaConfig:
    """Schema config matching the synthetic admissions generator's CSV output."""
    return schema_config_from_dict(
        {
            "delimiter": ",",
            "header": True,
            "column": [
                {"name": "sex", "role": "sensitive", "kind": "categorical",
                 "levels": ["f", "m"]},
                {"name": "score", "role": "attribute", "kind": "numeric",
                 "correctable": True},
                {"name": "admit", "role": "decision", "kind": "binary",
                 "positive_label": "1"},
            ],
            "group_pair": [
                {"column": "sex", "advantaged": "m", "disadvantaged": "f"}
            ],
        }
    )

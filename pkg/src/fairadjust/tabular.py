"""Tabular data model: column schema, immutable datasets, and feature encoding.

A schema designates three column roles. Sensitive columns are categorical
protected characteristics. Attribute columns are the remaining covariates,
numeric or categorical; a numeric attribute may additionally be flagged
"correctable", meaning downstream counterfactual adjustment is allowed to
rewrite it. The decision column is binary (stored as 0/1) or real-valued.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import SchemaError, UnknownLevelError

BINARY = "binary"
REAL = "real"


@dataclass(frozen=True)
class SensitiveColumn:
    name: str
    levels: tuple[str, ...]


@dataclass(frozen=True)
class AttributeColumn:
    name: str
    # "numeric" or "categorical"
    kind: str = "numeric"
    levels: tuple[str, ...] = ()
    correctable: bool = False


@dataclass(frozen=True)
class DecisionColumn:
    name: str
    # BINARY or REAL
    kind: str = BINARY


@dataclass(frozen=True)
class Schema:
    """Column roles and level sets shared by every component of a pipeline."""

    sensitive: tuple[SensitiveColumn, ...]
    attributes: tuple[AttributeColumn, ...]
    decision: DecisionColumn

    def __post_init__(self) -> None:
        names = (
            [c.name for c in self.sensitive]
            + [c.name for c in self.attributes]
            + [self.decision.name]
        )
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate column names in schema: {names}")
        if not self.sensitive:
            raise SchemaError("schema needs at least one sensitive column")
        for col in self.sensitive:
            if len(set(col.levels)) < 2:
                raise SchemaError(f"column {col.name!r} needs >= 2 distinct levels")
        for col in self.attributes:
            if col.kind == "categorical":
                if len(set(col.levels)) < 2:
                    raise SchemaError(f"column {col.name!r} needs >= 2 distinct levels")
                if col.correctable:
                    raise SchemaError(
                        f"correctable column {col.name!r} must be numeric"
                    )
            elif col.kind != "numeric":
                raise SchemaError(f"unknown attribute kind {col.kind!r}")
        if self.decision.kind not in (BINARY, REAL):
            raise SchemaError(f"unknown decision kind {self.decision.kind!r}")

    @property
    def sensitive_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.sensitive)

    @property
    def attribute_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.attributes)

    @property
    def correctable_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.attributes if c.correctable)

    @property
    def column_names(self) -> tuple[str, ...]:
        return self.sensitive_names + self.attribute_names + (self.decision.name,)

    def sensitive_column(self, name: str) -> SensitiveColumn:
        for col in self.sensitive:
            if col.name == name:
                return col
        raise SchemaError(f"{name!r} is not a sensitive column")

    def to_dict(self) -> dict:
        return {
            "sensitive": [
                {"name": c.name, "levels": list(c.levels)} for c in self.sensitive
            ],
            "attributes": [
                {
                    "name": c.name,
                    "kind": c.kind,
                    "levels": list(c.levels),
                    "correctable": c.correctable,
                }
                for c in self.attributes
            ],
            "decision": {"name": self.decision.name, "kind": self.decision.kind},
        }

    @staticmethod
    def from_dict(doc: Mapping) -> "Schema":
        return Schema(
            sensitive=tuple(
                SensitiveColumn(c["name"], tuple(c["levels"]))
                for c in doc["sensitive"]
            ),
            attributes=tuple(
                AttributeColumn(
                    c["name"], c["kind"], tuple(c["levels"]), c["correctable"]
                )
                for c in doc["attributes"]
            ),
            decision=DecisionColumn(doc["decision"]["name"], doc["decision"]["kind"]),
        )


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Dataset:
    """An immutable column-oriented table conforming to a Schema.

    Categorical columns hold strings, numeric columns float64. The decision
    column may be absent (scoring-only data). Arrays are frozen read-only so
    datasets can be shared across threads.
    """

    schema: Schema
    columns: Mapping[str, np.ndarray]
    # min-max constants per normalized numeric column: name -> (lo, hi)
    normalization: Mapping[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        cols = {name: _readonly(arr) for name, arr in self.columns.items()}
        object.__setattr__(self, "columns", cols)
        lengths = {len(arr) for arr in cols.values()}
        if len(lengths) > 1:
            raise SchemaError(f"ragged columns: lengths {sorted(lengths)}")
        for col in self.schema.sensitive:
            self._check_levels(col.name, col.levels)
        for col in self.schema.attributes:
            if col.kind == "categorical":
                self._check_levels(col.name, col.levels)
            else:
                self._check_numeric(col.name)
        dec = self.schema.decision
        if dec.name in cols:
            y = cols[dec.name]
            if not np.all(np.isfinite(y)):
                raise SchemaError(f"decision column {dec.name!r} has non-finite values")
            if dec.kind == BINARY and not np.all((y == 0.0) | (y == 1.0)):
                raise SchemaError(f"binary decision {dec.name!r} has values outside {{0, 1}}")

    def _check_levels(self, name: str, levels: Sequence[str]) -> None:
        if name not in self.columns:
            raise SchemaError(f"missing required column {name!r}")
        values = self.columns[name]
        bad = set(np.unique(values)) - set(levels)
        if bad:
            raise UnknownLevelError(
                f"column {name!r} has undeclared levels {sorted(bad)}"
            )

    def _check_numeric(self, name: str) -> None:
        if name not in self.columns:
            raise SchemaError(f"missing required column {name!r}")
        values = self.columns[name]
        if not np.issubdtype(values.dtype, np.floating):
            raise SchemaError(f"column {name!r} must be float, got {values.dtype}")
        if not np.all(np.isfinite(values)):
            raise SchemaError(f"column {name!r} has non-finite values")

    @property
    def n_rows(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    @property
    def has_decision(self) -> bool:
        return self.schema.decision.name in self.columns

    @property
    def decisions(self) -> np.ndarray:
        if not self.has_decision:
            raise SchemaError("dataset has no decision column")
        return self.columns[self.schema.decision.name]

    def row(self, i: int) -> dict[str, object]:
        return {name: arr[i].item() if arr.dtype.kind == "f" else str(arr[i])
                for name, arr in self.columns.items()}

    def iter_rows(self) -> Iterator[dict[str, object]]:
        for i in range(self.n_rows):
            yield self.row(i)

    def subset(self, indices: np.ndarray) -> "Dataset":
        cols = {name: arr[indices] for name, arr in self.columns.items()}
        return Dataset(self.schema, cols, dict(self.normalization))

    def sensitive_tuples(self) -> list[tuple[str, ...]]:
        """Per-row joint sensitive configuration, in schema order."""
        arrays = [self.columns[name] for name in self.schema.sensitive_names]
        return list(zip(*[map(str, arr) for arr in arrays]))


@dataclass(frozen=True)
class Encoding:
    """Deterministic mapping from schema columns to a flat feature vector.

    Feature order: sensitive one-hots first (schema order, reference level
    dropped), then attribute columns in schema order (numeric pass-through,
    categorical one-hot with the first declared level as reference). The
    reference-level convention keeps a design matrix with an intercept full
    rank.
    """

    schema: Schema
    # subset of schema columns backing the features, in encoding order
    columns: tuple[str, ...]
    feature_names: tuple[str, ...]
    # parallel to feature_names: ("onehot", column, level) or ("numeric", column)
    _features: tuple[tuple, ...]

    @property
    def feature_count(self) -> int:
        return len(self.feature_names)

    def encode_columns(self, columns: Mapping[str, np.ndarray], n: int) -> np.ndarray:
        """Encode column arrays into an (n, feature_count) float matrix."""
        out = np.empty((n, self.feature_count), dtype=float)
        for j, spec in enumerate(self._features):
            if spec[0] == "numeric":
                values = np.asarray(self._column(columns, spec[1]), dtype=float)
                if values.shape == ():
                    values = np.full(n, float(values))
                out[:, j] = values
            else:
                _, name, level = spec
                values = np.asarray(self._column(columns, name))
                if values.shape == ():
                    values = np.full(n, values)
                self._validate_levels(name, values)
                out[:, j] = (values == level).astype(float)
        return out

    def _column(self, columns: Mapping[str, np.ndarray], name: str):
        if name not in columns:
            raise SchemaError(f"missing required column {name!r}")
        return columns[name]

    def _validate_levels(self, name: str, values: np.ndarray) -> None:
        levels = self._declared_levels(name)
        bad = set(np.unique(values)) - set(levels)
        if bad:
            raise UnknownLevelError(
                f"column {name!r} has undeclared levels {sorted(bad)}"
            )

    def _declared_levels(self, name: str) -> tuple[str, ...]:
        for col in self.schema.sensitive:
            if col.name == name:
                return col.levels
        for col in self.schema.attributes:
            if col.name == name:
                return col.levels
        raise SchemaError(f"unknown column {name!r}")

    def encode_row(self, row: Mapping[str, object]) -> np.ndarray:
        columns = {k: np.array([v]) for k, v in row.items()}
        return self.encode_columns(columns, 1)[0]

    def encode_dataset(self, data: Dataset) -> np.ndarray:
        return self.encode_columns(data.columns, data.n_rows)

    def fingerprint_payload(self) -> dict:
        return {"columns": list(self.columns), "features": list(self.feature_names)}


def build_encoding(schema: Schema, columns: Sequence[str] | None = None) -> Encoding:
    """Build the feature encoding for a schema, optionally over a column subset.

    The subset (a feature mask) may drop columns but cannot reorder them; the
    stable ordering is what downstream coefficient vectors align to.
    """
    if columns is None:
        selected = list(schema.sensitive_names + schema.attribute_names)
    else:
        known = set(schema.sensitive_names + schema.attribute_names)
        unknown = [c for c in columns if c not in known]
        if unknown:
            raise SchemaError(f"feature mask names unknown columns: {unknown}")
        if len(set(columns)) != len(list(columns)):
            raise SchemaError("feature mask has duplicate column names")
        selected = [c for c in schema.sensitive_names + schema.attribute_names
                    if c in set(columns)]

    features: list[tuple] = []
    names: list[str] = []
    for col in schema.sensitive:
        if col.name not in selected:
            continue
        for level in col.levels[1:]:
            features.append(("onehot", col.name, level))
            names.append(f"{col.name}={level}")
    for col in schema.attributes:
        if col.name not in selected:
            continue
        if col.kind == "numeric":
            features.append(("numeric", col.name))
            names.append(col.name)
        else:
            for level in col.levels[1:]:
                features.append(("onehot", col.name, level))
                names.append(f"{col.name}={level}")
    return Encoding(schema, tuple(selected), tuple(names), tuple(features))

"""Shared test fixtures and dataset builders."""

from __future__ import annotations

import math

import numpy as np
import pytest

from fairadjust.tabular import (
    AttributeColumn,
    Dataset,
    DecisionColumn,
    Schema,
    SensitiveColumn,
)


def ref_sigmoid(x: float) -> float:
    """Scalar logistic reference, independent of the package implementation."""
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    ex = math.exp(x)
    return ex / (1.0 + ex)


def minimal_schema() -> Schema:
    return Schema(
        sensitive=(SensitiveColumn("sex", ("f", "m")),),
        attributes=(AttributeColumn("score", "numeric", (), correctable=True),),
        decision=DecisionColumn("admit", "binary"),
    )


def two_sensitive_schema() -> Schema:
    return Schema(
        sensitive=(
            SensitiveColumn("race", ("nw", "w")),
            SensitiveColumn("sex", ("f", "m")),
        ),
        attributes=(
            AttributeColumn("edu", "numeric", (), correctable=True),
            AttributeColumn("hours", "numeric", (), correctable=False),
        ),
        decision=DecisionColumn("income", "binary"),
    )


def two_sensitive_dataset(n: int, seed: int) -> Dataset:
    """Income-style data with race and sex both shifting one attribute."""
    rng = np.random.default_rng(seed)
    race = np.where(rng.random(n) < 0.4, "w", "nw")
    sex = np.where(rng.random(n) < 0.5, "m", "f")
    edu = (
        rng.random(n)
        + 0.15 * (race == "w")
        - 0.10 * (sex == "f")
    )
    hours = rng.random(n)
    logit = -1.0 + 1.5 * edu + 0.8 * hours + 0.7 * (sex == "m") + 0.5 * (race == "w")
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-logit))).astype(float)
    return Dataset(
        two_sensitive_schema(),
        {"race": race, "sex": sex, "edu": edu, "hours": hours, "income": y},
    )


def random_small_dataset(rng: np.random.Generator) -> Dataset:
    """A random schema and dataset that the whole pipeline can fit.

    Between one and two sensitive columns, one or two numeric attributes with
    at least one correctable, and a decision drawn from a random logistic so
    both classes are virtually always present.
    """
    n = int(rng.integers(150, 400))
    n_sens = int(rng.integers(1, 3))
    sens_cols = []
    cols = {}
    for i in range(n_sens):
        k = int(rng.integers(2, 4))
        levels = tuple(f"g{i}{j}" for j in range(k))
        sens_cols.append(SensitiveColumn(f"s{i}", levels))
        cols[f"s{i}"] = rng.choice(levels, size=n)
    n_attr = int(rng.integers(1, 3))
    attr_cols = []
    logit = rng.normal(0.0, 0.5) * np.ones(n)
    for i in range(n_attr):
        correctable = i == 0 or bool(rng.integers(0, 2))
        attr_cols.append(AttributeColumn(f"a{i}", "numeric", (), correctable))
        values = rng.random(n)
        for j, col in enumerate(sens_cols):
            shifts = rng.normal(0.0, 0.15, size=len(col.levels))
            level_index = {lv: k for k, lv in enumerate(col.levels)}
            values = values + np.array([shifts[level_index[v]] for v in cols[f"s{j}"]])
        cols[f"a{i}"] = values
        logit = logit + rng.normal(0.0, 1.5) * values
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-logit))).astype(float)
    cols["y"] = y
    schema = Schema(tuple(sens_cols), tuple(attr_cols), DecisionColumn("y", "binary"))
    return Dataset(schema, cols)


@pytest.fixture(scope="session")
def sim5000():
    from fairadjust.simulate import ScmParams, SimSpec, simulate

    return simulate(SimSpec(ScmParams(), 5000, 11))

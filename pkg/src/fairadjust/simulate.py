"""Synthetic admissions generator: a two-variable structural model.

Rows are drawn as

    s ~ Bernoulli(p_male)                        (0 = female, 1 = male)
    a = clamp(shift * s + u, 0, 1),  u ~ Uniform[0, 1]
    y ~ Bernoulli(sigmoid(intercept + beta_a * a + beta_s * s))

Test scores live on the normalized [0, 1] scale. The clamp produces atoms at
0 and 1, which all downstream code tolerates. The group-score shift is the
structural advantage of the male group; the closed-form group means are
E[a | s=0] = 1/2 and E[a | s=1] = 1/2 + shift - shift^2 / 2 for shift in
[0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .tabular import (
    AttributeColumn,
    Dataset,
    DecisionColumn,
    Schema,
    SensitiveColumn,
)

FEMALE = "f"
MALE = "m"

SEX_COLUMN = "sex"
SCORE_COLUMN = "score"
DECISION_COLUMN = "admit"


def admissions_schema() -> Schema:
    return Schema(
        sensitive=(SensitiveColumn(SEX_COLUMN, (FEMALE, MALE)),),
        attributes=(AttributeColumn(SCORE_COLUMN, "numeric", (), correctable=True),),
        decision=DecisionColumn(DECISION_COLUMN, "binary"),
    )


@dataclass(frozen=True)
class ScmParams:
    """Generator coefficients, all on the normalized score scale."""

    beta_a: float = 2.0
    beta_s: float = 1.0
    # additive score advantage of the male group, in [0, 1]
    shift: float = 0.02
    intercept: float = -1.0
    p_male: float = 0.5

    def __post_init__(self) -> None:
        values = (self.beta_a, self.beta_s, self.shift, self.intercept, self.p_male)
        if not all(np.isfinite(v) for v in values):
            raise ValueError("all generator parameters must be finite")
        if not 0.0 < self.p_male < 1.0:
            raise ValueError(f"p_male must be in (0, 1), got {self.p_male}")
        if not 0.0 <= self.shift <= 1.0:
            raise ValueError(f"shift must be in [0, 1], got {self.shift}")

    def group_score_mean(self, male: bool) -> float:
        """Exact mean of clamp(shift * s + U, 0, 1) for the given group."""
        if not male:
            return 0.5
        return 0.5 + self.shift - self.shift**2 / 2.0


@dataclass(frozen=True)
class SimSpec:
    params: ScmParams
    n: int
    seed: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"sample count must be >= 1, got {self.n}")


def sigmoid(x):
    """Numerically stable logistic function 1 / (1 + exp(-x))."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    if out.ndim == 0:
        return float(out)
    return out


def derive_seed(base: int, *path: int) -> int:
    """Deterministic sub-seed for a (grid index, replicate, ...) cell.

    Uses numpy's SeedSequence spawn-key mechanism so sub-streams are
    statistically independent and stable across platforms.
    """
    seq = np.random.SeedSequence(entropy=base, spawn_key=tuple(path))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def simulate(spec: SimSpec) -> Dataset:
    """Draw a dataset from the structural model. Bit-identical per seed."""
    rng = np.random.default_rng(spec.seed)
    p = spec.params
    s = (rng.random(spec.n) < p.p_male).astype(float)
    a = np.clip(p.shift * s + rng.random(spec.n), 0.0, 1.0)
    admit_prob = sigmoid(p.intercept + p.beta_a * a + p.beta_s * s)
    y = (rng.random(spec.n) < admit_prob).astype(float)
    sex = np.where(s == 1.0, MALE, FEMALE)
    return Dataset(
        admissions_schema(),
        {SEX_COLUMN: sex, SCORE_COLUMN: a, DECISION_COLUMN: y},
    )


VARY_BETA_S = "beta_s"
VARY_SHIFT = "lambda"


def sweep_specs(
    base: ScmParams,
    vary: str,
    grid: list[float],
    replicates: int,
    seed: int,
    n: int = 5000,
) -> list[SimSpec]:
    """One SimSpec per (grid value, replicate), with derived sub-seeds.

    `vary` is "beta_s" or "lambda" (the group-score shift, normalized units).
    """
    if not grid:
        raise ValueError("grid must be nonempty")
    if replicates < 1:
        raise ValueError(f"replicates must be >= 1, got {replicates}")
    if vary not in (VARY_BETA_S, VARY_SHIFT):
        raise ValueError(f"unknown sweep parameter {vary!r}")
    specs = []
    for gi, value in enumerate(grid):
        if vary == VARY_BETA_S:
            params = replace(base, beta_s=float(value))
        else:
            params = replace(base, shift=float(value))
        for rep in range(replicates):
            specs.append(SimSpec(params, n, derive_seed(seed, gi, rep)))
    return specs

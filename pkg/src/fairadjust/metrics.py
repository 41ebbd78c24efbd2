"""Fairness metrics and predictive scores for a predictor on a test set.

Two counterfactual gap metrics average, over test rows, the score change when
one sensitive column is flipped between an advantaged and a disadvantaged
level. The opportunity gap holds all attributes fixed; the correction gap
also moves each correctable attribute to its counterfactual value under the
flip. Group-level parity is measured by a symmetric KL divergence between
binned score histograms of the two groups.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import SchemaError
from .estimators import AttributeRegression
from .predictors import Predictor, _residuals
from .tabular import BINARY, Dataset, Schema

PROB_CLIP = 1e-12


@dataclass(frozen=True)
class GroupPair:
    """One sensitive column with its advantaged and disadvantaged levels."""

    column: str
    advantaged: str
    disadvantaged: str

    def __post_init__(self) -> None:
        if self.advantaged == self.disadvantaged:
            raise SchemaError("advantaged and disadvantaged levels must differ")

    def validate(self, schema: Schema) -> None:
        levels = schema.sensitive_column(self.column).levels
        for level in (self.advantaged, self.disadvantaged):
            if level not in levels:
                raise SchemaError(
                    f"{level!r} is not a declared level of column {self.column!r}"
                )


@dataclass(frozen=True)
class MetricReport:
    """The four reported quantities for one predictor on one test set.

    ``predictive_score`` is accuracy for binary decisions (higher is better)
    and RMSE for real-valued ones (lower is better). Standard deviations are
    across test rows; the parity KL is a single group-level quantity and has
    none.
    """

    predictor: str
    eo_metric: float
    eo_sd: float
    aa_metric: float
    aa_sd: float
    sym_kl: float
    predictive_score: float
    predictive_sd: float

    def to_dict(self) -> dict:
        return {
            "predictor": self.predictor,
            "eo_metric": self.eo_metric,
            "eo_sd": self.eo_sd,
            "aa_metric": self.aa_metric,
            "aa_sd": self.aa_sd,
            "sym_kl": self.sym_kl,
            "predictive_score": self.predictive_score,
            "predictive_sd": self.predictive_sd,
        }


def _check(predictor: Predictor, test: Dataset, pair: GroupPair) -> None:
    if predictor.schema != test.schema:
        raise SchemaError("predictor and dataset schemas differ")
    pair.validate(test.schema)


def _flip_column(test: Dataset, column: str, level: str) -> dict[str, np.ndarray]:
    cols = dict(test.columns)
    cols[column] = np.full(test.n_rows, level)
    return cols


def eo_gaps(predictor: Predictor, test: Dataset, pair: GroupPair) -> np.ndarray:
    """Per-row score change from setting pair.column to advantaged vs disadvantaged.

    All other sensitive columns and every attribute stay at observed values.
    """
    _check(predictor, test, pair)
    adv = predictor.score_batch(_flip_column(test, pair.column, pair.advantaged))
    dis = predictor.score_batch(_flip_column(test, pair.column, pair.disadvantaged))
    return adv - dis


def eo_metric(predictor: Predictor, test: Dataset, pair: GroupPair) -> float:
    return float(np.mean(eo_gaps(predictor, test, pair)))


def aa_gaps(
    predictor: Predictor,
    test: Dataset,
    pair: GroupPair,
    g: AttributeRegression,
) -> np.ndarray:
    """Per-row score change from the flip with correctable columns moved too.

    Under each flip the correctable columns are set to g(s') + (a - g(s)),
    where s' is the observed configuration with pair.column replaced.
    """
    _check(predictor, test, pair)
    residuals = _residuals(g, test.schema, test.columns, test.n_rows)
    sides = []
    for level in (pair.advantaged, pair.disadvantaged):
        flipped = _flip_column(test, pair.column, level)
        tuples = list(
            zip(*[
                [str(v) for v in flipped[name]]
                for name in test.schema.sensitive_names
            ])
        )
        corrected = g.predict_tuples(tuples) + residuals
        for j, name in enumerate(g.columns):
            flipped[name] = corrected[:, j]
        sides.append(predictor.score_batch(flipped))
    return sides[0] - sides[1]


def aa_metric(
    predictor: Predictor, test: Dataset, pair: GroupPair, g: AttributeRegression
) -> float:
    return float(np.mean(aa_gaps(predictor, test, pair, g)))


def binned_sym_kl(
    scores_a: np.ndarray,
    scores_b: np.ndarray,
    bins: int = 10,
    tail_fraction: float = 0.2,
    smoothing: float = 1e-6,
) -> float:
    """Symmetric KL divergence between two score samples, via shared histograms.

    Bin edges are equal-width over the central quantile range of the pooled
    scores; the outer bins are open-ended and absorb both tails. Anchoring the
    outer edges at pooled quantiles keeps point masses (e.g. scores of rows
    clamped at an attribute bound) in the same bin as the opposite group's
    tail, where an edge falling between them would report a spuriously large
    divergence. Counts get additive smoothing before normalization.
    """
    if bins < 2:
        raise ValueError(f"need at least 2 bins, got {bins}")
    if not 0.0 < tail_fraction < 0.5:
        raise ValueError(f"tail_fraction must be in (0, 0.5), got {tail_fraction}")
    scores_a = np.asarray(scores_a, dtype=float)
    scores_b = np.asarray(scores_b, dtype=float)
    if len(scores_a) == 0 or len(scores_b) == 0:
        raise ValueError("both groups need at least one row")
    pooled = np.concatenate([scores_a, scores_b])
    lo, hi = np.quantile(pooled, [tail_fraction, 1.0 - tail_fraction])
    if lo == hi:
        # degenerate central range; a single interior edge still splits the tails
        edges = np.array([-np.inf, lo, np.inf])
    else:
        edges = np.concatenate([[-np.inf], np.linspace(lo, hi, bins - 1), [np.inf]])
    counts_a, _ = np.histogram(scores_a, bins=edges)
    counts_b, _ = np.histogram(scores_b, bins=edges)
    p = counts_a + smoothing
    q = counts_b + smoothing
    p = p / p.sum()
    q = q / q.sum()
    return float(np.sum(p * np.log(p / q)) + np.sum(q * np.log(q / p)))


def demographic_parity_kl(
    predictor: Predictor,
    test: Dataset,
    pair: GroupPair,
    bins: int = 10,
    tail_fraction: float = 0.2,
    smoothing: float = 1e-6,
) -> float:
    """Symmetric binned KL between the two groups' score distributions.

    Rows are grouped by their observed value of pair.column; rows at other
    levels are ignored. Zero when the two groups' score multisets coincide.
    """
    _check(predictor, test, pair)
    scores = predictor.score_batch(test)
    values = test.columns[pair.column]
    adv = scores[values == pair.advantaged]
    dis = scores[values == pair.disadvantaged]
    if len(adv) == 0 or len(dis) == 0:
        raise SchemaError(
            f"a group has no rows: {pair.advantaged!r} n={len(adv)}, "
            f"{pair.disadvantaged!r} n={len(dis)}"
        )
    return binned_sym_kl(adv, dis, bins, tail_fraction, smoothing)


def predictive_score(predictor: Predictor, test: Dataset) -> float:
    """Accuracy at threshold 0.5 for binary decisions, RMSE for real-valued."""
    rows = _row_scores(predictor, test)
    if test.schema.decision.kind == BINARY:
        return float(np.mean(rows))
    return float(np.sqrt(np.mean(rows)))


def _row_scores(predictor: Predictor, test: Dataset) -> np.ndarray:
    if not test.has_decision:
        raise SchemaError("test dataset has no decision column")
    scores = predictor.score_batch(test)
    y = test.decisions
    if test.schema.decision.kind == BINARY:
        return ((scores >= 0.5) == (y == 1.0)).astype(float)
    return (scores - y) ** 2


def bernoulli_kl(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Elementwise KL(Bern(p) || Bern(q)) with probability clipping."""
    p = np.clip(np.asarray(p, dtype=float), PROB_CLIP, 1.0 - PROB_CLIP)
    q = np.clip(np.asarray(q, dtype=float), PROB_CLIP, 1.0 - PROB_CLIP)
    return p * np.log(p / q) + (1.0 - p) * np.log((1.0 - p) / (1.0 - q))


def avg_kl_to_ml(predictor: Predictor, ml: Predictor, test: Dataset) -> float:
    """Mean over rows of KL(Bern(ml score) || Bern(predictor score))."""
    if test.schema.decision.kind != BINARY:
        raise SchemaError("decision divergence is defined for binary decisions")
    p = ml.score_batch(test)
    q = predictor.score_batch(test)
    return float(np.mean(bernoulli_kl(p, q)))


def evaluate_predictor(
    predictor: Predictor,
    test: Dataset,
    pair: GroupPair,
    g: AttributeRegression,
    bins: int = 10,
) -> MetricReport:
    """Assemble the four-column report for one predictor."""
    gaps_eo = eo_gaps(predictor, test, pair)
    gaps_aa = aa_gaps(predictor, test, pair, g)
    rows = _row_scores(predictor, test)
    binary = test.schema.decision.kind == BINARY
    return MetricReport(
        predictor=predictor.kind,
        eo_metric=float(np.mean(gaps_eo)),
        eo_sd=float(np.std(gaps_eo)),
        aa_metric=float(np.mean(gaps_aa)),
        aa_sd=float(np.std(gaps_aa)),
        sym_kl=demographic_parity_kl(predictor, test, pair, bins=bins),
        predictive_score=float(np.mean(rows)) if binary else float(np.sqrt(np.mean(rows))),
        predictive_sd=float(np.std(rows)),
    )


TABLE_ORDER = ("ml", "ftu", "eo", "fairlearning", "aa")
_ROW_LABELS = {
    "ml": "f_ml",
    "ftu": "FTU",
    "eo": "f_eo",
    "fairlearning": "FL",
    "aa": "f_aa",
}


def format_metric_table(
    reports: Sequence[MetricReport], title: str, lower_is_better: bool = False
) -> str:
    """Aligned text table of metric columns (EO, AA, KL, Prediction), x100.

    Rows follow the conventional order f_ml, FTU, f_eo, FL, f_aa; values are
    scaled by 100 and printed with one decimal.
    """
    by_kind = {r.predictor: r for r in reports}
    header = f"{'':<6}{'EO':>8}{'AA':>8}{'KL':>8}{'Prediction':>12}"
    lines = [title, header]
    ordered = [by_kind[k] for k in TABLE_ORDER if k in by_kind]
    ordered += [r for r in reports if r.predictor not in TABLE_ORDER]
    for r in ordered:
        label = _ROW_LABELS.get(r.predictor, r.predictor)
        lines.append(
            f"{label:<6}"
            f"{100 * r.eo_metric:>8.1f}"
            f"{100 * r.aa_metric:>8.1f}"
            f"{100 * r.sym_kl:>8.1f}"
            f"{100 * r.predictive_score:>12.1f}"
        )
    if lower_is_better:
        lines.append("(Prediction column is RMSE x100; lower is better)")
    return "\n".join(lines)


def reports_to_json(reports: Mapping[str, Sequence[MetricReport]] | Sequence[MetricReport]) -> str:
    if isinstance(reports, Mapping):
        doc = {k: [r.to_dict() for r in v] for k, v in reports.items()}
    else:
        doc = [r.to_dict() for r in reports]
    return json.dumps(doc, indent=2, sort_keys=True)

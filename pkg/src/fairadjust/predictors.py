"""The five decision predictors.

All predictors score a batch of rows to a vector of decision probabilities
(binary schemas) or real-valued predictions. They differ in what they
condition on:

* ``ml``            the fitted decision model, used as-is;
* ``eo``            averages the ml score over the population distribution of
                    the sensitive configuration, holding attributes fixed, so
                    the score is a function of the attributes alone;
* ``aa``            additionally rewrites each correctable attribute to its
                    counterfactual value under every alternative sensitive
                    configuration, via the additive residual a' = g(s') +
                    (a - g(s)), and averages;
* ``ftu``           a decision model refit without the sensitive columns;
* ``fairlearning``  a decision model refit on the residuals a - g(s) of the
                    correctable columns only.

Mixtures over the sensitive configuration are computed exactly by summing the
finite support of the fitted distribution; a sampling mode is kept for
fidelity to the draw-based description of the procedure.
"""

from __future__ import annotations

from typing import Mapping

import numpy as np

from .errors import FitError, SchemaError
from .estimators import (
    AttributeRegression,
    FittedComponents,
    LinearModel,
    LogisticModel,
    components_from_dict,
    components_to_dict,
    fit_linear_design,
    fit_logistic_design,
    fit_attribute_regression,
    fit_components,
)
from .tabular import BINARY, Dataset, Schema, build_encoding

ML = "ml"
EO = "eo"
AA = "aa"
FTU = "ftu"
FAIRLEARNING = "fairlearning"

KINDS = (ML, EO, AA, FTU, FAIRLEARNING)

Columns = Mapping[str, np.ndarray]


def _batch(data: Dataset | Columns) -> tuple[dict[str, np.ndarray], int]:
    if isinstance(data, Dataset):
        cols = dict(data.columns)
        return cols, data.n_rows
    cols = {k: np.asarray(v) for k, v in data.items()}
    sizes = {len(v) for v in cols.values() if v.ndim > 0}
    if len(sizes) > 1:
        raise SchemaError(f"ragged columns: lengths {sorted(sizes)}")
    n = sizes.pop() if sizes else 1
    return cols, n


def _sensitive_tuples(schema: Schema, cols: Columns, n: int) -> list[tuple[str, ...]]:
    arrays = []
    for name in schema.sensitive_names:
        if name not in cols:
            raise SchemaError(f"missing required column {name!r}")
        arr = np.asarray(cols[name])
        if arr.ndim == 0:
            arr = np.full(n, arr)
        arrays.append([str(v) for v in arr])
    return list(zip(*arrays))


class Predictor:
    """Base scoring object. Subclasses are immutable and thread-safe."""

    kind: str = ""

    def __init__(self, schema: Schema):
        self.schema = schema

    def score_batch(self, data: Dataset | Columns) -> np.ndarray:
        """Vector of scores for a dataset or a mapping of column arrays."""
        cols, n = _batch(data)
        return self._score(cols, n)

    def score_row(self, row: Mapping[str, object]) -> float:
        cols = {k: np.array([v]) for k, v in row.items()}
        return float(self._score(cols, 1)[0])

    def sample_decisions(
        self, data: Dataset | Columns, rng: np.random.Generator
    ) -> np.ndarray:
        """Draw one decision per row instead of returning the exact mixture.

        Samples a sensitive configuration from the fitted distribution where
        the predictor mixes over one, then draws the decision. The marginal
        law of the draws matches the exact scores; binary schemas yield 0/1,
        real-valued schemas yield the deterministic prediction.
        """
        cols, n = _batch(data)
        probs = self._sampled_scores(cols, n, rng)
        if self.schema.decision.kind != BINARY:
            return probs
        return (rng.random(n) < probs).astype(float)

    def _score(self, cols: Columns, n: int) -> np.ndarray:
        raise NotImplementedError

    def _sampled_scores(self, cols: Columns, n: int, rng) -> np.ndarray:
        return self._score(cols, n)

    def to_dict(self) -> dict:
        raise NotImplementedError


class MlPredictor(Predictor):
    """The fitted decision model applied to (s, a) directly."""

    kind = ML

    def __init__(self, components: FittedComponents):
        super().__init__(components.schema)
        self.components = components

    def _score(self, cols: Columns, n: int) -> np.ndarray:
        c = self.components
        X = c.encoding.encode_columns(cols, n)
        return c.f_ml.predict(X)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "components": components_to_dict(self.components)}


class EoPredictor(Predictor):
    """Mixture of the ml score over the sensitive distribution, at fixed a.

    The sensitive columns of the input are never read, so the score is a
    function of the attribute columns alone.
    """

    kind = EO

    def __init__(self, components: FittedComponents):
        super().__init__(components.schema)
        self.components = components

    def _score(self, cols: Columns, n: int) -> np.ndarray:
        return _eo_scores(self.components, cols, n)

    def _sampled_scores(self, cols: Columns, n: int, rng) -> np.ndarray:
        c = self.components
        drawn = _draw_tuples(c.p_s, n, rng)
        mixed = _with_sensitive_arrays(self.schema, cols, drawn)
        return c.f_ml.predict(c.encoding.encode_columns(mixed, n))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "components": components_to_dict(self.components)}


class AaPredictor(Predictor):
    """Counterfactually corrected mixture over the sensitive distribution.

    For each alternative configuration s', every correctable column is moved
    to g(s') + (a - g(s)); the eo score of the moved attributes is averaged
    under the fitted sensitive distribution. Counterfactual attributes are
    not re-clamped to their observed range: clamping would break the exact
    dependence of the score on the residual a - g(s) alone.
    """

    kind = AA

    def __init__(self, components: FittedComponents):
        super().__init__(components.schema)
        self.components = components

    def _score(self, cols: Columns, n: int) -> np.ndarray:
        c = self.components
        residuals = _residuals(c.g, self.schema, cols, n)
        out = np.zeros(n)
        for level, weight in c.p_s.items():
            moved = _with_correctables(cols, c.g, level, residuals, n)
            out += weight * _eo_scores(c, moved, n)
        return out

    def _sampled_scores(self, cols: Columns, n: int, rng) -> np.ndarray:
        c = self.components
        residuals = _residuals(c.g, self.schema, cols, n)
        drawn = _draw_tuples(c.p_s, n, rng)
        corrected = c.g.predict_tuples(drawn) + residuals
        moved = dict(cols)
        for j, name in enumerate(c.g.columns):
            moved[name] = corrected[:, j]
        drawn2 = _draw_tuples(c.p_s, n, rng)
        mixed = _with_sensitive_arrays(self.schema, moved, drawn2)
        return c.f_ml.predict(c.encoding.encode_columns(mixed, n))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "components": components_to_dict(self.components)}


class FtuPredictor(Predictor):
    """Decision model fit on the attribute columns only."""

    kind = FTU

    def __init__(self, schema: Schema, model: LogisticModel | LinearModel):
        super().__init__(schema)
        self.model = model
        self._encoding = build_encoding(schema, schema.attribute_names)

    def _score(self, cols: Columns, n: int) -> np.ndarray:
        return self.model.predict(self._encoding.encode_columns(cols, n))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "schema": self.schema.to_dict(),
            "model": self.model.to_dict(),
        }


class FairLearningPredictor(Predictor):
    """Decision model fit on the correctable-column residuals a - g(s).

    In the posited causal structure every attribute descends from the
    sensitive columns, so the residuals are the only admissible features;
    non-correctable attributes are dropped. Raw residuals are used without
    clipping.
    """

    kind = FAIRLEARNING

    def __init__(
        self,
        schema: Schema,
        g: AttributeRegression,
        model: LogisticModel | LinearModel,
    ):
        super().__init__(schema)
        self.g = g
        self.model = model

    def _score(self, cols: Columns, n: int) -> np.ndarray:
        residuals = _residuals(self.g, self.schema, cols, n)
        return self.model.predict(residuals)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "schema": self.schema.to_dict(),
            "g": self.g.to_dict(),
            "model": self.model.to_dict(),
        }


def _eo_scores(c: FittedComponents, cols: Columns, n: int) -> np.ndarray:
    out = np.zeros(n)
    for level, weight in c.p_s.items():
        mixed = _with_sensitive(c.schema, cols, level)
        out += weight * c.f_ml.predict(c.encoding.encode_columns(mixed, n))
    return out


def _with_sensitive(
    schema: Schema, cols: Columns, level: tuple[str, ...]
) -> dict[str, np.ndarray]:
    out = dict(cols)
    for name, value in zip(schema.sensitive_names, level):
        out[name] = np.array(value)
    return out


def _with_sensitive_arrays(
    schema: Schema, cols: Columns, tuples: list[tuple[str, ...]]
) -> dict[str, np.ndarray]:
    out = dict(cols)
    for j, name in enumerate(schema.sensitive_names):
        out[name] = np.array([t[j] for t in tuples])
    return out


def _residuals(
    g: AttributeRegression, schema: Schema, cols: Columns, n: int
) -> np.ndarray:
    """Residual matrix a - g(s) over the correctable columns, shape (n, k)."""
    tuples = _sensitive_tuples(schema, cols, n)
    expected = g.predict_tuples(tuples)
    observed = np.empty_like(expected)
    for j, name in enumerate(g.columns):
        if name not in cols:
            raise SchemaError(f"missing required column {name!r}")
        arr = np.asarray(cols[name], dtype=float)
        observed[:, j] = arr if arr.ndim else np.full(n, float(arr))
    return observed - expected


def _with_correctables(
    cols: Columns,
    g: AttributeRegression,
    level: tuple[str, ...],
    residuals: np.ndarray,
    n: int,
) -> dict[str, np.ndarray]:
    corrected = g.predict_tuple(level) + residuals
    out = dict(cols)
    for j, name in enumerate(g.columns):
        out[name] = corrected[:, j]
    return out


def _draw_tuples(p_s, n: int, rng) -> list[tuple[str, ...]]:
    idx = rng.choice(len(p_s.levels), size=n, p=p_s.probabilities)
    return [p_s.levels[i] for i in idx]


def score_ml(components: FittedComponents, row: Mapping[str, object]) -> float:
    """Decision score of the fitted model for one (s, a) row."""
    return MlPredictor(components).score_row(row)


def score_eo(components: FittedComponents, row: Mapping[str, object]) -> float:
    """Opportunity-equalized score; reads only the attribute columns of the row."""
    return EoPredictor(components).score_row(row)


def score_aa(components: FittedComponents, row: Mapping[str, object]) -> float:
    """Counterfactually corrected score for one (s, a) row."""
    return AaPredictor(components).score_row(row)


def build_ml(components: FittedComponents) -> MlPredictor:
    return MlPredictor(components)


def build_eo(components: FittedComponents) -> EoPredictor:
    return EoPredictor(components)


def build_aa(components: FittedComponents) -> AaPredictor:
    if not components.schema.correctable_names:
        raise FitError("counterfactual correction needs correctable columns")
    return AaPredictor(components)


def build_ftu(data: Dataset, ridge: float = 0.0) -> FtuPredictor:
    """Refit the decision model with the sensitive columns omitted."""
    schema = data.schema
    encoding = build_encoding(schema, schema.attribute_names)
    X = encoding.encode_dataset(data)
    if schema.decision.kind == BINARY:
        model = fit_logistic_design(X, data.decisions, encoding.feature_names, ridge)
    else:
        model = fit_linear_design(
            X, data.decisions, encoding.feature_names, (schema.decision.name,)
        )
    return FtuPredictor(schema, model)


def build_fairlearning(
    data: Dataset, g: AttributeRegression | None = None, ridge: float = 0.0
) -> FairLearningPredictor:
    """Refit the decision model on residual features a - g(s)."""
    schema = data.schema
    if g is None:
        g = fit_attribute_regression(data)
    residuals = _residuals(g, schema, data.columns, data.n_rows)
    names = tuple(f"resid({c})" for c in g.columns)
    if schema.decision.kind == BINARY:
        model = fit_logistic_design(residuals, data.decisions, names, ridge)
    else:
        model = fit_linear_design(
            residuals, data.decisions, names, (schema.decision.name,)
        )
    return FairLearningPredictor(schema, g, model)


def build_all(data: Dataset, ridge: float = 0.0) -> dict[str, Predictor]:
    """Fit shared components once and construct all five predictors."""
    components = fit_components(data, ridge=ridge)
    return {
        ML: build_ml(components),
        EO: build_eo(components),
        AA: build_aa(components),
        FTU: build_ftu(data, ridge=ridge),
        FAIRLEARNING: build_fairlearning(data, components.g, ridge=ridge),
    }


def _model_from_dict(doc: Mapping) -> LogisticModel | LinearModel:
    if doc["kind"] == "logistic":
        return LogisticModel.from_dict(doc)
    return LinearModel.from_dict(doc)


def predictor_from_dict(doc: Mapping) -> Predictor:
    """Rebuild a serialized predictor from its kind-discriminated document."""
    kind = doc.get("kind")
    if kind in (ML, EO, AA):
        components = components_from_dict(doc["components"])
        return {ML: MlPredictor, EO: EoPredictor, AA: AaPredictor}[kind](components)
    if kind == FTU:
        return FtuPredictor(Schema.from_dict(doc["schema"]), _model_from_dict(doc["model"]))
    if kind == FAIRLEARNING:
        return FairLearningPredictor(
            Schema.from_dict(doc["schema"]),
            AttributeRegression.from_dict(doc["g"]),
            _model_from_dict(doc["model"]),
        )
    raise SchemaError(f"unknown predictor kind {kind!r}")

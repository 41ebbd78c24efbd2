"""Fitting the pipeline's three ingredients from data.

The adjusted predictors need a decision model fit on all columns, the joint
empirical distribution of the sensitive configuration, and a regression of
every correctable attribute on that configuration. All fits are deterministic
(zero initialization, no randomized solvers), so refitting identical data
yields bit-identical models.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import FitError, PerfectSeparationError, RankDeficientError, SchemaError
from .simulate import sigmoid
from .tabular import BINARY, Dataset, Encoding, Schema, build_encoding

GRADIENT_TOL = 1e-8
MAX_ITER = 200
# a coefficient this large on [0, 1]-scaled features means the MLE is diverging
COEF_BLOWUP = 1e4


@dataclass(frozen=True)
class LogisticModel:
    """Logistic regression aligned to an Encoding's feature order."""

    feature_names: tuple[str, ...]
    coef: np.ndarray
    intercept: float
    n_iter: int = 0
    gradient_norm: float = 0.0
    converged: bool = True

    def __post_init__(self) -> None:
        coef = np.asarray(self.coef, dtype=float)
        coef.setflags(write=False)
        object.__setattr__(self, "coef", coef)
        if len(coef) != len(self.feature_names):
            raise FitError("coefficient count does not match feature names")
        if not (np.all(np.isfinite(coef)) and np.isfinite(self.intercept)):
            raise FitError("non-finite coefficients")

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Decision probabilities for an encoded design matrix."""
        return sigmoid(self.intercept + X @ self.coef)

    def to_dict(self) -> dict:
        return {
            "kind": "logistic",
            "feature_names": list(self.feature_names),
            "coef": self.coef.tolist(),
            "intercept": self.intercept,
            "n_iter": self.n_iter,
            "gradient_norm": self.gradient_norm,
            "converged": self.converged,
        }

    @staticmethod
    def from_dict(doc: Mapping) -> "LogisticModel":
        return LogisticModel(
            tuple(doc["feature_names"]),
            np.asarray(doc["coef"], dtype=float),
            float(doc["intercept"]),
            int(doc.get("n_iter", 0)),
            float(doc.get("gradient_norm", 0.0)),
            bool(doc.get("converged", True)),
        )


@dataclass(frozen=True)
class LinearModel:
    """Least-squares regression, possibly with several targets."""

    feature_names: tuple[str, ...]
    targets: tuple[str, ...]
    # (n_features, n_targets)
    coef: np.ndarray
    intercept: np.ndarray

    def __post_init__(self) -> None:
        coef = np.atleast_2d(np.asarray(self.coef, dtype=float))
        intercept = np.atleast_1d(np.asarray(self.intercept, dtype=float))
        coef.setflags(write=False)
        intercept.setflags(write=False)
        object.__setattr__(self, "coef", coef)
        object.__setattr__(self, "intercept", intercept)
        if coef.shape != (len(self.feature_names), len(self.targets)):
            raise FitError(
                f"coefficient shape {coef.shape} does not match "
                f"{len(self.feature_names)} features x {len(self.targets)} targets"
            )
        if not (np.all(np.isfinite(coef)) and np.all(np.isfinite(intercept))):
            raise FitError("non-finite coefficients")

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Predictions with shape (n,) for one target, else (n, n_targets)."""
        out = X @ self.coef + self.intercept
        if len(self.targets) == 1:
            return out[:, 0]
        return out

    def to_dict(self) -> dict:
        return {
            "kind": "linear",
            "feature_names": list(self.feature_names),
            "targets": list(self.targets),
            "coef": self.coef.tolist(),
            "intercept": self.intercept.tolist(),
        }

    @staticmethod
    def from_dict(doc: Mapping) -> "LinearModel":
        return LinearModel(
            tuple(doc["feature_names"]),
            tuple(doc["targets"]),
            np.asarray(doc["coef"], dtype=float),
            np.asarray(doc["intercept"], dtype=float),
        )


@dataclass(frozen=True)
class SensitiveDistribution:
    """Empirical joint distribution over sensitive level tuples."""

    levels: tuple[tuple[str, ...], ...]
    probabilities: np.ndarray

    def __post_init__(self) -> None:
        probs = np.asarray(self.probabilities, dtype=float)
        probs.setflags(write=False)
        object.__setattr__(self, "probabilities", probs)
        if len(probs) != len(self.levels):
            raise FitError("probability count does not match level tuples")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise FitError("probabilities must be nonnegative and sum to 1")

    def items(self):
        return zip(self.levels, self.probabilities)

    def probability(self, level: tuple[str, ...]) -> float:
        for lv, p in self.items():
            if lv == level:
                return float(p)
        return 0.0

    def to_dict(self) -> dict:
        return {
            "levels": [list(lv) for lv in self.levels],
            "probabilities": self.probabilities.tolist(),
        }

    @staticmethod
    def from_dict(doc: Mapping) -> "SensitiveDistribution":
        return SensitiveDistribution(
            tuple(tuple(lv) for lv in doc["levels"]),
            np.asarray(doc["probabilities"], dtype=float),
        )


@dataclass(frozen=True)
class AttributeRegression:
    """Regression of correctable attributes on the joint sensitive configuration.

    Fit saturated (one indicator per observed level tuple), so predictions are
    the per-configuration means of each correctable column, which is the
    conditional mean the counterfactual adjustment calls for. Exposed as a
    linear model over tuple indicators plus a lookup table for scoring.
    """

    columns: tuple[str, ...]
    levels: tuple[tuple[str, ...], ...]
    # (n_levels, n_columns): mean of each correctable column per level tuple
    table: np.ndarray
    model: LinearModel

    def __post_init__(self) -> None:
        table = np.asarray(self.table, dtype=float)
        table.setflags(write=False)
        object.__setattr__(self, "table", table)
        index = {lv: i for i, lv in enumerate(self.levels)}
        object.__setattr__(self, "_index", index)

    def predict_tuple(self, level: tuple[str, ...]) -> np.ndarray:
        try:
            return self.table[self._index[level]]
        except KeyError:
            raise SchemaError(
                f"sensitive configuration {level!r} was not observed in training"
            ) from None

    def predict_tuples(self, levels: Sequence[tuple[str, ...]]) -> np.ndarray:
        try:
            rows = [self._index[lv] for lv in levels]
        except KeyError as exc:
            raise SchemaError(
                f"sensitive configuration {exc.args[0]!r} was not observed in training"
            ) from None
        return self.table[rows]

    def to_dict(self) -> dict:
        return {
            "columns": list(self.columns),
            "levels": [list(lv) for lv in self.levels],
            "table": self.table.tolist(),
            "model": self.model.to_dict(),
        }

    @staticmethod
    def from_dict(doc: Mapping) -> "AttributeRegression":
        return AttributeRegression(
            tuple(doc["columns"]),
            tuple(tuple(lv) for lv in doc["levels"]),
            np.asarray(doc["table"], dtype=float),
            LinearModel.from_dict(doc["model"]),
        )


@dataclass(frozen=True)
class FittedComponents:
    """Everything the adjusted predictors need, fit against one schema."""

    schema: Schema
    encoding: Encoding
    # LogisticModel for binary decisions, LinearModel for real-valued ones
    f_ml: LogisticModel | LinearModel
    p_s: SensitiveDistribution
    g: AttributeRegression


def encoding_fingerprint(encoding: Encoding) -> str:
    payload = {
        "schema": encoding.schema.to_dict(),
        "encoding": encoding.fingerprint_payload(),
    }
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def _log_likelihood(X: np.ndarray, y: np.ndarray, beta: np.ndarray) -> float:
    eta = X @ beta
    # log sigma(eta) * y + log sigma(-eta) * (1 - y), stably
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def fit_logistic_design(
    X: np.ndarray,
    y: np.ndarray,
    feature_names: Sequence[str],
    ridge: float = 0.0,
) -> LogisticModel:
    """Logistic MLE by Newton iteration with step halving.

    Converges when the score gradient's infinity norm drops to 1e-8 or after
    200 iterations. Starts from the zero vector, so the fit is deterministic.
    A coefficient-norm blowup is reported as perfect separation; a singular
    Hessian as a rank-deficient design. `ridge` adds an optional L2 penalty
    (off by default).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if n < p + 1:
        raise FitError(f"need at least {p + 1} rows to fit {p} features, got {n}")
    if not (np.any(y == 0.0) and np.any(y == 1.0)):
        raise FitError("both decision classes must be present")
    if np.linalg.matrix_rank(np.hstack([np.ones((n, 1)), X])) < p + 1:
        raise RankDeficientError("design matrix is rank deficient")

    Xa = np.hstack([np.ones((n, 1)), X])
    beta = np.zeros(p + 1)
    loglik = _log_likelihood(Xa, y, beta) - 0.5 * ridge * float(beta @ beta)
    grad_norm = np.inf
    for it in range(1, MAX_ITER + 1):
        mu = sigmoid(Xa @ beta)
        if ridge == 0.0 and np.all(np.abs(y - mu) < 1e-8):
            # every fitted probability matches its label, so the likelihood
            # supremum is not attained and the coefficients are diverging;
            # the gradient underflows to zero here, masking the blowup
            raise PerfectSeparationError(
                "the data are perfectly separated (fitted probabilities "
                f"match every label at iteration {it}, max |beta| = "
                f"{np.max(np.abs(beta)):.3g}); the MLE does not exist"
            )
        grad = Xa.T @ (y - mu) - ridge * beta
        grad_norm = float(np.max(np.abs(grad)))
        if grad_norm <= GRADIENT_TOL:
            return LogisticModel(
                tuple(feature_names), beta[1:], float(beta[0]),
                n_iter=it - 1, gradient_norm=grad_norm, converged=True,
            )
        w = mu * (1.0 - mu)
        hess = Xa.T @ (Xa * w[:, None]) + ridge * np.eye(p + 1)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            raise RankDeficientError(
                "singular Hessian; design matrix is numerically rank deficient"
            ) from None
        # halve the step until the penalized log-likelihood improves
        for _ in range(40):
            candidate = beta + step
            cand_loglik = _log_likelihood(Xa, y, candidate) - 0.5 * ridge * float(
                candidate @ candidate
            )
            if cand_loglik >= loglik - 1e-12:
                break
            step = step / 2.0
        beta = beta + step
        loglik = _log_likelihood(Xa, y, beta) - 0.5 * ridge * float(beta @ beta)
        # backstop for quasi-separated data where the fit diverges without
        # ever matching every label exactly
        if np.max(np.abs(beta)) > COEF_BLOWUP:
            raise PerfectSeparationError(
                "coefficient norm blew up (max |beta| > "
                f"{COEF_BLOWUP:g} at iteration {it}); the data are likely "
                "perfectly separated and the MLE does not exist"
            )
    raise FitError(
        f"Newton iteration did not converge in {MAX_ITER} steps "
        f"(gradient norm {grad_norm:.2e})"
    )


def fit_logistic(
    data: Dataset, feature_mask: Sequence[str] | None = None, ridge: float = 0.0
) -> LogisticModel:
    """Fit a logistic decision model on the masked feature columns."""
    if data.schema.decision.kind != BINARY:
        raise FitError("fit_logistic requires a binary decision column")
    encoding = build_encoding(data.schema, feature_mask)
    X = encoding.encode_dataset(data)
    return fit_logistic_design(X, data.decisions, encoding.feature_names, ridge)


def fit_linear_design(
    X: np.ndarray,
    Y: np.ndarray,
    feature_names: Sequence[str],
    targets: Sequence[str],
) -> LinearModel:
    """Ordinary least squares with an intercept; rejects rank-deficient designs."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    n, p = X.shape
    Xa = np.hstack([np.ones((n, 1)), X])
    solution, _, rank, _ = np.linalg.lstsq(Xa, Y, rcond=None)
    if rank < p + 1:
        raise RankDeficientError(
            f"design matrix has rank {rank} < {p + 1}; drop collinear columns"
        )
    return LinearModel(
        tuple(feature_names), tuple(targets), solution[1:], solution[0]
    )


def fit_linear(
    data: Dataset,
    targets: Sequence[str] | str,
    feature_mask: Sequence[str] | None = None,
) -> LinearModel:
    """OLS of the target column(s) on the masked feature columns.

    With an empty mask this degenerates to an intercept-only model (the
    global mean of each target).
    """
    if isinstance(targets, str):
        targets = [targets]
    encoding = build_encoding(data.schema, feature_mask)
    X = encoding.encode_dataset(data)
    Y = np.column_stack([_target_column(data, t) for t in targets])
    return fit_linear_design(X, Y, encoding.feature_names, targets)


def _target_column(data: Dataset, name: str) -> np.ndarray:
    if name not in data.columns:
        raise SchemaError(f"missing target column {name!r}")
    col = data.columns[name]
    if not np.issubdtype(col.dtype, np.floating):
        raise SchemaError(f"target column {name!r} must be numeric")
    return col


def fit_sensitive_distribution(data: Dataset) -> SensitiveDistribution:
    """Empirical joint frequencies of the sensitive level tuples."""
    if data.n_rows == 0:
        raise FitError("cannot estimate a distribution from an empty dataset")
    tuples = data.sensitive_tuples()
    counts: dict[tuple[str, ...], int] = {}
    for t in tuples:
        counts[t] = counts.get(t, 0) + 1
    levels = tuple(sorted(counts))
    probs = np.array([counts[lv] for lv in levels], dtype=float)
    probs /= probs.sum()
    return SensitiveDistribution(levels, probs)


def fit_attribute_regression(data: Dataset) -> AttributeRegression:
    """Fit the per-configuration means of every correctable column.

    Implemented as saturated OLS on indicators of the observed sensitive
    tuples (reference level dropped), which makes the predictions exactly the
    group means while keeping the usual least-squares residual identities.
    Requires at least one row per observed configuration by construction.
    """
    correctable = data.schema.correctable_names
    if not correctable:
        raise FitError("schema declares no correctable attribute columns")
    tuples = data.sensitive_tuples()
    levels = tuple(sorted(set(tuples)))
    index = {lv: i for i, lv in enumerate(levels)}
    codes = np.array([index[t] for t in tuples])
    # indicator design over levels[1:], levels[0] is the reference
    X = np.zeros((data.n_rows, len(levels) - 1))
    for j in range(1, len(levels)):
        X[codes == j, j - 1] = 1.0
    names = tuple("s=" + ",".join(lv) for lv in levels[1:])
    Y = np.column_stack([data.columns[c] for c in correctable])
    model = fit_linear_design(X, Y, names, correctable)
    indicators = np.vstack([np.zeros((1, len(levels) - 1)), np.eye(len(levels) - 1)])
    table = indicators @ model.coef + model.intercept
    return AttributeRegression(correctable, levels, table, model)


def fit_components(data: Dataset, ridge: float = 0.0) -> FittedComponents:
    """Fit the decision model, sensitive distribution, and attribute regression."""
    encoding = build_encoding(data.schema)
    if data.schema.decision.kind == BINARY:
        f_ml = fit_logistic(data, ridge=ridge)
    else:
        f_ml = fit_linear(data, data.schema.decision.name)
    return FittedComponents(
        schema=data.schema,
        encoding=encoding,
        f_ml=f_ml,
        p_s=fit_sensitive_distribution(data),
        g=fit_attribute_regression(data),
    )


MODEL_FORMAT = "fairadjust-models"
MODEL_FORMAT_VERSION = 1


def components_to_dict(components: FittedComponents) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_FORMAT_VERSION,
        "schema": components.schema.to_dict(),
        "encoding_fingerprint": encoding_fingerprint(components.encoding),
        "f_ml": components.f_ml.to_dict(),
        "p_s": components.p_s.to_dict(),
        "g": components.g.to_dict(),
    }


def components_from_dict(doc: Mapping) -> FittedComponents:
    if doc.get("format") != MODEL_FORMAT:
        raise FitError(f"not a {MODEL_FORMAT} document")
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise FitError(f"unsupported model format version {doc.get('version')!r}")
    schema = Schema.from_dict(doc["schema"])
    encoding = build_encoding(schema)
    fingerprint = encoding_fingerprint(encoding)
    if doc["encoding_fingerprint"] != fingerprint:
        raise FitError("encoding fingerprint mismatch; schema changed since fitting")
    f_ml_doc = doc["f_ml"]
    f_ml = (
        LogisticModel.from_dict(f_ml_doc)
        if f_ml_doc["kind"] == "logistic"
        else LinearModel.from_dict(f_ml_doc)
    )
    return FittedComponents(
        schema=schema,
        encoding=encoding,
        f_ml=f_ml,
        p_s=SensitiveDistribution.from_dict(doc["p_s"]),
        g=AttributeRegression.from_dict(doc["g"]),
    )

"""Predictive validity: do topic proportions predict the group label?

A multinomial logit maps per-entity topic proportions to the entity's group.
Because proportion rows sum to 1 an intercept would be collinear, so there
is none, and the first class's coefficient row is pinned to zero (the
reference-class gauge). AIC therefore counts (S-1)*K parameters. A small
ridge keeps the separable one-hot designs of the cluster family finite.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
import numpy as np
from scipy.optimize import minimize

from .corpus import Corpus
from .errors import DegenerateSplit, MissingEntityKey, NonConvergence
from .lda import TopicModel

log = logging.getLogger(__name__)

_ROW_SUM_TOL = 1e-9


@dataclass
class ValidityDesign:
    """Per-entity topic proportions with group labels."""

    X: np.ndarray  # N x K, rows sum to 1
    y: list[str]
    entity_ids: list[str]

    def __post_init__(self) -> None:
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.X.ndim != 2 or self.X.shape[0] != len(self.y) or not self.y:
            raise ValueError("X rows must align with (non-empty) y")
        if len(self.entity_ids) != len(self.y):
            raise ValueError("entity_ids must align with y")
        bad = np.abs(self.X.sum(axis=1) - 1.0) > _ROW_SUM_TOL
        if np.any(bad):
            raise ValueError(f"{int(bad.sum())} design row(s) do not sum to 1")
        if len(set(self.y)) < 2:
            raise ValueError("need at least two classes")

    @property
    def classes(self) -> list[str]:
        return sorted(set(self.y))

    def class_indices(self) -> np.ndarray:
        lookup = {c: i for i, c in enumerate(self.classes)}
        return np.array([lookup[label] for label in self.y], dtype=np.int64)

    def subset(self, rows: np.ndarray) -> "ValidityDesign":
        return ValidityDesign(
            X=self.X[rows],
            y=[self.y[i] for i in rows],
            entity_ids=[self.entity_ids[i] for i in rows],
        )


def _single_value(meta: dict[str, list[str]], key: str, owner: str) -> str:
    vals = meta.get(key, [])
    if len(vals) != 1:
        raise MissingEntityKey(
            f"{owner} needs exactly one value for key {key!r}, found {vals!r}"
        )
    return vals[0]


def design_from_model(
    model: TopicModel,
    corpus: Corpus,
    entity_key: str,
    label_key: str,
    mode: str = "aggregated",
) -> ValidityDesign:
    """Build the validity design from a fitted model and its corpus.

    aggregated: each corpus document is one entity; its row is the
    document's theta row. unit_mean: documents are units; an entity's row
    is the mean of its units' theta rows (entities in lexicographic order).
    Labels must be single-valued and, in unit_mean mode, agree across an
    entity's units.
    """
    if model.n_docs != corpus.n_docs:
        raise ValueError("model and corpus document counts differ")

    if mode == "aggregated":
        entity_ids = []
        labels = []
        for doc in corpus.documents:
            entity_ids.append(_single_value(doc.metadata, entity_key, f"document {doc.doc_id!r}"))
            labels.append(_single_value(doc.metadata, label_key, f"document {doc.doc_id!r}"))
        return ValidityDesign(X=model.theta.copy(), y=labels, entity_ids=entity_ids)

    if mode != "unit_mean":
        raise ValueError(f"unknown mode {mode!r}")

    members: dict[str, list[int]] = {}
    label_of: dict[str, str] = {}
    for i, doc in enumerate(corpus.documents):
        ent = _single_value(doc.metadata, entity_key, f"document {doc.doc_id!r}")
        lab = _single_value(doc.metadata, label_key, f"document {doc.doc_id!r}")
        if label_of.setdefault(ent, lab) != lab:
            raise MissingEntityKey(
                f"entity {ent!r} has conflicting {label_key!r} values"
            )
        members.setdefault(ent, []).append(i)

    entities = sorted(members)
    X = np.empty((len(entities), model.n_topics), dtype=np.float64)
    for row, ent in enumerate(entities):
        X[row] = model.theta[members[ent]].mean(axis=0)
    return ValidityDesign(X=X, y=[label_of[e] for e in entities], entity_ids=entities)


@dataclass
class LogitFit:
    B: np.ndarray  # S x K, reference row 0 fixed at zero
    classes: list[str]
    log_likelihood: float
    aic: float
    ridge: float
    converged: bool
    grad_norm: float
    n_iter: int
    objective_trace: list[float] | None = None  # -penalized logL per iterate


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _neg_penalized(
    beta_flat: np.ndarray,
    X: np.ndarray,
    y_idx: np.ndarray,
    n_classes: int,
    ridge: float,
) -> tuple[float, np.ndarray]:
    n, k = X.shape
    beta = beta_flat.reshape(n_classes - 1, k)
    B = np.vstack([np.zeros((1, k)), beta])
    logp = _log_softmax(X @ B.T)
    loglik = float(logp[np.arange(n), y_idx].sum())
    penalized = loglik - 0.5 * ridge * float((beta**2).sum())

    p = np.exp(logp)
    ind = np.zeros((n, n_classes))
    ind[np.arange(n), y_idx] = 1.0
    grad = (ind - p).T @ X  # S x K
    grad = grad[1:] - ridge * beta
    return -penalized, -grad.ravel()


def fit_multinomial_logit(
    design: ValidityDesign,
    ridge: float = 1e-8,
    *,
    max_iter: int = 10_000,
    grad_tol: float = 1e-6,
    strict: bool = False,
    trace: bool = False,
) -> LogitFit:
    """Maximize the ridge-penalized multinomial log-likelihood.

    L-BFGS from a zero start, stopping at max|gradient| < `grad_tol` or
    `max_iter` iterations; deterministic. The reported log-likelihood and
    AIC are unpenalized: aic = 2*(S-1)*K - 2*logL. With `strict`,
    non-convergence raises instead of being flagged. With `trace`, the
    negative penalized objective is recorded at every accepted iterate.
    """
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    classes = design.classes
    y_idx = design.class_indices()
    n_classes = len(classes)
    n, k = design.X.shape

    objective_trace: list[float] | None = [] if trace else None
    callback = None
    if trace:
        def callback(xk: np.ndarray) -> None:
            f, _ = _neg_penalized(xk, design.X, y_idx, n_classes, ridge)
            objective_trace.append(f)

    result = minimize(
        _neg_penalized,
        np.zeros((n_classes - 1) * k),
        args=(design.X, y_idx, n_classes, ridge),
        jac=True,
        method="L-BFGS-B",
        callback=callback,
        options={"maxiter": max_iter, "maxfun": 10 * max_iter,
                 "gtol": grad_tol, "ftol": 1e-15},
    )
    beta = result.x.reshape(n_classes - 1, k)
    B = np.vstack([np.zeros((1, k)), beta])

    logp = _log_softmax(design.X @ B.T)
    loglik = float(logp[np.arange(n), y_idx].sum())
    _, neg_grad = _neg_penalized(result.x, design.X, y_idx, n_classes, ridge)
    grad_norm = float(np.abs(neg_grad).max())
    converged = grad_norm < grad_tol
    if strict and not converged:
        raise NonConvergence(grad_norm, max_iter)

    return LogitFit(
        B=B,
        classes=classes,
        log_likelihood=loglik,
        aic=2.0 * (n_classes - 1) * k - 2.0 * loglik,
        ridge=ridge,
        converged=converged,
        grad_norm=grad_norm,
        n_iter=int(result.nit),
        objective_trace=objective_trace,
    )


def predict(fit: LogitFit, X: np.ndarray) -> list[str]:
    """Argmax class per row; ties go to the lowest class id."""
    scores = np.asarray(X, dtype=np.float64) @ fit.B.T
    return [fit.classes[i] for i in np.argmax(scores, axis=1)]


@dataclass
class SplitResult:
    accuracy: float
    n_train: int
    n_test: int
    n_unseen_class_rows: int
    fit: LogitFit


def split_accuracy(
    design: ValidityDesign,
    train_fraction: float = 0.75,
    seed: int = 0,
    ridge: float = 1e-8,
    *,
    train_count: int | None = None,
    strict: bool = False,
) -> SplitResult:
    """Seeded uniform train/test split, fit on train, accuracy on test.

    `train_count` overrides the fraction to reproduce fixed-size splits.
    Test rows whose class never appears in training are reported and scored
    as incorrect.
    """
    n = design.X.shape[0]
    if train_count is not None:
        n_train = train_count
    else:
        n_train = int(round(train_fraction * n))
    if not 0 < n_train < n:
        raise DegenerateSplit(
            f"split leaves an empty side (n={n}, n_train={n_train})"
        )

    rng = np.random.Generator(np.random.PCG64(seed))
    order = rng.permutation(n)
    train_rows, test_rows = order[:n_train], order[n_train:]

    fit = fit_multinomial_logit(design.subset(train_rows), ridge=ridge, strict=strict)
    test_y = [design.y[i] for i in test_rows]
    known = set(fit.classes)
    n_unseen = sum(1 for label in test_y if label not in known)
    if n_unseen:
        log.warning("%d test row(s) have classes unseen in training", n_unseen)

    predictions = predict(fit, design.X[test_rows])
    correct = sum(1 for p, t in zip(predictions, test_y) if p == t)
    return SplitResult(
        accuracy=correct / len(test_rows),
        n_train=int(n_train),
        n_test=int(len(test_rows)),
        n_unseen_class_rows=n_unseen,
        fit=fit,
    )

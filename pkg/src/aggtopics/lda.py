"""Collapsed-Gibbs latent Dirichlet allocation.

This is the probabilistic topic-model family of the toolkit. Estimates are
taken from the final sampler state by default, which keeps a fit a pure
function of (corpus, config); averaging over the last few thinned states is
available for users who prefer lower-variance estimates.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _gibbs
from .corpus import Corpus
from .errors import InvalidConfig
from .seeds import splitmix64_pair


@dataclass(frozen=True)
class LdaConfig:
    n_topics: int
    alpha: float | None = None  # None -> 50 / n_topics
    eta: float = 0.01
    iterations: int = 2000
    burn_in: int = 0
    seed: int = 0
    average_last: int = 0  # 0 -> final-state estimates
    thin: int = 1

    @property
    def resolved_alpha(self) -> float:
        return 50.0 / self.n_topics if self.alpha is None else self.alpha

    def validate(self) -> None:
        if self.n_topics < 1:
            raise InvalidConfig(f"n_topics must be >= 1, got {self.n_topics}")
        if self.resolved_alpha <= 0 or self.eta <= 0:
            raise InvalidConfig("alpha and eta must be positive")
        if self.burn_in < 0 or self.iterations <= self.burn_in:
            raise InvalidConfig(
                f"need iterations > burn_in >= 0, got "
                f"iterations={self.iterations}, burn_in={self.burn_in}"
            )
        if self.thin < 1 or self.average_last < 0:
            raise InvalidConfig("thin must be >= 1 and average_last >= 0")
        if self.average_last > 0:
            span = (self.average_last - 1) * self.thin
            if span > self.iterations - 1 - self.burn_in:
                raise InvalidConfig(
                    "averaging window reaches back past burn_in "
                    f"(average_last={self.average_last}, thin={self.thin})"
                )


@dataclass
class TopicModel:
    """K topic-word distributions plus per-document topic proportions."""

    n_topics: int
    phi: np.ndarray  # K x V, rows sum to 1
    theta: np.ndarray  # D x K, rows sum to 1
    family: str  # "gibbs_lda" | "cluster"
    fit_seconds: float
    doc_ids: list[str] = field(default_factory=list)

    @property
    def n_docs(self) -> int:
        return self.theta.shape[0]

    @property
    def n_terms(self) -> int:
        return self.phi.shape[1]


def _flatten(corpus: Corpus) -> tuple[np.ndarray, np.ndarray]:
    """Token arrays (doc index, term index) in deterministic order."""
    docs: list[int] = []
    terms: list[int] = []
    for d, doc in enumerate(corpus.documents):
        for tid in sorted(doc.counts):
            reps = doc.counts[tid]
            docs.extend([d] * reps)
            terms.extend([tid] * reps)
    return (np.array(docs, dtype=np.int64), np.array(terms, dtype=np.int64))


def fit_lda(
    corpus: Corpus, config: LdaConfig, *, check_invariants: bool = False
) -> TopicModel:
    """Fit LDA by collapsed Gibbs sampling; bit-identical for a given seed.

    theta_dk = (n_dk + alpha) / (n_d + K*alpha) and
    phi_kv = (n_kv + eta) / (n_k + V*eta) from the final sweep's counts
    (or averaged over the last `average_last` thinned states).
    `check_invariants` verifies count conservation after every sweep.
    """
    config.validate()
    if corpus.n_docs == 0:
        raise InvalidConfig("corpus has no documents")

    t0 = time.perf_counter()
    K = config.n_topics
    V = corpus.n_terms
    D = corpus.n_docs
    alpha = config.resolved_alpha
    eta = config.eta

    doc_of, term_of = _flatten(corpus)
    state = np.array(splitmix64_pair(config.seed), dtype=np.uint64)
    z = _gibbs.init_assignments(doc_of.shape[0], K, state)

    n_dk = np.zeros((D, K), dtype=np.int64)
    n_kv = np.zeros((K, V), dtype=np.int64)
    np.add.at(n_dk, (doc_of, z), 1)
    np.add.at(n_kv, (z, term_of), 1)
    n_k = n_kv.sum(axis=1)
    n_d = n_dk.sum(axis=1)

    theta_acc = np.zeros((D, K), dtype=np.float64)
    phi_acc = np.zeros((K, V), dtype=np.float64)
    bad_sweep = _gibbs.run_sweeps(
        doc_of, term_of, z, n_dk, n_kv, n_k, n_d,
        float(alpha), float(eta), config.iterations, state,
        check_invariants, config.average_last, config.thin,
        theta_acc, phi_acc,
    )
    if bad_sweep >= 0:
        raise RuntimeError(f"count conservation violated at sweep {bad_sweep}")

    if config.average_last > 0:
        theta = theta_acc / config.average_last
        phi = phi_acc / config.average_last
    else:
        theta = (n_dk + alpha) / (n_d[:, None] + K * alpha)
        phi = (n_kv + eta) / (n_k[:, None] + V * eta)

    return TopicModel(
        n_topics=K,
        phi=phi,
        theta=theta,
        family="gibbs_lda",
        fit_seconds=time.perf_counter() - t0,
        doc_ids=corpus.doc_ids(),
    )


def mean_theta(model: TopicModel) -> np.ndarray:
    """Corpus-level expected topic proportions (unweighted mean of theta rows)."""
    return model.theta.mean(axis=0)


def relabel_topics(model: TopicModel, perm: Sequence[int]) -> TopicModel:
    """Model with topics renamed: new topic i is old topic perm[i]."""
    perm = np.asarray(perm, dtype=np.int64)
    if sorted(perm.tolist()) != list(range(model.n_topics)):
        raise ValueError("perm is not a permutation of range(n_topics)")
    return TopicModel(
        n_topics=model.n_topics,
        phi=model.phi[perm, :].copy(),
        theta=model.theta[:, perm].copy(),
        family=model.family,
        fit_seconds=model.fit_seconds,
        doc_ids=list(model.doc_ids),
    )


# ---------------------------------------------------------------------------
# model archives
# ---------------------------------------------------------------------------

def _write_matrix(arr: np.ndarray, path: Path, matrix_format: str) -> None:
    if matrix_format == "csv":
        np.savetxt(path.with_suffix(".csv"), arr, fmt="%.17g", delimiter=",")
    elif matrix_format == "f64":
        path.with_suffix(".f64").write_bytes(
            np.ascontiguousarray(arr, dtype="<f8").tobytes()
        )
    else:
        raise ValueError(f"unknown matrix format {matrix_format!r}")


def _read_matrix(stem: Path, shape: tuple[int, int]) -> np.ndarray:
    csv = stem.with_suffix(".csv")
    if csv.exists():
        arr = np.loadtxt(csv, delimiter=",", ndmin=2)
    else:
        raw = stem.with_suffix(".f64").read_bytes()
        arr = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    return arr.reshape(shape)


def save_model(
    model: TopicModel,
    directory: str | Path,
    *,
    config: LdaConfig | None = None,
    matrix_format: str = "csv",
    fit_seconds_override: float | None = None,
) -> None:
    """Write a model archive: model.json header plus phi/theta matrices."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    header = {
        "family": model.family,
        "n_topics": model.n_topics,
        "n_terms": model.n_terms,
        "n_documents": model.n_docs,
        "fit_seconds": (
            model.fit_seconds if fit_seconds_override is None else fit_seconds_override
        ),
        "matrix_format": matrix_format,
        "doc_ids": model.doc_ids,
        "config": asdict(config) if config is not None else None,
    }
    with open(directory / "model.json", "w", encoding="utf-8") as fh:
        json.dump(header, fh, sort_keys=True, indent=2)
        fh.write("\n")
    _write_matrix(model.phi, directory / "phi", matrix_format)
    _write_matrix(model.theta, directory / "theta", matrix_format)


def load_model(directory: str | Path) -> TopicModel:
    directory = Path(directory)
    with open(directory / "model.json", "r", encoding="utf-8") as fh:
        header = json.load(fh)
    K = int(header["n_topics"])
    V = int(header["n_terms"])
    D = int(header["n_documents"])
    return TopicModel(
        n_topics=K,
        phi=_read_matrix(directory / "phi", (K, V)),
        theta=_read_matrix(directory / "theta", (D, K)),
        family=header["family"],
        fit_seconds=float(header["fit_seconds"]),
        doc_ids=[str(x) for x in header.get("doc_ids", [])],
    )

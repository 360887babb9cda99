"""Clustering-based topic models over precomputed embeddings.

The pipeline is: pool unit embeddings to document level (mean), optionally
reduce dimension with PCA, k-means cluster, then represent each cluster by
its top class-based TF-IDF terms with stop words removed. Embeddings are
always external inputs; no encoder runs here.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import Corpus, Vocabulary, is_stopword
from .errors import KTooLarge, MissingEmbedding
from .lda import TopicModel


@dataclass
class EmbeddingMatrix:
    ids: list[str]
    vectors: np.ndarray  # N x d float64

    def __post_init__(self) -> None:
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or len(self.ids) != self.vectors.shape[0]:
            raise ValueError("ids and vectors must align row-wise")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("embedding ids must be unique")
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError("embedding vectors contain non-finite entries")

    @property
    def d(self) -> int:
        return self.vectors.shape[1]

    def row_index(self) -> dict[str, int]:
        return {uid: i for i, uid in enumerate(self.ids)}


@dataclass
class KMeansResult:
    assignments: np.ndarray  # N, int
    centroids: np.ndarray  # K x d
    inertia: float
    inertia_history: list[float]
    n_iter: int


@dataclass
class ClusterModel:
    """Hard-assignment topic model with c-TF-IDF topic representations."""

    n_topics: int
    assignments: np.ndarray  # one cluster id per corpus document
    centroids: np.ndarray
    representations: list[list[tuple[str, float]]]  # per cluster, top (token, score)
    model: TopicModel  # family="cluster": one-hot theta, tf-based phi
    inertia: float
    inertia_history: list[float] = field(default_factory=list)


def pool_embeddings(
    emb: EmbeddingMatrix,
    grouping: Mapping[str, str] | Iterable[tuple[str, str]],
) -> EmbeddingMatrix:
    """Mean-pool unit embeddings into one row per group.

    `grouping` maps unit ids to group ids; passing (unit_id, group) pairs
    instead lets one unit feed several groups (multi-valued keys). Groups
    come out in lexicographic order. Every grouped unit must have an
    embedding row.
    """
    pairs = grouping.items() if isinstance(grouping, Mapping) else grouping
    index = emb.row_index()
    members: dict[str, list[int]] = {}
    for uid, group in pairs:
        row = index.get(uid)
        if row is None:
            raise MissingEmbedding(f"no embedding row for unit {uid!r}")
        members.setdefault(group, []).append(row)

    groups = sorted(members)
    pooled = np.empty((len(groups), emb.d), dtype=np.float64)
    for i, g in enumerate(groups):
        pooled[i] = emb.vectors[members[g]].mean(axis=0)
    return EmbeddingMatrix(ids=groups, vectors=pooled)


def pca_reduce(vectors: np.ndarray, n_components: int) -> np.ndarray:
    """Project onto the top principal components (deterministic signs)."""
    X = vectors - vectors.mean(axis=0, keepdims=True)
    _, _, vt = np.linalg.svd(X, full_matrices=False)
    comps = vt[:n_components]
    # fix signs so the largest-|loading| coordinate of each component is positive
    for row in comps:
        j = np.argmax(np.abs(row))
        if row[j] < 0:
            row *= -1.0
    return X @ comps.T


def _plus_plus_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centroids[0] = X[first]
    d2 = ((X - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # all remaining points coincide with a centroid; take the first such
            idx = int(np.argmax(d2 == d2.max()))
        else:
            u = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(d2), u, side="right"))
            idx = min(idx, n - 1)
        centroids[i] = X[idx]
        d2 = np.minimum(d2, ((X - centroids[i]) ** 2).sum(axis=1))
    return centroids


def kmeans(
    vectors: np.ndarray | EmbeddingMatrix,
    k: int,
    seed: int,
    max_iters: int = 300,
    tol: float = 1e-8,
) -> KMeansResult:
    """Lloyd's algorithm with k-means++ initialization.

    Deterministic for a given seed: argmin ties go to the lowest cluster id
    and empty clusters are repaired by stealing the point farthest from its
    assigned centroid. Stops when the largest centroid shift drops below
    `tol` or after `max_iters` iterations.
    """
    X = vectors.vectors if isinstance(vectors, EmbeddingMatrix) else np.asarray(vectors, dtype=np.float64)
    n = X.shape[0]
    if k > n:
        raise KTooLarge(f"k={k} exceeds the number of points ({n})")

    rng = np.random.Generator(np.random.PCG64(seed))
    centroids = _plus_plus_init(X, k, rng)

    assignments = np.zeros(n, dtype=np.int64)
    history: list[float] = []
    n_iter = 0
    for n_iter in range(1, max_iters + 1):
        d2 = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        assignments = np.argmin(d2, axis=1)  # ties -> lowest cluster id
        point_d2 = d2[np.arange(n), assignments]

        for c in range(k):  # repair empty clusters in id order
            if not np.any(assignments == c):
                far = int(np.argmax(point_d2))
                assignments[far] = c
                point_d2[far] = 0.0

        history.append(float(point_d2.sum()))

        new_centroids = np.empty_like(centroids)
        for c in range(k):
            new_centroids[c] = X[assignments == c].mean(axis=0)
        shift = np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max()
        centroids = new_centroids
        if shift < tol:
            break

    inertia = float(
        ((X - centroids[assignments]) ** 2).sum()
    )
    return KMeansResult(
        assignments=assignments,
        centroids=centroids,
        inertia=inertia,
        inertia_history=history,
        n_iter=n_iter,
    )


def ctfidf(
    corpus: Corpus,
    assignments: Sequence[int] | np.ndarray,
    n_clusters: int | None = None,
) -> np.ndarray:
    """Class-based TF-IDF scores, one row per cluster.

    score(v, c) = tf_{v,c} * log(1 + A / f_v) where tf is the count of v in
    cluster c normalized by the cluster's total tokens, f_v is the raw count
    of v over the whole corpus, and A is the average token count per
    cluster. Clusters with no tokens score 0 everywhere.
    """
    assignments = np.asarray(assignments, dtype=np.int64)
    if assignments.shape[0] != corpus.n_docs:
        raise ValueError("assignments must cover all corpus documents")
    k = int(n_clusters) if n_clusters is not None else int(assignments.max()) + 1

    counts = np.zeros((k, corpus.n_terms), dtype=np.float64)
    for doc, c in zip(corpus.documents, assignments):
        for tid, cnt in doc.counts.items():
            counts[c, tid] += cnt

    cluster_totals = counts.sum(axis=1)
    f_v = counts.sum(axis=0)
    avg_tokens = cluster_totals.sum() / k
    with np.errstate(divide="ignore", invalid="ignore"):
        tf = np.where(cluster_totals[:, None] > 0, counts / np.maximum(cluster_totals[:, None], 1.0), 0.0)
        idf = np.log1p(np.where(f_v > 0, avg_tokens / np.maximum(f_v, 1.0), 0.0))
    return tf * idf[None, :]


def top_terms(
    scores: np.ndarray,
    vocabulary: Vocabulary,
    n: int = 10,
    *,
    stopwords: frozenset[str] | None = None,
) -> list[list[tuple[str, float]]]:
    """Top-n (token, score) per cluster, stop words removed, ties lexicographic."""
    reps: list[list[tuple[str, float]]] = []
    for row in scores:
        candidates = [
            (term, float(row[tid]))
            for tid, term in enumerate(vocabulary.terms)
            if not is_stopword(term, stopwords)
        ]
        candidates.sort(key=lambda ts: (-ts[1], ts[0]))
        reps.append(candidates[:n])
    return reps


def theta_from_assignments(
    assignments: Sequence[int] | np.ndarray,
    n_clusters: int,
    mode: str = "aggregated",
    *,
    doc_ids: Sequence[str] | None = None,
    grouping: Mapping[str, str] | None = None,
) -> tuple[list[str], np.ndarray]:
    """Topic-proportion rows from hard cluster assignments.

    aggregated: one one-hot row per document, in the given order.
    unit_share: rows are per-entity shares of that entity's units across
    clusters (requires `grouping` unit_id -> entity); entities come out in
    lexicographic order.
    """
    assignments = np.asarray(assignments, dtype=np.int64)
    if mode == "aggregated":
        ids = list(doc_ids) if doc_ids is not None else [str(i) for i in range(len(assignments))]
        theta = np.zeros((len(assignments), n_clusters), dtype=np.float64)
        theta[np.arange(len(assignments)), assignments] = 1.0
        return ids, theta
    if mode != "unit_share":
        raise ValueError(f"unknown mode {mode!r}")
    if doc_ids is None or grouping is None:
        raise ValueError("unit_share mode needs doc_ids and grouping")
    members: dict[str, list[int]] = {}
    for i, uid in enumerate(doc_ids):
        members.setdefault(grouping[uid], []).append(i)
    entities = sorted(members)
    theta = np.zeros((len(entities), n_clusters), dtype=np.float64)
    for row, ent in enumerate(entities):
        for i in members[ent]:
            theta[row, assignments[i]] += 1.0
        theta[row] /= len(members[ent])
    return entities, theta


def fit_cluster(
    corpus: Corpus,
    embeddings: EmbeddingMatrix,
    n_topics: int,
    seed: int,
    *,
    reduce: str = "none",
    pca_components: int = 5,
    max_iters: int = 300,
    tol: float = 1e-8,
    n_top_terms: int = 10,
) -> ClusterModel:
    """Cluster corpus documents and build their c-TF-IDF representations.

    `embeddings` must contain a row for every corpus document id (pool
    first when the corpus is aggregated). phi rows of the embedded
    TopicModel are the clusters' normalized term-count distributions
    (uniform for an empty cluster, keeping rows stochastic); theta rows are
    one-hot.
    """
    t0 = time.perf_counter()
    index = embeddings.row_index()
    rows = []
    for doc in corpus.documents:
        r = index.get(doc.doc_id)
        if r is None:
            raise MissingEmbedding(f"no embedding row for document {doc.doc_id!r}")
        rows.append(r)
    X = embeddings.vectors[rows]
    if reduce == "pca":
        X = pca_reduce(X, min(pca_components, X.shape[1]))
    elif reduce != "none":
        raise ValueError(f"unknown reduction {reduce!r}")

    km = kmeans(X, n_topics, seed, max_iters=max_iters, tol=tol)
    scores = ctfidf(corpus, km.assignments, n_clusters=n_topics)
    reps = top_terms(scores, corpus.vocabulary, n=n_top_terms)

    counts = np.zeros((n_topics, corpus.n_terms), dtype=np.float64)
    for doc, c in zip(corpus.documents, km.assignments):
        for tid, cnt in doc.counts.items():
            counts[c, tid] += cnt
    totals = counts.sum(axis=1)
    phi = np.where(
        totals[:, None] > 0,
        counts / np.maximum(totals[:, None], 1.0),
        1.0 / corpus.n_terms,
    )
    _, theta = theta_from_assignments(
        km.assignments, n_topics, "aggregated", doc_ids=corpus.doc_ids()
    )

    model = TopicModel(
        n_topics=n_topics,
        phi=phi,
        theta=theta,
        family="cluster",
        fit_seconds=time.perf_counter() - t0,
        doc_ids=corpus.doc_ids(),
    )
    return ClusterModel(
        n_topics=n_topics,
        assignments=km.assignments,
        centroids=km.centroids,
        representations=reps,
        model=model,
        inertia=km.inertia,
        inertia_history=km.inertia_history,
    )


# ---------------------------------------------------------------------------
# embedding I/O
# ---------------------------------------------------------------------------

def load_embeddings(path: str | Path) -> EmbeddingMatrix:
    """Read embeddings from CSV (`id,dim0,...`) or raw f64 + JSON sidecar."""
    path = Path(path)
    if path.suffix == ".csv":
        ids: list[str] = []
        rows: list[list[float]] = []
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if not header or header[0] != "id":
                raise ValueError(f"{path}: expected header starting with 'id'")
            for rec in reader:
                if not rec:
                    continue
                ids.append(rec[0])
                rows.append([float(x) for x in rec[1:]])
        return EmbeddingMatrix(ids=ids, vectors=np.array(rows, dtype=np.float64))
    sidecar = path.with_suffix(path.suffix + ".json")
    with open(sidecar, "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    ids = [str(x) for x in meta["ids"]]
    d = int(meta["d"])
    vectors = np.frombuffer(path.read_bytes(), dtype="<f8").reshape(len(ids), d)
    return EmbeddingMatrix(ids=ids, vectors=vectors.copy())


def save_embeddings(emb: EmbeddingMatrix, path: str | Path) -> None:
    path = Path(path)
    if path.suffix == ".csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id"] + [f"dim{i}" for i in range(emb.d)])
            for uid, row in zip(emb.ids, emb.vectors):
                writer.writerow([uid] + [repr(float(x)) for x in row])
        return
    path.write_bytes(np.ascontiguousarray(emb.vectors, dtype="<f8").tobytes())
    sidecar = path.with_suffix(path.suffix + ".json")
    with open(sidecar, "w", encoding="utf-8") as fh:
        json.dump({"ids": emb.ids, "d": emb.d}, fh, sort_keys=True)
        fh.write("\n")

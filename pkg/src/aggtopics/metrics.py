"""Topic summaries and model-selection metrics.

FREX scores a word within a topic by the weighted harmonic mean of two
within-topic ECDF ranks: one over the word's exclusivity (its share of the
word's probability mass across topics) and one over its frequency (phi).
Semantic coherence is the standard co-document-frequency score; exclusivity
of a topic is the mean FREX of its top words at a higher exclusivity weight.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import Corpus
from .errors import DegenerateWord
from .lda import LdaConfig, TopicModel, fit_lda, mean_theta
from .seeds import derive_seed


def _ecdf_rows(x: np.ndarray) -> np.ndarray:
    """Row-wise empirical CDF values: share of entries <= each entry."""
    n = x.shape[1]
    out = np.empty_like(x, dtype=np.float64)
    for i, row in enumerate(x):
        out[i] = np.searchsorted(np.sort(row), row, side="right") / n
    return out


def frex(phi: np.ndarray, w: float = 0.5) -> np.ndarray:
    """FREX score matrix for a row-stochastic topic-word matrix.

    Exclusivity e_kv = phi_kv / sum_j phi_jv; the score is
    1 / (w / ECDF_k(e)_v + (1-w) / ECDF_k(phi)_v), computed within each
    topic. ECDF values lie in (0, 1], so the score is always defined.
    """
    phi = np.asarray(phi, dtype=np.float64)
    col = phi.sum(axis=0, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        excl = np.where(col > 0, phi / np.where(col > 0, col, 1.0), 0.0)
    ecdf_e = _ecdf_rows(excl)
    ecdf_f = _ecdf_rows(phi)
    return 1.0 / (w / ecdf_e + (1.0 - w) / ecdf_f)


def top_words_by_frex(
    phi: np.ndarray,
    terms: Sequence[str],
    w: float = 0.5,
    n: int = 10,
) -> list[list[str]]:
    """Per-topic top-n terms by FREX; ties broken lexicographically."""
    scores = frex(phi, w)
    out: list[list[str]] = []
    for row in scores:
        order = sorted(range(len(terms)), key=lambda v: (-row[v], terms[v]))
        out.append([terms[v] for v in order[:n]])
    return out


def _top_ids_by_phi(phi_row: np.ndarray, m: int) -> list[int]:
    # term ids are lexicographic, so ties resolve lexicographically
    order = np.lexsort((np.arange(phi_row.shape[0]), -phi_row))
    return order[:m].tolist()


def semantic_coherence(model: TopicModel, corpus: Corpus, m: int = 10) -> np.ndarray:
    """Co-occurrence coherence of each topic's top-m words (by phi).

    C_k = sum_{i=2..m} sum_{j<i} log((D(v_i, v_j) + 1) / D(v_j)) with D the
    document frequency / co-document frequency in the fitted corpus.
    """
    m = min(m, corpus.n_terms)
    term_sets = corpus.term_sets()
    doc_freq = np.zeros(corpus.n_terms, dtype=np.int64)
    for s in term_sets:
        for tid in s:
            doc_freq[tid] += 1

    scores = np.zeros(model.n_topics, dtype=np.float64)
    for k in range(model.n_topics):
        top = _top_ids_by_phi(model.phi[k], m)
        co = np.zeros((m, m), dtype=np.int64)
        pos = {tid: i for i, tid in enumerate(top)}
        for s in term_sets:
            present = [pos[tid] for tid in top if tid in s]
            for a_i in range(len(present)):
                for b_i in range(a_i + 1, len(present)):
                    co[present[a_i], present[b_i]] += 1
                    co[present[b_i], present[a_i]] += 1
        total = 0.0
        for i in range(1, m):
            for j in range(i):
                dj = doc_freq[top[j]]
                if dj == 0:
                    raise DegenerateWord(
                        f"term id {top[j]} has zero document frequency"
                    )
                total += np.log((co[i, j] + 1.0) / dj)
        scores[k] = total
    return scores


def topic_exclusivity(
    phi: np.ndarray, m: int = 10, w_ex: float = 0.7
) -> np.ndarray:
    """Mean FREX (weight w_ex) over each topic's top-m FREX words."""
    scores = frex(phi, w_ex)
    m = min(m, phi.shape[1])
    out = np.empty(phi.shape[0], dtype=np.float64)
    for k, row in enumerate(scores):
        order = np.lexsort((np.arange(row.shape[0]), -row))
        out[k] = row[order[:m]].mean()
    return out


@dataclass
class TopicSummary:
    topic: int
    top_words: list[str]
    expected_proportion: float
    coherence: float
    exclusivity: float


def summarize(
    model: TopicModel,
    corpus: Corpus,
    *,
    n_words: int = 10,
    frex_weight: float = 0.5,
    coherence_m: int = 10,
    exclusivity_m: int = 10,
    exclusivity_weight: float = 0.7,
    representations: list[list[tuple[str, float]]] | None = None,
) -> list[TopicSummary]:
    """Per-topic summaries.

    Top words come from FREX for the Gibbs family; pass the cluster
    family's c-TF-IDF `representations` to use those instead.
    """
    if representations is not None:
        tops = [[t for t, _ in rep[:n_words]] for rep in representations]
    else:
        tops = top_words_by_frex(
            model.phi, corpus.vocabulary.terms, w=frex_weight, n=n_words
        )
    props = mean_theta(model)
    coh = semantic_coherence(model, corpus, m=coherence_m)
    excl = topic_exclusivity(model.phi, m=exclusivity_m, w_ex=exclusivity_weight)
    return [
        TopicSummary(
            topic=k,
            top_words=tops[k],
            expected_proportion=float(props[k]),
            coherence=float(coh[k]),
            exclusivity=float(excl[k]),
        )
        for k in range(model.n_topics)
    ]


@dataclass
class SweepRow:
    n_topics: int
    mean_coherence: float
    mean_exclusivity: float
    fit_seconds: float


def sweep(
    corpus: Corpus,
    family: str,
    k_values: Sequence[int],
    seeds: int | Sequence[int],
    *,
    lda_options: dict | None = None,
    embeddings=None,
    coherence_m: int = 10,
    exclusivity_m: int = 10,
    exclusivity_weight: float = 0.7,
    jobs: int = 1,
) -> list[SweepRow]:
    """Fit one model per K and report average coherence and exclusivity.

    `seeds` is either one base seed (per-K seeds are derived from it) or an
    explicit list aligned with `k_values`. Fits are independent, so `jobs`
    may run them concurrently; rows always come back in `k_values` order.
    They trace the coherence-exclusivity frontier used to pick K.
    """
    if isinstance(seeds, int):
        seed_list = [derive_seed(seeds, "sweep", family, k) for k in k_values]
    else:
        seed_list = list(seeds)
        if len(seed_list) != len(k_values):
            raise ValueError("seeds list must align with k_values")
    if family == "cluster" and embeddings is None:
        raise ValueError("cluster sweep requires embeddings")
    if family not in ("gibbs_lda", "cluster"):
        raise ValueError(f"unknown family {family!r}")

    def one(k: int, seed: int) -> SweepRow:
        t0 = time.perf_counter()
        if family == "gibbs_lda":
            cfg = LdaConfig(n_topics=k, seed=seed, **(lda_options or {}))
            model = fit_lda(corpus, cfg)
        else:
            from .cluster import fit_cluster  # lazy: avoids cycle at import time

            model = fit_cluster(corpus, embeddings, k, seed).model
        elapsed = time.perf_counter() - t0
        coh = semantic_coherence(model, corpus, m=coherence_m)
        excl = topic_exclusivity(model.phi, m=exclusivity_m, w_ex=exclusivity_weight)
        return SweepRow(
            n_topics=k,
            mean_coherence=float(coh.mean()),
            mean_exclusivity=float(excl.mean()),
            fit_seconds=elapsed,
        )

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(one, k_values, seed_list))
    return [one(k, seed) for k, seed in zip(k_values, seed_list)]

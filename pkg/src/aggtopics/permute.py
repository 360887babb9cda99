"""Permutation robustness test for aggregation effects.

Each replicate shuffles the aggregation labels across units (preserving
every group's size), rebuilds the corpus, refits the model, and counts
group-related topics. If the real aggregation's count falls outside the
replicates' 95% confidence interval for the mean, the aggregation effect
is not explained by document length alone.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import t as student_t

from .aggregate import DocumentDefinition, aggregate_units
from .cluster import EmbeddingMatrix, fit_cluster, pool_embeddings
from .corpus import RawUnit, build_corpus
from .labeler import GroupDictionary, label_topics
from .lda import LdaConfig, fit_lda
from .metrics import summarize

_MASK64 = (1 << 64) - 1


@dataclass
class PermutationResult:
    replicate_counts: list[int]
    mean: float
    sd: float
    ci_low: float
    ci_high: float
    actual_count: int
    outside_ci: bool
    seeds: list[int]
    ci_multiplier: float


def ci_summary(
    counts: Sequence[int],
    actual_count: int,
    seeds: Sequence[int],
    use_t_quantile: bool = False,
) -> PermutationResult:
    """CI for the mean of replicate counts: mean +/- m * sd / sqrt(R).

    sd uses the sample (n-1) denominator; m is 1.96 or the 97.5% Student-t
    quantile with R-1 degrees of freedom. `outside_ci` is true when the
    actual count falls outside the closed interval.
    """
    arr = np.array(counts, dtype=np.float64)
    n = arr.size
    mean = float(arr.mean())
    sd = float(arr.std(ddof=1))
    mult = float(student_t.ppf(0.975, n - 1)) if use_t_quantile else 1.96
    half = mult * sd / float(np.sqrt(n))
    ci_low, ci_high = mean - half, mean + half
    return PermutationResult(
        replicate_counts=[int(c) for c in counts],
        mean=mean,
        sd=sd,
        ci_low=ci_low,
        ci_high=ci_high,
        actual_count=int(actual_count),
        outside_ci=bool(actual_count < ci_low or actual_count > ci_high),
        seeds=list(seeds),
        ci_multiplier=mult,
    )


def _related_count(
    units: Sequence[RawUnit],
    definition: DocumentDefinition,
    key: str,
    config: LdaConfig,
    dictionary: GroupDictionary,
    *,
    family: str,
    embeddings: EmbeddingMatrix | None,
    min_doc_freq: int,
    n_words: int,
    frex_weight: float,
    stopwords: frozenset[str] | None,
) -> int:
    aggregated = aggregate_units(units, definition)
    corpus = build_corpus(
        aggregated, min_doc_freq,
        definition_name=definition.name, stopwords=stopwords,
    )
    if family == "gibbs_lda":
        model = fit_lda(corpus, config)
        summaries = summarize(corpus=corpus, model=model,
                              n_words=n_words, frex_weight=frex_weight)
    elif family == "cluster":
        if embeddings is None:
            raise ValueError("cluster family requires unit embeddings")
        grouping = _grouping_from_units(units, definition, key)
        pooled = pool_embeddings(embeddings, grouping)
        cm = fit_cluster(corpus, pooled, config.n_topics, config.seed)
        model = cm.model
        summaries = summarize(corpus=corpus, model=model,
                              n_words=n_words, frex_weight=frex_weight,
                              representations=cm.representations)
    else:
        raise ValueError(f"unknown family {family!r}")
    return label_topics(summaries, dictionary, model).n_related


def _grouping_from_units(
    units: Sequence[RawUnit], definition: DocumentDefinition, key: str
) -> dict[str, str]:
    from .aggregate import permute_labels

    if definition.mode == "permuted_by_key":
        assert definition.seed is not None
        units = permute_labels(units, key, definition.seed)
    return {u.unit_id: u.values(key)[0] for u in units if u.values(key)}


def run_permutation_test(
    units: Sequence[RawUnit],
    key: str,
    config: LdaConfig,
    dictionary: GroupDictionary,
    n_replicates: int = 10,
    base_seed: int = 0,
    *,
    family: str = "gibbs_lda",
    embeddings: EmbeddingMatrix | None = None,
    min_doc_freq: int = 3,
    n_words: int = 10,
    frex_weight: float = 0.5,
    use_t_quantile: bool = False,
    jobs: int = 1,
    stopwords: frozenset[str] | None = None,
) -> PermutationResult:
    """Refit under label permutations and test the real count against the CI.

    Replicate r permutes the labels with seed `base_seed XOR r` (r = 1..R),
    so results are deterministic for a given base seed and independent of
    scheduling. The CI is mean +/- m * sd / sqrt(R) with m = 1.96, or the
    97.5% Student-t quantile when `use_t_quantile` is set; sd uses the
    sample (n-1) denominator.
    """
    if n_replicates < 2:
        raise ValueError("need at least 2 replicates")

    common = dict(
        key=key, config=config, dictionary=dictionary, family=family,
        embeddings=embeddings, min_doc_freq=min_doc_freq, n_words=n_words,
        frex_weight=frex_weight, stopwords=stopwords,
    )
    actual_def = DocumentDefinition(name=f"by_{key}", mode="by_key", key=key)
    seeds = [(base_seed ^ r) & _MASK64 for r in range(1, n_replicates + 1)]
    defs = [
        DocumentDefinition(name=f"permuted_{key}_{r}", mode="permuted_by_key",
                           key=key, seed=seed)
        for r, seed in enumerate(seeds, start=1)
    ]

    def one(definition: DocumentDefinition) -> int:
        return _related_count(units, definition, **common)

    actual = one(actual_def)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            counts = list(pool.map(one, defs))
    else:
        counts = [one(d) for d in defs]

    return ci_summary(counts, actual, seeds, use_t_quantile=use_t_quantile)

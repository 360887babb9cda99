"""Document definitions: identity, by-key aggregation, permuted aggregation.

A "document definition" decides what one document means to the topic model:
each unit on its own, or all units sharing a metadata key value concatenated
into one document. The permuted mode shuffles the key labels first, which is
the null model for the robustness test: same group sizes, meaningless groups.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import Corpus, RawUnit
from .errors import EmptyResult, MissingKey, MultiValuedKey

log = logging.getLogger(__name__)

MODES = ("identity", "by_key", "permuted_by_key")


@dataclass(frozen=True)
class DocumentDefinition:
    """A named aggregation scheme mapping units to model documents."""

    name: str
    mode: str
    key: str | None = None
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.mode in ("by_key", "permuted_by_key") and not self.key:
            raise ValueError(f"mode {self.mode!r} requires a metadata key")
        if self.mode == "permuted_by_key" and self.seed is None:
            raise ValueError("permuted_by_key requires a seed")


@dataclass
class LengthStats:
    """Per-document token-count distribution of a corpus."""

    n_documents: int
    token_counts: list[int]
    mean: float
    median: float
    skewness: float


def permute_labels(units: Sequence[RawUnit], key: str, seed: int) -> list[RawUnit]:
    """Randomly reassign the key's labels across units (Fisher-Yates).

    The multiset of labels is preserved exactly, so every group keeps its
    size; only which units carry which label changes. Deterministic for a
    given seed.
    """
    labels: list[str] = []
    for u in units:
        vals = u.values(key)
        if not vals:
            raise MissingKey(f"unit {u.unit_id!r} lacks metadata key {key!r}")
        if len(vals) > 1:
            raise MultiValuedKey(
                f"unit {u.unit_id!r} has {len(vals)} values for {key!r}; "
                "permutation requires a single-valued key"
            )
        labels.append(vals[0])

    rng = np.random.Generator(np.random.PCG64(seed))
    order = rng.permutation(len(labels))  # Fisher-Yates under the hood

    permuted: list[RawUnit] = []
    for u, j in zip(units, order):
        meta = {k: list(v) for k, v in u.metadata.items()}
        meta[key] = [labels[j]]
        permuted.append(RawUnit(unit_id=u.unit_id, text=u.text, metadata=meta))
    return permuted


def aggregate_units(
    units: Sequence[RawUnit], definition: DocumentDefinition
) -> list[RawUnit]:
    """Apply a document definition to raw units.

    identity: units pass through unchanged. by_key: one output unit per
    distinct key value, text = member texts joined by newlines in unit_id
    order; a unit with m key values contributes its full text to all m
    groups. Units missing the key are dropped (count logged). Merged
    metadata keeps a non-grouping value only when every member shares it.
    Output order is lexicographic by key value.
    """
    if definition.mode == "identity":
        return list(units)

    key = definition.key
    assert key is not None
    if definition.mode == "permuted_by_key":
        assert definition.seed is not None
        units = permute_labels(units, key, definition.seed)

    groups: dict[str, list[RawUnit]] = {}
    n_missing = 0
    for u in units:
        vals = u.values(key)
        if not vals:
            n_missing += 1
            continue
        for val in dict.fromkeys(vals):  # distinct values, stable order
            groups.setdefault(val, []).append(u)

    if n_missing:
        log.warning("aggregate %s: dropped %d unit(s) missing key %r",
                    definition.name, n_missing, key)
    if not groups:
        raise EmptyResult(f"no unit carries metadata key {key!r}")

    out: list[RawUnit] = []
    for val in sorted(groups):
        members = sorted(groups[val], key=lambda u: u.unit_id)
        text = "\n".join(m.text for m in members)
        meta: dict[str, list[str]] = {}
        all_keys = set().union(*(m.metadata.keys() for m in members))
        for k in all_keys:
            if k == key:
                continue
            shared = set(members[0].values(k))
            for m in members[1:]:
                shared &= set(m.values(k))
                if not shared:
                    break
            if shared:
                meta[k] = sorted(shared)
        meta[key] = [val]
        out.append(RawUnit(unit_id=val, text=text, metadata=meta))
    return out


def length_stats(corpus: Corpus, estimator: str = "population") -> LengthStats:
    """Token-count statistics per document.

    Skewness defaults to the population moment coefficient
    g1 = m3 / m2^(3/2); `estimator="sample"` applies the usual
    bias-correction factor. A constant sequence has skewness 0.
    """
    counts = np.array([d.total_tokens for d in corpus.documents], dtype=np.float64)
    n = counts.size
    if n == 0:
        raise ValueError("corpus has no documents")
    mean = float(counts.mean())
    dev = counts - mean
    m2 = float(np.mean(dev**2))
    m3 = float(np.mean(dev**3))
    if m2 == 0.0:
        skew = 0.0
    else:
        skew = m3 / m2**1.5
        if estimator == "sample":
            if n < 3:
                raise ValueError("sample skewness needs at least 3 documents")
            skew *= np.sqrt(n * (n - 1)) / (n - 2)
        elif estimator != "population":
            raise ValueError(f"unknown skewness estimator {estimator!r}")
    return LengthStats(
        n_documents=int(n),
        token_counts=[int(c) for c in counts],
        mean=mean,
        median=float(np.median(counts)),
        skewness=float(skew),
    )

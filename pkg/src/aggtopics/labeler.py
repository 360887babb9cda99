"""Group-related term dictionaries and topic labeling.

A topic counts as group-related when its top words contain a dictionary
single token, or both members of a dictionary token pair (order and
adjacency do not matter). Three rules feed the dictionary: group names,
group abbreviations, and tokens whose occurrences concentrate in one
group's documents (the dominance rule).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

from .corpus import Corpus
from .errors import MissingGroupKey
from .lda import TopicModel
from .metrics import TopicSummary

# lowercased tokenization makes these postal abbreviations collide with
# everyday words, so they are excluded from the abbreviation rule by default
AMBIGUOUS_ABBREVIATIONS = frozenset({"in", "or", "me", "oh", "ok", "hi", "de"})


@dataclass
class GroupDictionary:
    """Tokens and token pairs considered group-related, with provenance."""

    singles: dict[str, str]  # token -> rule in {"name", "abbreviation", "dominance"}
    pairs: set[tuple[str, str]]  # sorted 2-tuples
    group_key: str = "group"

    def merged(self, other: "GroupDictionary") -> "GroupDictionary":
        singles = dict(self.singles)
        for tok, rule in other.singles.items():
            singles.setdefault(tok, rule)
        return GroupDictionary(
            singles=singles,
            pairs=set(self.pairs) | set(other.pairs),
            group_key=self.group_key,
        )


def load_state_names() -> tuple[list[str], list[str]]:
    """Bundled U.S. state names (possibly two-word) and postal abbreviations."""
    raw = resources.files("aggtopics.data").joinpath("us_states.json").read_text("utf-8")
    data = json.loads(raw)
    names = [s["name"] for s in data["states"]]
    abbrevs = [s["abbreviation"] for s in data["states"]]
    return names, abbrevs


def build_dictionary(
    corpus: Corpus | None,
    names: Sequence[str],
    abbreviations: Sequence[str],
    dominance_threshold: float = 0.5,
    min_occurrences: int = 5,
    *,
    group_key: str = "group",
    excluded_abbreviations: frozenset[str] = AMBIGUOUS_ABBREVIATIONS,
    count_mode: str = "occurrences",
) -> GroupDictionary:
    """Assemble the group dictionary from names, abbreviations and dominance.

    One-word names become single tokens (rule "name"), two-word names become
    pairs. The dominance rule admits a corpus token when it occurs at least
    `min_occurrences` times and strictly more than `dominance_threshold` of
    its occurrences fall in documents of a single group; `count_mode`
    chooses whether occurrences are token counts ("occurrences") or
    containing documents ("documents"). Pass corpus=None to skip the
    dominance rule.
    """
    singles: dict[str, str] = {}
    pairs: set[tuple[str, str]] = set()

    for name in names:
        parts = name.lower().split()
        if len(parts) == 1:
            singles.setdefault(parts[0], "name")
        elif len(parts) == 2:
            pairs.add(tuple(sorted(parts)))  # type: ignore[arg-type]
        else:
            raise ValueError(f"group name {name!r} has more than two tokens")

    for ab in abbreviations:
        ab = ab.lower()
        if ab not in excluded_abbreviations:
            singles.setdefault(ab, "abbreviation")

    if corpus is not None:
        if count_mode not in ("occurrences", "documents"):
            raise ValueError(f"unknown count_mode {count_mode!r}")
        per_group: dict[int, dict[str, int]] = {}
        totals: dict[int, int] = {}
        for doc in corpus.documents:
            group = doc.single_value(group_key)
            if group is None:
                raise MissingGroupKey(
                    f"document {doc.doc_id!r} lacks single-valued key {group_key!r}"
                )
            for tid, cnt in doc.counts.items():
                weight = cnt if count_mode == "occurrences" else 1
                bucket = per_group.setdefault(tid, {})
                bucket[group] = bucket.get(group, 0) + weight
                totals[tid] = totals.get(tid, 0) + weight
        for tid, total in totals.items():
            if total < min_occurrences:
                continue
            if max(per_group[tid].values()) / total > dominance_threshold:
                singles.setdefault(corpus.vocabulary.terms[tid], "dominance")

    return GroupDictionary(singles=singles, pairs=pairs, group_key=group_key)


@dataclass
class TopicLabelReport:
    n_topics: int
    group_related: list[bool]
    matched: list[list[str]]  # per topic; pairs rendered "a b"
    n_related: int
    mass: float


def label_topics(
    summaries: Sequence[TopicSummary],
    dictionary: GroupDictionary,
    model: TopicModel,
) -> TopicLabelReport:
    """Flag group-related topics and total their proportion mass.

    For the Gibbs family the mass is the summed expected proportion of
    related topics; for the cluster family theta rows are one-hot, so the
    same sum is exactly the share of documents in related clusters.
    """
    related: list[bool] = []
    matched: list[list[str]] = []
    for s in summaries:
        top = set(s.top_words)
        hits = sorted(t for t in top if t in dictionary.singles)
        hits += sorted(
            f"{a} {b}" for a, b in dictionary.pairs if a in top and b in top
        )
        matched.append(hits)
        related.append(bool(hits))

    mean_props = model.theta.mean(axis=0)
    mass = float(sum(mean_props[k] for k, r in enumerate(related) if r))
    return TopicLabelReport(
        n_topics=len(summaries),
        group_related=related,
        matched=matched,
        n_related=sum(related),
        mass=mass,
    )


def save_dictionary(dictionary: GroupDictionary, path: str | Path) -> None:
    payload = {
        "group_key": dictionary.group_key,
        "singles": [
            {"token": tok, "rule": rule}
            for tok, rule in sorted(dictionary.singles.items())
        ],
        "pairs": sorted(list(p) for p in dictionary.pairs),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2, ensure_ascii=False)
        fh.write("\n")


def load_dictionary(path: str | Path) -> GroupDictionary:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return GroupDictionary(
        singles={e["token"]: e["rule"] for e in payload["singles"]},
        pairs={(a, b) for a, b in (sorted(p) for p in payload["pairs"])},
        group_key=payload.get("group_key", "group"),
    )

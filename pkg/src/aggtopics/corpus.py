"""Text ingestion and bag-of-words corpus construction.

The tokenizer is deliberately frozen: NFC normalization, lowercasing, URL
removal, then maximal alphanumeric runs optionally prefixed by exactly one
'#' or '@'. Hashtags and handles survive as single tokens so that
group-vernacular dictionary entries (e.g. "#mnleg") can match them later.
"""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import AllDocumentsEmpty

_URL_RE = re.compile(r"(?:https?://|www\.)\S+")
_TOKEN_RE = re.compile(r"[#@]?[^\W_]+")


def _load_default_stopwords() -> frozenset[str]:
    text = resources.files("aggtopics.data").joinpath("stopwords.txt").read_text("utf-8")
    return frozenset(
        line.strip() for line in text.splitlines()
        if line.strip() and not line.startswith("#")
    )


STOPWORDS: frozenset[str] = _load_default_stopwords()


def tokenize(text: str) -> list[str]:
    """Split text into lowercase tokens.

    A token is a maximal run of alphanumerics, optionally prefixed by one
    '#' or '@'; every other character separates tokens. URLs are dropped
    before tokenization and the input is NFC-normalized first.
    """
    text = unicodedata.normalize("NFC", text).lower()
    text = _URL_RE.sub(" ", text)
    return _TOKEN_RE.findall(text)


def is_stopword(token: str, stopwords: frozenset[str] | None = None) -> bool:
    """True for stop-list members; '#'/'@'-prefixed tokens are exempt."""
    if token[:1] in "#@":
        return False
    return token in (STOPWORDS if stopwords is None else stopwords)


def remove_stopwords(
    tokens: Iterable[str], stopwords: frozenset[str] | None = None
) -> list[str]:
    return [t for t in tokens if not is_stopword(t, stopwords)]


@dataclass(frozen=True)
class RawUnit:
    """One un-aggregated text unit (a tweet, a page) with its metadata.

    Metadata maps key names to lists of string values; multi-valued keys
    (e.g. several recorded birthplaces) are legal and drive duplication
    during aggregation.
    """

    unit_id: str
    text: str
    metadata: Mapping[str, Sequence[str]] = field(default_factory=dict)

    def values(self, key: str) -> list[str]:
        return list(self.metadata.get(key, ()))


@dataclass(frozen=True)
class Vocabulary:
    """Lexicographically ordered term list with dense integer ids."""

    terms: tuple[str, ...]
    index: Mapping[str, int]

    @classmethod
    def from_terms(cls, terms: Iterable[str]) -> "Vocabulary":
        ordered = tuple(sorted(set(terms)))
        return cls(terms=ordered, index={t: i for i, t in enumerate(ordered)})

    def __len__(self) -> int:
        return len(self.terms)


@dataclass
class Document:
    """A bag-of-words document: sparse term counts plus metadata."""

    doc_id: str
    counts: dict[int, int]
    metadata: dict[str, list[str]]

    @property
    def total_tokens(self) -> int:
        return sum(self.counts.values())

    def single_value(self, key: str) -> str | None:
        vals = self.metadata.get(key)
        if vals is not None and len(vals) == 1:
            return vals[0]
        return None


@dataclass
class Corpus:
    vocabulary: Vocabulary
    documents: list[Document]
    definition_name: str

    @property
    def n_docs(self) -> int:
        return len(self.documents)

    @property
    def n_terms(self) -> int:
        return len(self.vocabulary)

    def doc_ids(self) -> list[str]:
        return [d.doc_id for d in self.documents]

    def term_sets(self) -> list[set[int]]:
        """Per-document sets of occurring term ids (for co-occurrence counts)."""
        return [set(d.counts) for d in self.documents]


def build_corpus(
    units: Sequence[RawUnit],
    min_doc_freq: int = 3,
    *,
    definition_name: str = "units",
    stopwords: frozenset[str] | None = None,
) -> Corpus:
    """Tokenize units, drop stop words, prune rare terms, build the corpus.

    The vocabulary keeps exactly the tokens whose document frequency over
    `units` (after stop-word removal) is at least `min_doc_freq`. Units
    left with no surviving tokens are dropped; document order follows the
    input order.
    """
    if min_doc_freq < 1:
        raise ValueError(f"min_doc_freq must be >= 1, got {min_doc_freq}")

    token_lists = [remove_stopwords(tokenize(u.text), stopwords) for u in units]

    doc_freq: dict[str, int] = {}
    for tokens in token_lists:
        for term in set(tokens):
            doc_freq[term] = doc_freq.get(term, 0) + 1

    vocab = Vocabulary.from_terms(
        t for t, df in doc_freq.items() if df >= min_doc_freq
    )

    documents: list[Document] = []
    for unit, tokens in zip(units, token_lists):
        counts: dict[int, int] = {}
        for term in tokens:
            tid = vocab.index.get(term)
            if tid is not None:
                counts[tid] = counts.get(tid, 0) + 1
        if counts:
            documents.append(
                Document(
                    doc_id=unit.unit_id,
                    counts=counts,
                    metadata={k: list(v) for k, v in unit.metadata.items()},
                )
            )

    if not documents:
        raise AllDocumentsEmpty(
            f"no unit survived pruning with min_doc_freq={min_doc_freq}"
        )
    return Corpus(vocabulary=vocab, documents=documents, definition_name=definition_name)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def read_units_jsonl(path: str | Path) -> list[RawUnit]:
    """Read RawUnits from JSON-Lines: {"id": str, "text": str, "meta": {...}}."""
    units: list[RawUnit] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            uid = str(rec["id"])
            if uid in seen:
                raise ValueError(f"{path}:{lineno}: duplicate unit id {uid!r}")
            seen.add(uid)
            meta = {
                str(k): [str(v) for v in vals]
                for k, vals in rec.get("meta", {}).items()
            }
            units.append(RawUnit(unit_id=uid, text=str(rec["text"]), metadata=meta))
    return units


def write_units_jsonl(units: Sequence[RawUnit], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for u in units:
            rec = {"id": u.unit_id, "text": u.text, "meta": {k: list(v) for k, v in u.metadata.items()}}
            fh.write(json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n")


def save_corpus(corpus: Corpus, directory: str | Path) -> None:
    """Write a corpus archive: vocabulary.txt + docs.jsonl + corpus.json."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "vocabulary.txt", "w", encoding="utf-8") as fh:
        for term in corpus.vocabulary.terms:
            fh.write(term + "\n")
    with open(directory / "docs.jsonl", "w", encoding="utf-8") as fh:
        for doc in corpus.documents:
            rec = {
                "id": doc.doc_id,
                "counts": [[tid, doc.counts[tid]] for tid in sorted(doc.counts)],
                "meta": doc.metadata,
            }
            fh.write(json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n")
    header = {
        "definition_name": corpus.definition_name,
        "n_documents": corpus.n_docs,
        "n_terms": corpus.n_terms,
    }
    with open(directory / "corpus.json", "w", encoding="utf-8") as fh:
        json.dump(header, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_corpus(directory: str | Path) -> Corpus:
    directory = Path(directory)
    with open(directory / "vocabulary.txt", "r", encoding="utf-8") as fh:
        terms = tuple(line.rstrip("\n") for line in fh if line.rstrip("\n"))
    vocab = Vocabulary(terms=terms, index={t: i for i, t in enumerate(terms)})
    documents: list[Document] = []
    with open(directory / "docs.jsonl", "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            documents.append(
                Document(
                    doc_id=str(rec["id"]),
                    counts={int(t): int(c) for t, c in rec["counts"]},
                    metadata={k: list(v) for k, v in rec.get("meta", {}).items()},
                )
            )
    name = "units"
    header_path = directory / "corpus.json"
    if header_path.exists():
        with open(header_path, "r", encoding="utf-8") as fh:
            name = json.load(fh).get("definition_name", name)
    return Corpus(vocabulary=vocab, documents=documents, definition_name=name)

import numpy as np
import pytest

from aggtopics.corpus import Corpus, Document, RawUnit, Vocabulary, build_corpus


def unit(uid: str, text: str, **meta) -> RawUnit:
    return RawUnit(unit_id=uid, text=text, metadata={k: list(v) for k, v in meta.items()})


def corpus_from_token_docs(docs: dict[str, list[str]], meta: dict | None = None) -> Corpus:
    """Corpus straight from token lists (no stop-word removal, no pruning)."""
    vocab = Vocabulary.from_terms(t for tokens in docs.values() for t in tokens)
    documents = []
    for doc_id, tokens in docs.items():
        counts: dict[int, int] = {}
        for t in tokens:
            counts[vocab.index[t]] = counts.get(vocab.index[t], 0) + 1
        documents.append(
            Document(doc_id=doc_id, counts=counts, metadata=dict((meta or {}).get(doc_id, {})))
        )
    return Corpus(vocabulary=vocab, documents=documents, definition_name="test")


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))


def random_stochastic(rng, rows: int, cols: int) -> np.ndarray:
    m = rng.random((rows, cols)) + 1e-6
    return m / m.sum(axis=1, keepdims=True)


def demo_units(n_states=3, legs_per_state=4, tweets_per_leg=6, seed=7):
    """Small legislator/state-shaped unit set with state names in some tweets."""
    rng = np.random.Generator(np.random.PCG64(seed))
    states = ["wisconsin", "minnesota", "texas"][:n_states]
    fillers = ["budget", "roads", "schools", "parks", "taxes", "jobs", "health", "water"]
    units = []
    for s, state in enumerate(states):
        for l in range(legs_per_state):
            leg = f"L{s}{l}"
            for t in range(tweets_per_leg):
                words = [fillers[i] for i in rng.integers(0, len(fillers), 5)]
                if t % 3 == 0:
                    words.append(state)
                if t % 2 == 0:
                    words.append(f"#{state[:2]}leg")
                units.append(
                    RawUnit(
                        unit_id=f"{leg}t{t}",
                        text=" ".join(words),
                        metadata={"legislator_id": [leg], "state": [state]},
                    )
                )
    return units

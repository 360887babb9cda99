#!/usr/bin/env python3
"""Generate a synthetic grouped corpus (and optional embeddings) for demos.

The units mimic the short-text setting: every unit draws from a shared
background vocabulary, and a slice of each group's units carries the
group's marker tokens. Embeddings, when requested, place units around a
per-group direction so both model families can see the group structure.
"""

import argparse
from pathlib import Path

import numpy as np

from aggtopics.cluster import EmbeddingMatrix, save_embeddings
from aggtopics.corpus import write_units_jsonl
from aggtopics.synthetic import make_grouped_units


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="units JSONL path")
    parser.add_argument("--embeddings", help="optional embeddings CSV path")
    parser.add_argument("--groups", type=int, default=20)
    parser.add_argument("--units-per-group", type=int, default=150)
    parser.add_argument("--background-terms", type=int, default=300)
    parser.add_argument("--markers-per-group", type=int, default=5)
    parser.add_argument("--marked-fraction", type=float, default=0.10)
    parser.add_argument("--tokens-per-unit", type=int, default=15)
    parser.add_argument("--embedding-dim", type=int, default=16)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    syn = make_grouped_units(
        n_groups=args.groups,
        units_per_group=args.units_per_group,
        n_background_terms=args.background_terms,
        markers_per_group=args.markers_per_group,
        marked_fraction=args.marked_fraction,
        tokens_per_unit=args.tokens_per_unit,
        seed=args.seed,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_units_jsonl(syn.units, out)
    print(f"wrote {len(syn.units)} units across {len(syn.groups)} groups -> {out}")
    print("marker tokens:", ", ".join(syn.markers[syn.groups[0]]), "...")

    if args.embeddings:
        rng = np.random.Generator(np.random.PCG64(args.seed + 1))
        directions = {
            g: rng.normal(size=args.embedding_dim) for g in syn.groups
        }
        for g, vec in directions.items():
            directions[g] = vec / np.linalg.norm(vec)
        vectors = np.vstack([
            directions[u.metadata["group"][0]]
            + rng.normal(scale=0.8, size=args.embedding_dim)
            for u in syn.units
        ])
        emb = EmbeddingMatrix(ids=[u.unit_id for u in syn.units], vectors=vectors)
        save_embeddings(emb, args.embeddings)
        print(f"wrote {vectors.shape[0]}x{vectors.shape[1]} embeddings -> {args.embeddings}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

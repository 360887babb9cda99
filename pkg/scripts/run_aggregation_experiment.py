#!/usr/bin/env python3
"""End-to-end synthetic aggregation study.

Generates a grouped corpus, fits the configured model family at the unit
level and aggregated by group, labels marker-related topics, runs the
predictive-validity comparison and the permutation robustness test, and
prints the resulting tables. Everything is deterministic for a given seed.
"""

import argparse
import json
import time
from pathlib import Path

import numpy as np

from aggtopics.aggregate import DocumentDefinition, aggregate_units, length_stats
from aggtopics.corpus import build_corpus
from aggtopics.labeler import GroupDictionary, label_topics
from aggtopics.lda import LdaConfig, fit_lda
from aggtopics.metrics import summarize
from aggtopics.permute import run_permutation_test
from aggtopics.synthetic import make_grouped_units
from aggtopics.validity import (
    ValidityDesign,
    design_from_model,
    fit_multinomial_logit,
    split_accuracy,
)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--k", type=int, default=20, help="topic count")
    parser.add_argument("--groups", type=int, default=20)
    parser.add_argument("--units-per-group", type=int, default=150)
    parser.add_argument("--iterations", type=int, default=300)
    parser.add_argument("--alpha", type=float, default=0.1)
    parser.add_argument("--eta", type=float, default=0.01)
    parser.add_argument("--replicates", type=int, default=10)
    parser.add_argument("--seed", type=int, default=20260810)
    parser.add_argument("--out", help="optional JSON report path")
    args = parser.parse_args()

    t0 = time.perf_counter()
    syn = make_grouped_units(
        n_groups=args.groups, units_per_group=args.units_per_group, seed=args.seed
    )
    dictionary = GroupDictionary(
        singles={m: "name" for m in syn.all_markers()}, pairs=set(), group_key="group"
    )
    config = LdaConfig(
        n_topics=args.k, alpha=args.alpha, eta=args.eta,
        iterations=args.iterations, seed=1,
    )

    unit_corpus = build_corpus(syn.units, 1, definition_name="unit")
    group_units = aggregate_units(
        syn.units, DocumentDefinition(name="group", mode="by_key", key="group")
    )
    group_corpus = build_corpus(group_units, 1, definition_name="group")

    cells = {}
    for name, corpus in (("unit", unit_corpus), ("group", group_corpus)):
        model = fit_lda(corpus, config)
        summaries = summarize(model, corpus)
        labels = label_topics(summaries, dictionary, model)
        stats = length_stats(corpus)
        cells[name] = {
            "model": model,
            "n_documents": corpus.n_docs,
            "n_related": labels.n_related,
            "mass": labels.mass,
            "mean_tokens": stats.mean,
            "skewness": stats.skewness,
            "fit_seconds": model.fit_seconds,
        }

    print(f"\n=== marker-related topics (K={args.k}) ===")
    print(f"{'definition':<12}{'docs':>8}{'related':>9}{'mass':>8}"
          f"{'mean len':>10}{'skew':>8}{'fit s':>8}")
    for name, cell in cells.items():
        print(f"{name:<12}{cell['n_documents']:>8}{cell['n_related']:>9}"
              f"{cell['mass']:>8.2f}{cell['mean_tokens']:>10.1f}"
              f"{cell['skewness']:>8.2f}{cell['fit_seconds']:>8.2f}")

    # predictive validity: per-unit rows from each model, labels = group
    unit_design = design_from_model(
        cells["unit"]["model"], unit_corpus, "unit", "group", "aggregated"
    )
    group_model = cells["group"]["model"]
    group_row = {doc.doc_id: i for i, doc in enumerate(group_corpus.documents)}
    X = np.vstack([
        group_model.theta[group_row[doc.metadata["group"][0]]]
        for doc in unit_corpus.documents
    ])
    group_design = ValidityDesign(
        X=X,
        y=[doc.metadata["group"][0] for doc in unit_corpus.documents],
        entity_ids=[doc.doc_id for doc in unit_corpus.documents],
    )

    print("\n=== predictive validity (75/25 split) ===")
    validity = {}
    for name, design in (("unit", unit_design), ("group", group_design)):
        full = fit_multinomial_logit(design, ridge=1e-8)
        split = split_accuracy(design, train_fraction=0.75, seed=5, ridge=1e-8)
        validity[name] = {"aic": full.aic, "accuracy": split.accuracy,
                          "converged": bool(full.converged)}
        print(f"{name:<12} AIC {full.aic:>12.2f}   accuracy {split.accuracy:>7.1%}")

    print(f"\n=== permutation test ({args.replicates} replicates) ===")
    perm = run_permutation_test(
        syn.units, "group", config, dictionary,
        n_replicates=args.replicates, base_seed=77, min_doc_freq=1,
    )
    print("replicate counts:", perm.replicate_counts)
    print(f"mean {perm.mean:.2f}, sd {perm.sd:.2f}, "
          f"CI [{perm.ci_low:.2f}, {perm.ci_high:.2f}]")
    print(f"actual {perm.actual_count} -> outside CI: {perm.outside_ci}")
    print(f"\ntotal {time.perf_counter() - t0:.1f}s")

    if args.out:
        payload = {
            "cells": {
                name: {k: v for k, v in cell.items() if k != "model"}
                for name, cell in cells.items()
            },
            "validity": validity,
            "permutation": {
                "replicate_counts": perm.replicate_counts,
                "mean": perm.mean,
                "sd": perm.sd,
                "ci_low": perm.ci_low,
                "ci_high": perm.ci_high,
                "actual_count": perm.actual_count,
                "outside_ci": perm.outside_ci,
            },
        }
        Path(args.out).write_text(
            json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        print(f"report -> {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

"""Command-line interface.

Subcommands mirror the pipeline stages so any stage can be run (and
re-run deterministically) in isolation. The AGGTOPICS_SEED environment
variable supplies the default base seed.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from .aggregate import DocumentDefinition, aggregate_units, length_stats
from .cluster import fit_cluster, load_embeddings, pool_embeddings
from .corpus import build_corpus, load_corpus, read_units_jsonl, save_corpus, write_units_jsonl
from .labeler import build_dictionary, label_topics, load_dictionary, load_state_names, save_dictionary
from .lda import LdaConfig, fit_lda, load_model, save_model
from .metrics import TopicSummary, summarize, sweep
from .permute import run_permutation_test
from .pipeline import ExperimentConfig, emit_tables, run_pipeline, write_sweep_csv
from .validity import design_from_model, fit_multinomial_logit, split_accuracy


def _default_seed() -> int:
    return int(os.environ.get("AGGTOPICS_SEED", "0"))


def _dump_json(payload, path: str | None) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _cmd_ingest(args) -> int:
    units = read_units_jsonl(args.units)
    corpus = build_corpus(units, args.min_doc_freq, definition_name=args.definition_name)
    save_corpus(corpus, args.out)
    print(f"ingested {corpus.n_docs} documents, vocabulary {corpus.n_terms} -> {args.out}")
    return 0


def _cmd_aggregate(args) -> int:
    mode = {"identity": "identity", "by_key": "by_key", "permuted": "permuted_by_key"}[args.mode]
    definition = DocumentDefinition(
        name=args.name or f"{args.mode}_{args.key or 'units'}",
        mode=mode,
        key=args.key,
        seed=args.seed if mode == "permuted_by_key" else None,
    )
    units = read_units_jsonl(args.units)
    aggregated = aggregate_units(units, definition)
    write_units_jsonl(aggregated, args.out)
    stats = length_stats(build_corpus(aggregated, 1, definition_name=definition.name))
    print(
        f"{definition.name}: {len(aggregated)} documents, "
        f"mean tokens {stats.mean:.2f}, median {stats.median:.1f}, "
        f"skewness {stats.skewness:.4f} -> {args.out}"
    )
    return 0


def _cmd_fit_lda(args) -> int:
    corpus = load_corpus(args.corpus)
    config = LdaConfig(
        n_topics=args.k,
        alpha=args.alpha,
        eta=args.eta,
        iterations=args.iterations,
        burn_in=args.burn_in,
        seed=args.seed,
        average_last=args.average_last,
        thin=args.thin,
    )
    model = fit_lda(corpus, config)
    save_model(model, args.out, config=config, matrix_format=args.matrix_format)
    print(f"fit gibbs_lda k={args.k} in {model.fit_seconds:.2f}s -> {args.out}")
    return 0


def _cmd_fit_cluster(args) -> int:
    corpus = load_corpus(args.corpus)
    emb = load_embeddings(args.embeddings)
    if args.pool_by:
        if not args.units:
            raise SystemExit("--pool-by requires --units for the grouping metadata")
        units = read_units_jsonl(args.units)
        pairs = [
            (u.unit_id, v) for u in units for v in dict.fromkeys(u.values(args.pool_by))
        ]
        emb = pool_embeddings(emb, pairs)
    cm = fit_cluster(
        corpus, emb, args.k, args.seed,
        reduce=args.reduce, pca_components=args.pca_components,
    )
    save_model(cm.model, args.out, matrix_format=args.matrix_format)
    reps = [[[t, s] for t, s in rep] for rep in cm.representations]
    _dump_json(
        {"representations": reps, "inertia": cm.inertia,
         "assignments": {d: int(c) for d, c in zip(corpus.doc_ids(), cm.assignments)}},
        str(Path(args.out) / "cluster.json"),
    )
    print(f"fit cluster k={args.k} inertia={cm.inertia:.4f} -> {args.out}")
    return 0


def _load_representations(model_dir: str) -> list[list[tuple[str, float]]] | None:
    path = Path(model_dir) / "cluster.json"
    if not path.exists():
        return None
    payload = json.loads(path.read_text(encoding="utf-8"))
    return [[(t, float(s)) for t, s in rep] for rep in payload["representations"]]


def _cmd_summarize(args) -> int:
    corpus = load_corpus(args.corpus)
    model = load_model(args.model)
    summaries = summarize(
        model, corpus,
        n_words=args.n_words,
        frex_weight=args.frex_weight,
        coherence_m=args.coherence_m,
        exclusivity_weight=args.exclusivity_weight,
        representations=_load_representations(args.model),
    )
    _dump_json([dataclasses.asdict(s) for s in summaries], args.out)
    return 0


def _cmd_build_dict(args) -> int:
    names, abbrevs = ([], []) if args.no_state_names else load_state_names()
    corpus = load_corpus(args.corpus) if args.corpus else None
    dictionary = build_dictionary(
        corpus, names, abbrevs,
        dominance_threshold=args.dominance_threshold,
        min_occurrences=args.min_occurrences,
        group_key=args.group_key,
        count_mode=args.count_mode,
    )
    save_dictionary(dictionary, args.out)
    print(
        f"dictionary: {len(dictionary.singles)} single tokens, "
        f"{len(dictionary.pairs)} pairs -> {args.out}"
    )
    return 0


def _cmd_label(args) -> int:
    model = load_model(args.model)
    with open(args.summaries, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    summaries = [TopicSummary(**rec) for rec in raw]
    if args.dict and not args.build_dict:
        dictionary = load_dictionary(args.dict)
    else:
        names, abbrevs = load_state_names()
        corpus = load_corpus(args.corpus) if args.corpus else None
        dictionary = build_dictionary(
            corpus, names, abbrevs, group_key=args.group_key
        )
    report = label_topics(summaries, dictionary, model)
    _dump_json(dataclasses.asdict(report), args.out)
    return 0


def _cmd_validate(args) -> int:
    model = load_model(args.model)
    corpus = load_corpus(args.corpus)
    design = design_from_model(model, corpus, args.entity_key, args.label_key, args.mode)
    full = fit_multinomial_logit(design, ridge=args.ridge)
    split = split_accuracy(
        design, train_fraction=args.train_fraction, seed=args.seed,
        ridge=args.ridge, train_count=args.train_count,
    )
    _dump_json(
        {
            "aic": full.aic,
            "log_likelihood": full.log_likelihood,
            "accuracy": split.accuracy,
            "n_train": split.n_train,
            "n_test": split.n_test,
            "ridge": args.ridge,
            "converged": bool(full.converged and split.fit.converged),
        },
        args.out,
    )
    return 0


def _cmd_permute(args) -> int:
    units = read_units_jsonl(args.units)
    dictionary = load_dictionary(args.dict)
    config = LdaConfig(
        n_topics=args.k, alpha=args.alpha, eta=args.eta,
        iterations=args.iterations, seed=args.seed,
    )
    embeddings = load_embeddings(args.embeddings) if args.embeddings else None
    result = run_permutation_test(
        units, args.key, config, dictionary,
        n_replicates=args.replicates,
        base_seed=args.base_seed,
        family=args.family,
        embeddings=embeddings,
        min_doc_freq=args.min_doc_freq,
        use_t_quantile=args.use_t,
        jobs=args.jobs,
    )
    _dump_json(dataclasses.asdict(result), args.out)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write("kind,value\n")
            for i, c in enumerate(result.replicate_counts, start=1):
                fh.write(f"replicate_{i},{c}\n")
            for kind in ("mean", "sd", "ci_low", "ci_high"):
                fh.write(f"{kind},{repr(getattr(result, kind))}\n")
            fh.write(f"actual_count,{result.actual_count}\n")
            fh.write(f"outside_ci,{str(result.outside_ci).lower()}\n")
    return 0


def _cmd_sweep(args) -> int:
    corpus = load_corpus(args.corpus)
    embeddings = load_embeddings(args.embeddings) if args.embeddings else None
    lda_options = {}
    if args.iterations is not None:
        lda_options["iterations"] = args.iterations
    rows = sweep(
        corpus, args.family, args.k, args.seed,
        lda_options=lda_options, embeddings=embeddings, jobs=args.jobs,
    )
    write_sweep_csv(rows, args.out)
    print(f"swept K={args.k} -> {args.out}")
    return 0


def _cmd_pipeline(args) -> int:
    config = ExperimentConfig.from_json(args.config)
    if args.output_dir:
        config.output_dir = args.output_dir
    if args.units:
        config.units_path = args.units
    if args.base_seed is not None:
        config.base_seed = args.base_seed
    if args.jobs is not None:
        config.jobs = args.jobs
    report = run_pipeline(config)
    ok = sum(1 for c in report.cells if not c.error)
    print(f"pipeline: {ok}/{len(report.cells)} cells ok -> {config.output_dir}")
    return 0 if ok == len(report.cells) else 1


def _cmd_report(args) -> int:
    with open(args.report, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    written = emit_tables(payload, args.out)
    print("wrote " + ", ".join(str(p) for p in written))
    return 0


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aggtopics",
        description="Quantify how document-aggregation choices change topic models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build a corpus archive from units JSONL")
    p.add_argument("--units", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-doc-freq", type=int, default=3, dest="min_doc_freq")
    p.add_argument("--definition-name", default="units", dest="definition_name")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("aggregate", help="apply a document definition to units")
    p.add_argument("--units", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=["identity", "by_key", "permuted"], required=True)
    p.add_argument("--key")
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--name")
    p.set_defaults(func=_cmd_aggregate)

    p = sub.add_parser("fit-lda", help="fit collapsed-Gibbs LDA on a corpus archive")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--eta", type=float, default=0.01)
    p.add_argument("--iterations", type=int, default=2000)
    p.add_argument("--burn-in", type=int, default=0, dest="burn_in")
    p.add_argument("--average-last", type=int, default=0, dest="average_last")
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--matrix-format", choices=["csv", "f64"], default="csv", dest="matrix_format")
    p.set_defaults(func=_cmd_fit_lda)

    p = sub.add_parser("fit-cluster", help="k-means topic model over embeddings")
    p.add_argument("--corpus", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--pool-by", dest="pool_by")
    p.add_argument("--units", help="units JSONL (required with --pool-by)")
    p.add_argument("--reduce", choices=["none", "pca"], default="none")
    p.add_argument("--pca-components", type=int, default=5, dest="pca_components")
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--matrix-format", choices=["csv", "f64"], default="csv", dest="matrix_format")
    p.set_defaults(func=_cmd_fit_cluster)

    p = sub.add_parser("summarize", help="per-topic summaries for a fitted model")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out")
    p.add_argument("--n-words", type=int, default=10, dest="n_words")
    p.add_argument("--frex-weight", type=float, default=0.5, dest="frex_weight")
    p.add_argument("--coherence-m", type=int, default=10, dest="coherence_m")
    p.add_argument("--exclusivity-weight", type=float, default=0.7, dest="exclusivity_weight")
    p.set_defaults(func=_cmd_summarize)

    p = sub.add_parser("build-dict", help="build the group-related term dictionary")
    p.add_argument("--corpus", help="corpus archive for the dominance rule")
    p.add_argument("--out", required=True)
    p.add_argument("--group-key", default="group", dest="group_key")
    p.add_argument("--min-occurrences", type=int, default=5, dest="min_occurrences")
    p.add_argument("--dominance-threshold", type=float, default=0.5, dest="dominance_threshold")
    p.add_argument("--count-mode", choices=["occurrences", "documents"], default="occurrences", dest="count_mode")
    p.add_argument("--no-state-names", action="store_true", dest="no_state_names")
    p.set_defaults(func=_cmd_build_dict)

    p = sub.add_parser("label", help="flag group-related topics from summaries")
    p.add_argument("--summaries", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--dict")
    p.add_argument("--build-dict", action="store_true", dest="build_dict",
                   help="build the dictionary instead of loading --dict")
    p.add_argument("--corpus", help="corpus for the dominance rule when building")
    p.add_argument("--group-key", default="group", dest="group_key")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_label)

    p = sub.add_parser("validate", help="predictive-validity regression")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--entity-key", required=True, dest="entity_key")
    p.add_argument("--label-key", required=True, dest="label_key")
    p.add_argument("--mode", choices=["aggregated", "unit_mean"], default="aggregated")
    p.add_argument("--ridge", type=float, default=1e-8)
    p.add_argument("--train-fraction", type=float, default=0.75, dest="train_fraction")
    p.add_argument("--train-count", type=int, default=None, dest="train_count",
                   help="fixed training-set size overriding --train-fraction")
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--out")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("permute", help="permutation robustness test")
    p.add_argument("--units", required=True)
    p.add_argument("--key", required=True)
    p.add_argument("--dict", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--family", choices=["gibbs_lda", "cluster"], default="gibbs_lda")
    p.add_argument("--embeddings")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--eta", type=float, default=0.01)
    p.add_argument("--iterations", type=int, default=2000)
    p.add_argument("--seed", type=int, default=_default_seed(), help="model fit seed")
    p.add_argument("--base-seed", type=int, default=_default_seed(), dest="base_seed")
    p.add_argument("--replicates", type=int, default=10)
    p.add_argument("--min-doc-freq", type=int, default=3, dest="min_doc_freq")
    p.add_argument("--use-t", action="store_true", dest="use_t")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")
    p.add_argument("--csv")
    p.set_defaults(func=_cmd_permute)

    p = sub.add_parser("sweep", help="coherence/exclusivity frontier over K")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=_int_list, required=True, help="comma-separated topic counts")
    p.add_argument("--family", choices=["gibbs_lda", "cluster"], default="gibbs_lda")
    p.add_argument("--embeddings")
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("pipeline", help="run the full experiment grid from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--units")
    p.add_argument("--base-seed", type=int, default=None, dest="base_seed")
    p.add_argument("--jobs", type=int, default=None, help="max concurrent grid cells")
    p.set_defaults(func=_cmd_pipeline)

    p = sub.add_parser("report", help="re-emit CSV tables from a report.json")
    p.add_argument("--report", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

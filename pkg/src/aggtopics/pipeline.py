"""End-to-end experiment pipeline and report emission.

A run executes every (definition, K) cell of the configured grid: aggregate,
build the corpus, fit, summarize, label, validate, and optionally run the
permutation test, then persists model archives, a top-level report.json and
the summary CSV tables. With `record_timing` off, all timing fields are
written as 0.0 so that re-running an identical config is byte-identical.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import __version__ as _version
from .aggregate import DocumentDefinition, aggregate_units, length_stats
from .cluster import EmbeddingMatrix, fit_cluster, load_embeddings, pool_embeddings
from .corpus import (
    Corpus,
    RawUnit,
    build_corpus,
    read_units_jsonl,
    remove_stopwords,
    save_corpus,
    tokenize,
)
from .errors import AggTopicsError, InvalidConfig
from .labeler import (
    GroupDictionary,
    build_dictionary,
    label_topics,
    load_dictionary,
    load_state_names,
    save_dictionary,
)
from .lda import LdaConfig, fit_lda, save_model
from .metrics import summarize
from .permute import run_permutation_test
from .seeds import derive_seed
from .validity import design_from_model, fit_multinomial_logit, split_accuracy

log = logging.getLogger(__name__)


@dataclass
class ExperimentConfig:
    units_path: str
    output_dir: str
    definitions: list[DocumentDefinition]
    k_values: list[int]
    family: str = "gibbs_lda"
    base_seed: int = 0
    min_doc_freq: int = 3
    prune_before_aggregation: bool = False
    lda_options: dict = field(default_factory=dict)
    embeddings_path: str | None = None
    dictionary_path: str | None = None
    dictionary_build: dict | None = None
    validity_options: dict | None = None
    permutation_options: dict | None = None
    n_words: int = 10
    frex_weight: float = 0.5
    exclusivity_weight: float = 0.7
    coherence_m: int = 10
    matrix_format: str = "csv"
    record_timing: bool = True
    fail_fast: bool = False
    jobs: int = 1

    def validate(self) -> None:
        if not self.definitions:
            raise InvalidConfig("config needs at least one document definition")
        if not self.k_values:
            raise InvalidConfig("config needs at least one topic count")
        if len({d.name for d in self.definitions}) != len(self.definitions):
            raise InvalidConfig("definition names must be unique")
        if self.family not in ("gibbs_lda", "cluster"):
            raise InvalidConfig(f"unknown family {self.family!r}")
        if self.family == "cluster" and not self.embeddings_path:
            raise InvalidConfig("cluster family requires embeddings_path")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw)
        raw["definitions"] = [
            d if isinstance(d, DocumentDefinition) else DocumentDefinition(**d)
            for d in raw.get("definitions", [])
        ]
        return cls(**raw)

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["definitions"] = [dataclasses.asdict(d) for d in self.definitions]
        return out


@dataclass
class CellReport:
    definition: str
    family: str
    n_topics: int
    n_documents: int
    n_terms: int
    length: dict
    n_related: int
    mass: float
    mean_coherence: float
    mean_exclusivity: float
    fit_seconds: float
    model_dir: str
    validity: dict | None = None
    permutation: dict | None = None
    error: str | None = None


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    cells: list[CellReport]
    definition_names: list[str]

    def to_dict(self) -> dict:
        return {
            "tool_version": _version,
            "config": self.config.to_dict(),
            "definitions": self.definition_names,
            "cells": [dataclasses.asdict(c) for c in self.cells],
        }


def _prune_units(units: Sequence[RawUnit], min_doc_freq: int) -> list[RawUnit]:
    """Rewrite unit texts keeping only tokens frequent across units.

    Used by the prune-before-aggregation flag: document frequency is
    computed at the unit level, then units are re-joined from the surviving
    tokens (our tokens round-trip through whitespace joining).
    """
    token_lists = [remove_stopwords(tokenize(u.text)) for u in units]
    df: dict[str, int] = {}
    for tokens in token_lists:
        for t in set(tokens):
            df[t] = df.get(t, 0) + 1
    kept = {t for t, n in df.items() if n >= min_doc_freq}
    return [
        RawUnit(
            unit_id=u.unit_id,
            text=" ".join(t for t in tokens if t in kept),
            metadata=u.metadata,
        )
        for u, tokens in zip(units, token_lists)
    ]


def _resolve_dictionary(
    config: ExperimentConfig, units: Sequence[RawUnit], out_dir: Path
) -> GroupDictionary:
    if config.dictionary_path:
        return load_dictionary(config.dictionary_path)
    build = dict(config.dictionary_build or {})
    use_states = build.pop("use_state_names", True)
    names, abbrevs = load_state_names() if use_states else ([], [])
    group_key = build.pop("group_key", None)
    if group_key:
        unit_corpus = build_corpus(
            units, config.min_doc_freq, definition_name="dictionary-units"
        )
        dictionary = build_dictionary(
            unit_corpus, names, abbrevs, group_key=group_key, **build
        )
    else:
        dictionary = build_dictionary(None, names, abbrevs)
    save_dictionary(dictionary, out_dir / "dictionary.json")
    return dictionary


def _grouping_pairs(units: Sequence[RawUnit], key: str) -> list[tuple[str, str]]:
    return [
        (u.unit_id, v) for u in units for v in dict.fromkeys(u.values(key))
    ]


def _length_dict(corpus: Corpus) -> dict:
    stats = length_stats(corpus)
    return {
        "n_documents": stats.n_documents,
        "mean": stats.mean,
        "median": stats.median,
        "skewness": stats.skewness,
    }


def _validity_report(
    model, corpus: Corpus, definition: DocumentDefinition, options: dict, seed: int
) -> dict:
    opts = dict(options)
    entity_key = opts.pop("entity_key")
    label_key = opts.pop("label_key")
    ridge = opts.pop("ridge", 1e-8)
    train_fraction = opts.pop("train_fraction", 0.75)
    train_count = opts.pop("train_count", None)
    if opts:
        raise InvalidConfig(f"unknown validity options: {sorted(opts)}")
    mode = "unit_mean" if definition.mode == "identity" else "aggregated"
    design = design_from_model(model, corpus, entity_key, label_key, mode)
    full = fit_multinomial_logit(design, ridge=ridge)
    split = split_accuracy(
        design, train_fraction=train_fraction, seed=seed, ridge=ridge,
        train_count=train_count,
    )
    return {
        "mode": mode,
        "n_entities": len(design.entity_ids),
        "n_classes": len(design.classes),
        "aic": full.aic,
        "log_likelihood": full.log_likelihood,
        "ridge": ridge,
        "aic_ridge_caveat": ridge > 0,
        "converged": bool(full.converged and split.fit.converged),
        "accuracy": split.accuracy,
        "n_train": split.n_train,
        "n_test": split.n_test,
        "n_unseen_class_rows": split.n_unseen_class_rows,
    }


def run_pipeline(config: ExperimentConfig) -> ExperimentReport:
    """Execute the full grid and persist a deterministic report tree."""
    config.validate()
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    units = read_units_jsonl(config.units_path)
    min_doc_freq = config.min_doc_freq
    if config.prune_before_aggregation:
        units = _prune_units(units, min_doc_freq)
        min_doc_freq = 1

    dictionary = _resolve_dictionary(config, units, out_dir)
    unit_embeddings: EmbeddingMatrix | None = None
    if config.embeddings_path:
        unit_embeddings = load_embeddings(config.embeddings_path)

    tasks = []
    for definition in config.definitions:
        agg = aggregate_units(units, definition)
        corpus = build_corpus(agg, min_doc_freq, definition_name=definition.name)
        save_corpus(corpus, out_dir / "corpora" / definition.name)
        length = _length_dict(corpus)

        doc_embeddings: EmbeddingMatrix | None = None
        if config.family == "cluster":
            assert unit_embeddings is not None
            if definition.mode == "identity":
                doc_embeddings = unit_embeddings
            else:
                from .aggregate import permute_labels

                src = units
                if definition.mode == "permuted_by_key":
                    assert definition.key is not None and definition.seed is not None
                    src = permute_labels(units, definition.key, definition.seed)
                doc_embeddings = pool_embeddings(
                    unit_embeddings, _grouping_pairs(src, definition.key)
                )

        for k in config.k_values:
            tasks.append((definition, corpus, doc_embeddings, length, k))

    # cells are independent; the numba sampler releases the GIL, so a thread
    # pool gives real cell-level parallelism without changing any output
    cell_parallel = config.jobs > 1 and len(tasks) > 1

    def run_one(task) -> CellReport:
        definition, corpus, doc_embeddings, length, k = task
        cell_name = f"{definition.name}_{config.family}_k{k}"
        model_dir = out_dir / "models" / cell_name
        try:
            return _run_cell(
                config, definition, corpus, dictionary, doc_embeddings,
                unit_embeddings, units, k, length, model_dir,
                permutation_jobs=1 if cell_parallel else config.jobs,
            )
        except (AggTopicsError, ValueError) as exc:
            if config.fail_fast:
                raise
            log.error("cell %s failed: %s", cell_name, exc)
            return CellReport(
                definition=definition.name,
                family=config.family,
                n_topics=k,
                n_documents=corpus.n_docs,
                n_terms=corpus.n_terms,
                length=length,
                n_related=0,
                mass=0.0,
                mean_coherence=0.0,
                mean_exclusivity=0.0,
                fit_seconds=0.0,
                model_dir=str(model_dir.relative_to(out_dir)),
                error=f"{type(exc).__name__}: {exc}",
            )

    if cell_parallel:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            cells = list(pool.map(run_one, tasks))
    else:
        cells = [run_one(t) for t in tasks]

    report = ExperimentReport(
        config=config,
        cells=cells,
        definition_names=[d.name for d in config.definitions],
    )
    payload = report.to_dict()
    with open(out_dir / "report.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2, ensure_ascii=False)
        fh.write("\n")
    emit_tables(payload, out_dir)
    return report


def _run_cell(
    config: ExperimentConfig,
    definition: DocumentDefinition,
    corpus: Corpus,
    dictionary: GroupDictionary,
    doc_embeddings: EmbeddingMatrix | None,
    unit_embeddings: EmbeddingMatrix | None,
    units: Sequence[RawUnit],
    k: int,
    length: dict,
    model_dir: Path,
    permutation_jobs: int = 1,
) -> CellReport:
    fit_seed = derive_seed(config.base_seed, "fit", definition.name, config.family, k)
    t0 = time.perf_counter()
    representations = None
    if config.family == "gibbs_lda":
        lda_config = LdaConfig(n_topics=k, seed=fit_seed, **config.lda_options)
        model = fit_lda(corpus, lda_config)
    else:
        assert doc_embeddings is not None
        cm = fit_cluster(corpus, doc_embeddings, k, fit_seed)
        model = cm.model
        representations = cm.representations
        lda_config = None
    fit_seconds = time.perf_counter() - t0

    summaries = summarize(
        model, corpus,
        n_words=config.n_words,
        frex_weight=config.frex_weight,
        coherence_m=config.coherence_m,
        exclusivity_weight=config.exclusivity_weight,
        representations=representations,
    )
    labels = label_topics(summaries, dictionary, model)

    reported_seconds = fit_seconds if config.record_timing else 0.0
    save_model(
        model, model_dir, config=lda_config,
        matrix_format=config.matrix_format,
        fit_seconds_override=reported_seconds,
    )
    with open(model_dir / "summaries.json", "w", encoding="utf-8") as fh:
        json.dump(
            [dataclasses.asdict(s) for s in summaries],
            fh, sort_keys=True, indent=2, ensure_ascii=False,
        )
        fh.write("\n")
    with open(model_dir / "labels.json", "w", encoding="utf-8") as fh:
        json.dump(dataclasses.asdict(labels), fh, sort_keys=True, indent=2)
        fh.write("\n")

    validity = None
    # permuted aggregation scrambles which units share a document, so no
    # label survives the metadata merge; validity only applies to real
    # definitions
    if config.validity_options and definition.mode != "permuted_by_key":
        seed = derive_seed(config.base_seed, "split", definition.name, config.family, k)
        validity = _validity_report(model, corpus, definition, config.validity_options, seed)
        with open(model_dir / "validity.json", "w", encoding="utf-8") as fh:
            json.dump(validity, fh, sort_keys=True, indent=2)
            fh.write("\n")

    permutation = None
    popts = config.permutation_options
    if popts and definition.mode == "by_key" and definition.key == popts.get("key", definition.key):
        assert definition.key is not None
        perm_config = (
            LdaConfig(n_topics=k, seed=fit_seed, **config.lda_options)
            if config.family == "gibbs_lda"
            else LdaConfig(n_topics=k, seed=fit_seed)
        )
        result = run_permutation_test(
            units,
            definition.key,
            perm_config,
            dictionary,
            n_replicates=popts.get("n_replicates", 10),
            base_seed=derive_seed(config.base_seed, "permute", definition.name, config.family, k),
            family=config.family,
            # replicates re-pool per permuted grouping, so they need the
            # unit-level embeddings, not the real aggregation's pooled ones
            embeddings=unit_embeddings if config.family == "cluster" else None,
            min_doc_freq=config.min_doc_freq,
            n_words=config.n_words,
            frex_weight=config.frex_weight,
            use_t_quantile=popts.get("use_t_quantile", False),
            jobs=permutation_jobs,
        )
        permutation = dataclasses.asdict(result)
        with open(model_dir / "permutation.json", "w", encoding="utf-8") as fh:
            json.dump(permutation, fh, sort_keys=True, indent=2)
            fh.write("\n")

    mean_coh = sum(s.coherence for s in summaries) / len(summaries)
    mean_excl = sum(s.exclusivity for s in summaries) / len(summaries)
    return CellReport(
        definition=definition.name,
        family=config.family,
        n_topics=k,
        n_documents=corpus.n_docs,
        n_terms=corpus.n_terms,
        length=length,
        n_related=labels.n_related,
        mass=labels.mass,
        mean_coherence=mean_coh,
        mean_exclusivity=mean_excl,
        fit_seconds=reported_seconds,
        model_dir=str(model_dir.relative_to(Path(config.output_dir))),
        validity=validity,
        permutation=permutation,
    )


# ---------------------------------------------------------------------------
# tables
# ---------------------------------------------------------------------------

def _cell_lookup(payload: dict) -> tuple[list[str], list[int], dict]:
    defs = payload["definitions"]
    ks = sorted({c["n_topics"] for c in payload["cells"]})
    by_key = {(c["definition"], c["n_topics"]): c for c in payload["cells"]}
    return defs, ks, by_key


def emit_tables(payload: dict, out_dir: str | Path) -> list[Path]:
    """Write the summary CSV tables from a report dictionary."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    defs, ks, by_key = _cell_lookup(payload)
    written: list[Path] = []

    def cell(d: str, k: int) -> dict | None:
        return by_key.get((d, k))

    counts_path = out_dir / "counts.csv"
    with open(counts_path, "w", encoding="utf-8") as fh:
        fh.write(",".join(["n_topics"] + defs) + "\n")
        for k in ks:
            row = [str(k)]
            for d in defs:
                c = cell(d, k)
                if c is None or c.get("error"):
                    row.append("error" if c else "")
                else:
                    row.append(f"{c['n_related']} ({c['mass']:.2f})")
            fh.write(",".join(row) + "\n")
    written.append(counts_path)

    validity_path = out_dir / "validity.csv"
    with open(validity_path, "w", encoding="utf-8") as fh:
        fh.write(",".join(["metric", "n_topics"] + defs) + "\n")
        for metric in ("aic", "accuracy"):
            for k in ks:
                row = [metric, str(k)]
                for d in defs:
                    c = cell(d, k)
                    v = (c or {}).get("validity")
                    row.append(repr(v[metric]) if v else "")
                fh.write(",".join(row) + "\n")
    written.append(validity_path)

    timing_path = out_dir / "timing.csv"
    with open(timing_path, "w", encoding="utf-8") as fh:
        fh.write(",".join(["n_topics"] + defs) + "\n")
        for k in ks:
            row = [str(k)]
            for d in defs:
                c = cell(d, k)
                row.append(repr(c["fit_seconds"]) if c else "")
            fh.write(",".join(row) + "\n")
    written.append(timing_path)

    frontier_path = out_dir / "frontier.csv"
    with open(frontier_path, "w", encoding="utf-8") as fh:
        fh.write("definition,n_topics,mean_coherence,mean_exclusivity,fit_seconds\n")
        for d in defs:
            for k in ks:
                c = cell(d, k)
                if c is None or c.get("error"):
                    continue
                fh.write(
                    f"{d},{k},{repr(c['mean_coherence'])},"
                    f"{repr(c['mean_exclusivity'])},{repr(c['fit_seconds'])}\n"
                )
    written.append(frontier_path)

    perm_path = out_dir / "permutation.csv"
    with open(perm_path, "w", encoding="utf-8") as fh:
        fh.write("definition,n_topics,kind,value\n")
        for k in ks:
            for d in defs:
                c = cell(d, k)
                p = (c or {}).get("permutation")
                if not p:
                    continue
                for i, count in enumerate(p["replicate_counts"], start=1):
                    fh.write(f"{d},{k},replicate_{i},{count}\n")
                for kind in ("mean", "sd", "ci_low", "ci_high"):
                    fh.write(f"{d},{k},{kind},{repr(p[kind])}\n")
                fh.write(f"{d},{k},actual_count,{p['actual_count']}\n")
                fh.write(f"{d},{k},outside_ci,{str(p['outside_ci']).lower()}\n")
    written.append(perm_path)
    return written


def write_sweep_csv(rows, path: str | Path) -> None:
    """Frontier table: one row per K with average coherence and exclusivity."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("n_topics,mean_coherence,mean_exclusivity,fit_seconds\n")
        for r in rows:
            fh.write(
                f"{r.n_topics},{repr(r.mean_coherence)},"
                f"{repr(r.mean_exclusivity)},{repr(r.fit_seconds)}\n"
            )

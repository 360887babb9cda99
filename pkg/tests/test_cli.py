import json

import numpy as np
import pytest

from aggtopics.cli import main
from aggtopics.cluster import EmbeddingMatrix, save_embeddings
from aggtopics.corpus import read_units_jsonl, write_units_jsonl

from conftest import demo_units


@pytest.fixture
def units_file(tmp_path):
    path = tmp_path / "units.jsonl"
    write_units_jsonl(demo_units(), path)
    return path


@pytest.fixture
def corpus_dir(tmp_path, units_file):
    out = tmp_path / "corpus"
    main(["ingest", "--units", str(units_file), "--out", str(out), "--min-doc-freq", "2"])
    return out


@pytest.fixture
def model_dir(tmp_path, corpus_dir):
    out = tmp_path / "model"
    main([
        "fit-lda", "--corpus", str(corpus_dir), "--out", str(out),
        "--k", "2", "--iterations", "30", "--alpha", "0.5", "--seed", "4",
    ])
    return out


def test_ingest_creates_archive(corpus_dir):
    assert (corpus_dir / "vocabulary.txt").exists()
    assert (corpus_dir / "docs.jsonl").exists()


def test_aggregate_by_key(tmp_path, units_file, capsys):
    out = tmp_path / "agg.jsonl"
    rc = main([
        "aggregate", "--units", str(units_file), "--out", str(out),
        "--mode", "by_key", "--key", "legislator_id",
    ])
    assert rc == 0
    agg = read_units_jsonl(out)
    assert len(agg) == 12  # one document per legislator
    assert "skewness" in capsys.readouterr().out


def test_aggregate_permuted_deterministic(tmp_path, units_file):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / f"{name}.jsonl"
        main([
            "aggregate", "--units", str(units_file), "--out", str(out),
            "--mode", "permuted", "--key", "legislator_id", "--seed", "5",
        ])
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_fit_lda_and_summarize_and_label(tmp_path, corpus_dir, model_dir):
    assert (model_dir / "model.json").exists()
    summaries = tmp_path / "summaries.json"
    rc = main([
        "summarize", "--model", str(model_dir), "--corpus", str(corpus_dir),
        "--out", str(summaries),
    ])
    assert rc == 0
    records = json.loads(summaries.read_text())
    assert len(records) == 2 and len(records[0]["top_words"]) == 10

    labels = tmp_path / "labels.json"
    rc = main([
        "label", "--summaries", str(summaries), "--model", str(model_dir),
        "--out", str(labels),
    ])
    assert rc == 0
    report = json.loads(labels.read_text())
    assert report["n_topics"] == 2
    assert 0.0 <= report["mass"] <= 1.0


def test_build_dict(tmp_path, corpus_dir):
    out = tmp_path / "dict.json"
    rc = main([
        "build-dict", "--corpus", str(corpus_dir), "--out", str(out),
        "--group-key", "state", "--min-occurrences", "3",
    ])
    assert rc == 0
    payload = json.loads(out.read_text())
    tokens = {e["token"]: e["rule"] for e in payload["singles"]}
    assert "pennsylvania" in tokens  # bundled names always included
    assert any(rule == "dominance" for rule in tokens.values())


def test_validate(tmp_path, corpus_dir, model_dir):
    out = tmp_path / "validity.json"
    rc = main([
        "validate", "--model", str(model_dir), "--corpus", str(corpus_dir),
        "--entity-key", "legislator_id", "--label-key", "state",
        "--mode", "unit_mean", "--seed", "2", "--out", str(out),
    ])
    assert rc == 0
    payload = json.loads(out.read_text())
    assert set(payload) == {
        "aic", "log_likelihood", "accuracy", "n_train", "n_test", "ridge", "converged"
    }
    assert payload["n_train"] == 9 and payload["n_test"] == 3


def test_validate_train_count_too_large(tmp_path, corpus_dir, model_dir):
    out = tmp_path / "validity.json"
    with pytest.raises(Exception):
        # 1000 training observations cannot come out of 12 entities
        main([
            "validate", "--model", str(model_dir), "--corpus", str(corpus_dir),
            "--entity-key", "legislator_id", "--label-key", "state",
            "--mode", "unit_mean", "--train-count", "1000", "--out", str(out),
        ])


def test_sweep(tmp_path, corpus_dir):
    out = tmp_path / "frontier.csv"
    rc = main([
        "sweep", "--corpus", str(corpus_dir), "--out", str(out),
        "--k", "2,3", "--iterations", "20", "--seed", "1",
    ])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "n_topics,mean_coherence,mean_exclusivity,fit_seconds"
    assert len(lines) == 3


def test_fit_cluster_with_pooling(tmp_path, units_file, corpus_dir):
    units = read_units_jsonl(units_file)
    rng = np.random.default_rng(0)
    emb = EmbeddingMatrix(
        ids=[u.unit_id for u in units],
        vectors=rng.normal(size=(len(units), 6)),
    )
    emb_path = tmp_path / "emb.csv"
    save_embeddings(emb, emb_path)

    agg_corpus = tmp_path / "leg_corpus"
    agg_units = tmp_path / "agg.jsonl"
    main([
        "aggregate", "--units", str(units_file), "--out", str(agg_units),
        "--mode", "by_key", "--key", "legislator_id",
    ])
    main(["ingest", "--units", str(agg_units), "--out", str(agg_corpus), "--min-doc-freq", "2"])

    model_out = tmp_path / "cluster_model"
    rc = main([
        "fit-cluster", "--corpus", str(agg_corpus), "--embeddings", str(emb_path),
        "--out", str(model_out), "--k", "3", "--seed", "0",
        "--pool-by", "legislator_id", "--units", str(units_file),
    ])
    assert rc == 0
    payload = json.loads((model_out / "cluster.json").read_text())
    assert len(payload["representations"]) == 3
    assert len(payload["assignments"]) == 12

    summaries = tmp_path / "cluster_summaries.json"
    rc = main([
        "summarize", "--model", str(model_out), "--corpus", str(agg_corpus),
        "--out", str(summaries),
    ])
    assert rc == 0


def test_permute_command(tmp_path, units_file):
    dict_path = tmp_path / "dict.json"
    main(["build-dict", "--out", str(dict_path)])
    out = tmp_path / "perm.json"
    csv = tmp_path / "perm.csv"
    rc = main([
        "permute", "--units", str(units_file), "--key", "legislator_id",
        "--dict", str(dict_path), "--k", "2", "--iterations", "20",
        "--replicates", "2", "--base-seed", "3", "--min-doc-freq", "2",
        "--out", str(out), "--csv", str(csv),
    ])
    assert rc == 0
    payload = json.loads(out.read_text())
    assert len(payload["replicate_counts"]) == 2
    assert csv.read_text().startswith("kind,value")


def test_pipeline_and_report_commands(tmp_path, units_file):
    config = {
        "units_path": str(units_file),
        "output_dir": str(tmp_path / "out"),
        "definitions": [
            {"name": "tweets", "mode": "identity"},
            {"name": "legislator", "mode": "by_key", "key": "legislator_id"},
        ],
        "k_values": [2],
        "min_doc_freq": 2,
        "lda_options": {"iterations": 30, "alpha": 0.5},
        "record_timing": False,
    }
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config))
    rc = main(["pipeline", "--config", str(config_path), "--base-seed", "9"])
    assert rc == 0

    tables = tmp_path / "tables"
    rc = main([
        "report", "--report", str(tmp_path / "out" / "report.json"), "--out", str(tables),
    ])
    assert rc == 0
    assert (tables / "counts.csv").read_bytes() == (tmp_path / "out" / "counts.csv").read_bytes()


def test_seed_env_default(tmp_path, units_file, monkeypatch):
    monkeypatch.setenv("AGGTOPICS_SEED", "77")
    from aggtopics import cli

    parser = cli.build_parser()
    args = parser.parse_args([
        "aggregate", "--units", str(units_file), "--out", str(tmp_path / "x.jsonl"),
        "--mode", "permuted", "--key", "legislator_id",
    ])
    assert args.seed == 77

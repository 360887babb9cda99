import json
from pathlib import Path

import pytest

from aggtopics.aggregate import DocumentDefinition
from aggtopics.corpus import write_units_jsonl
from aggtopics.errors import InvalidConfig
from aggtopics.pipeline import ExperimentConfig, emit_tables, run_pipeline

from conftest import demo_units


def base_config(tmp_path, **overrides) -> ExperimentConfig:
    units_path = tmp_path / "units.jsonl"
    if not units_path.exists():
        write_units_jsonl(demo_units(), units_path)
    settings = dict(
        units_path=str(units_path),
        output_dir=str(tmp_path / "out"),
        definitions=[
            DocumentDefinition(name="tweets", mode="identity"),
            DocumentDefinition(name="legislator", mode="by_key", key="legislator_id"),
        ],
        k_values=[2, 3],
        family="gibbs_lda",
        base_seed=11,
        min_doc_freq=2,
        lda_options={"alpha": 0.5, "iterations": 40},
        validity_options={"entity_key": "legislator_id", "label_key": "state"},
        record_timing=False,
    )
    settings.update(overrides)
    return ExperimentConfig(**settings)


class TestConfigValidation:
    def test_no_definitions(self, tmp_path):
        config = base_config(tmp_path, definitions=[])
        with pytest.raises(InvalidConfig):
            config.validate()

    def test_no_k_values(self, tmp_path):
        config = base_config(tmp_path, k_values=[])
        with pytest.raises(InvalidConfig):
            config.validate()

    def test_duplicate_definition_names(self, tmp_path):
        config = base_config(
            tmp_path,
            definitions=[
                DocumentDefinition(name="x", mode="identity"),
                DocumentDefinition(name="x", mode="identity"),
            ],
        )
        with pytest.raises(InvalidConfig):
            config.validate()

    def test_cluster_needs_embeddings(self, tmp_path):
        config = base_config(tmp_path, family="cluster")
        with pytest.raises(InvalidConfig):
            config.validate()

    def test_json_round_trip(self, tmp_path):
        config = base_config(tmp_path)
        path = tmp_path / "config.json"
        path.write_text(json.dumps(config.to_dict()))
        back = ExperimentConfig.from_json(path)
        assert back == config


class TestRunPipeline:
    def test_grid_completes_with_artifacts(self, tmp_path):
        config = base_config(tmp_path)
        report = run_pipeline(config)
        assert len(report.cells) == 4  # 2 definitions x 2 K values
        assert all(c.error is None for c in report.cells)
        out = Path(config.output_dir)
        assert (out / "report.json").exists()
        for name in ("counts.csv", "validity.csv", "timing.csv", "frontier.csv", "permutation.csv"):
            assert (out / name).exists()
        for cell in report.cells:
            model_dir = out / cell.model_dir
            assert (model_dir / "model.json").exists()
            assert (model_dir / "phi.csv").exists()
            assert (model_dir / "summaries.json").exists()
            assert (model_dir / "labels.json").exists()
            assert (model_dir / "validity.json").exists()
            assert cell.validity is not None
            assert cell.validity["converged"]
        assert (out / "corpora" / "tweets" / "vocabulary.txt").exists()

    def test_validity_modes_follow_definition(self, tmp_path):
        report = run_pipeline(base_config(tmp_path))
        modes = {c.definition: c.validity["mode"] for c in report.cells}
        assert modes["tweets"] == "unit_mean"
        assert modes["legislator"] == "aggregated"

    def test_counts_table_layout(self, tmp_path):
        config = base_config(tmp_path)
        run_pipeline(config)
        lines = (Path(config.output_dir) / "counts.csv").read_text().splitlines()
        assert lines[0] == "n_topics,tweets,legislator"
        assert len(lines) == 3  # header + one row per K
        for line in lines[1:]:
            cells = line.split(",")
            assert cells[0] in ("2", "3")
            assert all("(" in c and c.endswith(")") for c in cells[1:])

    def test_permutation_runs_for_by_key_definition(self, tmp_path):
        config = base_config(
            tmp_path,
            k_values=[2],
            permutation_options={"n_replicates": 2},
        )
        report = run_pipeline(config)
        by_def = {c.definition: c for c in report.cells}
        assert by_def["tweets"].permutation is None
        perm = by_def["legislator"].permutation
        assert perm is not None
        assert len(perm["replicate_counts"]) == 2
        perm_csv = (Path(config.output_dir) / "permutation.csv").read_text()
        assert "legislator,2,replicate_1," in perm_csv
        assert "actual_count" in perm_csv

    def test_cell_error_recorded_grid_continues(self, tmp_path):
        config = base_config(
            tmp_path,
            validity_options={"entity_key": "legislator_id", "label_key": "missing_key"},
        )
        report = run_pipeline(config)
        assert all(c.error is not None for c in report.cells)
        assert "MissingEntityKey" in report.cells[0].error

    def test_fail_fast_raises(self, tmp_path):
        config = base_config(
            tmp_path,
            fail_fast=True,
            validity_options={"entity_key": "legislator_id", "label_key": "missing_key"},
        )
        with pytest.raises(Exception):
            run_pipeline(config)

    def test_permuted_definition_cell(self, tmp_path):
        config = base_config(
            tmp_path,
            definitions=[
                DocumentDefinition(name="legislator", mode="by_key", key="legislator_id"),
                DocumentDefinition(
                    name="shuffled", mode="permuted_by_key", key="legislator_id", seed=3
                ),
            ],
            k_values=[2],
        )
        report = run_pipeline(config)
        assert [c.definition for c in report.cells] == ["legislator", "shuffled"]
        assert all(c.error is None for c in report.cells)
        by_def = {c.definition: c for c in report.cells}
        # permutation scrambles document membership, so no label survives
        # the metadata merge and validity is skipped for that definition
        assert by_def["legislator"].validity is not None
        assert by_def["shuffled"].validity is None

    def test_prune_before_aggregation_flag(self, tmp_path):
        config = base_config(tmp_path, prune_before_aggregation=True, validity_options=None)
        report = run_pipeline(config)
        assert all(c.error is None for c in report.cells)

    def test_timing_recorded_when_enabled(self, tmp_path):
        config = base_config(tmp_path, record_timing=True, k_values=[2])
        report = run_pipeline(config)
        assert all(c.fit_seconds > 0 for c in report.cells)
        payload = json.loads((Path(config.output_dir) / "report.json").read_text())
        assert all(c["fit_seconds"] > 0 for c in payload["cells"])


class TestClusterFamily:
    def _embeddings_path(self, tmp_path):
        import numpy as np

        from aggtopics.cluster import EmbeddingMatrix, save_embeddings

        units = demo_units()
        rng = np.random.Generator(np.random.PCG64(2))
        # units of one state share a direction so clusters track states
        states = sorted({u.metadata["state"][0] for u in units})
        directions = {s: rng.normal(size=8) for s in states}
        vectors = np.vstack([
            directions[u.metadata["state"][0]] + rng.normal(scale=0.3, size=8)
            for u in units
        ])
        path = tmp_path / "emb.csv"
        save_embeddings(EmbeddingMatrix([u.unit_id for u in units], vectors), path)
        return path

    def test_cluster_grid_with_permutation(self, tmp_path):
        config = base_config(
            tmp_path,
            family="cluster",
            embeddings_path=str(self._embeddings_path(tmp_path)),
            k_values=[3],
            validity_options={"entity_key": "legislator_id", "label_key": "state"},
            permutation_options={"n_replicates": 2},
        )
        report = run_pipeline(config)
        assert all(c.error is None for c in report.cells), [c.error for c in report.cells]
        by_def = {c.definition: c for c in report.cells}
        # the permutation harness re-pools unit embeddings per replicate
        assert by_def["legislator"].permutation is not None
        assert len(by_def["legislator"].permutation["replicate_counts"]) == 2
        assert by_def["legislator"].validity["mode"] == "aggregated"
        assert by_def["tweets"].validity["mode"] == "unit_mean"


class TestParallelCells:
    def test_jobs_do_not_change_artifacts(self, tmp_path):
        sequential = base_config(
            tmp_path, output_dir=str(tmp_path / "seq"),
            permutation_options={"n_replicates": 2}, jobs=1,
        )
        parallel = base_config(
            tmp_path, output_dir=str(tmp_path / "par"),
            permutation_options={"n_replicates": 2}, jobs=4,
        )
        run_pipeline(sequential)
        run_pipeline(parallel)
        seq_dir, par_dir = Path(sequential.output_dir), Path(parallel.output_dir)
        seq_files = sorted(p.relative_to(seq_dir) for p in seq_dir.rglob("*") if p.is_file())
        par_files = sorted(p.relative_to(par_dir) for p in par_dir.rglob("*") if p.is_file())
        assert seq_files == par_files
        for rel in seq_files:
            if rel.name == "report.json":
                continue  # differs only in the config echo (jobs, output_dir)
            assert (seq_dir / rel).read_bytes() == (par_dir / rel).read_bytes(), rel
        seq_payload = json.loads((seq_dir / "report.json").read_text())
        par_payload = json.loads((par_dir / "report.json").read_text())
        assert seq_payload["cells"] == par_payload["cells"]


class TestEmitTables:
    def test_re_emission_from_payload(self, tmp_path):
        config = base_config(tmp_path)
        run_pipeline(config)
        payload = json.loads((Path(config.output_dir) / "report.json").read_text())
        second = tmp_path / "tables2"
        written = emit_tables(payload, second)
        assert {p.name for p in written} == {
            "counts.csv", "validity.csv", "timing.csv", "frontier.csv", "permutation.csv"
        }
        for p in written:
            original = Path(config.output_dir) / p.name
            assert p.read_bytes() == original.read_bytes()

import numpy as np
import pytest

from aggtopics.aggregate import DocumentDefinition, aggregate_units, permute_labels
from aggtopics.corpus import build_corpus
from aggtopics.labeler import GroupDictionary
from aggtopics.lda import LdaConfig
from aggtopics.permute import ci_summary, run_permutation_test
from aggtopics.synthetic import make_grouped_units

from conftest import unit


class TestCiSummary:
    def test_zero_variance_interval_collapses(self):
        res = ci_summary([4, 4, 4, 4], actual_count=4, seeds=[1, 2, 3, 4])
        assert res.ci_low == res.ci_high == 4.0
        assert res.sd == 0.0
        assert not res.outside_ci

    def test_constant_counts_distant_actual(self):
        res = ci_summary([3, 3, 3, 3], actual_count=10, seeds=[1, 2, 3, 4])
        assert res.outside_ci

    def test_interval_formula(self):
        counts = [2, 4, 6, 8]
        res = ci_summary(counts, actual_count=5, seeds=[1, 2, 3, 4])
        arr = np.array(counts, dtype=float)
        sd = arr.std(ddof=1)
        half = 1.96 * sd / 2.0
        assert res.mean == pytest.approx(5.0)
        assert res.ci_low == pytest.approx(5.0 - half, abs=1e-12)
        assert res.ci_high == pytest.approx(5.0 + half, abs=1e-12)
        assert not res.outside_ci  # actual equals the mean

    def test_t_multiplier_wider_than_z(self):
        counts = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10]
        z = ci_summary(counts, 5, seeds=list(range(10)))
        t = ci_summary(counts, 5, seeds=list(range(10)), use_t_quantile=True)
        assert t.ci_multiplier > z.ci_multiplier == 1.96
        assert t.ci_high > z.ci_high

    def test_boundary_is_inside(self):
        res = ci_summary([2, 4], actual_count=3, seeds=[1, 2])
        assert res.ci_low <= 3 <= res.ci_high
        assert not res.outside_ci


def small_synthetic():
    return make_grouped_units(
        n_groups=4, units_per_group=30, n_background_terms=40,
        markers_per_group=3, marked_fraction=0.2, tokens_per_unit=8, seed=5,
    )


def marker_dictionary(syn):
    return GroupDictionary(
        singles={m: "name" for m in syn.all_markers()}, pairs=set(), group_key="group"
    )


class TestReplicateStructure:
    def test_permuted_aggregation_preserves_document_count_and_sizes(self):
        syn = small_synthetic()
        by_group = DocumentDefinition(name="g", mode="by_key", key="group")
        real = aggregate_units(syn.units, by_group)

        def group_sizes(units):
            sizes = {}
            for u in units:
                sizes[u.values("group")[0]] = sizes.get(u.values("group")[0], 0) + 1
            return sorted(sizes.values())

        for seed in (1, 2, 3):
            permuted = permute_labels(syn.units, "group", seed)
            agg = aggregate_units(permuted, by_group)
            assert len(agg) == len(real)
            assert group_sizes(permuted) == group_sizes(syn.units)

    def test_pruning_can_differ_but_units_match(self):
        syn = small_synthetic()
        permuted = permute_labels(syn.units, "group", 11)
        real_corpus = build_corpus(
            aggregate_units(syn.units, DocumentDefinition(name="g", mode="by_key", key="group")), 1
        )
        perm_corpus = build_corpus(
            aggregate_units(permuted, DocumentDefinition(name="g", mode="by_key", key="group")), 1
        )
        assert real_corpus.n_docs == perm_corpus.n_docs


class TestRunPermutationTest:
    def config(self):
        return LdaConfig(n_topics=4, alpha=0.1, eta=0.01, iterations=60, seed=3)

    def test_deterministic_and_seed_derivation(self):
        syn = small_synthetic()
        dictionary = marker_dictionary(syn)
        a = run_permutation_test(
            syn.units, "group", self.config(), dictionary,
            n_replicates=3, base_seed=50, min_doc_freq=1,
        )
        b = run_permutation_test(
            syn.units, "group", self.config(), dictionary,
            n_replicates=3, base_seed=50, min_doc_freq=1,
        )
        assert a == b
        assert a.seeds == [50 ^ 1, 50 ^ 2, 50 ^ 3]
        assert len(a.replicate_counts) == 3

    def test_consistency_of_ci_fields(self):
        syn = small_synthetic()
        res = run_permutation_test(
            syn.units, "group", self.config(), marker_dictionary(syn),
            n_replicates=3, base_seed=8, min_doc_freq=1,
        )
        redo = ci_summary(res.replicate_counts, res.actual_count, res.seeds)
        assert res.mean == redo.mean and res.ci_high == redo.ci_high
        assert res.outside_ci == (
            res.actual_count < res.ci_low or res.actual_count > res.ci_high
        )

    def test_jobs_do_not_change_result(self):
        syn = small_synthetic()
        kwargs = dict(n_replicates=3, base_seed=9, min_doc_freq=1)
        seq = run_permutation_test(
            syn.units, "group", self.config(), marker_dictionary(syn), **kwargs
        )
        par = run_permutation_test(
            syn.units, "group", self.config(), marker_dictionary(syn), jobs=3, **kwargs
        )
        assert seq == par

    def test_too_few_replicates(self):
        syn = small_synthetic()
        with pytest.raises(ValueError):
            run_permutation_test(
                syn.units, "group", self.config(), marker_dictionary(syn),
                n_replicates=1, base_seed=1,
            )

    def test_missing_key_propagates(self):
        units = [unit("u1", "hello world"), unit("u2", "more text")]
        with pytest.raises(Exception):
            run_permutation_test(
                units, "group",
                self.config(), GroupDictionary(singles={}, pairs=set()),
                n_replicates=2, base_seed=1,
            )

"""Alignment, structural difference, DC/EA/E2E, and dataset statistics."""

from __future__ import annotations

import random

import pytest

from semdag.core import DagNode, SemanticDag
from semdag.errors import SemdagError, UndefinedStructureError
from semdag.metrics import (
    align_nodes,
    compare_pair,
    dag_classification_precision,
    dataset_statistics,
    domain_tag_counts,
    end_to_end,
    evidence_alignment,
    structural_difference,
    MetricReport,
    render_metric_table,
)

from .conftest import make_dag


def oracle_nhd_sd(al) -> tuple[float, float]:
    """Independent oracle: direct double loop over ordered pairs."""
    m = al.m
    mismatches = 0
    for i in range(m):
        for j in range(m):
            if i != j and al.a_ref[i, j] != al.a_pred[i, j]:
                mismatches += 1
    nhd = 2.0 / (m * (m - 1)) * mismatches
    return nhd, 1.0 - nhd


def random_pair(rng: random.Random):
    n = rng.randint(2, 12)
    ids = [f"n{i}" for i in range(n)]
    perm = ids[:]
    rng.shuffle(perm)
    rank = {v: i for i, v in enumerate(perm)}

    def random_edges():
        possible = [(a, b) for a in ids for b in ids if rank[a] < rank[b]]
        return rng.sample(possible, k=min(len(possible), rng.randint(0, 2 * n)))

    ref = make_dag(ids, random_edges())
    pred = make_dag(ids, random_edges())
    return ref, pred


class TestAlignNodes:
    def test_identical_graphs_full_match(self):
        ref = make_dag(["x", "y", "z"], [("x", "y"), ("y", "z")])
        pred = make_dag(["x", "y", "z"], [("x", "y"), ("y", "z")])
        al = align_nodes(ref, pred)
        assert al.m == 3
        assert (al.a_ref == al.a_pred).all()

    def test_unmatched_nodes_and_their_edges_dropped(self):
        # Brute-force check over all injective id matchings agrees: only
        # x and y match, so z and w plus every incident edge disappear.
        ref = make_dag(["x", "y", "z"], [("x", "y"), ("y", "z")])
        pred = make_dag(["x", "y", "w"], [("x", "y"), ("y", "w")])
        al = align_nodes(ref, pred)
        assert al.m == 2
        assert al.unmatched_ref == ("z",)
        assert al.unmatched_pred == ("w",)
        assert al.a_ref.sum() == 1 and al.a_pred.sum() == 1

    def test_alias_match_only_with_flag(self):
        ref = SemanticDag(
            provenance=make_dag([], []).provenance,
            context=make_dag([], []).context,
            nodes=(DagNode(id="body_mass_index", label="Body Mass Index", aliases=("BMI",)),),
            edges=(),
        )
        pred = SemanticDag(
            provenance=make_dag([], []).provenance,
            context=make_dag([], []).context,
            nodes=(DagNode(id="bmi", label="BMI"),),
            edges=(),
        )
        assert align_nodes(ref, pred, use_aliases=False).m == 0
        al = align_nodes(ref, pred, use_aliases=True)
        assert al.m == 1
        assert al.pairs == (("body_mass_index", "bmi"),)

    def test_alias_off_matches_subset_of_on(self):
        rng = random.Random(3)
        for _ in range(50):
            ref, pred = random_pair(rng)
            off = set(align_nodes(ref, pred, use_aliases=False).pairs)
            on = set(align_nodes(ref, pred, use_aliases=True).pairs)
            assert off <= on

    def test_case_insensitive_identity(self):
        ref = make_dag(["Smoking"], [])
        pred = make_dag(["smoking"], [])
        assert align_nodes(ref, pred).m == 1

    def test_each_node_matched_at_most_once(self):
        ref = make_dag(["a", "b"], [])
        pred = make_dag(["a"], [])
        al = align_nodes(ref, pred)
        assert al.m == 1
        assert al.unmatched_ref == ("b",)


class TestStructuralDifference:
    def test_identical_graphs(self):
        ref = make_dag(["a", "b", "c"], [("a", "b"), ("b", "c")])
        diff = structural_difference(align_nodes(ref, ref))
        assert diff.nhd == 0.0
        assert diff.sd == 1.0

    def test_worked_three_node_example(self):
        # By brute force over all 6 ordered entries: mismatches at (B,C) and
        # (A,C), so nhd = 2/6 * 2 = 0.6667 and sd = 0.3333.
        ref = make_dag(["a", "b", "c"], [("a", "b"), ("b", "c")])
        pred = make_dag(["a", "b", "c"], [("a", "b"), ("a", "c")])
        diff = structural_difference(align_nodes(ref, pred))
        assert diff.nhd == pytest.approx(2.0 / 3.0)
        assert diff.sd == pytest.approx(1.0 / 3.0)

    def test_reversed_two_node_edge_shows_literal_range(self):
        # Exhaustive: both ordered entries differ, nhd = 2/2 * 2 = 2, sd = -1.
        ref = make_dag(["a", "b"], [("a", "b")])
        pred = make_dag(["a", "b"], [("b", "a")])
        diff = structural_difference(align_nodes(ref, pred))
        assert diff.nhd == pytest.approx(2.0)
        assert diff.sd == pytest.approx(-1.0)
        assert diff.sd_clamped == 0.0

    def test_undefined_below_two_matched_nodes(self):
        ref = make_dag(["a"], [])
        with pytest.raises(UndefinedStructureError):
            structural_difference(align_nodes(ref, ref))

    def test_matches_brute_force_oracle(self):
        rng = random.Random(42)
        for _ in range(300):
            ref, pred = random_pair(rng)
            al = align_nodes(ref, pred)
            diff = structural_difference(al)
            nhd, sd = oracle_nhd_sd(al)
            assert diff.nhd == nhd
            assert diff.sd == sd

    def test_symmetry_and_relabeling_invariance(self):
        rng = random.Random(11)
        for _ in range(50):
            ref, pred = random_pair(rng)
            forward = structural_difference(align_nodes(ref, pred))
            backward = structural_difference(align_nodes(pred, ref))
            assert forward.nhd == pytest.approx(backward.nhd)

            relabel = {f"n{i}": f"var_{i}" for i in range(20)}
            ref2 = make_dag(
                [relabel[n.id] for n in ref.nodes],
                [(relabel[e.source], relabel[e.target]) for e in ref.edges],
            )
            pred2 = make_dag(
                [relabel[n.id] for n in pred.nodes],
                [(relabel[e.source], relabel[e.target]) for e in pred.edges],
            )
            assert structural_difference(align_nodes(ref2, pred2)).sd == pytest.approx(forward.sd)


class TestCounts:
    # Published benchmark rows: (predicted, true, kept, dc%, e2e%).
    TABLE_ROWS = [
        (12, 6, 3, 50, 25),
        (29, 9, 7, 31, 24),
        (21, 12, 9, 57, 43),
        (37, 16, 12, 43, 32),
        (59, 46, 41, 78, 69),
        (54, 39, 39, 72, 72),
        (57, 50, 50, 88, 88),
    ]

    @pytest.mark.parametrize("pred,true,kept,dc,e2e", TABLE_ROWS)
    def test_benchmark_rows_within_half_point(self, pred, true, kept, dc, e2e):
        assert abs(100 * dag_classification_precision(pred, true) - dc) <= 0.5
        assert abs(100 * end_to_end(kept, pred) - e2e) <= 0.5

    def test_perfect_precision(self):
        assert dag_classification_precision(10, 10) == 1.0

    def test_zero_predictions_error(self):
        with pytest.raises(SemdagError):
            dag_classification_precision(0, 0)
        with pytest.raises(SemdagError):
            end_to_end(0, 0)


class TestEvidenceAlignment:
    def test_identical_graphs_and_citations(self):
        dag = make_dag(
            ["a", "b"],
            [("a", "b")],
            node_evidence={"a": ("b1",), "b": ("b2",)},
            edge_evidence={("a", "b"): ("b3",)},
        )
        assert evidence_alignment(dag, dag, align_nodes(dag, dag)) == 1.0

    def test_missing_node_bounds_score(self):
        # 4 reference elements; one node absent from the prediction makes
        # that node and its incident edge incorrect: ea <= 0.75 (here 0.5).
        ref = make_dag(
            ["a", "b", "c"],
            [("a", "b")],
            node_evidence={"a": ("b1",), "b": ("b2",), "c": ("b3",)},
            edge_evidence={("a", "b"): ("b4",)},
        )
        pred = make_dag(
            ["a", "b"],
            [("a", "b")],
            node_evidence={"a": ("b1",), "b": ("b2",)},
            edge_evidence={("a", "b"): ("b4",)},
        )
        ea = evidence_alignment(ref, pred, align_nodes(ref, pred))
        assert ea == 0.75  # direct count: 3 of 4 elements correct
        pred_missing_more = make_dag(["a"], [], node_evidence={"a": ("b1",)})
        assert evidence_alignment(ref, pred_missing_more, align_nodes(ref, pred_missing_more)) <= 0.75

    def test_disjoint_citations_incorrect(self):
        ref = make_dag(["a"], [], node_evidence={"a": ("b1",)})
        pred = make_dag(["a"], [], node_evidence={"a": ("b9",)})
        assert evidence_alignment(ref, pred, align_nodes(ref, pred)) == 0.0

    def test_overlap_is_enough(self):
        ref = make_dag(["a"], [], node_evidence={"a": ("b1", "b2")})
        pred = make_dag(["a"], [], node_evidence={"a": ("b2", "b7")})
        assert evidence_alignment(ref, pred, align_nodes(ref, pred)) == 1.0

    def test_adding_unmatched_reference_node_never_increases_ea(self):
        rng = random.Random(5)
        for _ in range(30):
            ref, pred = random_pair(rng)
            al = align_nodes(ref, pred)
            base = evidence_alignment(ref, pred, al)
            bigger = SemanticDag(
                provenance=ref.provenance,
                context=ref.context,
                nodes=ref.nodes + (DagNode(id="zz_extra", label="ZZ"),),
                edges=ref.edges,
            )
            grown = evidence_alignment(bigger, pred, align_nodes(bigger, pred))
            assert grown <= base + 1e-12

    def test_bounded_zero_one(self):
        rng = random.Random(9)
        for _ in range(50):
            ref, pred = random_pair(rng)
            ea = evidence_alignment(ref, pred, align_nodes(ref, pred))
            assert 0.0 <= ea <= 1.0


class TestDatasetStatistics:
    def test_single_graph(self):
        stats = dataset_statistics([make_dag(["a", "b", "c"], [("a", "b")])])
        nodes = stats["arxiv"]["nodes"]
        assert nodes.mean == 3.0
        assert nodes.variance == 0.0
        assert nodes.minimum == nodes.maximum == 3

    def test_population_variance_convention(self):
        dags = [make_dag(["a"], []), make_dag(["a", "b", "c"], [])]
        stats = dataset_statistics(dags)
        # Population variance of {1, 3}: mean 2, variance 1 (not 2).
        assert stats["arxiv"]["nodes"].variance == 1.0

    def test_grouped_by_source(self):
        dags = [
            make_dag(["a", "b"], [], source_repo="arxiv"),
            make_dag(["a", "b", "c"], [], source_repo="biorxiv"),
        ]
        stats = dataset_statistics(dags)
        assert set(stats) == {"arxiv", "biorxiv"}

    def test_empty_collection_error(self):
        with pytest.raises(SemdagError):
            dataset_statistics([])

    def test_domain_counts_sorted_with_exclusions(self):
        dags = (
            [make_dag(["a"], [], domains=("Public Health", "Causal Inference")) for _ in range(3)]
            + [make_dag(["a"], [], domains=("Epidemiology",)) for _ in range(2)]
            + [make_dag(["a"], [], domains=("Machine Learning",))]
        )
        counts = domain_tag_counts(dags)
        assert counts == (("Public Health", 3), ("Epidemiology", 2))


def test_render_metric_table_has_benchmark_columns():
    pair = compare_pair("g1", make_dag(["a", "b"], [("a", "b")]), make_dag(["a", "b"], [("a", "b")]))
    report = MetricReport(pairs=(pair,), predicted=57, true_dags=50, kept=50)
    table = render_metric_table([("pipeline", report)])
    assert "Pred." in table and "True DAG" in table and "E2E" in table
    assert "88%" in table  # 50/57 both for DC and E2E

"""Core model: structural validation, topological order, and edits."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semdag.core import (
    AddEdge,
    AddNode,
    DagEdge,
    DagNode,
    RemoveEdge,
    RemoveNode,
    RenameNode,
    RedirectEdge,
    ReplaceDescription,
    ReplaceEvidence,
    apply_edit,
    canonical_id,
    edit_from_dict,
    edit_to_dict,
    topological_order,
    validate_structure,
)
from semdag.errors import EditError, StructureError, UnknownElementError

from .conftest import make_dag


def brute_force_has_cycle(node_ids, edges) -> bool:
    """Independent oracle: exhaustive DFS from every node (graphs <= 12 nodes)."""
    adj = {canonical_id(n): set() for n in node_ids}
    for s, t in edges:
        cs, ct = canonical_id(s), canonical_id(t)
        if cs in adj and ct in adj:
            adj[cs].add(ct)

    def reaches(start, target, visited) -> bool:
        for nxt in adj[start]:
            if nxt == target:
                return True
            if nxt not in visited:
                visited.add(nxt)
                if reaches(nxt, target, visited):
                    return True
        return False

    return any(reaches(n, n, set()) for n in adj)


def checks(report) -> set[str]:
    return {f.check for f in report.hard_failures}


class TestValidateStructure:
    def test_valid_chain_has_no_hard_failures(self):
        report = validate_structure(make_dag(["a", "b", "c"], [("a", "b"), ("b", "c")]))
        assert report.hard_failures == ()
        assert report.ok

    def test_two_cycle_is_flagged(self):
        report = validate_structure(make_dag(["a", "b"], [("a", "b"), ("b", "a")]))
        assert "cycle" in checks(report)

    def test_disjoint_components_warn_but_pass(self):
        # Oracle: union-find over the undirected projection finds 2 components.
        dag = make_dag(["a", "b", "c", "d"], [("a", "b"), ("c", "d")])
        report = validate_structure(dag)
        assert report.hard_failures == ()
        assert [w.check for w in report.warnings] == ["disconnected"]

    def test_duplicate_node_ids_detected_case_insensitively(self):
        dag = make_dag(["Smoking", "smoking ", "tar"], [("Smoking", "tar")])
        assert "duplicate_node_id" in checks(validate_structure(dag))

    def test_dangling_edge_detected(self):
        dag = make_dag(["a", "b"], [("a", "ghost")])
        assert "dangling_edge" in checks(validate_structure(dag))

    def test_self_loop_detected(self):
        dag = make_dag(["a", "b"], [("a", "a"), ("a", "b")])
        assert "self_loop" in checks(validate_structure(dag))

    def test_duplicate_edge_detected(self):
        dag = make_dag(["a", "b"], [("a", "b"), ("A", "b")])
        assert "duplicate_edge" in checks(validate_structure(dag))

    def test_empty_graph_is_valid_with_warning(self):
        report = validate_structure(make_dag([], []))
        assert report.ok
        assert [w.check for w in report.warnings] == ["empty_graph"]

    def test_every_violation_enumerated(self):
        dag = make_dag(
            ["a", "A", "b", "c"],
            [("a", "b"), ("a", "b"), ("b", "b"), ("b", "ghost"), ("b", "c"), ("c", "a")],
        )
        report = validate_structure(dag)
        found = checks(report)
        assert {"duplicate_node_id", "duplicate_edge", "self_loop", "dangling_edge", "cycle"} <= found

    def test_cycle_detection_matches_brute_force_oracle(self):
        rng = random.Random(7)
        for _ in range(300):
            n = rng.randint(1, 12)
            ids = [f"n{i}" for i in range(n)]
            possible = [(a, b) for a in ids for b in ids if a != b]
            edges = rng.sample(possible, k=min(len(possible), rng.randint(0, 2 * n)))
            dag = make_dag(ids, edges)
            expected = brute_force_has_cycle(ids, edges)
            got = "cycle" in checks(validate_structure(dag))
            assert got == expected, f"nodes={ids} edges={edges}"


class TestTopologicalOrder:
    def test_chain(self, chain_dag):
        assert topological_order(chain_dag) == ("a", "b", "c")

    def test_tie_broken_lexicographically(self):
        # Derived by hand: a and b are both ready; lexicographic order wins.
        dag = make_dag(["b", "a", "c"], [("a", "c"), ("b", "c")])
        assert topological_order(dag) == ("a", "b", "c")

    def test_empty_graph(self):
        assert topological_order(make_dag([], [])) == ()

    def test_invalid_graph_raises(self):
        with pytest.raises(StructureError):
            topological_order(make_dag(["a", "b"], [("a", "b"), ("b", "a")]))

    def test_every_edge_goes_forward(self):
        rng = random.Random(13)
        for _ in range(100):
            n = rng.randint(2, 10)
            ids = [f"n{i}" for i in range(n)]
            perm = ids[:]
            rng.shuffle(perm)
            rank = {v: i for i, v in enumerate(perm)}
            possible = [(a, b) for a in ids for b in ids if rank[a] < rank[b]]
            edges = rng.sample(possible, k=min(len(possible), rng.randint(0, 2 * n)))
            order = topological_order(make_dag(ids, edges))
            position = {v: i for i, v in enumerate(order)}
            assert all(position[s] < position[t] for s, t in edges)


class TestApplyEdit:
    def test_rename_keeps_edges_attached(self, chain_dag):
        out = apply_edit(chain_dag, RenameNode(node_id="b", new_id="middle"))
        assert out.find_node("middle") is not None
        assert out.find_edge("a", "middle") is not None
        assert out.find_edge("middle", "c") is not None

    def test_redirect_creating_cycle_is_rejected(self):
        dag = make_dag(["a", "b", "c"], [("a", "b"), ("b", "c"), ("a", "c")])
        with pytest.raises(EditError) as excinfo:
            apply_edit(dag, RedirectEdge(source="a", target="c", new_source="c", new_target="a"))
        assert any(f.check == "cycle" for f in excinfo.value.findings)

    def test_five_sequential_edits_give_count_five(self, chain_dag):
        # Oracle: count the applied-edit log.
        edits = [
            AddNode(DagNode(id="d", label="D")),
            AddEdge(DagEdge(source="c", target="d")),
            ReplaceDescription(description="a to b", edge=("a", "b")),
            ReplaceEvidence(evidence=("b1",), node_id="a"),
            RenameNode(node_id="d", new_id="tail"),
        ]
        dag = chain_dag
        applied = []
        for edit in edits:
            dag = apply_edit(dag, edit)
            applied.append(edit)
        assert len(applied) == 5
        assert dag.find_node("tail") is not None

    def test_unknown_node_raises(self, chain_dag):
        with pytest.raises(UnknownElementError):
            apply_edit(chain_dag, RemoveNode(node_id="ghost"))
        with pytest.raises(UnknownElementError):
            apply_edit(chain_dag, RemoveEdge(source="a", target="c"))

    def test_remove_node_cascades_incident_edges(self, chain_dag):
        out = apply_edit(chain_dag, RemoveNode(node_id="b"))
        assert out.find_node("b") is None
        assert out.edges == ()
        assert validate_structure(out).ok

    def test_add_duplicate_node_rejected(self, chain_dag):
        with pytest.raises(EditError):
            apply_edit(chain_dag, AddNode(DagNode(id="A", label="shadow")))

    def test_add_duplicate_edge_rejected(self, chain_dag):
        with pytest.raises(EditError):
            apply_edit(chain_dag, AddEdge(DagEdge(source="a", target="b")))

    def test_failed_edit_leaves_input_unchanged(self, chain_dag):
        before = chain_dag
        with pytest.raises(EditError):
            apply_edit(chain_dag, AddEdge(DagEdge(source="c", target="a")))
        assert chain_dag == before

    def test_edit_result_always_valid(self, chain_dag):
        # apply_edit either raises or returns a graph with zero hard failures.
        candidates = [
            AddNode(DagNode(id="d", label="D")),
            AddEdge(DagEdge(source="c", target="a")),
            AddEdge(DagEdge(source="a", target="c")),
            RemoveNode(node_id="a"),
            RenameNode(node_id="a", new_id="c"),
        ]
        for edit in candidates:
            try:
                out = apply_edit(chain_dag, edit)
            except (EditError, UnknownElementError):
                continue
            assert validate_structure(out).ok

    @pytest.mark.parametrize(
        "edit",
        [
            AddNode(DagNode(id="d", label="D")),
            RemoveNode(node_id="b"),
            RenameNode(node_id="b", new_id="mid"),
            AddEdge(DagEdge(source="a", target="c", description="skip")),
            RemoveEdge(source="a", target="b"),
            RedirectEdge(source="b", target="c", new_source="a", new_target="c"),
            ReplaceEvidence(evidence=("b1", "b2"), node_id="a"),
            ReplaceDescription(description="x", edge=("a", "b")),
        ],
    )
    def test_edit_dict_round_trip(self, edit):
        assert edit_from_dict(edit_to_dict(edit)) == edit


@given(
    st.lists(st.sampled_from([f"n{i}" for i in range(8)]), min_size=1, max_size=8, unique=True).flatmap(
        lambda ids: st.tuples(
            st.just(ids),
            st.lists(
                st.tuples(st.sampled_from(ids), st.sampled_from(ids)).filter(lambda e: e[0] != e[1]),
                max_size=12,
                unique=True,
            ),
        )
    )
)
@settings(max_examples=200, deadline=None)
def test_cycle_flag_matches_oracle_property(data):
    ids, edges = data
    dag = make_dag(ids, edges)
    assert ("cycle" in checks(validate_structure(dag))) == brute_force_has_cycle(ids, edges)

"""Dataset export, external import, and the data card."""

from __future__ import annotations

import json

import pytest

from semdag.collection import FunnelLedger, funnel_report
from semdag.errors import ExportError
from semdag.export import (
    export_dataset,
    export_graphs,
    import_external,
    load_release,
    render_data_card,
)
from semdag.metrics import dataset_statistics, domain_tag_counts
from semdag.review import CandidateStore

from .conftest import make_dag


def kept_store(tmp_path, n_arxiv: int = 2, n_biorxiv: int = 1, reject_one: bool = False) -> CandidateStore:
    store = CandidateStore(tmp_path / "store")
    idx = 0
    for source, n in (("arxiv", n_arxiv), ("biorxiv", n_biorxiv)):
        for i in range(n):
            cid = f"{source}_p{i}__fig1"
            dag = make_dag(
                ["a", "b"],
                [("a", "b")],
                paper_id=f"{source}_p{i}",
                source_repo=source,
                figure_id="fig1",
            )
            store.create(cid, dag)
            store.scope_decision(cid, "in_scope", actor="expert")
            if reject_one and idx == 0:
                store.quality_action(cid, "reject", actor="expert", reason="bad evidence")
            else:
                store.quality_action(cid, "approve", actor="expert")
            idx += 1
    return store


class TestExport:
    def test_refuses_non_kept_and_names_offender(self, tmp_path):
        store = kept_store(tmp_path, n_arxiv=2, n_biorxiv=1, reject_one=True)
        with pytest.raises(ExportError) as excinfo:
            export_dataset(store, tmp_path / "out")
        assert "arxiv_p0__fig1" in str(excinfo.value)
        assert "rejected_quality" in str(excinfo.value)

    def test_re_export_identical_bytes(self, tmp_path):
        store = kept_store(tmp_path)
        out1, out2 = tmp_path / "out1", tmp_path / "out2"
        export_dataset(store, out1)
        export_dataset(store, out2)
        for rel in ("manifest.json", "data/arxiv.jsonl", "data/biorxiv.jsonl"):
            assert (out1 / rel).read_bytes() == (out2 / rel).read_bytes()

    def test_manifest_counts_match_published_validated_rows(self, tmp_path):
        # Fixture replicating the published validated counts per source.
        dags = [
            make_dag(["a", "b"], [("a", "b")], paper_id=f"ax{i:03d}", source_repo="arxiv")
            for i in range(58)
        ] + [
            make_dag(["a", "b"], [("a", "b")], paper_id=f"bx{i:03d}", source_repo="biorxiv")
            for i in range(13)
        ]
        manifest = export_graphs(dags, tmp_path / "out")
        assert manifest["counts"] == {"arxiv": 58, "biorxiv": 13}
        assert manifest["total"] == 71

    def test_release_round_trips(self, tmp_path):
        store = kept_store(tmp_path)
        export_dataset(store, tmp_path / "out")
        dags = load_release(tmp_path / "out")
        assert len(dags) == 3
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["schema_version"] == "1"
        re_manifest = export_graphs(dags, tmp_path / "out2")
        assert re_manifest["files"] == manifest["files"]

    def test_ordering_by_source_paper_figure(self, tmp_path):
        dags = [
            make_dag(["a", "b"], [("a", "b")], paper_id="p2", source_repo="arxiv", figure_id="f1"),
            make_dag(["a", "b"], [("a", "b")], paper_id="p1", source_repo="arxiv", figure_id="f2"),
            make_dag(["a", "b"], [("a", "b")], paper_id="p1", source_repo="arxiv", figure_id="f1"),
        ]
        export_graphs(dags, tmp_path / "out")
        lines = (tmp_path / "out" / "data" / "arxiv.jsonl").read_text().splitlines()
        order = [(json.loads(l)["provenance"]["paper_id"], json.loads(l)["provenance"]["figure_id"]) for l in lines]
        assert order == [("p1", "f1"), ("p1", "f2"), ("p2", "f1")]


class TestImportExternal:
    def test_synthetic_chain_with_story(self):
        records = [
            {
                "id": "syn1",
                "story": "Rain makes the ground wet, wet ground is slippery.",
                "nodes": [
                    {"id": "rain", "text": "It rains."},
                    {"id": "wet", "text": "The ground is wet."},
                    {"id": "slippery", "text": "The ground is slippery."},
                ],
                "edges": [
                    {"source": "rain", "target": "wet"},
                    {"source": "wet", "target": "slippery"},
                ],
            }
        ]
        accepted, rejected = import_external(records)
        assert rejected == []
        dag = accepted[0]
        assert dag.provenance.source_repo == "synthetic"
        assert dag.provenance.figure_id is None
        assert dag.context.nature.value == "technical"
        assert len(dag.nodes) == 3

    def test_symbolic_record_is_abstract(self):
        records = [
            {
                "id": "syn2",
                "nodes": [{"id": "X"}, {"id": "Y"}],
                "edges": [{"source": "X", "target": "Y"}],
            }
        ]
        accepted, _ = import_external(records)
        assert accepted[0].context.nature.value == "abstract"

    def test_cyclic_record_rejected_with_detail(self):
        records = [
            {
                "id": "cyc",
                "nodes": [{"id": "a"}, {"id": "b"}],
                "edges": [{"source": "a", "target": "b"}, {"source": "b", "target": "a"}],
            }
        ]
        accepted, rejected = import_external(records)
        assert accepted == []
        assert rejected[0].record_id == "cyc"
        assert "cycle" in rejected[0].detail

    def test_duplicate_ids_rejected(self):
        records = [{"id": "dup", "nodes": [{"id": "a"}, {"id": "A"}], "edges": []}]
        _, rejected = import_external(records)
        assert "duplicate_node_id" in rejected[0].detail

    def test_synthetic_profile_statistics(self):
        # 100 records shaped like a small synthetic QA dataset: 57 three-node
        # and 43 four-node graphs give node mean 3.43 under dataset_statistics.
        records = []
        for i in range(57):
            records.append(
                {
                    "id": f"c3_{i}",
                    "nodes": [{"id": "x"}, {"id": "y"}, {"id": "z"}],
                    "edges": [{"source": "x", "target": "y"}, {"source": "y", "target": "z"}],
                }
            )
        for i in range(43):
            records.append(
                {
                    "id": f"c4_{i}",
                    "nodes": [{"id": "x"}, {"id": "y"}, {"id": "z"}, {"id": "w"}],
                    "edges": [{"source": "x", "target": "y"}, {"source": "y", "target": "z"}, {"source": "z", "target": "w"}],
                }
            )
        accepted, rejected = import_external(records)
        assert rejected == []
        stats = dataset_statistics(accepted)
        assert stats["synthetic"]["nodes"].mean == pytest.approx(3.43)

    def test_import_export_round_trip(self, tmp_path):
        records = [
            {
                "id": "syn1",
                "story": "s",
                "nodes": [{"id": "a", "text": "t"}, {"id": "b"}],
                "edges": [{"source": "a", "target": "b"}],
            }
        ]
        accepted, _ = import_external(records)
        export_graphs(accepted, tmp_path / "out")
        back = load_release(tmp_path / "out")
        assert [len(d.nodes) for d in back] == [2]
        assert back[0].edges[0].source == "a"


class TestDataCard:
    def test_top_domains_and_exclusions(self):
        # Fixture replicating the published top-domain counts.
        spec_counts = [
            ("Public Health", 18),
            ("Epidemiology", 17),
            ("Healthcare", 12),
            ("Education", 9),
            ("Biostatistics", 8),
        ]
        dags = []
        i = 0
        for tag, count in spec_counts:
            for _ in range(count):
                dags.append(make_dag(["a", "b"], [("a", "b")], paper_id=f"p{i}", domains=(tag, "Causal Inference")))
                i += 1
        for _ in range(6):
            dags.append(make_dag(["a", "b"], [("a", "b")], paper_id=f"p{i}", domains=("Economics", "Machine Learning")))
            i += 1
        counts = domain_tag_counts(dags)
        assert counts[:5] == tuple(spec_counts)
        assert all(tag not in ("Causal Inference", "Machine Learning") for tag, _ in counts)

        card = render_data_card(dataset_statistics(dags), counts)
        assert "| Public Health | 18 |" in card
        assert "Causal Inference" not in card.split("## Domain tag frequencies")[0]

    def test_card_without_funnel(self):
        dags = [make_dag(["a", "b"], [("a", "b")])]
        card = render_data_card(dataset_statistics(dags), domain_tag_counts(dags))
        assert "Pipeline funnel" not in card
        assert "Graph statistics" in card

    def test_card_with_funnel(self):
        ledger = FunnelLedger()
        ledger.record("arxiv", "metadata", 100)
        ledger.record("arxiv", "semdags_validated", 2)
        dags = [make_dag(["a", "b"], [("a", "b")])]
        card = render_data_card(dataset_statistics(dags), domain_tag_counts(dags), funnel_report(ledger))
        assert "Pipeline funnel" in card
        assert "2%" in card

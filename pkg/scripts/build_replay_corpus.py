#!/usr/bin/env python3
"""Build the shipped replay corpus under fixtures/replay_corpus/.

Creates a small synthetic paper corpus (metadata, interchange documents,
figure images), records every model response a full pipeline run needs into
the replay store via a scripted backend, verifies the replayed run, and
writes the replay-mode config. Run from the repository root:

    python3 scripts/build_replay_corpus.py
"""

from __future__ import annotations

import hashlib
import json
import shutil
import struct
import sys
import tempfile
import zlib
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from semdag.pipeline import load_config, run_pipeline  # noqa: E402

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "fixtures" / "replay_corpus"


def tiny_png(rgb: tuple[int, int, int]) -> bytes:
    def chunk(kind: bytes, data: bytes) -> bytes:
        return struct.pack(">I", len(data)) + kind + data + struct.pack(">I", zlib.crc32(kind + data) & 0xFFFFFFFF)

    header = struct.pack(">IIBBBBB", 1, 1, 8, 2, 0, 0, 0)
    pixels = zlib.compress(b"\x00" + bytes(rgb), 9)
    return b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", header) + chunk(b"IDAT", pixels) + chunk(b"IEND", b"")


def sha(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


# ----------------------------------------------------------------------------
# Corpus content

METADATA = [
    {
        "paper_id": "p1",
        "title": "Cirrhosis, ascites, and infection: an applied causality study",
        "abstract": "We analyse how cirrhosis causes ascites and downstream infection risk using a directed graph.",
        "source_repo": "arxiv",
        "publication_date": "2024-03-02",
    },
    {
        "paper_id": "p2",
        "title": "Graphical models of gene regulation in yeast",
        "abstract": "Gene X expression drives protein Y abundance which shapes the growth phenotype.",
        "source_repo": "biorxiv",
        "publication_date": "2024-05-11",
    },
    {
        "paper_id": "p3",
        "title": "Interpretability of structural assumptions in toy models",
        "abstract": "A symbolic study of chains X to Y to Z and what they license.",
        "source_repo": "arxiv",
        "publication_date": "2023-11-20",
    },
    {
        "paper_id": "p4",
        "title": "A survey of causality benchmarks",
        "abstract": "We survey datasets that touch causality without contributing an applied case study.",
        "source_repo": "arxiv",
        "publication_date": "2024-01-09",
    },
    {
        "paper_id": "p5",
        "title": "Causality in fisheries stock assessment",
        "abstract": "An applied causality angle; the full text never became available for parsing.",
        "source_repo": "biorxiv",
        "publication_date": "2023-09-01",
    },
    {
        "paper_id": "p6",
        "title": "Sixteen tricks for faster transformers",
        "abstract": "Engineering notes on attention kernels.",
        "source_repo": "arxiv",
        "publication_date": "2024-02-14",
    },
]

# paper -> [(figure_id, rgb)]
FIGURES = {
    "p1": [("f1", (200, 30, 30)), ("f2", (30, 200, 30)), ("f3", (30, 30, 200)), ("f4", (200, 200, 30))],
    "p2": [("f1", (200, 30, 200)), ("f2", (30, 200, 200)), ("f3", (120, 60, 0)), ("f4", (0, 60, 120))],
    "p3": [("f1", (90, 90, 90)), ("f2", (10, 140, 70)), ("f3", (70, 10, 140))],
}

BLOCKS = {
    "p1": [
        ("b1", "heading", "Introduction"),
        ("b2", "paragraph", "Cirrhosis is a late stage of liver scarring."),
        ("b3", "paragraph", "Cirrhosis causes ascites, the accumulation of fluid in the abdomen."),
        ("b4", "paragraph", "Ascites substantially raises the risk of bacterial infection."),
        ("b5", "caption", "Figure 1: causal diagram relating cirrhosis, ascites, and infection."),
        ("b6", "caption", "Figure 4: an illustrative pipeline flowchart."),
    ],
    "p2": [
        ("b1", "heading", "Results"),
        ("b2", "paragraph", "Expression of gene X drives the abundance of protein Y."),
        ("b3", "paragraph", "Protein Y abundance shapes the observed growth phenotype."),
        ("b4", "caption", "Figure 2: regulatory graph from gene X to phenotype."),
    ],
    "p3": [
        ("b1", "heading", "Setup"),
        ("b2", "paragraph", "We consider a chain where X influences Y and Y influences Z."),
        ("b3", "paragraph", "No concrete system is intended; the variables are placeholders."),
        ("b4", "caption", "Figure 3: the abstract chain X to Y to Z."),
    ],
    "p4": [
        ("b1", "paragraph", "This survey lists datasets."),
    ],
}

CAPTION_FOR = {("p1", "f1"): "b5", ("p1", "f4"): "b6", ("p2", "f2"): "b4", ("p3", "f3"): "b4"}

GOOD_P1_ANNOTATION = {
    "is_dag": True,
    "category": "causal diagram",
    "abstract": False,
    "nodes": [
        {"id": "cirrhosis", "label": "Cirrhosis", "aliases": ["liver scarring"], "description": "Late-stage liver scarring.", "evidence": ["b2", "b3"]},
        {"id": "ascites", "label": "Ascites", "aliases": [], "description": "Fluid accumulation in the abdomen.", "evidence": ["b3"]},
        {"id": "infection", "label": "Infection risk", "aliases": [], "description": "Risk of bacterial infection.", "evidence": ["b4"]},
    ],
    "edges": [
        {"source": "cirrhosis", "target": "ascites", "description": "Cirrhosis causes ascites.", "evidence": ["b3"]},
        {"source": "ascites", "target": "infection", "description": "Ascites raises infection risk.", "evidence": ["b4"]},
    ],
}

BAD_P2_ANNOTATION = {
    "is_dag": True,
    "category": "causal diagram",
    "abstract": False,
    "nodes": [
        {"id": "gene_x", "label": "Gene X", "aliases": [], "description": "", "evidence": ["b2"]},
        {"id": "Gene_X", "label": "Gene X duplicate", "aliases": [], "description": "", "evidence": ["b2"]},
        {"id": "protein_y", "label": "Protein Y", "aliases": [], "description": "", "evidence": ["b2", "b3"]},
    ],
    "edges": [{"source": "gene_x", "target": "protein_y", "description": "", "evidence": ["b2"]}],
}

GOOD_P2_ANNOTATION = {
    "is_dag": True,
    "category": "causal diagram",
    "abstract": False,
    "nodes": [
        {"id": "gene_x", "label": "Gene X", "aliases": ["X expression"], "description": "Expression level of gene X.", "evidence": ["b2"]},
        {"id": "protein_y", "label": "Protein Y", "aliases": [], "description": "Abundance of protein Y.", "evidence": ["b2", "b3"]},
        {"id": "phenotype", "label": "Growth phenotype", "aliases": [], "description": "Observed growth phenotype.", "evidence": ["b3"]},
    ],
    "edges": [
        {"source": "gene_x", "target": "protein_y", "description": "Gene X drives protein Y.", "evidence": ["b2"]},
        {"source": "protein_y", "target": "phenotype", "description": "Protein Y shapes the phenotype.", "evidence": ["b3"]},
    ],
}

UNGROUNDED_P3_ANNOTATION = {
    "is_dag": True,
    "category": "abstract chain",
    "abstract": True,
    "nodes": [
        {"id": "x", "label": "X", "aliases": [], "description": "", "evidence": ["b77"]},
        {"id": "y", "label": "Y", "aliases": [], "description": "", "evidence": ["b2"]},
    ],
    "edges": [{"source": "x", "target": "y", "description": "", "evidence": ["b2"]}],
}

GOOD_P3_ANNOTATION = {
    "is_dag": True,
    "category": "abstract chain",
    "abstract": True,
    "nodes": [
        {"id": "x", "label": "X", "aliases": [], "description": "Placeholder cause.", "evidence": ["b2"]},
        {"id": "y", "label": "Y", "aliases": [], "description": "Placeholder mediator.", "evidence": ["b2"]},
        {"id": "z", "label": "Z", "aliases": [], "description": "Placeholder effect.", "evidence": ["b2"]},
    ],
    "edges": [
        {"source": "x", "target": "y", "description": "X influences Y.", "evidence": ["b2"]},
        {"source": "y", "target": "z", "description": "Y influences Z.", "evidence": ["b2"]},
    ],
}

CLASSIFICATION = {
    ("p1", "f1"): '{"verdict": "accept"}',
    ("p1", "f2"): '{"verdict": "reject", "reason": "dag_like_other"}',
    ("p1", "f3"): '{"verdict": "reject", "reason": "cyclic"}',
    ("p1", "f4"): '{"verdict": "accept"}',
    ("p2", "f1"): '{"verdict": "reject", "reason": "multiple_dags"}',
    ("p2", "f2"): '{"verdict": "accept"}',
    ("p2", "f3"): "hmm, this one is tricky — maybe a DAG?",  # malformed on purpose
    ("p2", "f4"): '{"verdict": "abstain"}',
    ("p3", "f1"): '{"verdict": "accept"}',
    ("p3", "f2"): '{"verdict": "reject", "reason": "not_a_graph"}',
    ("p3", "f3"): '{"verdict": "accept"}',
}

ANNOTATION = {
    ("p1", "f1"): [json.dumps(GOOD_P1_ANNOTATION)],
    ("p1", "f4"): ['{"is_dag": false}'],
    ("p2", "f2"): [json.dumps(BAD_P2_ANNOTATION), json.dumps(GOOD_P2_ANNOTATION)],
    ("p3", "f1"): [json.dumps(UNGROUNDED_P3_ANNOTATION), json.dumps(UNGROUNDED_P3_ANNOTATION)],
    ("p3", "f3"): [json.dumps(GOOD_P3_ANNOTATION)],
}

ENRICHMENT = {
    "p1": '{"theme": "progression of liver disease", "domains": ["Hepatology", "Public Health"], "nature": "technical"}',
    "p2": '{"theme": "gene regulation in yeast", "domains": ["Molecular Biology"], "nature": "technical"}',
    "p3": '{"theme": "symbolic chain", "domains": ["Methodology"], "nature": "abstract"}',
}

ANNOTATOR_VERDICTS = {
    ("p1__f1", "a1"): '{"decision": "accept", "rationale": "Structure matches the caption and text."}',
    ("p1__f1", "a2"): '{"decision": "accept", "rationale": "Evidence blocks support every element."}',
    ("p1__f1", "a3"): '{"decision": "accept", "rationale": "Clean three-node chain."}',
    ("p2__f2", "a1"): '{"decision": "accept", "rationale": "Regulatory chain is well grounded."}',
    ("p2__f2", "a2"): '{"decision": "reject", "reason": "edge direction", "rationale": "Unsure about the second arrow."}',
    ("p2__f2", "a3"): '{"decision": "accept", "rationale": "Matches the results section."}',
    ("p3__f3", "a1"): '{"decision": "reject", "reason": "abstract placeholder", "rationale": "No real-world interpretation."}',
    ("p3__f3", "a2"): '{"decision": "reject", "reason": "weak evidence", "rationale": "Single block cited everywhere."}',
    ("p3__f3", "a3"): '{"decision": "accept", "rationale": "Faithful to the figure."}',
}

JUDGE_VERDICTS = {
    "p1__f1": '{"final": "accept", "rationale": "Unanimous annotators; evidence is specific."}',
    "p2__f2": '{"final": "accept", "rationale": "The direction concern is contradicted by block b3."}',
    "p3__f3": '{"final": "reject", "reason": "insufficient grounding", "rationale": "Two annotators flag weak support; being conservative."}',
}

CONFIG_TEMPLATE = """run_dir: {run_dir}
corpus:
  metadata: metadata.jsonl
  documents: docs
  corpus_root: .
terms: [causality, interpretability, graphical models]
chunk_max_chars: 2000
context_budget_chars: 12000
workers: 1
seed: 0
gateway:
  mode: {mode}
  replay_dir: replay
  max_attempts: 3
  backoff_base_s: 0.0
profiles:
  - {{name: filter-1, family: epsilon, capabilities: [text]}}
  - {{name: vlm-classify, family: alpha, capabilities: [text, vision]}}
  - {{name: vlm-annotate, family: beta, capabilities: [text, vision]}}
  - {{name: a1, family: alpha, capabilities: [text]}}
  - {{name: a2, family: beta, capabilities: [text]}}
  - {{name: a3, family: gamma, capabilities: [text]}}
  - {{name: j1, family: delta, capabilities: [text]}}
stages:
  filter: filter-1
  classify: vlm-classify
  annotate: vlm-annotate
  enrich: vlm-annotate
judge:
  enabled: true
  annotators: [a1, a2, a3]
  judge: j1
"""


class ScriptedBackend:
    """Deterministic canned answers for every request the pipeline makes."""

    def __init__(self, image_index: dict[str, tuple[str, str]]) -> None:
        self.image_index = image_index
        self.annotation_queues = {k: list(v) for k, v in ANNOTATION.items()}

    def send(self, profile, request, prompt_text):
        asset = request.prompt_asset_id
        if asset == "metadata_filter":
            paper_id = request.text_parts[0].split(": ", 1)[1]
            if paper_id == "p4":
                return '{"decision": "rejected", "reason": "survey without an applied case study"}'
            return '{"decision": "candidate"}'
        if asset == "dag_classification":
            figure = self.image_index[sha(Path(request.image_parts[0]).read_bytes())]
            return CLASSIFICATION[figure]
        if asset == "dag_annotation":
            figure = self.image_index[sha(Path(request.image_parts[0]).read_bytes())]
            queue = self.annotation_queues[figure]
            return queue.pop(0) if len(queue) > 1 else queue[0]
        if asset == "context_enrichment":
            dag_json = json.loads(request.text_parts[0])
            return ENRICHMENT[dag_json["provenance"]["paper_id"]]
        if asset == "judge_annotator":
            candidate_id = request.text_parts[0].split(": ", 1)[1]
            return ANNOTATOR_VERDICTS[(candidate_id, profile.name)]
        if asset == "judge_final":
            candidate_id = request.text_parts[0].split(": ", 1)[1]
            return JUDGE_VERDICTS[candidate_id]
        raise AssertionError(f"unexpected prompt asset {asset!r}")


def build_corpus() -> dict[str, tuple[str, str]]:
    if CORPUS.exists():
        shutil.rmtree(CORPUS)
    (CORPUS / "docs").mkdir(parents=True)
    (CORPUS / "images").mkdir()
    (CORPUS / "replay").mkdir()

    with (CORPUS / "metadata.jsonl").open("w", encoding="utf-8") as handle:
        for record in METADATA:
            handle.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")

    image_index: dict[str, tuple[str, str]] = {}
    for paper_id, figures in FIGURES.items():
        doc_figures = []
        for figure_id, rgb in figures:
            image = tiny_png(rgb)
            rel = f"images/{paper_id}_{figure_id}.png"
            (CORPUS / rel).write_bytes(image)
            image_index[sha(image)] = (paper_id, figure_id)
            doc_figures.append(
                {
                    "figure_id": figure_id,
                    "image_ref": rel,
                    "content_hash": sha(image),
                    "bbox": {"page": 1, "x0": 10.0, "y0": 10.0, "x1": 300.0, "y1": 200.0},
                    **(
                        {"caption_block": CAPTION_FOR[(paper_id, figure_id)]}
                        if (paper_id, figure_id) in CAPTION_FOR
                        else {}
                    ),
                }
            )
        meta = next(m for m in METADATA if m["paper_id"] == paper_id)
        doc = {
            "metadata": {**meta, "keyword_hits": []},
            "blocks": [
                {"block_id": bid, "kind": kind, "text": text, "page": 1, "order": i}
                for i, (bid, kind, text) in enumerate(BLOCKS[paper_id])
            ],
            "figures": doc_figures,
        }
        (CORPUS / "docs" / f"{paper_id}.json").write_text(json.dumps(doc, ensure_ascii=False, indent=2), encoding="utf-8")

    # p4 has a document too (it is downloaded, then LLM-rejected).
    meta4 = next(m for m in METADATA if m["paper_id"] == "p4")
    doc4 = {
        "metadata": {**meta4, "keyword_hits": []},
        "blocks": [
            {"block_id": bid, "kind": kind, "text": text, "page": 1, "order": i}
            for i, (bid, kind, text) in enumerate(BLOCKS["p4"])
        ],
        "figures": [],
    }
    (CORPUS / "docs" / "p4.json").write_text(json.dumps(doc4, ensure_ascii=False, indent=2), encoding="utf-8")
    return image_index


def main() -> None:
    image_index = build_corpus()

    with tempfile.TemporaryDirectory() as tmp:
        record_config_path = CORPUS / "config_record.yaml"
        record_config_path.write_text(CONFIG_TEMPLATE.format(run_dir=f"{tmp}/run", mode="record"), encoding="utf-8")
        config = load_config(record_config_path)
        summary = run_pipeline(config, backend=ScriptedBackend(image_index))
        record_config_path.unlink()
        kept = json.loads(Path(f"{tmp}/run/kept.json").read_text())["kept"]
        assert kept == ["p1__f1", "p2__f2"], f"unexpected kept set: {kept}"
        assert not summary["errors"], summary["errors"]

    (CORPUS / "config.yaml").write_text(CONFIG_TEMPLATE.format(run_dir="run", mode="replay"), encoding="utf-8")

    # Verify a hermetic replay in a fresh run dir reproduces the kept set.
    with tempfile.TemporaryDirectory() as tmp:
        replay_config = CORPUS / "config_verify.yaml"
        replay_config.write_text(CONFIG_TEMPLATE.format(run_dir=f"{tmp}/run", mode="replay"), encoding="utf-8")
        summary = run_pipeline(load_config(replay_config))
        replay_config.unlink()
        kept = json.loads(Path(f"{tmp}/run/kept.json").read_text())["kept"]
        assert kept == ["p1__f1", "p2__f2"], f"replay kept set: {kept}"
        funnel = json.loads(Path(f"{tmp}/run/funnel.json").read_text())
        print("replay verified")
        print(json.dumps(funnel, indent=2, sort_keys=True))
        print("recorded responses:", len(list((CORPUS / "replay").glob("*.json"))))


if __name__ == "__main__":
    main()

"""Shared fixtures and graph builders."""

from __future__ import annotations

import struct
import zlib

import pytest

from semdag.core import DagEdge, DagNode, GraphContext, Nature, Provenance, SemanticDag


def tiny_png(rgb: tuple[int, int, int]) -> bytes:
    """A deterministic 1x1 PNG; distinct colors give distinct content hashes."""

    def chunk(kind: bytes, data: bytes) -> bytes:
        return struct.pack(">I", len(data)) + kind + data + struct.pack(">I", zlib.crc32(kind + data) & 0xFFFFFFFF)

    header = struct.pack(">IIBBBBB", 1, 1, 8, 2, 0, 0, 0)
    pixels = zlib.compress(b"\x00" + bytes(rgb), 9)
    return b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", header) + chunk(b"IDAT", pixels) + chunk(b"IEND", b"")


def make_dag(
    node_ids,
    edges,
    paper_id: str = "paper-1",
    source_repo: str = "arxiv",
    figure_id: str | None = "fig1",
    domains=("Epidemiology",),
    nature: Nature = Nature.TECHNICAL,
    node_evidence: dict | None = None,
    edge_evidence: dict | None = None,
) -> SemanticDag:
    """Small-graph builder: node ids plus (source, target) pairs."""
    node_evidence = node_evidence or {}
    edge_evidence = edge_evidence or {}
    return SemanticDag(
        provenance=Provenance(paper_id=paper_id, source_repo=source_repo, figure_id=figure_id),
        context=GraphContext(theme="test graph", domains=tuple(domains), category="causal diagram", nature=nature),
        nodes=tuple(
            DagNode(id=n, label=n.upper(), evidence=tuple(node_evidence.get(n, ()))) for n in node_ids
        ),
        edges=tuple(
            DagEdge(source=s, target=t, evidence=tuple(edge_evidence.get((s, t), ()))) for s, t in edges
        ),
    )


@pytest.fixture
def chain_dag() -> SemanticDag:
    return make_dag(["a", "b", "c"], [("a", "b"), ("b", "c")])

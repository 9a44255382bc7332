/** Deterministic layered DAG layout seeded by the server's topological order.
 *
 * Layer = longest path from any root (computed along the topological
 * order); position within a layer follows topological position. The same
 * graph therefore always renders identically.
 */

import type { SemanticDag } from "./types.js";

export interface NodePosition {
  id: string;
  x: number;
  y: number;
  layer: number;
}

export interface GraphLayout {
  width: number;
  height: number;
  nodes: NodePosition[];
  byId: Map<string, NodePosition>;
}

export const NODE_W = 132;
export const NODE_H = 40;
const H_GAP = 40;
const V_GAP = 72;
const MARGIN = 36;

export function layoutGraph(dag: SemanticDag, topologicalOrder: string[]): GraphLayout {
  const order = topologicalOrder.length ? topologicalOrder : dag.nodes.map((n) => n.id);
  const indexOf = new Map(order.map((id, i) => [id, i]));

  const layer = new Map<string, number>();
  for (const id of order) layer.set(id, 0);
  for (const id of order) {
    for (const edge of dag.edges) {
      if (edge.source === id) {
        const next = Math.max(layer.get(edge.target) ?? 0, (layer.get(id) ?? 0) + 1);
        layer.set(edge.target, next);
      }
    }
  }

  const layers = new Map<number, string[]>();
  for (const id of order) {
    const l = layer.get(id) ?? 0;
    if (!layers.has(l)) layers.set(l, []);
    layers.get(l)!.push(id);
  }
  for (const ids of layers.values()) {
    ids.sort((a, b) => (indexOf.get(a) ?? 0) - (indexOf.get(b) ?? 0));
  }

  const layerCount = layers.size ? Math.max(...layers.keys()) + 1 : 0;
  const widest = Math.max(1, ...[...layers.values()].map((ids) => ids.length));
  const width = 2 * MARGIN + widest * NODE_W + (widest - 1) * H_GAP;
  const height = 2 * MARGIN + Math.max(1, layerCount) * NODE_H + Math.max(0, layerCount - 1) * V_GAP;

  const nodes: NodePosition[] = [];
  for (const [l, ids] of [...layers.entries()].sort((a, b) => a[0] - b[0])) {
    const rowWidth = ids.length * NODE_W + (ids.length - 1) * H_GAP;
    const startX = (width - rowWidth) / 2;
    ids.forEach((id, i) => {
      nodes.push({
        id,
        x: startX + i * (NODE_W + H_GAP) + NODE_W / 2,
        y: MARGIN + l * (NODE_H + V_GAP) + NODE_H / 2,
        layer: l,
      });
    });
  }

  return { width, height, nodes, byId: new Map(nodes.map((n) => [n.id, n])) };
}

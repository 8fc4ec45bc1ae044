// Client-side tidy layout for a tree document: leaves claim consecutive
// horizontal slots in depth-first order, parents center over their children.
// The gateway only streams node_id -> status, so geometry lives here.

import type { TreeNodeJson } from "./protocol.js";

export interface LaidOutNode {
  id: string;
  label: string;
  kind: TreeNodeJson["kind"];
  detail: string;
  x: number; // slot units
  y: number; // depth
}

export interface TreeLayout {
  nodes: LaidOutNode[];
  edges: [string, string][]; // parent id -> child id
  width: number; // slots
  height: number; // depth levels
}

function detailOf(node: TreeNodeJson): string {
  switch (node.kind) {
    case "Parallel":
      return `threshold ${node.success_threshold}`;
    case "Decorator":
      return node.decorator === "RetryUntilSuccessful"
        ? `${node.decorator} x${node.max_attempts}`
        : (node.decorator ?? "");
    case "Sequence":
    case "Fallback":
      return node.memory ? "memory" : "";
    default:
      return node.behavior ?? "";
  }
}

export function layoutTree(root: TreeNodeJson): TreeLayout {
  const nodes: LaidOutNode[] = [];
  const edges: [string, string][] = [];
  let nextSlot = 0;
  let depth = 0;

  function place(node: TreeNodeJson, level: number): number {
    depth = Math.max(depth, level);
    let x: number;
    const children = node.children ?? [];
    if (children.length === 0) {
      x = nextSlot++;
    } else {
      const xs = children.map((child) => {
        edges.push([node.id, child.id]);
        return place(child, level + 1);
      });
      x = (xs[0] + xs[xs.length - 1]) / 2;
    }
    nodes.push({
      id: node.id,
      label: node.label || node.behavior || node.id,
      kind: node.kind,
      detail: detailOf(node),
      x,
      y: level,
    });
    return x;
  }

  place(root, 0);
  return { nodes, edges, width: Math.max(nextSlot, 1), height: depth + 1 };
}

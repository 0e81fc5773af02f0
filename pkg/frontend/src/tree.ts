import { coldHot, GRAY, normalize } from "./colormap.js";
import type { Hierarchy } from "./types.js";

export interface TreeNode {
  kind: "layer" | "component";
  id: number;
  label: string;
  color: string;
  gray: boolean;
  selected: boolean;
  children: TreeNode[];
}

/**
 * Render model for the hierarchy tree: layer nodes with component leaves.
 * Leaf color encodes the chosen metric (cold -> hot over its range);
 * components below the sample threshold stay gray regardless.
 */
export function buildTreeModel(
  hierarchy: Hierarchy,
  selected: Set<number>,
): TreeNode[] {
  const comps = hierarchy.layers.flatMap((l) => l.components);
  const metricValues = comps.map((c) =>
    c.metric === null || c.metric === undefined ? NaN : c.metric,
  );
  const norm = normalize(metricValues);
  const colorOf = new Map<number, string>();
  comps.forEach((c, i) => {
    colorOf.set(c.id, c.gray || !Number.isFinite(metricValues[i]) ? GRAY : coldHot(norm[i]));
  });

  return hierarchy.layers.map((layer) => ({
    kind: "layer" as const,
    id: layer.layer,
    label: layer.iso
      ? `band ${layer.layer}: (${fmt(layer.iso[0])}, ${fmt(layer.iso[1])}]`
      : `band ${layer.layer}`,
    color: "inherit",
    gray: false,
    selected: false,
    children: layer.components.map((c) => ({
      kind: "component" as const,
      id: c.id,
      label: `component ${c.id} (${c.voxels} voxels, ${c.regions} regions)`,
      color: colorOf.get(c.id) ?? GRAY,
      gray: c.gray,
      selected: selected.has(c.id),
      children: [],
    })),
  }));
}

function fmt(v: number): string {
  return Math.abs(v) >= 100 || (v !== 0 && Math.abs(v) < 0.01)
    ? v.toExponential(2)
    : v.toPrecision(3);
}

/** DOM rendering: nested lists, component clicks select with the active op. */
export function renderTree(
  container: HTMLElement,
  nodes: TreeNode[],
  onComponentClick: (id: number) => void,
): void {
  container.textContent = "";
  const root = document.createElement("ul");
  root.className = "tree";
  for (const layer of nodes) {
    const li = document.createElement("li");
    const label = document.createElement("span");
    label.className = "tree-layer";
    label.textContent = layer.label;
    li.appendChild(label);
    const ul = document.createElement("ul");
    for (const comp of layer.children) {
      const leaf = document.createElement("li");
      const dot = document.createElement("span");
      dot.className = "tree-dot";
      dot.style.background = comp.color;
      const text = document.createElement("span");
      text.textContent = comp.label;
      text.className = comp.selected ? "tree-leaf selected" : "tree-leaf";
      if (comp.gray) text.classList.add("gray");
      leaf.append(dot, text);
      leaf.addEventListener("click", () => onComponentClick(comp.id));
      ul.appendChild(leaf);
    }
    li.appendChild(ul);
    root.appendChild(li);
  }
  container.appendChild(root);
}

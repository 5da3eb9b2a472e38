import type { TreeNodePayload } from "./types.js";

export interface TreeRow {
  depth: number;
  label: string;
  /** Server-reported node value, displayed verbatim. */
  value: string;
  isQuestion: boolean;
  highlighted: boolean;
}

const OPERATOR_LABELS: Record<string, string> = {
  and: "ALL OF",
  or: "ANY OF",
  not: "NOT",
};

/** Flatten a server tree snapshot into displayable rows (pure, DOM-free). */
export function describeTree(
  node: TreeNodePayload,
  highlight: string[] = [],
  depth = 0,
): TreeRow[] {
  const isQuestion = node.kind === "question";
  const label = isQuestion ? node.question_id ?? "?" : OPERATOR_LABELS[node.kind];
  const rows: TreeRow[] = [
    {
      depth,
      label,
      value: node.value,
      isQuestion,
      highlighted: isQuestion && highlight.includes(node.question_id ?? ""),
    },
  ];
  for (const child of node.children ?? []) {
    rows.push(...describeTree(child, highlight, depth + 1));
  }
  return rows;
}

export function renderTree(
  doc: Document,
  node: TreeNodePayload,
  highlight: string[] = [],
): HTMLElement {
  const list = doc.createElement("ul");
  list.className = "tree";
  for (const row of describeTree(node, highlight)) {
    const item = doc.createElement("li");
    item.className = `tree-row value-${row.value}`;
    if (row.highlighted) {
      item.classList.add("missing");
    }
    item.style.paddingLeft = `${row.depth * 1.25}rem`;

    const label = doc.createElement("span");
    label.className = "tree-label";
    label.textContent = row.label;
    item.appendChild(label);

    const badge = doc.createElement("span");
    badge.className = "tree-value";
    badge.textContent = row.value;
    item.appendChild(badge);

    list.appendChild(item);
  }
  return list;
}

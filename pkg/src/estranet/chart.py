"""Evolution chart: a node x snapshot grid of community labels, as TSV or SVG."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

ABSENT = None

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#aec7e8", "#ffbb78", "#98df8a", "#ff9896", "#c5b0d5", "#c49c94",
)


def label_color(label: int) -> str:
    return PALETTE[label % len(PALETTE)]


@dataclass
class EvolutionChart:
    nodes: list
    times: list
    cells: list  # cells[i][j]: label of nodes[i] at times[j], or ABSENT

    @property
    def labels(self) -> list[int]:
        return sorted({c for row in self.cells for c in row if c is not ABSENT})


def label_tuple(history: list) -> tuple:
    """Distinct labels of one node, most frequent first; equal counts keep acquisition order."""
    count: dict = {}
    first: dict = {}
    for j, lab in enumerate(history):
        if lab is ABSENT:
            continue
        count[lab] = count.get(lab, 0) + 1
        first.setdefault(lab, j)
    return tuple(sorted(count, key=lambda lab: (-count[lab], first[lab])))


def order_nodes(histories: dict) -> list:
    """Sort nodes by label tuple, then by first appearance, then by id.

    Tuples are compared position by position; a tuple that runs out sorts after
    any label at that position.
    """
    tuples = {u: label_tuple(h) for u, h in histories.items()}
    width = max((len(t) for t in tuples.values()), default=0)

    def key(u):
        tup = tuples[u]
        padded = tuple((0, lab) for lab in tup) + ((1, 0),) * (width - len(tup))
        appear = next((j for j, lab in enumerate(histories[u]) if lab is not ABSENT), math.inf)
        return padded, appear, str(u)

    return sorted(histories, key=key)


def build_chart(result: dict) -> EvolutionChart:
    """Chart from a result document ``{"snapshots": [{"t": .., "labels": {..}}, ..]}``."""
    try:
        snaps = result["snapshots"]
        times = [int(s["t"]) for s in snaps]
        per_t = [{str(k): int(v) for k, v in s["labels"].items()} for s in snaps]
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ValueError(f"malformed result document: {exc}") from exc
    seen: dict = {}
    for labels in per_t:
        for u in labels:
            seen.setdefault(u, None)
    histories = {u: [labels.get(u, ABSENT) for labels in per_t] for u in seen}
    nodes = order_nodes(histories)
    return EvolutionChart(nodes, times, [histories[u] for u in nodes])


def load_result(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"malformed result JSON: {exc}") from exc


def to_tsv(chart: EvolutionChart) -> str:
    lines = ["node\t" + "\t".join(str(t) for t in chart.times)]
    for u, row in zip(chart.nodes, chart.cells):
        lines.append(u + "\t" + "\t".join("-" if c is ABSENT else str(c) for c in row))
    return "\n".join(lines) + "\n"


def to_svg(chart: EvolutionChart, cell: int = 8) -> str:
    """Colored grid, one row per node, with a legend of labels below it."""
    n_rows, n_cols = len(chart.nodes), len(chart.times)
    legend = chart.labels
    line_h = 14
    grid_h = n_rows * cell
    width = max(n_cols * cell, 120)
    height = grid_h + 10 + line_h * len(legend)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">'
    ]
    for i, (u, row) in enumerate(zip(chart.nodes, chart.cells)):
        for j, lab in enumerate(row):
            if lab is ABSENT:
                continue
            out.append(
                f'<rect x="{j * cell}" y="{i * cell}" width="{cell}" height="{cell}" '
                f'fill="{label_color(lab)}"><title>{escape(u)} t={chart.times[j]} label {lab}</title></rect>'
            )
    for k, lab in enumerate(legend):
        y = grid_h + 10 + k * line_h
        out.append(f'<rect x="0" y="{y}" width="10" height="10" fill="{label_color(lab)}"/>')
        out.append(f'<text x="14" y="{y + 9}" font-size="10" font-family="monospace">label {lab}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"

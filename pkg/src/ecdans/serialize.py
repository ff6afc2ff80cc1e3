"""File formats: graph JSON (schema 1), DOT export, dataset and metrics CSV.

The graph JSON serialization is canonical (sorted edges, fixed key order,
two-space indent, trailing newline) so identical graphs produce identical
bytes. All parse errors name the offending position or field.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Union

import numpy as np

from .model import (
    SURROGATE,
    Dataset,
    Edge,
    NodeRef,
    Orientation,
    WindowGraph,
)

PathLike = Union[str, Path]

GRAPH_SCHEMA = 1

#: Column order of the metrics CSV; the *_sd columns are filled only on
#: aggregate rows.
METRICS_FIELDS = (
    "seed", "m", "T", "tau_max", "class", "TP", "FP", "FN",
    "tpr", "fdr", "shd", "runtime_ms",
    "tpr_sd", "fdr_sd", "shd_sd", "runtime_ms_sd",
)


class ParseError(ValueError):
    """Malformed input file; the message names the offending position."""


def _encode_node(ref: NodeRef):
    if ref.is_surrogate:
        return "C"
    return {"var": ref.var, "lag": ref.lag}


def _decode_node(obj, where: str) -> NodeRef:
    if obj == "C":
        return SURROGATE
    if not isinstance(obj, dict):
        raise ParseError(
            f"{where}: expected \"C\" or an object with var/lag, got {obj!r}")
    unknown = sorted(set(obj) - {"var", "lag"})
    if unknown:
        raise ParseError(f"{where}.{unknown[0]}: unknown field")
    for name in ("var", "lag"):
        if name not in obj:
            raise ParseError(f"{where}.{name}: missing")
        value = obj[name]
        if isinstance(value, bool) or not isinstance(value, int):
            raise ParseError(
                f"{where}.{name}: expected an integer, got {value!r}")
    try:
        return NodeRef(obj["var"], obj["lag"])
    except ValueError as exc:
        raise ParseError(f"{where}: {exc}") from None


def graph_to_dict(graph: WindowGraph) -> dict:
    return {
        "schema": GRAPH_SCHEMA,
        "m": graph.m,
        "tau_max": graph.tau_max,
        "changing_modules": sorted(graph.changing_modules),
        "edges": [
            {"a": _encode_node(e.a), "b": _encode_node(e.b),
             "dir": e.orientation.value}
            for e in graph.sorted_edges()
        ],
    }


def dumps_graph(graph: WindowGraph) -> str:
    """Canonical JSON text for a graph (byte-stable for equal graphs)."""
    return json.dumps(graph_to_dict(graph), indent=2) + "\n"


def write_graph_json(graph: WindowGraph, path: PathLike) -> None:
    Path(path).write_text(dumps_graph(graph), encoding="utf-8")


def _expect_int(doc: dict, name: str) -> int:
    value = doc[name]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(f"{name}: expected an integer, got {value!r}")
    return value


def graph_from_dict(doc) -> WindowGraph:
    if not isinstance(doc, dict):
        raise ParseError(f"top level: expected an object, got {type(doc).__name__}")
    required = ("schema", "m", "tau_max", "changing_modules", "edges")
    for name in required:
        if name not in doc:
            raise ParseError(f"{name}: missing")
    unknown = sorted(set(doc) - set(required))
    if unknown:
        raise ParseError(f"{unknown[0]}: unknown field")
    if doc["schema"] != GRAPH_SCHEMA:
        raise ParseError(
            f"schema: expected {GRAPH_SCHEMA}, got {doc['schema']!r}")
    m = _expect_int(doc, "m")
    tau_max = _expect_int(doc, "tau_max")
    if not isinstance(doc["edges"], list):
        raise ParseError("edges: expected a list")
    edges = []
    for k, item in enumerate(doc["edges"]):
        where = f"edges[{k}]"
        if not isinstance(item, dict):
            raise ParseError(f"{where}: expected an object")
        for name in ("a", "b", "dir"):
            if name not in item:
                raise ParseError(f"{where}.{name}: missing")
        unknown = sorted(set(item) - {"a", "b", "dir"})
        if unknown:
            raise ParseError(f"{where}.{unknown[0]}: unknown field")
        a = _decode_node(item["a"], f"{where}.a")
        b = _decode_node(item["b"], f"{where}.b")
        direction = item["dir"]
        if direction not in ("ab", "ba", "und"):
            raise ParseError(
                f"{where}.dir: expected one of ab/ba/und, got {direction!r}")
        try:
            edges.append(Edge.between(a, b, Orientation(direction)))
        except ValueError as exc:
            raise ParseError(f"{where}: {exc}") from None
    try:
        graph = WindowGraph(m, tau_max, frozenset(edges))
    except ValueError as exc:
        raise ParseError(f"edges: {exc}") from None
    declared = doc["changing_modules"]
    if (not isinstance(declared, list)
            or any(isinstance(v, bool) or not isinstance(v, int)
                   for v in declared)):
        raise ParseError("changing_modules: expected a list of integers")
    if sorted(declared) != sorted(graph.changing_modules):
        raise ParseError(
            f"changing_modules: {sorted(declared)} does not match the "
            f"surrogate edges {sorted(graph.changing_modules)}")
    return graph


def read_graph_json(path: PathLike) -> WindowGraph:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from None
    try:
        return graph_from_dict(doc)
    except ParseError as exc:
        raise ParseError(f"{path}: {exc}") from None


def graph_to_dot(graph: WindowGraph) -> str:
    """DOT text with lagged nodes ranked left of the contemporaneous ones."""
    lines = [
        "digraph window_graph {",
        "  rankdir=LR;",
        "  node [shape=box];",
    ]
    incident = {n for e in graph.edges for n in e.pair}
    for lag in range(graph.tau_max, 0, -1):
        members = sorted((n for n in incident if n.lag == lag and n.var is not None),
                         key=NodeRef.sort_key)
        if members:
            group = " ".join(f'"{n}";' for n in members)
            lines.append("  { rank=same; " + group + " }")
    lag0 = [NodeRef(i, 0) for i in range(graph.m)]
    if SURROGATE in incident:
        lag0.append(SURROGATE)
    lines.append("  { rank=same; " + " ".join(f'"{n}";' for n in lag0) + " }")
    for e in graph.sorted_edges():
        if e.orientation is Orientation.UNDIRECTED:
            lines.append(f'  "{e.a}" -> "{e.b}" [dir=none];')
        elif e.orientation is Orientation.A_TO_B:
            lines.append(f'  "{e.a}" -> "{e.b}";')
        else:
            lines.append(f'  "{e.b}" -> "{e.a}";')
    lines.append("}")
    return "\n".join(lines) + "\n"


def write_graph_dot(graph: WindowGraph, path: PathLike) -> None:
    Path(path).write_text(graph_to_dot(graph), encoding="utf-8")


def read_dataset_csv(path: PathLike) -> Dataset:
    """Parse a comma-separated dataset with a required header row.

    Errors report the line (1-based, header included) and column of the
    offending cell.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        raw = list(csv.reader(fh))
    numbered = [(lineno, row) for lineno, row in enumerate(raw, start=1)
                if row]
    if not numbered:
        raise ParseError(f"{path}: empty file")
    _, header = numbered[0]
    header = [h.strip() for h in header]
    for c, name in enumerate(header):
        if not name:
            raise ParseError(f"{path}: line 1: header column {c + 1} is empty")
    seen: dict[str, int] = {}
    for c, name in enumerate(header):
        if name in seen:
            raise ParseError(
                f"{path}: line 1: duplicate header {name!r} "
                f"(columns {seen[name] + 1} and {c + 1})")
        seen[name] = c

    def numeric(cell: str) -> bool:
        try:
            float(cell)
        except ValueError:
            return False
        return True

    if all(numeric(h) for h in header):
        raise ParseError(
            f"{path}: line 1: a header row is required, found only numbers")
    m = len(header)
    body = numbered[1:]
    values = np.empty((len(body), m))
    for r, (lineno, row) in enumerate(body):
        if len(row) != m:
            raise ParseError(
                f"{path}: line {lineno}: expected {m} fields, got {len(row)}")
        for c, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(
                    f"{path}: line {lineno}, column {header[c]!r}: "
                    f"not a number: {cell.strip()!r}") from None
            if not math.isfinite(v):
                raise ParseError(
                    f"{path}: line {lineno}, column {header[c]!r}: "
                    f"non-finite value {cell.strip()!r}")
            values[r, c] = v
    try:
        return Dataset(values, tuple(header))
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None


def write_dataset_csv(dataset: Dataset, path: PathLike) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(dataset.names)
        for row in dataset.values:
            writer.writerow([repr(float(v)) for v in row])


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".6g")
    return str(value)


def write_metrics_csv(rows: list[dict], path: PathLike) -> None:
    """Write metrics rows with the fixed column order; missing and None
    values become empty fields."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_FIELDS)
        for row in rows:
            unknown = sorted(set(row) - set(METRICS_FIELDS))
            if unknown:
                raise ValueError(f"unknown metrics column {unknown[0]!r}")
            writer.writerow(
                [_format_cell(row.get(name)) for name in METRICS_FIELDS])

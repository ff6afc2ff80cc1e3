"""Graph-comparison metrics: adjacency confusion, TPR, FDR, and SHD.

TPR and FDR score the skeleton (unordered adjacency), broken down by edge
class. SHD additionally charges one unit per shared adjacency whose
orientation differs (a reversed edge and an undirected-vs-directed
disagreement both cost 1). Surrogate edges count by default; every
function takes a flag to exclude them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .model import Edge, NodeRef, WindowGraph, pair_key

#: Edge classes, in reporting order. "overall" aggregates all three.
EDGE_CLASSES = ("lagged", "contemporaneous", "surrogate")


def edge_class(pair: tuple[NodeRef, NodeRef]) -> str:
    """Class of an unordered endpoint pair by its non-lag-0 endpoint."""
    a, b = pair
    if a.is_surrogate or b.is_surrogate:
        return "surrogate"
    if a.is_lagged or b.is_lagged:
        return "lagged"
    return "contemporaneous"


@dataclass(frozen=True)
class Confusion:
    """Adjacency-level counts for one edge class."""

    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other: "Confusion") -> "Confusion":
        return Confusion(self.tp + other.tp, self.fp + other.fp,
                         self.fn + other.fn)


def _check_dims(true_graph: WindowGraph, est_graph: WindowGraph) -> None:
    if (true_graph.m, true_graph.tau_max) != (est_graph.m, est_graph.tau_max):
        raise ValueError(
            f"dimension mismatch: true graph is (m={true_graph.m}, "
            f"tau_max={true_graph.tau_max}), estimate is "
            f"(m={est_graph.m}, tau_max={est_graph.tau_max})")


def _pairs(graph: WindowGraph, include_surrogate: bool
           ) -> set[tuple[NodeRef, NodeRef]]:
    out = {e.pair for e in graph.edges}
    if not include_surrogate:
        out = {p for p in out if edge_class(p) != "surrogate"}
    return out


def confusion(true_graph: WindowGraph, est_graph: WindowGraph,
              include_surrogate: bool = True) -> dict[str, Confusion]:
    """Adjacency confusion per edge class plus an "overall" aggregate."""
    _check_dims(true_graph, est_graph)
    true_pairs = _pairs(true_graph, include_surrogate)
    est_pairs = _pairs(est_graph, include_surrogate)
    counts = {c: Confusion() for c in EDGE_CLASSES}
    for p in true_pairs & est_pairs:
        c = edge_class(p)
        counts[c] = counts[c] + Confusion(tp=1)
    for p in est_pairs - true_pairs:
        c = edge_class(p)
        counts[c] = counts[c] + Confusion(fp=1)
    for p in true_pairs - est_pairs:
        c = edge_class(p)
        counts[c] = counts[c] + Confusion(fn=1)
    counts["overall"] = sum(
        (counts[c] for c in EDGE_CLASSES), Confusion())
    if not include_surrogate:
        del counts["surrogate"]
    return counts


def tpr(conf: Confusion) -> Optional[float]:
    """TP / (TP + FN); None when the true graph has no edges of this
    class (undefined, deliberately not 0)."""
    denom = conf.tp + conf.fn
    if denom == 0:
        return None
    return conf.tp / denom


def fdr(conf: Confusion) -> float:
    """FP / (TP + FP); 0 by convention when nothing was predicted."""
    denom = conf.tp + conf.fp
    if denom == 0:
        return 0.0
    return conf.fp / denom


def shd(true_graph: WindowGraph, est_graph: WindowGraph,
        include_surrogate: bool = True,
        edge_classes: Optional[tuple[str, ...]] = None) -> int:
    """Structural hamming distance.

    One unit per missing or extra adjacency, plus one per shared
    adjacency whose orientation differs. ``edge_classes`` restricts the
    count to the named classes.
    """
    _check_dims(true_graph, est_graph)
    true_edges = {e.pair: e for e in true_graph.edges}
    est_edges = {e.pair: e for e in est_graph.edges}
    total = 0
    for pair in set(true_edges) | set(est_edges):
        c = edge_class(pair)
        if not include_surrogate and c == "surrogate":
            continue
        if edge_classes is not None and c not in edge_classes:
            continue
        t, e = true_edges.get(pair), est_edges.get(pair)
        if t is None or e is None:
            total += 1
        elif t.orientation is not e.orientation:
            total += 1
    return total

"""Graph-implied CI oracle for validating the skeleton search.

Substitutes for the data-driven tester: independence answers come from
d-separation in the ground-truth process graph, computed by active-path
reachability on a time-unrolled copy deep enough that truncation cannot
hide ancestral paths at desk scale. Effect sizes are graded rather than
binary: the oracle assigns every edge a canonical linear-Gaussian
parameterization (coefficient 0.5, unit noise, C standard normal) and
reports the exact partial correlation implied by it, so the candidate
orderings the skeleton search relies on behave as they do on data.
"""

from __future__ import annotations

import numpy as np

from typing import Iterable, Optional

from .model import CITestResult, NodeRef, WindowGraph, pair_key

# Unrolled node: ("C",) for the surrogate, else (var, time) with time
# 0..depth and depth = "now".
_SURROGATE_NODE = ("C",)

# Edge weight of the canonical parameterization backing the effect sizes.
_CANONICAL_COEF = 0.5


class GraphOracleTester:
    """d-separation oracle with the same surface as the data tester.

    Independence is decided by d-separation (p-value 1.0 when separated,
    0.0 otherwise). The effect size is the exact partial correlation under
    the canonical parameterization, which is nonzero precisely when the
    pair is d-connected, so orderings by effect size are informative.
    Ground-truth edges must be oriented (lagged edges toward lag 0,
    surrogate edges away from C, contemporaneous edges acyclic).
    """

    def __init__(self, graph: WindowGraph, depth: Optional[int] = None):
        self.graph = graph
        self.m = graph.m
        self.tau_max = graph.tau_max
        if depth is None:
            # Generous unrolling margin; ancestor chains repeat within it.
            depth = (graph.m + 2) * max(graph.tau_max, 1) + 2
        self.depth = depth
        self._parents: dict[tuple, list[tuple]] = {}
        self._children: dict[tuple, list[tuple]] = {}
        self._build_unrolled()
        self._index = {_SURROGATE_NODE: 0}
        for var in range(self.m):
            for t in range(self.depth + 1):
                self._index[(var, t)] = len(self._index)
        self._corr = self._implied_correlations()
        self.n_tests = 0

    def _implied_correlations(self) -> np.ndarray:
        """Correlation matrix of the unrolled nodes under canonical weights."""
        n = len(self._index)
        b = np.zeros((n, n))
        for child, parents in self._parents.items():
            for parent in parents:
                b[self._index[child], self._index[parent]] = _CANONICAL_COEF
        root = np.linalg.solve(np.eye(n) - b, np.eye(n))
        cov = root @ root.T
        scale = np.sqrt(np.diag(cov))
        return cov / np.outer(scale, scale)

    def _add_edge(self, parent: tuple, child: tuple) -> None:
        self._parents.setdefault(child, []).append(parent)
        self._children.setdefault(parent, []).append(child)

    def _build_unrolled(self) -> None:
        lagged = []
        contemp = []
        for e in self.graph.sorted_edges():
            if e.is_surrogate:
                continue
            if e.is_lagged:
                lagged.append((e.a.var, e.a.lag, e.b.var))
            else:
                if e.orientation.value == "ab":
                    contemp.append((e.a.var, e.b.var))
                elif e.orientation.value == "ba":
                    contemp.append((e.b.var, e.a.var))
                else:
                    raise ValueError(
                        f"oracle requires oriented ground truth, got {e}")
        changing = sorted(self.graph.changing_modules)
        for t in range(self.depth + 1):
            for i, tau, j in lagged:
                if t - tau >= 0:
                    self._add_edge((i, t - tau), (j, t))
            for i, j in contemp:
                self._add_edge((i, t), (j, t))
            for j in changing:
                self._add_edge(_SURROGATE_NODE, (j, t))

    def _node(self, ref: NodeRef) -> tuple:
        if ref.is_surrogate:
            return _SURROGATE_NODE
        return (ref.var, self.depth - ref.lag)

    def _ancestors_of(self, nodes: Iterable[tuple]) -> set:
        seen = set(nodes)
        stack = list(seen)
        while stack:
            node = stack.pop()
            for p in self._parents.get(node, ()):
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        return seen

    def d_separated(self, a: NodeRef, b: NodeRef,
                    cond: Iterable[NodeRef]) -> bool:
        """Active-path reachability (Bayes-ball) from a toward b given cond."""
        src = self._node(a)
        dst = self._node(b)
        blocked = {self._node(c) for c in cond}
        if src in blocked or dst in blocked:
            raise ValueError("conditioning set contains an endpoint")
        # Nodes that are in the conditioning set or have a descendant in it:
        # these open colliders.
        opens_collider = self._ancestors_of(blocked)

        # State (node, direction): "up" = entered from a child (or start),
        # "down" = entered from a parent.
        visited = set()
        stack = [(src, "up")]
        while stack:
            node, direction = stack.pop()
            if (node, direction) in visited:
                continue
            visited.add((node, direction))
            if node == dst:
                return False
            if direction == "up":
                if node in blocked:
                    continue
                for p in self._parents.get(node, ()):
                    stack.append((p, "up"))
                for c in self._children.get(node, ()):
                    stack.append((c, "down"))
            else:
                if node not in blocked:
                    for c in self._children.get(node, ()):
                        stack.append((c, "down"))
                if node in opens_collider:
                    for p in self._parents.get(node, ()):
                        stack.append((p, "up"))
        return True

    def _partial_correlation(self, a: NodeRef, b: NodeRef,
                             cond: tuple) -> float:
        idx = [self._index[self._node(r)] for r in (a, b) + cond]
        sub = self._corr[np.ix_(idx, idx)]
        precision = np.linalg.pinv(sub)
        denom = np.sqrt(precision[0, 0] * precision[1, 1])
        if denom <= 0.0 or not np.isfinite(denom):
            return 0.0
        return float(np.clip(-precision[0, 1] / denom, -1.0, 1.0))

    def test(self, a: NodeRef, b: NodeRef,
             cond: Iterable[NodeRef] = ()) -> CITestResult:
        if a == b:
            raise ValueError("cannot test a node against itself")
        cond = tuple(sorted(cond, key=NodeRef.sort_key))
        if a in cond or b in cond:
            raise ValueError("conditioning set contains an endpoint")
        self.n_tests += 1
        independent = self.d_separated(a, b, cond)
        effect = 0.0 if independent else abs(
            self._partial_correlation(a, b, cond))
        return CITestResult(
            statistic=effect,
            p_value=1.0 if independent else 0.0,
            effect_size=effect,
            independent=independent,
            cond_set=cond,
        )


def true_skeleton_pairs(graph: WindowGraph) -> set:
    """Unordered endpoint pairs of the ground-truth graph's edges."""
    return {pair_key(e.a, e.b) for e in graph.edges}

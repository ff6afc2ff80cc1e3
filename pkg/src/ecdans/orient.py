"""Edge orientation over a discovered skeleton.

Rules, applied in order by the pipeline:

1. ``orient_lagged``: lagged edges point forward in time.
2. ``orient_surrogate``: surviving surrogate edges point away from C.
3. ``orient_ctriples``: for a triple C — X_i — X_j with X_j not adjacent
   to C, the separating set recorded for (C, X_j) decides collider vs
   chain.
4. ``orient_by_module_independence``: remaining undirected contemporaneous
   edges between two changing modules are scored by dependence between
   windowed module-parameter trajectories; the direction whose factors
   vary more independently wins.

Orientation never adds or removes edges. Rules that can decline to orient
return structured diagnostics alongside the graph.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .citest import hsic_statistic
from .model import (
    SURROGATE,
    Dataset,
    DegenerateKernelError,
    Edge,
    InternalConsistencyError,
    NodeRef,
    Orientation,
    SeparationLog,
    WindowGraph,
    lagged_column,
    variable,
)
from .skeleton import _run_ordered

_LOG_VAR_FLOOR = 1e-300


@dataclass(frozen=True)
class OrientConfig:
    """Knobs for the module-trajectory orientation rule.

    Parameters
    ----------
    n_windows : int
        Number of contiguous time windows the effective sample is split
        into, at least 2.
    min_window : int
        Smallest acceptable window length; shorter windows skip the rule.
    decision_margin : float
        Required relative gap between the two direction scores.
    """

    n_windows: int = 10
    min_window: int = 30
    decision_margin: float = 0.1

    def __post_init__(self):
        if self.n_windows < 2:
            raise ValueError(f"n_windows must be >= 2, got {self.n_windows}")
        if self.min_window < 10:
            raise ValueError(f"min_window must be >= 10, got {self.min_window}")
        if self.decision_margin < 0.0:
            raise ValueError(
                f"decision_margin must be >= 0, got {self.decision_margin}")


@dataclass(frozen=True)
class Diagnostic:
    """A rule declined to orient an edge; says which rule and why."""

    edge: Edge
    rule: str
    reason: str

    def __str__(self) -> str:
        return f"[{self.rule}] {self.edge.a} — {self.edge.b}: {self.reason}"


def orient_lagged(graph: WindowGraph) -> WindowGraph:
    """Point every lagged edge from the lagged node to the lag-0 node."""
    out = graph
    for e in graph.lagged_edges():
        if e.orientation is not Orientation.A_TO_B:
            out = out.with_replaced(e.oriented(e.a, e.b))
    return out


def orient_surrogate(graph: WindowGraph) -> WindowGraph:
    """Point every surviving surrogate edge away from C."""
    out = graph
    for e in graph.surrogate_edges():
        if e.orientation is not Orientation.A_TO_B:
            out = out.with_replaced(e.oriented(e.a, e.b))
    return out


def orient_ctriples(graph: WindowGraph, log: SeparationLog
                    ) -> tuple[WindowGraph, list[Diagnostic]]:
    """Apply the surrogate-triple rule to undirected contemporaneous edges.

    For each undirected X_i — X_j where exactly one endpoint (X_i) is
    adjacent to C: recall the separating set that removed C — X_j. If X_i
    is not in it, X_i is a collider (orient X_j -> X_i); otherwise X_i
    mediates (orient X_i -> X_j). Contradictory demands on one edge leave
    it undirected with a diagnostic.
    """
    demands: dict[tuple[NodeRef, NodeRef], set] = {}
    for e in graph.contemporaneous_edges():
        if e.orientation is not Orientation.UNDIRECTED:
            continue
        a_adj = graph.adjacent(SURROGATE, e.a)
        b_adj = graph.adjacent(SURROGATE, e.b)
        if a_adj == b_adj:
            continue
        xi, xj = (e.a, e.b) if a_adj else (e.b, e.a)
        sep = log.get(SURROGATE, xj)
        if sep is None:
            raise InternalConsistencyError(
                f"no separation entry for removed surrogate edge to {xj}")
        if xi in sep:
            demands.setdefault(e.pair, set()).add((xi, xj))
        else:
            demands.setdefault(e.pair, set()).add((xj, xi))

    out = graph
    diags: list[Diagnostic] = []
    for pair in sorted(demands,
                       key=lambda p: p[0].sort_key() + p[1].sort_key()):
        edge = graph.edge_between(*pair)
        wanted = demands[pair]
        if len(wanted) == 1:
            src, dst = next(iter(wanted))
            out = out.with_replaced(edge.oriented(src, dst))
        else:
            out = out.with_replaced(edge.undirected())
            diags.append(Diagnostic(
                edge, "c-triple",
                "conflicting triple orientations; left undirected"))
    return out, diags


def _window_slices(n: int, n_windows: int) -> list[slice]:
    # Contiguous equal-length windows; the remainder rows at the end are
    # dropped so window statistics stay comparable.
    w = n // n_windows
    return [slice(k * w, (k + 1) * w) for k in range(n_windows)]


def _fit_residuals(y: np.ndarray, regressors: list[np.ndarray]
                   ) -> tuple[np.ndarray, np.ndarray]:
    design = np.column_stack([np.ones(len(y))] + regressors)
    beta, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    return beta, y - design @ beta


def _zscore_columns(traj: np.ndarray) -> Optional[np.ndarray]:
    # Constant columns carry no trajectory information; drop them. If
    # nothing is left the trajectory is degenerate.
    mean = traj.mean(axis=0)
    sd = traj.std(axis=0)
    keep = sd > 0
    if not np.any(keep):
        return None
    return (traj[:, keep] - mean[keep]) / sd[keep]


def _direction_score(dataset: Dataset, graph: WindowGraph, i: int, j: int,
                     cfg: OrientConfig) -> Optional[float]:
    """Dependence between the cause's marginal trajectory and the effect's
    mechanism trajectory for the hypothesis X_i -> X_j. None if degenerate."""
    tau_max = graph.tau_max
    x_i = lagged_column(dataset, variable(i), tau_max)
    x_j = lagged_column(dataset, variable(j), tau_max)
    pa_i = [lagged_column(dataset, r, tau_max)
            for r in graph.lagged_parents(i)]
    pa_j = [lagged_column(dataset, r, tau_max)
            for r in graph.lagged_parents(j)]

    marginal_rows = []
    conditional_rows = []
    for sl in _window_slices(len(x_i), cfg.n_windows):
        _, resid_i = _fit_residuals(x_i[sl], [c[sl] for c in pa_i])
        var_i = float(np.mean(resid_i ** 2))
        marginal_rows.append(
            (float(np.mean(x_i[sl])), np.log(max(var_i, _LOG_VAR_FLOOR))))
        beta, resid_j = _fit_residuals(
            x_j[sl], [x_i[sl]] + [c[sl] for c in pa_j])
        var_j = float(np.mean(resid_j ** 2))
        conditional_rows.append(
            tuple(beta) + (np.log(max(var_j, _LOG_VAR_FLOOR)),))

    marginal = _zscore_columns(np.asarray(marginal_rows))
    conditional = _zscore_columns(np.asarray(conditional_rows))
    if marginal is None or conditional is None:
        return None
    try:
        return hsic_statistic(marginal, conditional)
    except DegenerateKernelError:
        return None


def orient_by_module_independence(dataset: Dataset, graph: WindowGraph,
                                  cfg: OrientConfig, threads: int = 1
                                  ) -> tuple[WindowGraph, list[Diagnostic]]:
    """Orient undirected contemporaneous edges between two changing modules.

    For each direction the effective sample is split into windows; per
    window a least-squares fit yields the hypothesized cause's marginal
    parameters (windowed mean, log residual variance given its lagged
    adjacents) and the effect's mechanism parameters (regression
    coefficients on the cause and its own lagged adjacents, log residual
    variance). The direction score is the dependence (biased HSIC
    statistic) between the two parameter trajectories; under independently
    changing modules the causal direction scores lower. Orients only when
    the relative gap between scores exceeds ``decision_margin``.
    """
    changing = graph.changing_modules
    targets = [e for e in graph.contemporaneous_edges()
               if e.orientation is Orientation.UNDIRECTED
               and e.a.var in changing and e.b.var in changing]
    if not targets:
        return graph, []

    n = dataset.T - graph.tau_max
    window = n // cfg.n_windows
    if window < cfg.min_window:
        diags = [Diagnostic(
            e, "module-independence",
            f"window length {window} below min_window {cfg.min_window}")
            for e in targets]
        return graph, diags

    def score(edge: Edge) -> tuple[Optional[float], Optional[float]]:
        i, j = edge.a.var, edge.b.var
        return (_direction_score(dataset, graph, i, j, cfg),
                _direction_score(dataset, graph, j, i, cfg))

    scored = _run_ordered(score, targets, threads)
    out = graph
    diags = []
    for edge, (fwd, rev) in zip(targets, scored):
        if fwd is None or rev is None:
            diags.append(Diagnostic(
                edge, "module-independence",
                "degenerate trajectory or kernel; left undirected"))
            continue
        hi = max(fwd, rev)
        gap = 0.0 if hi <= 0 else (hi - min(fwd, rev)) / hi
        if gap <= cfg.decision_margin:
            diags.append(Diagnostic(
                edge, "module-independence",
                f"direction scores within margin (gap {gap:.3f}); "
                "left undirected"))
            continue
        if fwd < rev:
            out = out.with_replaced(edge.oriented(edge.a, edge.b))
        else:
            out = out.with_replaced(edge.oriented(edge.b, edge.a))
    return out, diags


def meek_propagate(graph: WindowGraph
                   ) -> tuple[WindowGraph, list[Diagnostic]]:
    """Minimal acyclicity-preserving propagation over contemporaneous edges
    (optional; off by default in the pipeline).

    Rule 1: a -> b, b — c, a and c non-adjacent gives b -> c. Rule 2:
    a -> b -> c with a — c gives a -> c. Contradictory demands leave the
    edge undirected and lock it.
    """
    out = graph
    diags: list[Diagnostic] = []
    locked: set[tuple[NodeRef, NodeRef]] = set()
    changed = True
    while changed:
        changed = False
        contemp = out.contemporaneous_edges()
        directed = [(e.a, e.b) if e.orientation is Orientation.A_TO_B
                    else (e.b, e.a)
                    for e in contemp
                    if e.orientation is not Orientation.UNDIRECTED]
        demands: dict[tuple[NodeRef, NodeRef], set] = {}
        for e in contemp:
            if e.orientation is not Orientation.UNDIRECTED:
                continue
            if e.pair in locked:
                continue
            for x, y in ((e.a, e.b), (e.b, e.a)):
                for a, b in directed:
                    if b == x and a != y and not out.adjacent(a, y):
                        demands.setdefault(e.pair, set()).add((x, y))
                    if a == x and any(c == b and d == y
                                      for c, d in directed):
                        demands.setdefault(e.pair, set()).add((x, y))
        for pair in sorted(demands,
                           key=lambda p: p[0].sort_key() + p[1].sort_key()):
            edge = out.edge_between(*pair)
            wanted = demands[pair]
            if len(wanted) == 1:
                src, dst = next(iter(wanted))
                out = out.with_replaced(edge.oriented(src, dst))
                changed = True
            else:
                locked.add(pair)
                diags.append(Diagnostic(
                    edge, "meek",
                    "conflicting propagation demands; left undirected"))
    return out, diags


def assert_orientation_invariants(graph: WindowGraph) -> None:
    """Hard checks after full orientation: lagged edges point forward in
    time, surrogate edges point away from C (so C has in-degree 0)."""
    for e in graph.sorted_edges():
        if e.is_lagged and e.orientation is not Orientation.A_TO_B:
            raise InternalConsistencyError(
                f"lagged edge not oriented forward in time: {e}")
        if e.is_surrogate and e.orientation is not Orientation.A_TO_B:
            raise InternalConsistencyError(
                f"surrogate edge not oriented away from C: {e}")

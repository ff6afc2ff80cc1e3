"""Skeleton search: adjacency discovery over the lag window plus surrogate.

Four phases, each consuming a tester (data-backed or oracle):

1. ``pc1_search``: per-variable iterative conditioning screen that shrinks
   the candidate pool level by level (condition on the p strongest other
   survivors, remove after the level completes).
2. ``mci_prune``: momentary-conditioning tests against both endpoints'
   surviving candidate sets, with the source side time-shifted.
3. ``detect_changing_modules``: prunes surrogate edges with a single greedy
   nested conditioning set per variable.
4. ``refine_contemporaneous``: one union-conditioned test per remaining
   lag-0 edge.

All phases only remove: nothing adds an edge after the undirected graph is
assembled. Every removal records its separating set.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Protocol, Sequence, TypeVar

from .model import (
    SURROGATE,
    AdjacencySets,
    CITestResult,
    DegenerateConditioningError,
    NodeRef,
    Edge,
    SeparationLog,
    WindowGraph,
    sort_by_effect,
    variable,
)

_T = TypeVar("_T")
_R = TypeVar("_R")

#: Per-variable candidate list with effect sizes, strongest first.
Superset = Sequence[tuple[NodeRef, float]]


class Tester(Protocol):
    """Answers conditional-independence queries between window-graph nodes."""

    m: int
    n_tests: int

    def test(self, a: NodeRef, b: NodeRef,
             cond: Iterable[NodeRef] = ()) -> CITestResult:
        ...


@dataclass(frozen=True)
class SkeletonConfig:
    """Knobs for the skeleton phases.

    Parameters
    ----------
    tau_max : int
        Maximum lag of the window, at least 1.
    alpha : float
        Significance level applied by the tests.
    pc1_max_cond : int
        Largest conditioning-set size tried in the iterative screen.
    mci_px : int, optional
        How many of each endpoint's strongest candidates enter the
        momentary conditioning set. ``None`` uses all of them.
    """

    tau_max: int = 3
    alpha: float = 0.05
    pc1_max_cond: int = 3
    mci_px: Optional[int] = None

    def __post_init__(self):
        if self.tau_max < 1:
            raise ValueError(f"tau_max must be >= 1, got {self.tau_max}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha {self.alpha} outside (0, 1)")
        if self.pc1_max_cond < 0:
            raise ValueError(
                f"pc1_max_cond must be >= 0, got {self.pc1_max_cond}")
        if self.mci_px is not None and self.mci_px < 0:
            raise ValueError(f"mci_px must be >= 0, got {self.mci_px}")


def _run_ordered(fn: Callable[[_T], _R], items: Sequence[_T],
                 threads: int) -> list[_R]:
    # Results come back in input order regardless of scheduling, so the
    # sequential merge below is scheduling-independent.
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def pc1_candidates(m: int, j: int, tau_max: int) -> list[NodeRef]:
    """Initial candidate pool for variable j: every variable at lags
    1..tau_max plus every other variable at lag 0. The surrogate is not a
    candidate here; it enters in the changing-module phase."""
    out = []
    for i in range(m):
        if i != j:
            out.append(NodeRef(i, 0))
        for lag in range(1, tau_max + 1):
            out.append(NodeRef(i, lag))
    return sorted(out, key=NodeRef.sort_key)


def pc1_search(tester: Tester, j: int, cfg: SkeletonConfig
               ) -> tuple[list[tuple[NodeRef, float]], SeparationLog]:
    """Iterative conditioning screen for the candidate parents of X_j[t].

    Level p tests each surviving candidate against the p strongest other
    survivors, with the ordering frozen at the start of the level and
    removals applied only after the level completes. A candidate's effect
    size is the minimum absolute effect observed across its tests. Stops
    once p exceeds the survivor count minus one or ``pc1_max_cond``.

    Returns the survivors sorted by effect size descending, plus the log of
    separating sets for removed candidates.
    """
    if not 0 <= j < tester.m:
        raise ValueError(f"variable index {j} outside 0..{tester.m - 1}")
    target = variable(j)
    survivors = pc1_candidates(tester.m, j, cfg.tau_max)
    effects: dict[NodeRef, float] = {v: float("inf") for v in survivors}
    log = SeparationLog()
    p = 0
    while survivors and p <= min(len(survivors) - 1, cfg.pc1_max_cond):
        order = [v for v, _ in
                 sort_by_effect([(v, effects[v]) for v in survivors])]
        removed: set[NodeRef] = set()
        for v in order:
            cond = [u for u in order if u != v][:p]
            try:
                res = tester.test(v, target, cond)
            except DegenerateConditioningError:
                # Non-informative test: the candidate survives this round.
                continue
            if res.independent:
                removed.add(v)
                log.record(v, target, cond)
            else:
                effects[v] = min(effects[v], res.effect_size)
        survivors = [v for v in order if v not in removed]
        p += 1
    return sort_by_effect([(v, effects[v]) for v in survivors]), log


def _mci_cond(supersets: dict[int, Superset], j: int, v: NodeRef,
              cfg: SkeletonConfig) -> tuple[NodeRef, ...]:
    # Target side: the lagged survivors for j, strongest first. Lag-0
    # survivors stay out: conditioning on a contemporaneous child of the
    # target would re-open the tested pair through the collider it forms.
    own = [r for r, _ in supersets.get(j, ()) if r != v and r.lag >= 1]
    if cfg.mci_px is not None:
        own = own[:cfg.mci_px]
    # Source side: survivors for the candidate's variable, shifted into the
    # candidate's time frame and truncated at the window edge.
    other = []
    for r, _ in supersets.get(v.var, ()):
        shifted = r.shifted(v.lag)
        if shifted.lag <= cfg.tau_max:
            other.append(shifted)
    if cfg.mci_px is not None:
        other = other[:cfg.mci_px]
    merged = {c for c in own + other if c != v and c != variable(j)}
    return tuple(sorted(merged, key=NodeRef.sort_key))


def mci_prune(tester: Tester, supersets: dict[int, Superset],
              cfg: SkeletonConfig, threads: int = 1
              ) -> tuple[AdjacencySets, SeparationLog]:
    """Momentary-conditioning pruning of the screened candidate sets.

    Each candidate v of X_j[t] is re-tested conditional on the remaining
    lagged candidates of X_j[t] together with the candidates of v's own
    variable shifted by v's lag. Survivors are split into lagged and
    contemporaneous adjacency sets, carrying the effect sizes of these
    tests. A contemporaneous pair is adjacent if it survives from either
    endpoint; separation entries of such revived pairs are dropped.
    """
    tasks: list[tuple[int, NodeRef, float, tuple[NodeRef, ...]]] = []
    for j in sorted(supersets):
        for v, prior_effect in supersets[j]:
            tasks.append((j, v, prior_effect, _mci_cond(supersets, j, v, cfg)))

    def probe(task) -> Optional[CITestResult]:
        j, v, _, cond = task
        try:
            return tester.test(v, variable(j), cond)
        except DegenerateConditioningError:
            return None

    outcomes = _run_ordered(probe, tasks, threads)

    log = SeparationLog()
    lagged: dict[int, list[tuple[NodeRef, float]]] = {}
    # (j, i) -> effect of candidate X_i[t] retained for target X_j[t].
    contemp: dict[tuple[int, int], float] = {}
    contemp_pairs: set[tuple[int, int]] = set()
    for (j, v, prior_effect, cond), res in zip(tasks, outcomes):
        if v.is_contemporaneous:
            contemp_pairs.add((min(j, v.var), max(j, v.var)))
        if res is not None and res.independent:
            log.record(v, variable(j), cond)
            continue
        # Degenerate test keeps the candidate with its screening effect.
        effect = prior_effect if res is None else res.effect_size
        if v.is_lagged:
            lagged.setdefault(j, []).append((v, effect))
        else:
            contemp[(j, v.var)] = effect

    contemporaneous: dict[int, list[tuple[NodeRef, float]]] = {}
    for lo, hi in sorted(contemp_pairs):
        fwd = contemp.get((lo, hi))
        rev = contemp.get((hi, lo))
        if fwd is None and rev is None:
            continue
        contemporaneous.setdefault(lo, []).append(
            (NodeRef(hi, 0), fwd if fwd is not None else rev))
        contemporaneous.setdefault(hi, []).append(
            (NodeRef(lo, 0), rev if rev is not None else fwd))
        log.discard(NodeRef(lo, 0), NodeRef(hi, 0))
    return AdjacencySets.build(lagged, contemporaneous), log


def build_undirected_graph(adj: AdjacencySets, m: int,
                           tau_max: int) -> WindowGraph:
    """Assemble the undirected graph: discovered lagged and contemporaneous
    adjacencies plus a surrogate edge to every variable (the changing-module
    phase only ever removes surrogate edges, so all must start present)."""
    edges: dict = {}
    for j, entries in sorted(adj.lagged.items()):
        for ref, _ in entries:
            e = Edge.between(ref, variable(j))
            edges[e.pair] = e
    for j, entries in sorted(adj.contemporaneous.items()):
        for ref, _ in entries:
            e = Edge.between(ref, variable(j))
            edges[e.pair] = e
    for j in range(m):
        e = Edge.between(SURROGATE, variable(j))
        edges[e.pair] = e
    return WindowGraph(m, tau_max, frozenset(edges.values()))


def detect_changing_modules(tester: Tester, graph: WindowGraph,
                            adj: AdjacencySets, cfg: SkeletonConfig,
                            threads: int = 1
                            ) -> tuple[WindowGraph, SeparationLog]:
    """Prune surrogate edges; survivors mark the changing modules.

    Each variable is first tested against the surrogate unconditionally.
    If dependent, a single conditioning set grows greedily over the
    variable's adjacents in descending effect size, re-testing after each
    addition; the first independent result removes the edge. Exhausting the
    pool without independence keeps the edge.
    """
    jobs = [j for j in range(graph.m)
            if graph.adjacent(SURROGATE, variable(j))]

    def probe(j: int) -> Optional[tuple[int, tuple[NodeRef, ...]]]:
        target = variable(j)
        res = tester.test(SURROGATE, target, ())
        if res.independent:
            return (j, ())
        cond: list[NodeRef] = []
        for c, _ in adj.cond_pool(j):
            try:
                res = tester.test(SURROGATE, target, cond + [c])
            except DegenerateConditioningError:
                # Skip this addition; keep growing with the next candidate.
                continue
            cond.append(c)
            if res.independent:
                return (j, tuple(cond))
        return None

    outcomes = _run_ordered(probe, jobs, threads)
    log = SeparationLog()
    pruned = graph
    for out in outcomes:
        if out is None:
            continue
        j, cond = out
        pruned = pruned.without_edge(SURROGATE, variable(j))
        log.record(SURROGATE, variable(j), cond)
    return pruned, log


def refine_contemporaneous(tester: Tester, graph: WindowGraph,
                           adj: AdjacencySets, cfg: SkeletonConfig,
                           threads: int = 1
                           ) -> tuple[WindowGraph, SeparationLog]:
    """Re-test each contemporaneous edge conditioning on the union of both
    endpoints' adjacency sets, plus the surrogate when it remained adjacent
    to either endpoint. A degenerate test retains the edge."""
    edges = graph.contemporaneous_edges()

    def probe(edge: Edge) -> Optional[tuple[Edge, tuple[NodeRef, ...]]]:
        pool = set(adj.refs(edge.a.var)) | set(adj.refs(edge.b.var))
        pool.discard(edge.a)
        pool.discard(edge.b)
        if (graph.adjacent(SURROGATE, edge.a)
                or graph.adjacent(SURROGATE, edge.b)):
            pool.add(SURROGATE)
        cond = tuple(sorted(pool, key=NodeRef.sort_key))
        try:
            res = tester.test(edge.a, edge.b, cond)
        except DegenerateConditioningError:
            return None
        if res.independent:
            return (edge, cond)
        return None

    outcomes = _run_ordered(probe, edges, threads)
    log = SeparationLog()
    pruned = graph
    for out in outcomes:
        if out is None:
            continue
        edge, cond = out
        pruned = pruned.without_edge(edge.a, edge.b)
        log.record(edge.a, edge.b, cond)
    return pruned, log

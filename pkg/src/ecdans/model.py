"""Domain types for window-graph causal discovery over time series.

A *window graph* summarizes the repeating causal structure of a multivariate
process: nodes are variables at lags ``0..tau_max`` plus a surrogate time
index ``C``, and every edge has a contemporaneous (lag-0) endpoint.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np


class AlignmentError(ValueError):
    """A node's lag exceeds the window's maximum lag."""


class InsufficientSampleError(ValueError):
    """Too few samples for the requested test or conditioning dimension."""


class DegenerateConditioningError(RuntimeError):
    """Rank-deficient or zero-variance regression; the test is non-informative."""


class DegenerateKernelError(RuntimeError):
    """Kernel bandwidth collapsed to zero (constant input)."""


class InternalConsistencyError(RuntimeError):
    """A pipeline-phase contract was violated (e.g. missing separation entry)."""


@dataclass(frozen=True)
class NodeRef:
    """Reference to a window-graph node.

    ``var`` is a variable index with ``lag`` in time steps (lag 0 means
    contemporaneous), or ``None`` for the surrogate time-index node ``C``.
    """

    var: Optional[int]
    lag: int = 0

    def __post_init__(self):
        if self.var is None:
            if self.lag != 0:
                raise ValueError("surrogate node carries no lag")
        else:
            if self.var < 0:
                raise ValueError(f"negative variable index {self.var}")
            if self.lag < 0:
                raise ValueError(f"negative lag {self.lag}")

    @property
    def is_surrogate(self) -> bool:
        return self.var is None

    @property
    def is_lagged(self) -> bool:
        return self.var is not None and self.lag >= 1

    @property
    def is_contemporaneous(self) -> bool:
        return self.var is not None and self.lag == 0

    def sort_key(self) -> tuple:
        # Variables order by (index, lag); the surrogate sorts last.
        if self.var is None:
            return (1, 0, 0)
        return (0, self.var, self.lag)

    def shifted(self, by: int) -> "NodeRef":
        if self.var is None:
            raise ValueError("cannot shift the surrogate node")
        return NodeRef(self.var, self.lag + by)

    def __str__(self) -> str:
        if self.var is None:
            return "C"
        if self.lag == 0:
            return f"X{self.var}[t]"
        return f"X{self.var}[t-{self.lag}]"


#: The surrogate time-index node.
SURROGATE = NodeRef(None, 0)


def variable(var: int, lag: int = 0) -> NodeRef:
    """Shorthand constructor for a variable node."""
    return NodeRef(var, lag)


def pair_key(a: NodeRef, b: NodeRef) -> tuple[NodeRef, NodeRef]:
    """Canonical unordered-pair key, matching Edge endpoint order: a
    lagged or surrogate endpoint precedes a contemporaneous one, and
    same-kind endpoints follow the node ordering."""
    if a.is_contemporaneous != b.is_contemporaneous:
        return (b, a) if a.is_contemporaneous else (a, b)
    if b.sort_key() < a.sort_key():
        return (b, a)
    return (a, b)


class Orientation(Enum):
    UNDIRECTED = "und"
    A_TO_B = "ab"
    B_TO_A = "ba"


@dataclass(frozen=True)
class Edge:
    """An edge of the window graph, stored in canonical endpoint order.

    Every edge has a contemporaneous endpoint; the other endpoint may be
    lagged, contemporaneous, or the surrogate. The canonical form puts the
    lagged/surrogate endpoint (or the lower-indexed variable, for
    contemporaneous pairs) first, so ``A_TO_B`` always means "toward the
    lag-0 node" for lagged and surrogate edges.
    """

    a: NodeRef
    b: NodeRef
    orientation: Orientation = Orientation.UNDIRECTED

    def __post_init__(self):
        if self.a == self.b:
            raise ValueError(f"self-loop on {self.a}")
        non_contemp = [n for n in (self.a, self.b) if not n.is_contemporaneous]
        if len(non_contemp) > 1:
            raise ValueError(
                f"edge {self.a} — {self.b}: at most one endpoint may be "
                "lagged or the surrogate"
            )
        if non_contemp:
            if self.a.is_contemporaneous:
                raise ValueError(
                    f"edge {self.a} — {self.b} not in canonical order"
                )
            if self.orientation is Orientation.B_TO_A:
                raise ValueError(
                    f"edge {self.a} — {self.b} oriented against time/surrogate"
                )
        elif self.b.sort_key() < self.a.sort_key():
            raise ValueError(f"edge {self.a} — {self.b} not in canonical order")

    @staticmethod
    def between(x: NodeRef, y: NodeRef,
                orientation: Orientation = Orientation.UNDIRECTED) -> "Edge":
        """Build an edge from endpoints in any order; ``orientation`` is
        interpreted relative to the (x, y) argument order."""
        a, b = pair_key(x, y)
        if (a, b) != (x, y):
            if orientation is Orientation.A_TO_B:
                orientation = Orientation.B_TO_A
            elif orientation is Orientation.B_TO_A:
                orientation = Orientation.A_TO_B
        return Edge(a, b, orientation)

    @property
    def pair(self) -> tuple[NodeRef, NodeRef]:
        return (self.a, self.b)

    @property
    def is_lagged(self) -> bool:
        return self.a.is_lagged

    @property
    def is_surrogate(self) -> bool:
        return self.a.is_surrogate

    @property
    def is_contemporaneous(self) -> bool:
        return self.a.is_contemporaneous and self.b.is_contemporaneous

    def touches(self, ref: NodeRef) -> bool:
        return ref in (self.a, self.b)

    def other(self, ref: NodeRef) -> NodeRef:
        if ref == self.a:
            return self.b
        if ref == self.b:
            return self.a
        raise ValueError(f"{ref} is not an endpoint of {self}")

    def oriented(self, source: NodeRef, target: NodeRef) -> "Edge":
        """Copy of this edge directed ``source -> target``."""
        if {source, target} != {self.a, self.b}:
            raise ValueError("orientation endpoints do not match edge")
        direction = (Orientation.A_TO_B if source == self.a
                     else Orientation.B_TO_A)
        return replace(self, orientation=direction)

    def undirected(self) -> "Edge":
        return replace(self, orientation=Orientation.UNDIRECTED)

    def __str__(self) -> str:
        arrow = {Orientation.UNDIRECTED: "—",
                 Orientation.A_TO_B: "→",
                 Orientation.B_TO_A: "←"}[self.orientation]
        return f"{self.a} {arrow} {self.b}"


@dataclass(frozen=True, eq=False)
class Dataset:
    """A T×m matrix of observations with variable names.

    Entries must be finite; names unique and nonempty. The value matrix is
    frozen after construction.
    """

    values: np.ndarray
    names: tuple[str, ...]

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2-D matrix, got ndim={arr.ndim}")
        t, m = arr.shape
        if t < 2 or m < 2:
            raise ValueError(f"need T >= 2 and m >= 2, got T={t}, m={m}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("dataset contains NaN or infinite entries")
        names = tuple(self.names)
        if len(names) != m:
            raise ValueError(f"{len(names)} names for {m} columns")
        if any(not n for n in names):
            raise ValueError("variable names must be nonempty")
        if len(set(names)) != m:
            raise ValueError("variable names must be unique")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "names", names)

    @staticmethod
    def from_values(values, names: Optional[Sequence[str]] = None) -> "Dataset":
        arr = np.asarray(values, dtype=float)
        if names is None:
            names = tuple(f"X{i}" for i in range(arr.shape[1]))
        return Dataset(arr, tuple(names))

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]


def lagged_column(dataset: Dataset, ref: NodeRef, tau_max: int) -> np.ndarray:
    """Extract a node's column aligned to the shared effective sample.

    All columns for a fixed ``tau_max`` have length ``T - tau_max`` and row k
    of every column refers to the same target time. The surrogate yields the
    normalized time index over the effective sample.
    """
    if ref.lag > tau_max:
        raise AlignmentError(f"lag {ref.lag} exceeds tau_max {tau_max}")
    n = dataset.T - tau_max
    if n < 1:
        raise InsufficientSampleError(
            f"T={dataset.T} leaves no effective sample at tau_max={tau_max}"
        )
    if ref.is_surrogate:
        if n == 1:
            return np.zeros(1)
        return np.arange(n, dtype=float) / (n - 1)
    return dataset.values[tau_max - ref.lag: dataset.T - ref.lag, ref.var]


@dataclass(frozen=True)
class CITestResult:
    """Outcome of one (conditional) independence test."""

    statistic: float
    p_value: float
    effect_size: float
    independent: bool
    cond_set: tuple[NodeRef, ...] = ()

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p-value {self.p_value} outside [0, 1]")
        if self.effect_size < 0.0:
            raise ValueError(f"negative effect size {self.effect_size}")


class SeparationLog:
    """Removed edge -> the conditioning set that separated its endpoints.

    Keys are canonical unordered endpoint pairs. The first recorded entry for
    a pair wins; re-recording is a no-op, keeping one entry per removed edge.
    """

    def __init__(self):
        self._entries: dict[tuple[NodeRef, NodeRef], tuple[NodeRef, ...]] = {}

    def record(self, x: NodeRef, y: NodeRef,
               cond: Iterable[NodeRef]) -> None:
        key = pair_key(x, y)
        cond = tuple(sorted(cond, key=NodeRef.sort_key))
        if key[0] in cond or key[1] in cond:
            raise ValueError("separating set contains an endpoint")
        self._entries.setdefault(key, cond)

    def get(self, x: NodeRef, y: NodeRef) -> Optional[tuple[NodeRef, ...]]:
        return self._entries.get(pair_key(x, y))

    def discard(self, x: NodeRef, y: NodeRef) -> None:
        self._entries.pop(pair_key(x, y), None)

    def merge(self, other: "SeparationLog") -> None:
        for key, cond in other.items():
            self._entries.setdefault(key, cond)

    def items(self) -> list[tuple[tuple[NodeRef, NodeRef], tuple[NodeRef, ...]]]:
        return sorted(
            self._entries.items(),
            key=lambda kv: (kv[0][0].sort_key(), kv[0][1].sort_key()),
        )

    def __contains__(self, pair) -> bool:
        x, y = pair
        return pair_key(x, y) in self._entries

    def __len__(self) -> int:
        return len(self._entries)


def sort_by_effect(entries: Iterable[tuple[NodeRef, float]]
                   ) -> list[tuple[NodeRef, float]]:
    """Descending effect size; ties by node ordering (index, then lag)."""
    return sorted(entries, key=lambda e: (-e[1],) + e[0].sort_key())


@dataclass(frozen=True)
class AdjacencySets:
    """Per-variable lagged and contemporaneous adjacents with effect sizes.

    Lists are sorted by effect size descending with the deterministic node
    tie-break. Lagged lists hold lag >= 1 refs; contemporaneous lists hold
    lag-0 refs of other variables.
    """

    lagged: dict[int, tuple[tuple[NodeRef, float], ...]]
    contemporaneous: dict[int, tuple[tuple[NodeRef, float], ...]]

    @staticmethod
    def build(lagged: dict[int, Iterable[tuple[NodeRef, float]]],
              contemporaneous: dict[int, Iterable[tuple[NodeRef, float]]]
              ) -> "AdjacencySets":
        return AdjacencySets(
            lagged={j: tuple(sort_by_effect(v)) for j, v in lagged.items()},
            contemporaneous={j: tuple(sort_by_effect(v))
                             for j, v in contemporaneous.items()},
        )

    def cond_pool(self, j: int) -> list[tuple[NodeRef, float]]:
        """Union of lagged and contemporaneous adjacents of variable j,
        ordered by descending effect size."""
        return sort_by_effect(
            list(self.lagged.get(j, ())) + list(self.contemporaneous.get(j, ()))
        )

    def refs(self, j: int) -> list[NodeRef]:
        return [ref for ref, _ in self.cond_pool(j)]


@dataclass(frozen=True)
class WindowGraph:
    """Edges over window-graph nodes with orientation state.

    Immutable; all mutating operations return a new graph. The set of
    changing modules is derived: exactly the variables adjacent to the
    surrogate.
    """

    m: int
    tau_max: int
    edges: frozenset[Edge] = frozenset()

    def __post_init__(self):
        pairs = set()
        for e in self.edges:
            for node in e.pair:
                if node.var is not None and node.var >= self.m:
                    raise ValueError(f"edge endpoint {node} outside m={self.m}")
                if node.lag > self.tau_max:
                    raise ValueError(
                        f"edge endpoint {node} beyond tau_max={self.tau_max}")
            if e.pair in pairs:
                raise ValueError(f"duplicate edge between {e.a} and {e.b}")
            pairs.add(e.pair)
        object.__setattr__(self, "edges", frozenset(self.edges))

    @property
    def changing_modules(self) -> frozenset[int]:
        return frozenset(e.b.var for e in self.edges if e.is_surrogate)

    def sorted_edges(self) -> list[Edge]:
        return sorted(self.edges,
                      key=lambda e: e.a.sort_key() + e.b.sort_key())

    def edge_between(self, x: NodeRef, y: NodeRef) -> Optional[Edge]:
        key = pair_key(x, y)
        for e in self.edges:
            if e.pair == key:
                return e
        return None

    def adjacent(self, x: NodeRef, y: NodeRef) -> bool:
        return self.edge_between(x, y) is not None

    def neighbors(self, ref: NodeRef) -> list[NodeRef]:
        out = [e.other(ref) for e in self.edges if e.touches(ref)]
        return sorted(out, key=NodeRef.sort_key)

    def lagged_edges(self) -> list[Edge]:
        return [e for e in self.sorted_edges() if e.is_lagged]

    def contemporaneous_edges(self) -> list[Edge]:
        return [e for e in self.sorted_edges() if e.is_contemporaneous]

    def surrogate_edges(self) -> list[Edge]:
        return [e for e in self.sorted_edges() if e.is_surrogate]

    def lagged_parents(self, j: int) -> list[NodeRef]:
        """Lagged nodes adjacent to the contemporaneous variable j."""
        target = NodeRef(j, 0)
        return sorted(
            (e.a for e in self.edges if e.is_lagged and e.b == target),
            key=NodeRef.sort_key,
        )

    def without_edge(self, x: NodeRef, y: NodeRef) -> "WindowGraph":
        key = pair_key(x, y)
        kept = frozenset(e for e in self.edges if e.pair != key)
        if len(kept) == len(self.edges):
            raise ValueError(f"no edge between {x} and {y}")
        return replace(self, edges=kept)

    def with_edge(self, edge: Edge) -> "WindowGraph":
        if any(e.pair == edge.pair for e in self.edges):
            raise ValueError(f"edge between {edge.a} and {edge.b} exists")
        return replace(self, edges=self.edges | {edge})

    def with_replaced(self, edge: Edge) -> "WindowGraph":
        kept = frozenset(e for e in self.edges if e.pair != edge.pair)
        return replace(self, edges=kept | {edge})

    def __len__(self) -> int:
        return len(self.edges)

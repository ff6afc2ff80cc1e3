"""Synthetic ground truth: random window graphs and linear SCM simulation.

The generator samples a fully oriented window graph (lagged edges, acyclic
contemporaneous edges, surrogate edges to the declared changing modules)
and simulates a linear autoregressive process from it. Non-stationarity is
injected per changing module as a smooth or regime-switching drift of the
module's mean, self-coefficient, or noise scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import (
    SURROGATE,
    Dataset,
    Edge,
    NodeRef,
    Orientation,
    WindowGraph,
    variable,
)

#: Absolute value beyond which a simulated series counts as diverged.
DIVERGENCE_LIMIT = 1e6

#: Attempts at redrawing coefficients before giving up.
MAX_ATTEMPTS = 20

#: Companion spectral radii at or above this are rejected up front.
SPECTRAL_RADIUS_LIMIT = 0.97

CHANGE_KINDS = ("mean", "coef", "noise")
CHANGE_SHAPES = ("sinusoid", "piecewise")


class DivergenceError(RuntimeError):
    """Simulation kept diverging after the bounded number of redraws."""


@dataclass(frozen=True)
class ChangeSpec:
    """One time-varying causal module.

    ``kind`` selects what drifts: the module's mean ("mean"), its own
    lag-1 coefficient ("coef"), or its noise scale ("noise"). ``shape``
    selects how: a sinusoid with ``periods`` full cycles over the sample,
    or ``n_regimes`` piecewise-constant levels. ``amplitude`` is in units
    of noise_sigma for mean and noise drift, and an absolute coefficient
    delta for coefficient drift.
    """

    target: int
    kind: str
    shape: str = "sinusoid"
    amplitude: float = 3.0
    periods: float = 1.0
    n_regimes: int = 2

    def __post_init__(self):
        if self.target < 0:
            raise ValueError(f"negative target index {self.target}")
        if self.kind not in CHANGE_KINDS:
            raise ValueError(
                f"kind must be one of {CHANGE_KINDS}, got {self.kind!r}")
        if self.shape not in CHANGE_SHAPES:
            raise ValueError(
                f"shape must be one of {CHANGE_SHAPES}, got {self.shape!r}")
        if self.amplitude <= 0:
            raise ValueError(f"amplitude must be > 0, got {self.amplitude}")
        if self.periods <= 0:
            raise ValueError(f"periods must be > 0, got {self.periods}")
        if self.n_regimes < 2:
            raise ValueError(f"n_regimes must be >= 2, got {self.n_regimes}")


@dataclass(frozen=True)
class ScmSpec:
    """Parameters of the synthetic process.

    ``T`` is the returned sample length; ``burn_in`` extra initial steps
    are simulated and discarded. Lagged edges other than the forced self
    lag-1 terms appear i.i.d. with ``p_lagged`` per (source, target, lag)
    slot; contemporaneous edges with ``p_contemp`` per pair, directed
    along a random topological order. Coefficients draw magnitudes from
    ``coef_range`` with random sign; self lag-1 terms draw from
    ``autocorr_range`` (positive).
    """

    m: int = 4
    tau_max: int = 3
    p_lagged: float = 0.05
    p_contemp: float = 0.2
    coef_range: tuple[float, float] = (0.4, 0.8)
    autocorr_range: tuple[float, float] = (0.2, 0.6)
    noise_sigma: float = 1.0
    changing: tuple[ChangeSpec, ...] = ()
    seed: int = 0
    T: int = 1000
    burn_in: int = 200

    def __post_init__(self):
        object.__setattr__(self, "coef_range", tuple(self.coef_range))
        object.__setattr__(self, "autocorr_range",
                           tuple(self.autocorr_range))
        object.__setattr__(self, "changing", tuple(self.changing))
        if self.m < 2:
            raise ValueError(f"m must be >= 2, got {self.m}")
        if self.tau_max < 1:
            raise ValueError(f"tau_max must be >= 1, got {self.tau_max}")
        for name in ("p_lagged", "p_contemp"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} {p} outside [0, 1]")
        lo, hi = self.coef_range
        if not 0.0 < lo <= hi < 1.0:
            raise ValueError(
                f"coef_range must satisfy 0 < low <= high < 1, got {lo}, {hi}")
        lo, hi = self.autocorr_range
        if not -1.0 < lo <= hi < 1.0:
            raise ValueError(
                f"autocorr_range must lie within (-1, 1), got {lo}, {hi}")
        if self.noise_sigma <= 0:
            raise ValueError(
                f"noise_sigma must be > 0, got {self.noise_sigma}")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")
        if self.T < self.tau_max + 10:
            raise ValueError(
                f"T={self.T} too short for tau_max={self.tau_max}")
        if self.burn_in < self.tau_max:
            raise ValueError(
                f"burn_in {self.burn_in} below tau_max {self.tau_max}")
        seen = set()
        for cs in self.changing:
            if cs.target >= self.m:
                raise ValueError(
                    f"changing target {cs.target} outside 0..{self.m - 1}")
            if (cs.target, cs.kind) in seen:
                raise ValueError(
                    f"duplicate {cs.kind} drift on variable {cs.target}")
            seen.add((cs.target, cs.kind))
            if cs.kind == "coef":
                worst = max(abs(self.autocorr_range[0]),
                            abs(self.autocorr_range[1])) + cs.amplitude
                if worst >= 1.0:
                    raise ValueError(
                        "coefficient drift can leave (-1, 1): max base "
                        f"{max(map(abs, self.autocorr_range))} + amplitude "
                        f"{cs.amplitude} >= 1")


def random_window_graph(spec: ScmSpec) -> WindowGraph:
    """Sample a fully oriented ground-truth window graph.

    Every variable gets its own lag-1 edge. Other lagged slots are filled
    i.i.d.; contemporaneous pairs are filled i.i.d. and directed along a
    random permutation of the variables, so the lag-0 part is acyclic.
    Surrogate edges go to every changing-module target. Deterministic in
    the spec's seed.
    """
    rng = np.random.default_rng([spec.seed, 1])
    m, tau_max = spec.m, spec.tau_max
    lag_draws = rng.random((m, m, tau_max))
    order = rng.permutation(m)
    contemp_draws = rng.random((m, m))

    edges: list[Edge] = []
    for i in range(m):
        for j in range(m):
            for tau in range(1, tau_max + 1):
                forced = i == j and tau == 1
                if forced or lag_draws[i, j, tau - 1] < spec.p_lagged:
                    edges.append(Edge(NodeRef(i, tau), variable(j),
                                      Orientation.A_TO_B))
    position = {v: k for k, v in enumerate(order)}
    for i in range(m):
        for j in range(i + 1, m):
            if contemp_draws[i, j] < spec.p_contemp:
                src, dst = (i, j) if position[i] < position[j] else (j, i)
                edges.append(Edge.between(variable(src), variable(dst),
                                          Orientation.A_TO_B))
    for target in sorted({cs.target for cs in spec.changing}):
        edges.append(Edge(SURROGATE, variable(target), Orientation.A_TO_B))
    return WindowGraph(m, tau_max, frozenset(edges))


@dataclass(frozen=True, eq=False)
class SimParams:
    """Drawn simulation inputs: coefficients per edge slot, the noise
    panel, and the permuted level sequence of each piecewise drift."""

    coefs: dict[tuple[NodeRef, int], float]
    noise: np.ndarray
    piecewise_levels: dict[tuple[int, str], np.ndarray]


def _contemporaneous_order(graph: WindowGraph) -> list[int]:
    # Topological order over the directed lag-0 edges, lowest index first
    # among ready variables.
    parents: dict[int, set[int]] = {j: set() for j in range(graph.m)}
    for e in graph.contemporaneous_edges():
        if e.orientation is Orientation.A_TO_B:
            parents[e.b.var].add(e.a.var)
        elif e.orientation is Orientation.B_TO_A:
            parents[e.a.var].add(e.b.var)
        else:
            raise ValueError(
                f"simulation requires oriented contemporaneous edges: {e}")
    out: list[int] = []
    placed: set[int] = set()
    while len(out) < graph.m:
        ready = [j for j in range(graph.m)
                 if j not in placed and parents[j] <= placed]
        if not ready:
            raise ValueError("contemporaneous edges contain a cycle")
        out.append(ready[0])
        placed.add(ready[0])
    return out


def _directed_slots(graph: WindowGraph) -> list[tuple[NodeRef, int]]:
    # (parent node, child variable) per non-surrogate edge, canonical order.
    slots = []
    for e in graph.sorted_edges():
        if e.is_surrogate:
            continue
        if e.is_lagged:
            slots.append((e.a, e.b.var))
        elif e.orientation is Orientation.A_TO_B:
            slots.append((e.a, e.b.var))
        else:
            slots.append((e.b, e.a.var))
    return slots


def draw_parameters(graph: WindowGraph, spec: ScmSpec,
                    rng: np.random.Generator) -> SimParams:
    """Draw coefficients, noise, and piecewise levels for one attempt."""
    coefs: dict[tuple[NodeRef, int], float] = {}
    for parent, child in _directed_slots(graph):
        lo, hi = spec.coef_range
        magnitude = rng.uniform(lo, hi)
        sign = 1.0 if rng.random() < 0.5 else -1.0
        if parent.var == child and parent.lag == 1:
            a_lo, a_hi = spec.autocorr_range
            coefs[(parent, child)] = rng.uniform(a_lo, a_hi)
        else:
            coefs[(parent, child)] = sign * magnitude
    levels = {}
    for cs in spec.changing:
        if cs.shape == "piecewise":
            levels[(cs.target, cs.kind)] = rng.permutation(
                np.linspace(-1.0, 1.0, cs.n_regimes))
    noise = rng.standard_normal((spec.burn_in + spec.T, spec.m))
    return SimParams(coefs=coefs, noise=noise, piecewise_levels=levels)


def _drift_signal(cs: ChangeSpec, u: np.ndarray,
                  params: SimParams) -> np.ndarray:
    """Shape signal in [-1, 1] over the full (burn-in included) index."""
    if cs.shape == "sinusoid":
        return np.sin(2.0 * np.pi * cs.periods * u)
    levels = params.piecewise_levels[(cs.target, cs.kind)]
    clipped = np.clip(u, 0.0, 1.0)
    idx = np.minimum((clipped * cs.n_regimes).astype(int), cs.n_regimes - 1)
    return levels[idx]


def _spectral_radius(graph: WindowGraph, spec: ScmSpec, params: SimParams,
                     coef_override: Optional[dict] = None) -> float:
    # Reduced-form companion matrix of the VAR implied by the coefficients.
    m, tau_max = spec.m, spec.tau_max
    b0 = np.zeros((m, m))
    lagged = np.zeros((tau_max, m, m))
    coefs = dict(params.coefs)
    if coef_override:
        coefs.update(coef_override)
    for (parent, child), a in coefs.items():
        if parent.lag == 0:
            b0[child, parent.var] = a
        else:
            lagged[parent.lag - 1, child, parent.var] = a
    inv = np.linalg.inv(np.eye(m) - b0)
    companion = np.zeros((m * tau_max, m * tau_max))
    for tau in range(tau_max):
        companion[:m, tau * m:(tau + 1) * m] = inv @ lagged[tau]
    if tau_max > 1:
        companion[m:, :-m] = np.eye(m * (tau_max - 1))
    return float(np.max(np.abs(np.linalg.eigvals(companion))))


def _stable(graph: WindowGraph, spec: ScmSpec, params: SimParams) -> bool:
    if _spectral_radius(graph, spec, params) >= SPECTRAL_RADIUS_LIMIT:
        return False
    for cs in spec.changing:
        if cs.kind != "coef":
            continue
        slot = (NodeRef(cs.target, 1), cs.target)
        base = params.coefs[slot]
        for extreme in (base - cs.amplitude, base + cs.amplitude):
            radius = _spectral_radius(graph, spec, params,
                                      {slot: extreme})
            if radius >= SPECTRAL_RADIUS_LIMIT:
                return False
    return True


def simulate_with(graph: WindowGraph, spec: ScmSpec,
                  params: SimParams) -> Optional[np.ndarray]:
    """Deterministic simulation core. Returns the full (burn-in included)
    value panel, or None once any entry passes the divergence limit."""
    m = spec.m
    total = spec.burn_in + spec.T
    u = (np.arange(total) - spec.burn_in) / max(spec.T - 1, 1)
    mean_shift = np.zeros((total, m))
    noise_scale = np.full((total, m), spec.noise_sigma)
    coef_shift: dict[tuple[NodeRef, int], np.ndarray] = {}
    for cs in spec.changing:
        signal = _drift_signal(cs, u, params)
        if cs.kind == "mean":
            mean_shift[:, cs.target] += cs.amplitude * spec.noise_sigma * signal
        elif cs.kind == "noise":
            noise_scale[:, cs.target] *= 1.0 + cs.amplitude * (signal + 1.0) / 2.0
        else:
            coef_shift[(NodeRef(cs.target, 1), cs.target)] = (
                cs.amplitude * signal)

    order = _contemporaneous_order(graph)
    incoming: dict[int, list[tuple[NodeRef, float]]] = {j: [] for j in range(m)}
    for (parent, child), a in sorted(
            params.coefs.items(),
            key=lambda kv: kv[0][0].sort_key() + (kv[0][1],)):
        incoming[child].append((parent, a))

    values = np.zeros((total, m))
    for t in range(total):
        for j in order:
            acc = mean_shift[t, j] + noise_scale[t, j] * params.noise[t, j]
            for parent, a in incoming[j]:
                shift = coef_shift.get((parent, j))
                if shift is not None:
                    a = a + shift[t]
                if parent.lag == 0:
                    acc += a * values[t, parent.var]
                elif t - parent.lag >= 0:
                    acc += a * values[t - parent.lag, parent.var]
            values[t, j] = acc
        if np.max(np.abs(values[t])) > DIVERGENCE_LIMIT:
            return None
    return values


def simulate(graph: WindowGraph, spec: ScmSpec) -> Dataset:
    """Simulate the linear autoregressive process the graph describes.

    Coefficients are redrawn (bounded retries) whenever the implied
    process is near-unstable or any simulated value diverges; the burn-in
    rows are discarded. Deterministic in the spec's seed.
    """
    if graph.m != spec.m or graph.tau_max != spec.tau_max:
        raise ValueError(
            f"graph dims ({graph.m}, {graph.tau_max}) do not match "
            f"spec ({spec.m}, {spec.tau_max})")
    if graph.changing_modules != {cs.target for cs in spec.changing}:
        raise ValueError(
            "graph changing modules do not match the spec's change targets")
    for attempt in range(MAX_ATTEMPTS):
        rng = np.random.default_rng([spec.seed, 2, attempt])
        params = draw_parameters(graph, spec, rng)
        if not _stable(graph, spec, params):
            continue
        values = simulate_with(graph, spec, params)
        if values is not None:
            return Dataset.from_values(values[spec.burn_in:])
    raise DivergenceError(
        f"simulation diverged or was unstable in all {MAX_ATTEMPTS} "
        "coefficient draws; lower the coefficient ranges or density")

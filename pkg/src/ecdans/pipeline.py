"""End-to-end discovery: skeleton phases followed by orientation rules.

``discover`` wires the five phases together, tracks per-phase test counts
and runtimes, and enforces the orientation invariants on the result. Any
object with the tester surface can replace the data-backed tester (the
d-separation oracle does, for validation).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

from .citest import CiTester, TestConfig
from .model import AdjacencySets, Dataset, SeparationLog, WindowGraph
from .orient import (
    Diagnostic,
    OrientConfig,
    assert_orientation_invariants,
    meek_propagate,
    orient_by_module_independence,
    orient_ctriples,
    orient_lagged,
    orient_surrogate,
)
from .skeleton import (
    SkeletonConfig,
    Tester,
    _run_ordered,
    build_undirected_graph,
    detect_changing_modules,
    mci_prune,
    pc1_search,
    refine_contemporaneous,
)


@dataclass(frozen=True)
class PhaseStat:
    """Test count and wall time of one pipeline phase."""

    name: str
    n_tests: int
    runtime_ms: float


@dataclass(frozen=True)
class RunReport:
    """Per-phase statistics plus the diagnostics the rules emitted."""

    phases: tuple[PhaseStat, ...]
    diagnostics: tuple[Diagnostic, ...] = ()

    @property
    def n_tests(self) -> int:
        return sum(p.n_tests for p in self.phases)

    @property
    def runtime_ms(self) -> float:
        return sum(p.runtime_ms for p in self.phases)

    def to_dict(self) -> dict:
        return {
            "phases": [
                {"name": p.name, "n_tests": p.n_tests,
                 "runtime_ms": round(p.runtime_ms, 3)}
                for p in self.phases
            ],
            "n_tests": self.n_tests,
            "runtime_ms": round(self.runtime_ms, 3),
            "diagnostics": [str(d) for d in self.diagnostics],
        }


@dataclass(frozen=True)
class DiscoveryResult:
    """Final graph plus the artifacts the run produced along the way."""

    graph: WindowGraph
    adjacency: AdjacencySets
    log: SeparationLog
    report: RunReport


class _PhaseClock:
    def __init__(self, tester: Tester):
        self._tester = tester
        self._stats: list[PhaseStat] = []
        self._mark = time.perf_counter()
        self._tests = tester.n_tests

    def lap(self, name: str) -> None:
        now = time.perf_counter()
        tests = self._tester.n_tests
        self._stats.append(PhaseStat(
            name, tests - self._tests, (now - self._mark) * 1000.0))
        self._mark = now
        self._tests = tests

    def stats(self) -> tuple[PhaseStat, ...]:
        return tuple(self._stats)


def discover(dataset: Optional[Dataset],
             skel_cfg: Optional[SkeletonConfig] = None,
             test_cfg: Optional[TestConfig] = None,
             orient_cfg: Optional[OrientConfig] = None,
             threads: int = 1,
             meek: bool = False,
             tester: Optional[Tester] = None) -> DiscoveryResult:
    """Run the full discovery pipeline on a dataset.

    Parameters
    ----------
    dataset : Dataset or None
        Observations. May be None only when an explicit ``tester`` is
        given; the module-trajectory orientation rule is then skipped.
    skel_cfg, test_cfg, orient_cfg
        Phase configurations; defaults apply when omitted. The test
        config's significance level defaults to the skeleton config's.
    threads : int
        Worker bound for the parallel phases. Results are identical for
        any value.
    meek : bool
        Apply the optional propagation rules after the stated ones.
    tester
        Replacement conditional-independence tester (e.g. the
        d-separation oracle). Defaults to the data-backed tester.

    Returns
    -------
    DiscoveryResult
        Final oriented graph, adjacency sets, separation log, run report.
    """
    skel_cfg = skel_cfg if skel_cfg is not None else SkeletonConfig()
    orient_cfg = orient_cfg if orient_cfg is not None else OrientConfig()
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    if tester is None:
        if dataset is None:
            raise ValueError("either a dataset or a tester is required")
        if test_cfg is None:
            test_cfg = TestConfig(alpha=skel_cfg.alpha)
        tester = CiTester(dataset, test_cfg, skel_cfg.tau_max)
    clock = _PhaseClock(tester)
    log = SeparationLog()

    # Phase 1a: per-variable iterative screening.
    outputs = _run_ordered(
        lambda j: pc1_search(tester, j, skel_cfg),
        list(range(tester.m)), threads)
    supersets = {j: survivors for j, (survivors, _) in enumerate(outputs)}
    for _, local_log in outputs:
        log.merge(local_log)
    clock.lap("pc1")

    # Phase 1b: momentary-conditioning pruning.
    adjacency, mci_log = mci_prune(tester, supersets, skel_cfg, threads)
    log.merge(mci_log)
    clock.lap("mci")

    # Phase 2: assemble the undirected graph; drop stale separation
    # entries for pairs that ended up adjacent (union-revived pairs).
    graph = build_undirected_graph(adjacency, tester.m, skel_cfg.tau_max)
    for edge in graph.sorted_edges():
        log.discard(edge.a, edge.b)

    # Phase 3: surrogate-edge pruning.
    graph, step3_log = detect_changing_modules(
        tester, graph, adjacency, skel_cfg, threads)
    log.merge(step3_log)
    clock.lap("changing-modules")

    # Phase 4: contemporaneous refinement.
    graph, step4_log = refine_contemporaneous(
        tester, graph, adjacency, skel_cfg, threads)
    log.merge(step4_log)
    clock.lap("contemporaneous")

    # Phase 5: orientation rules in their stated order.
    diagnostics: list[Diagnostic] = []
    graph = orient_lagged(graph)
    graph = orient_surrogate(graph)
    graph, triple_diags = orient_ctriples(graph, log)
    diagnostics.extend(triple_diags)
    if dataset is not None:
        graph, module_diags = orient_by_module_independence(
            dataset, graph, orient_cfg, threads)
        diagnostics.extend(module_diags)
    if meek:
        graph, meek_diags = meek_propagate(graph)
        diagnostics.extend(meek_diags)
    assert_orientation_invariants(graph)
    clock.lap("orientation")

    report = RunReport(phases=clock.stats(), diagnostics=tuple(diagnostics))
    return DiscoveryResult(graph=graph, adjacency=adjacency, log=log,
                           report=report)

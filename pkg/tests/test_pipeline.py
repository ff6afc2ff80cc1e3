"""End-to-end tests for the discovery pipeline."""

import numpy as np
import pytest

from ecdans.citest import TestConfig
from ecdans.datagen import ChangeSpec, ScmSpec, random_window_graph, simulate
from ecdans.model import Orientation, SURROGATE, variable
from ecdans.oracle import GraphOracleTester
from ecdans.pipeline import discover
from ecdans.serialize import dumps_graph
from ecdans.skeleton import SkeletonConfig

PHASES = ("pc1", "mci", "changing-modules", "contemporaneous", "orientation")


class TestDiscover:
    def test_smoke_on_simulated_data(self, simulated):
        truth, spec, ds = simulated
        result = discover(ds, SkeletonConfig(tau_max=spec.tau_max))
        assert result.graph.m == spec.m
        assert tuple(p.name for p in result.report.phases) == PHASES
        assert result.report.n_tests > 0
        assert result.report.runtime_ms > 0.0
        # All lagged edges point forward, all surrogate edges away from C.
        for e in result.graph.lagged_edges():
            assert e.orientation is Orientation.A_TO_B
        for e in result.graph.surrogate_edges():
            assert e.orientation is Orientation.A_TO_B

    def test_thread_count_does_not_change_output(self, simulated):
        truth, spec, ds = simulated
        cfg = SkeletonConfig(tau_max=spec.tau_max)
        one = discover(ds, cfg, threads=1)
        four = discover(ds, cfg, threads=4)
        assert dumps_graph(one.graph) == dumps_graph(four.graph)
        assert one.adjacency == four.adjacency
        assert one.log.items() == four.log.items()

    def test_log_entries_never_cover_adjacent_pairs(self, simulated):
        truth, spec, ds = simulated
        result = discover(ds, SkeletonConfig(tau_max=spec.tau_max))
        for (x, y), _ in result.log.items():
            assert not result.graph.adjacent(x, y)

    def test_oracle_tester_without_dataset(self, small_truth):
        truth, spec = small_truth
        result = discover(None, SkeletonConfig(tau_max=spec.tau_max),
                          tester=GraphOracleTester(truth))
        assert tuple(p.name for p in result.report.phases) == PHASES
        # Data-driven orientation is skipped, so no module diagnostics.
        assert all(d.rule != "module-independence"
                   for d in result.report.diagnostics)

    def test_argument_validation(self, simulated):
        _, spec, ds = simulated
        with pytest.raises(ValueError):
            discover(ds, threads=0)
        with pytest.raises(ValueError):
            discover(None)

    def test_meek_flag_runs(self, simulated):
        truth, spec, ds = simulated
        result = discover(ds, SkeletonConfig(tau_max=spec.tau_max),
                          meek=True)
        assert result.graph.m == spec.m

    def test_report_dict_shape(self, simulated):
        truth, spec, ds = simulated
        result = discover(ds, SkeletonConfig(tau_max=spec.tau_max))
        doc = result.report.to_dict()
        assert set(doc) == {"phases", "n_tests", "runtime_ms", "diagnostics"}
        assert [p["name"] for p in doc["phases"]] == list(PHASES)
        assert all(set(p) == {"name", "n_tests", "runtime_ms"}
                   for p in doc["phases"])


class TestChangingModuleRecovery:
    def test_drifting_variable_keeps_surrogate_edge(self):
        spec = ScmSpec(
            m=4, tau_max=2, seed=12, T=1000, p_contemp=0.0,
            changing=(ChangeSpec(target=0, kind="mean", amplitude=3.0),))
        truth = random_window_graph(spec)
        ds = simulate(truth, spec)
        result = discover(ds, SkeletonConfig(tau_max=spec.tau_max))
        assert 0 in result.graph.changing_modules

    def test_stationary_run_drops_all_surrogate_edges(self):
        spec = ScmSpec(m=4, tau_max=2, seed=3, T=1000, p_contemp=0.0)
        truth = random_window_graph(spec)
        ds = simulate(truth, spec)
        result = discover(ds, SkeletonConfig(tau_max=spec.tau_max))
        assert result.graph.changing_modules == frozenset()

    def test_alpha_flows_from_skeleton_config(self, simulated):
        truth, spec, ds = simulated
        # A permissive alpha keeps strictly more adjacencies than a strict
        # one on the same data.
        strict = discover(ds, SkeletonConfig(tau_max=spec.tau_max,
                                             alpha=0.001))
        loose = discover(ds, SkeletonConfig(tau_max=spec.tau_max,
                                            alpha=0.2))
        assert len(strict.graph) <= len(loose.graph)

    def test_explicit_test_config_overrides(self, simulated):
        truth, spec, ds = simulated
        result = discover(ds, SkeletonConfig(tau_max=spec.tau_max),
                          test_cfg=TestConfig(alpha=0.01))
        assert result.graph.m == spec.m

"""Command-line interface: discover, simulate, benchmark, metrics.

Exit codes: 0 success, 1 validation or parse failure, 2 runtime failure.
"""

from __future__ import annotations

import json
import statistics
import sys
import time
from pathlib import Path

import click

from .citest import TestConfig
from .datagen import ChangeSpec, ScmSpec, random_window_graph, simulate
from .metrics import EDGE_CLASSES, confusion, fdr, shd, tpr
from .orient import OrientConfig
from .pipeline import discover
from .serialize import (
    ParseError,
    read_dataset_csv,
    read_graph_json,
    write_dataset_csv,
    write_graph_dot,
    write_graph_json,
    write_metrics_csv,
)
from .skeleton import SkeletonConfig, _run_ordered


class CliError(click.ClickException):
    """Validation failure surfaced to the user (exit code 1)."""

    exit_code = 1


def _parse_changing(tokens: tuple[str, ...]) -> tuple[ChangeSpec, ...]:
    """Parse "target:kind:shape:amplitude" drift specs.

    Kinds: mean, coef, noise. Shapes: "sin" (optionally "sin2.5" for the
    cycle count) or "pw" (optionally "pw4" for the regime count).
    """
    out = []
    for token in tokens:
        parts = token.split(":")
        if len(parts) != 4:
            raise CliError(
                f"--changing {token!r}: expected target:kind:shape:amplitude")
        raw_target, kind, shape, raw_amp = parts
        try:
            target = int(raw_target)
        except ValueError:
            raise CliError(
                f"--changing {token!r}: target {raw_target!r} is not an "
                "integer") from None
        try:
            amplitude = float(raw_amp)
        except ValueError:
            raise CliError(
                f"--changing {token!r}: amplitude {raw_amp!r} is not a "
                "number") from None
        periods, n_regimes = 1.0, 2
        if shape.startswith("sin"):
            shape_name = "sinusoid"
            suffix = shape[3:]
            if suffix:
                try:
                    periods = float(suffix)
                except ValueError:
                    raise CliError(
                        f"--changing {token!r}: bad cycle count "
                        f"{suffix!r}") from None
        elif shape.startswith("pw"):
            shape_name = "piecewise"
            suffix = shape[2:]
            if suffix:
                try:
                    n_regimes = int(suffix)
                except ValueError:
                    raise CliError(
                        f"--changing {token!r}: bad regime count "
                        f"{suffix!r}") from None
        else:
            raise CliError(
                f"--changing {token!r}: shape must start with sin or pw")
        try:
            out.append(ChangeSpec(target=target, kind=kind, shape=shape_name,
                                  amplitude=amplitude, periods=periods,
                                  n_regimes=n_regimes))
        except ValueError as exc:
            raise CliError(f"--changing {token!r}: {exc}") from None
    return tuple(out)


def _parse_grid(text: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise CliError(
            f"--m-grid {text!r}: expected comma-separated integers") from None
    if not values:
        raise CliError("--m-grid: at least one variable count is required")
    return values


_threads_option = click.option(
    "--threads", type=int, default=1, envvar="ECDANS_THREADS",
    show_default=True, show_envvar=True,
    help="Worker bound; results are identical for any value.")


@click.group()
@click.version_option(package_name="ecdans", prog_name="ecdans")
def cli():
    """Constraint-based causal discovery for autocorrelated,
    non-stationary time series."""


@cli.command("discover")
@click.argument("input_csv",
                type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--tau-max", type=int, default=3, show_default=True,
              help="Maximum lag of the window.")
@click.option("--alpha", type=float, default=0.05, show_default=True,
              help="Significance level of the CI tests.")
@click.option("--pc1-max-cond", type=int, default=3, show_default=True,
              help="Largest conditioning-set size in the iterative screen.")
@click.option("--mci-px", type=int, default=None,
              help="Strongest adjacents per endpoint in the momentary "
                   "conditioning set (default: all).")
@click.option("--test", "test_kind",
              type=click.Choice(["parcorr", "hsic"]), default="parcorr",
              show_default=True, help="Marginal independence test family.")
@click.option("--seed", type=int, default=0, show_default=True,
              help="Seed for the permutation-based tests.")
@click.option("--n-windows", type=int, default=10, show_default=True,
              help="Time windows for the orientation trajectories.")
@click.option("--min-window", type=int, default=30, show_default=True,
              help="Smallest acceptable window length.")
@click.option("--margin", type=float, default=0.1, show_default=True,
              help="Required relative gap between direction scores.")
@click.option("--meek/--no-meek", default=False, show_default=True,
              help="Apply the optional propagation rules.")
@_threads_option
@click.option("--out", type=click.Path(file_okay=False, path_type=Path),
              default=Path("."), show_default=True, help="Output directory.")
@click.option("--dot/--no-dot", default=True, show_default=True,
              help="Also write a DOT rendering of the graph.")
def cmd_discover(input_csv, tau_max, alpha, pc1_max_cond, mci_px, test_kind,
                 seed, n_windows, min_window, margin, meek, threads, out,
                 dot):
    """Discover the causal window graph of a multivariate series CSV.

    Writes graph.json (canonical schema-1 JSON), graph.dot, and
    report.json (per-phase test counts, runtimes, diagnostics) into the
    output directory.
    """
    skel_cfg = SkeletonConfig(tau_max=tau_max, alpha=alpha,
                              pc1_max_cond=pc1_max_cond, mci_px=mci_px)
    test_cfg = TestConfig(alpha=alpha, test_kind=test_kind, rng_seed=seed)
    orient_cfg = OrientConfig(n_windows=n_windows, min_window=min_window,
                              decision_margin=margin)
    dataset = read_dataset_csv(input_csv)
    if dataset.T <= tau_max + 10:
        raise CliError(
            f"insufficient data: need more than tau_max + 10 = "
            f"{tau_max + 10} rows, got {dataset.T}")
    result = discover(dataset, skel_cfg, test_cfg, orient_cfg,
                      threads=threads, meek=meek)
    out.mkdir(parents=True, exist_ok=True)
    write_graph_json(result.graph, out / "graph.json")
    if dot:
        write_graph_dot(result.graph, out / "graph.dot")
    report = result.report.to_dict()
    report["config"] = {
        "tau_max": tau_max, "alpha": alpha, "pc1_max_cond": pc1_max_cond,
        "mci_px": mci_px, "test": test_kind, "seed": seed,
        "n_windows": n_windows, "min_window": min_window, "margin": margin,
        "meek": meek,
    }
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n",
                                     encoding="utf-8")
    for diag in result.report.diagnostics:
        click.echo(str(diag), err=True)
    click.echo(
        f"wrote {out / 'graph.json'}: {len(result.graph)} edges, "
        f"{result.report.n_tests} tests")


@cli.command("simulate")
@click.option("--m", type=int, default=4, show_default=True,
              help="Variable count.")
@click.option("--tau-max", type=int, default=3, show_default=True,
              help="Maximum lag of the ground-truth window.")
@click.option("--T", "t_len", type=int, default=1000, show_default=True,
              help="Sample length after burn-in.")
@click.option("--burn-in", type=int, default=200, show_default=True,
              help="Discarded initial steps.")
@click.option("--p-lagged", type=float, default=0.05, show_default=True,
              help="Lagged edge probability per (source, target, lag).")
@click.option("--p-contemp", type=float, default=0.2, show_default=True,
              help="Contemporaneous edge probability per pair.")
@click.option("--coef-range", type=float, nargs=2, default=(0.4, 0.8),
              show_default=True, help="Absolute coefficient range.")
@click.option("--autocorr-range", type=float, nargs=2, default=(0.2, 0.6),
              show_default=True, help="Self lag-1 coefficient range.")
@click.option("--noise-sigma", type=float, default=1.0, show_default=True,
              help="Noise standard deviation.")
@click.option("--changing", multiple=True,
              help='Drift spec "target:kind:shape:amplitude", e.g. '
                   '"0:mean:sin:3.0"; kinds mean/coef/noise, shapes '
                   "sin[CYCLES]/pw[REGIMES]. Repeatable.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(file_okay=False, path_type=Path),
              default=Path("."), show_default=True, help="Output directory.")
def cmd_simulate(m, tau_max, t_len, burn_in, p_lagged, p_contemp, coef_range,
                 autocorr_range, noise_sigma, changing, seed, out):
    """Sample a ground-truth graph and simulate a dataset from it.

    Writes data.csv and truth.json into the output directory.
    """
    spec = ScmSpec(m=m, tau_max=tau_max, p_lagged=p_lagged,
                   p_contemp=p_contemp, coef_range=tuple(coef_range),
                   autocorr_range=tuple(autocorr_range),
                   noise_sigma=noise_sigma,
                   changing=_parse_changing(changing), seed=seed, T=t_len,
                   burn_in=burn_in)
    graph = random_window_graph(spec)
    dataset = simulate(graph, spec)
    out.mkdir(parents=True, exist_ok=True)
    write_dataset_csv(dataset, out / "data.csv")
    write_graph_json(graph, out / "truth.json")
    click.echo(
        f"wrote {out / 'data.csv'} ({dataset.T} x {dataset.m}) and "
        f"{out / 'truth.json'} ({len(graph)} edges)")


@cli.command("benchmark")
@click.option("--m-grid", default="4,6,8,10", show_default=True,
              help="Comma-separated variable counts.")
@click.option("--T", "t_len", type=int, default=1000, show_default=True,
              help="Sample length per cell.")
@click.option("--seeds", type=int, default=20, show_default=True,
              help="Seeds per variable count.")
@click.option("--seed0", type=int, default=0, show_default=True,
              help="Base seed; cell seed = seed0 + 1000*m + index.")
@click.option("--tau-max", type=int, default=3, show_default=True)
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--pc1-max-cond", type=int, default=3, show_default=True)
@click.option("--mci-px", type=int, default=None)
@click.option("--p-lagged", type=float, default=0.05, show_default=True)
@click.option("--p-contemp", type=float, default=0.2, show_default=True)
@click.option("--coef-range", type=float, nargs=2, default=(0.4, 0.8),
              show_default=True)
@click.option("--autocorr-range", type=float, nargs=2, default=(0.2, 0.6),
              show_default=True)
@click.option("--noise-sigma", type=float, default=1.0, show_default=True)
@click.option("--changing", multiple=True,
              help="Drift specs applied to every cell (see simulate).")
@click.option("--n-windows", type=int, default=10, show_default=True)
@click.option("--min-window", type=int, default=30, show_default=True)
@click.option("--margin", type=float, default=0.1, show_default=True)
@click.option("--meek/--no-meek", default=False, show_default=True)
@_threads_option
@click.option("--out", type=click.Path(file_okay=False, path_type=Path),
              default=Path("."), show_default=True, help="Output directory.")
def cmd_benchmark(m_grid, t_len, seeds, seed0, tau_max, alpha, pc1_max_cond,
                  mci_px, p_lagged, p_contemp, coef_range, autocorr_range,
                  noise_sigma, changing, n_windows, min_window, margin, meek,
                  threads, out):
    """Simulate, discover, and score a grid of synthetic problems.

    Writes metrics.csv (one overall row per cell plus one aggregate row
    per variable count) and summary.svg into the output directory.
    """
    from .plots import benchmark_summary_svg

    if seeds < 1:
        raise CliError(f"--seeds must be >= 1, got {seeds}")
    ms = _parse_grid(m_grid)
    change_specs = _parse_changing(changing)
    skel_cfg = SkeletonConfig(tau_max=tau_max, alpha=alpha,
                              pc1_max_cond=pc1_max_cond, mci_px=mci_px)
    orient_cfg = OrientConfig(n_windows=n_windows, min_window=min_window,
                              decision_margin=margin)
    # Seed-major order interleaves the m groups in time, so slow machine
    # drift during the run inflates every group's runtimes evenly instead
    # of only the larger m cells that would otherwise all run last.
    cells = [(m, idx) for idx in range(seeds) for m in ms]

    def run_cell(cell):
        m, idx = cell
        seed = seed0 + 1000 * m + idx
        try:
            spec = ScmSpec(m=m, tau_max=tau_max, p_lagged=p_lagged,
                           p_contemp=p_contemp,
                           coef_range=tuple(coef_range),
                           autocorr_range=tuple(autocorr_range),
                           noise_sigma=noise_sigma, changing=change_specs,
                           seed=seed, T=t_len)
            truth = random_window_graph(spec)
            dataset = simulate(truth, spec)
            test_cfg = TestConfig(alpha=alpha, rng_seed=seed)
            start = time.perf_counter()
            result = discover(dataset, skel_cfg, test_cfg, orient_cfg,
                              meek=meek)
            runtime_ms = (time.perf_counter() - start) * 1000.0
            conf = confusion(truth, result.graph)["overall"]
            return {
                "seed": seed, "m": m, "T": t_len, "tau_max": tau_max,
                "class": "overall", "TP": conf.tp, "FP": conf.fp,
                "FN": conf.fn, "tpr": tpr(conf), "fdr": fdr(conf),
                "shd": shd(truth, result.graph), "runtime_ms": runtime_ms,
            }
        except Exception as exc:
            return (cell, seed, f"{type(exc).__name__}: {exc}")

    outcomes = _run_ordered(run_cell, cells, threads)
    rows, failures = [], []
    for outcome in outcomes:
        if isinstance(outcome, dict):
            rows.append(outcome)
        else:
            failures.append(outcome)
    rows.sort(key=lambda r: (r["m"], r["seed"]))
    failures.sort(key=lambda f: (f[0][0], f[1]))
    for (m, idx), seed, message in failures:
        click.echo(f"cell m={m} seed={seed} failed: {message}", err=True)
    if not rows:
        raise RuntimeError(f"all {len(cells)} benchmark cells failed")

    aggregates = []
    for m in ms:
        cell_rows = [r for r in rows if r["m"] == m]
        if not cell_rows:
            continue
        agg = {"seed": "mean", "m": m, "T": t_len, "tau_max": tau_max,
               "class": "overall"}
        for key in ("tpr", "fdr", "shd", "runtime_ms"):
            samples = [r[key] for r in cell_rows if r[key] is not None]
            agg[key] = statistics.fmean(samples) if samples else None
            agg[key + "_sd"] = (statistics.stdev(samples)
                                if len(samples) > 1 else None)
        aggregates.append(agg)

    out.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(rows + aggregates, out / "metrics.csv")
    benchmark_summary_svg(aggregates, out / "summary.svg")
    click.echo(
        f"wrote {out / 'metrics.csv'} ({len(rows)} cells, "
        f"{len(failures)} failures) and {out / 'summary.svg'}")


@cli.command("metrics")
@click.argument("true_json",
                type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("est_json",
                type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--exclude-c", is_flag=True, default=False,
              help="Drop surrogate edges from all counts.")
def cmd_metrics(true_json, est_json, exclude_c):
    """Compare an estimated graph JSON against a ground-truth graph JSON."""
    truth = read_graph_json(true_json)
    estimate = read_graph_json(est_json)
    include = not exclude_c
    counts = confusion(truth, estimate, include_surrogate=include)
    classes = [c for c in EDGE_CLASSES if c in counts] + ["overall"]
    click.echo(f"{'class':<18}{'TP':>4}{'FP':>4}{'FN':>4}"
               f"{'tpr':>8}{'fdr':>8}{'shd':>5}")
    for name in classes:
        conf = counts[name]
        if name == "overall":
            distance = shd(truth, estimate, include_surrogate=include)
        else:
            distance = shd(truth, estimate, include_surrogate=include,
                           edge_classes=(name,))
        rate = tpr(conf)
        rate_text = f"{rate:.3f}" if rate is not None else "n/a"
        click.echo(f"{name:<18}{conf.tp:>4}{conf.fp:>4}{conf.fn:>4}"
                   f"{rate_text:>8}{fdr(conf):>8.3f}{distance:>5}")


def main(argv=None):
    """Entry point with the documented exit-code contract."""
    try:
        cli.main(args=argv, prog_name="ecdans", standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.UsageError as exc:
        exc.show()
        sys.exit(1)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except click.Abort:
        click.echo("aborted", err=True)
        sys.exit(1)
    except (ParseError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    except Exception as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    main()

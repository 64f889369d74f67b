"""
Operator command line: analyze, simulate, sweep, compare and optimize.

Each command reads the experiment config (built-in Table I defaults, an
optional YAML file, then ``--set`` overrides), evaluates every requested
(scheme, n) pair and writes figure-ready CSV / JSON files under ``--out``.
A short summary goes to stdout in the ``--output`` format.

Exit codes: 0 success, 2 configuration or usage error, 1 runtime,
numerical or invariant failure.
"""

import argparse
import logging
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml

from rateadapt.config import (
    CONFIG_PATH,
    LOG_FORMAT,
    LOG_LEVEL,
    META_MODES,
    OUTPUT_DIR,
    OUTPUT_FORMATS,
    SIMULATION_MODES,
    WORKERS,
)
from rateadapt.errors import (
    ConfigurationError,
    DegenerateDistributionError,
    InvariantViolation,
    RateAdaptError,
)
from rateadapt.loader import config_to_dict, load_config
from rateadapt.metrics import (
    KpiReport,
    Objective,
    check_report_invariants,
    evaluate_scheme,
    optimize_fragments,
)
from rateadapt.params import NetworkConfig, Scheme, detection_threshold
from rateadapt.reporting import (
    KPI_COLUMNS,
    format_report,
    kpi_row,
    write_json,
    write_kpi_csv,
    write_meta_csv,
    write_samples,
    write_sim_kpi_csv,
    write_table_csv,
)
from rateadapt.simcore import (
    SimulationRun,
    empirical_meta,
    simulate_classes,
    simulate_network,
)
from rateadapt.spatial import meta_ccdf, meta_distribution

logger = logging.getLogger(__name__)

COMMANDS = ("analyze", "simulate", "sweep", "compare", "optimize")
DEFAULT_P_ACK_VALUES = "1,0.7,0.5"


@dataclass(frozen=True)
class ExperimentSpec:
    command: str
    schemes: Tuple[Scheme, ...]
    n_values: Tuple[int, ...]
    config_path: Optional[str]
    output_dir: Path
    seed: Optional[int] = None
    overrides: Tuple[str, ...] = ()
    output_format: str = "pretty"
    workers: Optional[int] = None
    mode: str = "marginal"
    meta_mode: str = "exact"
    p_ack_values: Tuple[float, ...] = ()
    objective: Objective = Objective.MAX_PSD
    target: Optional[float] = None
    vary: Optional[Tuple[str, Tuple[Any, ...]]] = None

    def config(self, more: Sequence[Tuple[str, Any]] = ()) -> NetworkConfig:
        items: List[Any] = list(self.overrides)
        if self.seed is not None:
            items.append(("analysis.seed", self.seed))
        if self.workers is not None:
            items.append(("analysis.workers", self.workers))
        items.extend(more)
        return load_config(self.config_path, items)


def parse_schemes(values: Optional[Sequence[str]], default: Sequence[Scheme]) -> Tuple[Scheme, ...]:
    if not values:
        return tuple(default)
    schemes: List[Scheme] = []
    for value in values:
        for part in value.split(","):
            if part.strip():
                scheme = Scheme.parse(part, "--scheme")
                if scheme not in schemes:
                    schemes.append(scheme)
    if not schemes:
        raise ConfigurationError("no scheme given", "--scheme")
    return tuple(schemes)


def parse_n_range(text: Optional[str], deadline: int) -> Tuple[int, ...]:
    """``A..B`` or a single ``A``; defaults to 1..T."""
    if text is None:
        return tuple(range(1, deadline + 1))
    low, sep, high = text.partition("..")
    try:
        start = int(low)
        stop = int(high) if sep else start
    except ValueError:
        raise ConfigurationError(f"{text!r} is not A..B or A", "--n-range") from None
    if start > stop:
        raise ConfigurationError(f"empty range {text!r}", "--n-range")
    if start < 1 or stop > deadline:
        raise ConfigurationError(f"must lie within [1, {deadline}] (radio.deadline)", "--n-range")
    return tuple(range(start, stop + 1))


def parse_float_list(text: str, key_path: str) -> Tuple[float, ...]:
    try:
        values = tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ConfigurationError(f"{text!r} is not a comma-separated list of numbers", key_path) from None
    if not values:
        raise ConfigurationError("at least one value is required", key_path)
    return values


def parse_vary(text: str) -> Tuple[str, Tuple[Any, ...]]:
    key_path, sep, raw = text.partition("=")
    key_path = key_path.strip()
    if not sep or not key_path or not raw.strip():
        raise ConfigurationError(f"{text!r} is not of the form key=v1,v2,...", "--vary")
    values = []
    for part in raw.split(","):
        try:
            values.append(yaml.safe_load(part))
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"cannot parse value {part!r}: {exc}", key_path) from exc
    return key_path, tuple(values)


def _check(reports: Sequence[KpiReport]) -> None:
    for report in reports:
        check_report_invariants(report)


def _analytic_ccdf(config: NetworkConfig, n: int, deltas: np.ndarray):
    theta = detection_threshold(config.radio, n)
    meta = meta_distribution(config.spatial, theta)
    try:
        values = np.asarray(meta_ccdf(meta, deltas), dtype=float)
    except DegenerateDistributionError:
        # point mass at M1
        values = np.where(deltas < meta.m1, 1.0, 0.0)
    return theta, meta, values


def _deltas(config: NetworkConfig) -> np.ndarray:
    return np.linspace(0.0, 1.0, config.analysis.meta_points)


def _report_payload(spec: ExperimentSpec, config: NetworkConfig, **body) -> Dict[str, Any]:
    payload: Dict[str, Any] = {
        "command": spec.command,
        "schemes": [s.value for s in spec.schemes],
        "n_values": list(spec.n_values),
        "config": config_to_dict(config),
    }
    payload.update(body)
    return payload


def run_analyze(spec: ExperimentSpec) -> Tuple[List[Path], List[KpiReport]]:
    config = spec.config()
    files: List[Path] = []
    deltas = _deltas(config)
    for n in spec.n_values:
        _, _, ccdf = _analytic_ccdf(config, n, deltas)
        files.append(write_meta_csv(spec.output_dir / f"meta_{n}.csv", deltas, ccdf))

    reports = [evaluate_scheme(config, scheme, n) for scheme in spec.schemes for n in spec.n_values]
    _check(reports)
    files.append(write_kpi_csv(spec.output_dir / "kpi.csv", reports))
    files.append(
        write_json(
            spec.output_dir / "report.json",
            _report_payload(spec, config, reports=[r.to_dict() for r in reports]),
        )
    )
    return files, reports


def run_simulate(spec: ExperimentSpec) -> Tuple[List[Path], List[KpiReport]]:
    if spec.mode not in SIMULATION_MODES:
        raise ConfigurationError(f"must be one of {', '.join(SIMULATION_MODES)}", "--mode")
    config = spec.config()
    analysis = config.analysis
    run = SimulationRun.from_config(config)
    files: List[Path] = []
    deltas = _deltas(config)
    meta_fits: Dict[str, Any] = {}
    for n in spec.n_values:
        theta, meta, ccdf = _analytic_ccdf(config, n, deltas)
        empirical = empirical_meta(
            config.spatial, theta, run, spec.meta_mode, analysis.slot_samples, analysis.workers
        )
        files.append(write_samples(spec.output_dir / f"samples_{n}.txt", empirical.samples))
        files.append(
            write_meta_csv(spec.output_dir / f"meta_{n}.csv", deltas, ccdf, empirical.ccdf(deltas))
        )
        fit = {
            "m1": meta.m1,
            "m2": meta.m2,
            "m1_empirical": empirical.mean,
            "m2_empirical": empirical.second_moment,
        }
        if not meta.is_degenerate:
            fit["ks_distance"] = empirical.kolmogorov_distance(meta)
            logger.info("n=%d: KS distance %.4g", n, fit["ks_distance"])
        meta_fits[str(n)] = fit

    rows: List[Dict[str, Any]] = []
    reports: List[KpiReport] = []
    for scheme in spec.schemes:
        for n in spec.n_values:
            report = evaluate_scheme(config, scheme, n)
            reports.append(report)
            if spec.mode == "physical":
                pooled = simulate_network(config, scheme, n, run, report.p_ack, analysis.workers)
                summary = pooled.summary(config, scheme)
            else:
                summary = simulate_classes(config, report)
            row = {
                "scheme": scheme.value,
                "n": n,
                "T": config.deadline,
                "theta": report.threshold,
                "p_ack": report.p_ack,
                "psd_analytic": report.psd,
                # simulated latency is the mean absorption slot whatever the headline mode
                "latency_slots_analytic": float(
                    np.mean([c.absorption.mean_delay for c in report.classes])
                ),
                "energy_J_analytic": report.energy_j,
            }
            row.update(summary)
            rows.append(row)
    _check(reports)
    files.append(write_sim_kpi_csv(spec.output_dir / "kpi_sim.csv", rows))
    files.append(
        write_json(
            spec.output_dir / "report.json",
            _report_payload(
                spec,
                config,
                mode=spec.mode,
                meta_mode=spec.meta_mode,
                meta=meta_fits,
                simulated=rows,
                reports=[r.to_dict() for r in reports],
            ),
        )
    )
    return files, reports


def run_sweep(spec: ExperimentSpec) -> Tuple[List[Path], List[KpiReport]]:
    if spec.vary is None:
        raise ConfigurationError("sweep needs --vary key=v1,v2,...", "--vary")
    key_path, values = spec.vary
    rows: List[Dict[str, Any]] = []
    reports: List[KpiReport] = []
    for value in values:
        config = spec.config([(key_path, value)])
        logger.info("Sweep %s=%r", key_path, value)
        for scheme in spec.schemes:
            for n in spec.n_values:
                if n > config.deadline:
                    logger.warning("Skipping n=%d beyond deadline %d", n, config.deadline)
                    continue
                report = evaluate_scheme(config, scheme, n)
                reports.append(report)
                row = {"key": key_path, "value": value}
                row.update(kpi_row(report))
                rows.append(row)
    _check(reports)
    columns = ["key", "value"] + list(KPI_COLUMNS)
    files = [write_table_csv(spec.output_dir / "sweep.csv", columns, rows)]
    return files, reports


def run_compare(spec: ExperimentSpec) -> Tuple[List[Path], List[KpiReport]]:
    config = spec.config()
    rows: List[Dict[str, Any]] = []
    reports: List[KpiReport] = []

    def add(report: KpiReport, variant: str) -> None:
        reports.append(report)
        row = {"variant": variant}
        row.update(kpi_row(report))
        rows.append(row)

    for n in spec.n_values:
        for p_ack in spec.p_ack_values:
            add(evaluate_scheme(config, Scheme.CLRA, n, p_ack=p_ack), f"clra(p_ack={p_ack:g})")
        for scheme in (Scheme.OLRA, Scheme.OLRA_ES):
            add(evaluate_scheme(config, scheme, n), scheme.value)
    _check(reports)
    columns = ["variant"] + list(KPI_COLUMNS)
    files = [
        write_table_csv(spec.output_dir / "compare.csv", columns, rows),
        write_json(
            spec.output_dir / "report.json",
            _report_payload(
                spec,
                config,
                p_ack_values=list(spec.p_ack_values),
                reports=[dict(variant=row["variant"], **r.to_dict()) for row, r in zip(rows, reports)],
            ),
        ),
    ]
    return files, reports


def run_optimize(spec: ExperimentSpec) -> Tuple[List[Path], List[KpiReport]]:
    config = spec.config()
    results = [
        optimize_fragments(config, scheme, spec.objective, spec.target, spec.n_values)
        for scheme in spec.schemes
    ]
    reports = [r.report for r in results if r.report is not None]
    _check([s for r in results for s in r.scanned])
    files = [
        write_json(
            spec.output_dir / "optimize.json",
            _report_payload(
                spec,
                config,
                objective=spec.objective.value,
                target=spec.target,
                results=[r.to_dict() for r in results],
            ),
        )
    ]
    for result in results:
        if not result.feasible:
            print(
                f"{result.scheme.label}: PSD target {spec.target:g} infeasible "
                f"(best {result.best_psd:.6g})"
            )
    return files, reports


RUNNERS = {
    "analyze": run_analyze,
    "simulate": run_simulate,
    "sweep": run_sweep,
    "compare": run_compare,
    "optimize": run_optimize,
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH", default=CONFIG_PATH,
                        help="Experiment YAML file (default: RATEADAPT_CONFIG or built-in Table I values)")
    parser.add_argument("--scheme", action="append", metavar="NAME",
                        help="clra, olra or olra-es; repeatable or comma-separated (default: all)")
    parser.add_argument("--n-range", metavar="A..B",
                        help="Fragment counts to evaluate (default: 1..T)")
    parser.add_argument("--seed", type=int, help="Master seed for every random stream")
    parser.add_argument("--out", metavar="DIR", default=OUTPUT_DIR,
                        help=f"Output directory (default: {OUTPUT_DIR})")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="Override a config value, e.g. spatial.density=300/km2 (repeatable)")
    parser.add_argument("--output", choices=OUTPUT_FORMATS, default="pretty",
                        help="Stdout summary format (default: pretty)")
    parser.add_argument("--workers", type=int,
                        help=f"Worker processes (default: analysis.workers, else RATEADAPT_WORKERS={WORKERS})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Rate adaptation analysis for deadline-constrained links in Poisson networks.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s analyze --scheme olra,olra-es --n-range 1..10
  %(prog)s simulate --scheme clra --n-range 1..4 --seed 7 --mode physical
  %(prog)s sweep --vary spatial.density=100/km2,200/km2,300/km2
  %(prog)s compare --p-ack 1,0.7,0.5 --n-range 1..8
  %(prog)s optimize --objective min-energy --target 0.9
        """,
    )
    commands = parser.add_subparsers(dest="command", required=True)

    commands_help = {
        "analyze": "Analytic meta distribution and KPIs",
        "simulate": "Monte Carlo validation against the analysis",
        "sweep": "Analyze across values of one config key",
        "compare": "CLRA at several feedback success probabilities vs OLRA / OLRA-ES",
        "optimize": "Best fragment count per scheme",
    }
    subparsers = {}
    for name in COMMANDS:
        sub = commands.add_parser(name, help=commands_help[name])
        _add_common(sub)
        subparsers[name] = sub

    subparsers["simulate"].add_argument("--mode", choices=SIMULATION_MODES, default="marginal",
                                        help="marginal: Bernoulli per class; physical: SIR per realization")
    subparsers["simulate"].add_argument("--meta-mode", choices=META_MODES, default="exact",
                                        help="Empirical meta estimator (default: exact)")
    subparsers["sweep"].add_argument("--vary", required=True, metavar="KEY=V1,V2",
                                     help="Dotted config key and the values to sweep")
    subparsers["compare"].add_argument("--p-ack", default=DEFAULT_P_ACK_VALUES, metavar="P1,P2",
                                       help=f"Fixed ACK success probabilities for CLRA (default: {DEFAULT_P_ACK_VALUES})")
    subparsers["optimize"].add_argument("--objective", default=Objective.MAX_PSD.value,
                                        choices=[o.value for o in Objective])
    subparsers["optimize"].add_argument("--target", type=float,
                                        help="Minimum PSD a candidate n must reach")
    return parser


def build_spec(args: argparse.Namespace) -> ExperimentSpec:
    if args.workers is not None and args.workers < 1:
        raise ConfigurationError("must be >= 1", "--workers")
    # the deadline (and the config's validity) gates the n range
    base = load_config(args.config, args.overrides)
    default_schemes = (Scheme.CLRA, Scheme.OLRA, Scheme.OLRA_ES)
    spec = ExperimentSpec(
        command=args.command,
        schemes=parse_schemes(args.scheme, default_schemes),
        n_values=parse_n_range(args.n_range, base.deadline),
        config_path=args.config,
        output_dir=Path(args.out),
        seed=args.seed,
        overrides=tuple(args.overrides),
        output_format=args.output,
        workers=args.workers,
    )
    if args.command == "simulate":
        spec = replace(spec, mode=args.mode, meta_mode=args.meta_mode)
    elif args.command == "sweep":
        spec = replace(spec, vary=parse_vary(args.vary))
    elif args.command == "compare":
        p_ack_values = parse_float_list(args.p_ack, "--p-ack")
        if any(not 0.0 <= p <= 1.0 for p in p_ack_values):
            raise ConfigurationError("values must lie in [0, 1]", "--p-ack")
        spec = replace(spec, p_ack_values=p_ack_values)
    elif args.command == "optimize":
        if args.target is not None and not 0.0 <= args.target <= 1.0:
            raise ConfigurationError("must lie in [0, 1]", "--target")
        spec = replace(spec, objective=Objective.parse(args.objective), target=args.target)
    return spec


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=LOG_LEVEL, format=LOG_FORMAT, stream=sys.stderr)

    try:
        spec = build_spec(args)
        logger.info("Starting %s: schemes=%s n=%s", spec.command,
                    ",".join(s.value for s in spec.schemes), list(spec.n_values))
        files, reports = RUNNERS[spec.command](spec)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InvariantViolation as exc:
        print(f"error: invariant check failed: {exc}", file=sys.stderr)
        return 1
    except (RateAdaptError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    if reports:
        print(format_report(reports, spec.output_format))
    logger.info("Finished %s: %d files in %s", spec.command, len(files), spec.output_dir)
    return 0

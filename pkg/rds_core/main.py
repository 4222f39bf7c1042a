"""Main - Titik masuk CLI: generate, sample, fit, estimate, bootstrap, scenario, ingest."""

import argparse
import csv
import json
import logging
import os
import sys
from typing import Optional, Sequence

from rich.console import Console
from rich.table import Table

from rds_core.bootstrap import BootstrapConfig, BootstrapMethod, run_bootstrap
from rds_core.config import DEFAULT_CONFIG_PATH, load_config
from rds_core.errors import ConfigError, RDSError
from rds_core.estimators import ESTIMATORS, EstimateReport, EstimatorSuite, SuiteFits
from rds_core.inference import coefficient_intervals, fit_dr, fit_mdr
from rds_core.netgen import HOMOPHILY_LEVELS, PopulationRecipe, draw_population
from rds_core.recruitment import (
    MDR_LEVELS,
    SCENARIO_COVARIATES,
    CovariateSpec,
    load_model,
    scenario_model,
)
from rds_core.rng import make_rng
from rds_core.sampler import SamplingDesign, run_rds
from rds_core.storage import read_json, read_population, read_sample, write_json, write_population, write_sample

console = Console()
logger = logging.getLogger("rds_mdr")


def setup_logging(config: dict, level: Optional[str] = None):
    log_config = config.get("logging", {})
    log_dir = log_config.get("directory", "logs")
    os.makedirs(log_dir, exist_ok=True)

    log_format = log_config.get("format", "%(asctime)s - %(name)s - %(levelname)s - %(message)s")
    log_level = level or config.get("project", {}).get("log_level", "INFO")

    logging.basicConfig(
        level=getattr(logging, log_level.upper(), logging.INFO),
        format=log_format,
        handlers=[
            logging.FileHandler(os.path.join(log_dir, log_config.get("activity_file", "rds_activity.log"))),
        ],
        force=True,
    )

    error_handler = logging.FileHandler(os.path.join(log_dir, log_config.get("error_file", "error.log")))
    error_handler.setLevel(logging.ERROR)
    error_handler.setFormatter(logging.Formatter(log_format))
    logging.getLogger().addHandler(error_handler)


def _covariates(args, config: dict) -> list[CovariateSpec]:
    if getattr(args, "model_spec", None):
        data = read_json(args.model_spec)
        entries = data.get("covariates", []) if isinstance(data, dict) else data
        if not entries:
            raise ConfigError(f"Spesifikasi model tanpa kovariat: {args.model_spec}")
        return [CovariateSpec.from_dict(c) for c in entries]
    if getattr(args, "covariates", "scenario") == "application":
        from harness.ingestion import APPLICATION_COVARIATES
        return list(APPLICATION_COVARIATES)
    return list(SCENARIO_COVARIATES)


def _suite(args, config: dict) -> EstimatorSuite:
    suite = EstimatorSuite.from_config(config, _covariates(args, config))
    suite.dr_attr = args.dr_attr
    return suite


def _load_sample(args):
    return read_sample(args.sample, args.alters, coupons=args.coupons)


def _estimators(text: Optional[str]) -> list[str]:
    if not text:
        return list(ESTIMATORS)
    names = [name.strip() for name in text.split(",") if name.strip()]
    unknown = [name for name in names if name not in ESTIMATORS]
    if unknown:
        raise ConfigError(f"Estimator tidak dikenal: {', '.join(unknown)}", {"known": list(ESTIMATORS)})
    return names


def _emit(data, args):
    if args.output:
        write_json(data, args.output)
        console.print(f"[green]Hasil disimpan ke {args.output}[/green]")
    else:
        print(json.dumps(data, indent=2, sort_keys=True))


def _emit_reports(reports: Sequence[EstimateReport], args, title: str):
    rows = [report.to_dict() for report in reports]
    if args.format == "csv":
        columns = ["estimator", "estimate", "status", "se", "ci_lower", "ci_upper", "bootstrap_method",
                   "replicates", "undefined_replicates", "refit_failures", "weight_source", "mode"]
        target = open(args.output, "w", newline="", encoding="utf-8") if args.output else sys.stdout
        try:
            writer = csv.writer(target)
            writer.writerow(columns)
            for report in reports:
                data = {**report.to_dict(), "ci_lower": report.ci_lower, "ci_upper": report.ci_upper}
                writer.writerow(["NA" if data[c] is None else data[c] for c in columns])
        finally:
            if args.output:
                target.close()
        return
    if args.output:
        _emit(rows, args)
        return
    table = Table(title=title, border_style="cyan")
    table.add_column("Estimator", style="bold")
    table.add_column("Estimasi")
    table.add_column("SE")
    table.add_column("CI")
    table.add_column("Status")
    for report in reports:
        table.add_row(
            report.estimator,
            "NA" if report.estimate is None else f"{report.estimate:.4f}",
            "-" if report.se is None else f"{report.se:.4f}",
            "-" if report.ci_lower is None else f"[{report.ci_lower:.4f}, {report.ci_upper:.4f}]",
            report.status,
        )
    console.print(table)


def cmd_generate(args, config: dict) -> int:
    if args.recipe:
        recipe = PopulationRecipe.load(args.recipe)
    else:
        netgen = config.get("netgen", {})
        recipe = PopulationRecipe.for_level(
            args.level,
            n=args.n or int(netgen.get("population_size", 1000)),
            age_shape=float(netgen.get("age_shape", 26.0)),
            age_rate=float(netgen.get("age_rate", 1.0)),
            logit_intercept=float(netgen.get("logit_intercept", -4.0)),
            logit_slope=float(netgen.get("logit_slope", 0.09)),
            max_retries=int(netgen.get("max_retries", 100)),
            rng_seed=args.seed,
        )
    pop = draw_population(recipe, make_rng(args.seed))
    os.makedirs(args.out_dir, exist_ok=True)
    write_population(pop, os.path.join(args.out_dir, "nodes.csv"), os.path.join(args.out_dir, "edges.csv"))
    recipe.save(os.path.join(args.out_dir, "recipe.json"))
    _emit(pop.summary(), args)
    return 0


def cmd_sample(args, config: dict) -> int:
    pop = read_population(args.nodes, args.edges)
    model = load_model(args.model) if args.model else scenario_model(args.mdr_level)
    if args.design:
        design = SamplingDesign.from_dict(read_json(args.design))
    else:
        design = SamplingDesign.from_dict(config.get("sampling", {}))
    sample = run_rds(pop, model, design, make_rng(args.seed))
    write_sample(sample, os.path.join(args.out_dir, "sample.csv"), os.path.join(args.out_dir, "alters.csv"))
    _emit(sample.summary(), args)
    return 0


def cmd_fit(args, config: dict) -> int:
    sample = _load_sample(args)
    inference = config.get("inference", {})
    options = {
        "max_iterations": int(inference.get("max_iterations", 500)),
        "gtol": float(inference.get("gradient_tolerance", 1e-8)),
        "rtol": float(inference.get("relative_tolerance", 1e-12)),
        "standardize": bool(inference.get("standardize", False)),
    }
    if args.dr:
        fit = fit_dr(sample, args.dr_attr, **options)
    else:
        fit = fit_mdr(sample, _covariates(args, config), **options)
    if not fit.converged:
        console.print("[yellow]Optimasi tidak konvergen; lihat log untuk detail.[/yellow]")
    if args.save_model:
        fit.model().save(args.save_model)
    _emit(fit.to_dict(), args)
    return 0


def cmd_estimate(args, config: dict) -> int:
    sample = _load_sample(args)
    suite = _suite(args, config)
    estimators = _estimators(args.estimators)
    if args.fit:
        fits = SuiteFits(dr=args.phi, mdr=load_model(args.fit))
    else:
        fits = suite.fit(sample, estimators)
    _emit_reports(suite.report(sample, estimators, fits), args, "Estimasi Prevalensi")
    return 0


def cmd_bootstrap(args, config: dict) -> int:
    sample = _load_sample(args)
    suite = _suite(args, config)
    estimators = _estimators(args.estimators)
    boot = BootstrapConfig.from_config(
        config,
        method=args.method,
        replicates=args.replicates,
        rng_seed=args.seed,
        threads=args.threads,
    )
    fits = suite.fit(sample, estimators)
    summary = run_bootstrap(sample, boot, suite, estimators, fits)
    reports = [summary.reports[name] for name in estimators]
    if args.format == "json" and fits.mdr is not None and summary.replicate_fits:
        data = summary.to_dict()
        data["coefficients"] = coefficient_intervals(summary.replicate_fits, fits.mdr, boot.alpha)
        _emit(data, args)
        return 0
    _emit_reports(reports, args, f"Bootstrap (B={boot.replicates})")
    return 0


def cmd_scenario(args, config: dict) -> int:
    from harness.reports import write_scenario_tables
    from harness.scenario import SCENARIOS, ScenarioConfig, run_scenario
    from monitoring.monitor import RunMetrics

    if args.config_json:
        configs = [ScenarioConfig.load(args.config_json)]
        for cell in configs:
            if args.seed is not None:
                cell.root_seed = args.seed
            cell.threads = args.threads
    else:
        numbers = sorted(SCENARIOS) if args.scenario is None else [args.scenario]
        configs = [
            ScenarioConfig.from_config(config, *SCENARIOS[number], full_scale=args.full_scale,
                                       root_seed=args.seed or 0, with_bootstrap=not args.no_bootstrap,
                                       threads=args.threads)
            for number in numbers
        ]
    metrics = RunMetrics()
    results = [run_scenario(cell, metrics) for cell in configs]
    os.makedirs(args.out_dir, exist_ok=True)
    for result in results:
        write_json(result.to_dict(), os.path.join(args.out_dir, f"scenario_{result.number}.json"))
    paths = write_scenario_tables(results, args.out_dir)

    table = Table(title="RMSE per Skenario", border_style="green")
    table.add_column("Skenario", style="bold")
    estimators = list(configs[0].estimators)
    for name in estimators:
        table.add_column(name)
    for result in results:
        table.add_row(str(result.number), *[
            "NA" if result.stats[name].rmse is None else f"{result.stats[name].rmse:.4f}" for name in estimators
        ])
    console.print(table)
    totals = metrics.get_all_counters()
    if totals:
        console.print("Total counter: " + ", ".join(f"{name}={value}" for name, value in totals.items()))
    console.print(f"[green]{len(paths)} tabel ditulis ke {args.out_dir}[/green]")
    return 0


def cmd_ingest(args, config: dict) -> int:
    from harness.ingestion import ingest_raw, sensitivity_transform

    rng = make_rng(args.seed)
    sample, audit = ingest_raw(args.raw, config, rng, estimate_same_group=args.estimate_same_group)
    if args.sensitivity:
        settings = config.get("ingestion", {}).get("sensitivity", {})
        sample = sensitivity_transform(
            sample,
            convert_fraction=float(settings.get("convert_fraction", 0.7)),
            age_shift=float(settings.get("age_shift_years", 3.0)),
            rng=rng,
        )
    write_sample(sample, os.path.join(args.out_dir, "sample.csv"), os.path.join(args.out_dir, "alters.csv"))
    write_json(audit.to_dict(), os.path.join(args.out_dir, "repair_audit.json"))
    console.print(
        f"[green]{audit.members} responden, {audit.modified} diperbaiki, {audit.imputed} diimputasi[/green]"
    )
    return 0


def _add_sample_args(parser: argparse.ArgumentParser):
    parser.add_argument("--sample", required=True, help="CSV sampel")
    parser.add_argument("--alters", help="CSV laporan alter")
    parser.add_argument("--coupons", type=int, help="Jumlah kupon per responden")
    parser.add_argument("--model-spec", help="JSON daftar kovariat MDR")
    parser.add_argument("--covariates", choices=["scenario", "application"], default="scenario")
    parser.add_argument("--dr-attr", default="z", help="Atribut biner untuk model DR")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=DEFAULT_CONFIG_PATH, help="Berkas pengaturan YAML")
    common.add_argument("--seed", type=int, help="Seed akar (default 0)")
    common.add_argument("--threads", type=int, default=1, help="Jumlah worker paralel")
    common.add_argument("--format", choices=["json", "csv"], default="json")
    common.add_argument("--output", help="Berkas keluaran (default: stdout)")
    common.add_argument("--log-level", help="Override level log")

    parser = argparse.ArgumentParser(prog="rds-mdr", description="Inferensi RDS di bawah recruitment diferensial multivariat")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="Bangkitkan populasi jaringan")
    p.add_argument("--recipe", help="JSON PopulationRecipe")
    p.add_argument("--level", choices=list(HOMOPHILY_LEVELS), default="none")
    p.add_argument("--n", type=int, help="Ukuran populasi")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(handler=cmd_generate)

    p = sub.add_parser("sample", parents=[common], help="Simulasikan sampel RDS")
    p.add_argument("--nodes", required=True)
    p.add_argument("--edges", required=True)
    p.add_argument("--model", help="JSON model rekrutmen")
    p.add_argument("--mdr-level", choices=list(MDR_LEVELS), default="none")
    p.add_argument("--design", help="JSON SamplingDesign")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(handler=cmd_sample)

    p = sub.add_parser("fit", parents=[common], help="Estimasi parameter rekrutmen")
    _add_sample_args(p)
    p.add_argument("--dr", action="store_true", help="Fit model DR satu dimensi")
    p.add_argument("--save-model", help="Simpan model hasil fit sebagai JSON")
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("estimate", parents=[common], help="Hitung estimator prevalensi")
    _add_sample_args(p)
    p.add_argument("--estimators", help="Daftar estimator dipisah koma")
    p.add_argument("--fit", help="JSON model MDR yang sudah di-fit")
    p.add_argument("--phi", type=float, default=1.0, help="phi DR bila --fit diberikan")
    p.set_defaults(handler=cmd_estimate)

    p = sub.add_parser("bootstrap", parents=[common], help="Interval kepercayaan bootstrap")
    _add_sample_args(p)
    p.add_argument("--estimators", help="Daftar estimator dipisah koma")
    p.add_argument("--method", choices=[m.value for m in BootstrapMethod])
    p.add_argument("-B", "--replicates", type=int)
    p.set_defaults(handler=cmd_bootstrap)

    p = sub.add_parser("scenario", parents=[common], help="Jalankan studi simulasi")
    p.add_argument("--config-json", help="JSON ScenarioConfig")
    p.add_argument("--scenario", type=int, choices=range(1, 10), help="Nomor skenario (default: semua)")
    p.add_argument("--full-scale", action="store_true")
    p.add_argument("--no-bootstrap", action="store_true")
    p.add_argument("--out-dir", default="results")
    p.set_defaults(handler=cmd_scenario)

    p = sub.add_parser("ingest", parents=[common], help="Perbaiki data responden mentah")
    p.add_argument("--raw", required=True, help="CSV responden mentah")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--sensitivity", action="store_true", help="Terapkan transformasi analisis sensitivitas")
    p.add_argument("--estimate-same-group", action="store_true")
    p.set_defaults(handler=cmd_ingest)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        setup_logging(config, args.log_level)
        logger.info(f"Perintah {args.command} dimulai")
        if args.seed is None and args.command != "scenario":
            args.seed = 0
        code = args.handler(args, config)
        logger.info(f"Perintah {args.command} selesai")
        return code
    except RDSError as e:
        logger.error(f"{type(e).__name__}: {e.message}")
        console.print(f"[red]{type(e).__name__}:[/red] {e.message}")
        if e.details:
            console.print(f"[dim]{json.dumps(e.details, default=str)}[/dim]")
        return e.exit_code


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()

"""Reports - Tabel CSV RMSE/SD/bias/coverage per skenario (baris) dan estimator (kolom)."""

import csv
import logging
import os
from typing import Optional, Sequence

from harness.comparison import bonferroni_mse_compare
from harness.scenario import ScenarioResult

logger = logging.getLogger(__name__)

METRICS = ("rmse", "sd", "bias", "coverage", "undefined_rate")


def _cell(value: Optional[float], marked: bool = False) -> str:
    if value is None:
        return "NA"
    return f"{value:.4f}" + ("*" if marked else "")


def metric_rows(results: Sequence[ScenarioResult], metric: str, mark_best: bool = False) -> list[list[str]]:
    """Baris tabel; dengan ``mark_best`` estimator yang tidak terbedakan dari RMSE minimum diberi '*'."""
    estimators = list(results[0].config.estimators) if results else []
    rows = [["scenario", "homophily", "mdr"] + estimators]
    for result in sorted(results, key=lambda r: r.number):
        best_set: set = set()
        if mark_best and len(result.traces) >= 2:
            best_set = set(bonferroni_mse_compare(result.squared_errors()).best_set)
        row = [str(result.number), result.config.homophily_level, result.config.mdr_level]
        for name in estimators:
            stats = result.stats.get(name)
            row.append(_cell(getattr(stats, metric) if stats else None, name in best_set))
        rows.append(row)
    return rows


def write_metric_table(results: Sequence[ScenarioResult], metric: str, path: str, mark_best: bool = False):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        csv.writer(f).writerows(metric_rows(results, metric, mark_best))


def write_scenario_tables(results: Sequence[ScenarioResult], directory: str) -> list[str]:
    paths = []
    for metric in METRICS:
        path = os.path.join(directory, f"{metric}.csv")
        write_metric_table(results, metric, path, mark_best=metric == "rmse")
        paths.append(path)
    path = os.path.join(directory, "networks.csv")
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["scenario", "network", "true_prevalence", "mean_degree", "tau", "phi_mdr", "t01", "t10"])
        for result in sorted(results, key=lambda r: r.number):
            for net in result.networks:
                writer.writerow([result.number, net["network"], repr(net["true_prevalence"]), repr(net["mean_degree"]),
                                 "NA" if net["tau"] is None else repr(net["tau"]), repr(net["phi_mdr"]),
                                 net["t01"], net["t10"]])
    paths.append(path)
    logger.info(f"Tabel skenario ditulis ke {directory}")
    return paths

"""Config - Memuat pengaturan YAML dengan fallback ke nilai default."""

import copy
import logging
from typing import Optional

import yaml
from rich.console import Console

logger = logging.getLogger(__name__)
console = Console(stderr=True)

DEFAULT_CONFIG_PATH = "config/settings.yaml"

DEFAULT_CONFIG = {
    "project": {"name": "RDS MDR Toolkit", "version": "1.0.0", "log_level": "INFO"},
    "logging": {
        "directory": "logs",
        "activity_file": "rds_activity.log",
        "error_file": "error.log",
        "format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    },
    "netgen": {
        "population_size": 1000,
        "age_shape": 26.0,
        "age_rate": 1.0,
        "logit_intercept": -4.0,
        "logit_slope": 0.09,
        "max_retries": 100,
        "tau_threshold_years": 5.0,
        "calibration_pairs": 1_000_000,
    },
    "sampling": {
        "n_target": 200,
        "n_seeds": 7,
        "coupons": 2,
        "seed_rule": "stationary",
        "stall_rule": "replace-seed",
    },
    "inference": {
        "max_iterations": 500,
        "gradient_tolerance": 1e-8,
        "relative_tolerance": 1e-12,
        "standardize": False,
    },
    "bootstrap": {
        "replicates": 200,
        "alpha": 0.05,
        "refit_max_iterations": 200,
        "methods": {
            "vh": "salganik",
            "sh": "salganik",
            "lu": "lu",
            "dr_ii": "dr",
            "dr_ego": "dr",
            "mdr_ii": "nb-fixed",
            "mdr_ego": "nb-fixed",
        },
    },
    "scenario": {
        "desk_scale": {"networks": 5, "samples_per_network": 40},
        "full_scale": {"networks": 15, "samples_per_network": 80},
        "abort_failure_fraction": 0.2,
        "estimators": ["vh", "dr_ii", "mdr_ii", "lu", "dr_ego", "mdr_ego"],
    },
    "ingestion": {
        "same_group_probability": 0.62,
        "open_group_max_age": 90.0,
        "outcome": "gender",
        "outcome_positive": "male",
        "sensitivity": {"convert_fraction": 0.7, "age_shift_years": 3.0},
    },
}


def _merge(base: dict, override: dict) -> dict:
    merged = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(config_path: Optional[str] = DEFAULT_CONFIG_PATH) -> dict:
    if config_path is None:
        return copy.deepcopy(DEFAULT_CONFIG)
    try:
        with open(config_path, "r") as f:
            loaded = yaml.safe_load(f) or {}
    except FileNotFoundError:
        console.print(f"[yellow]Konfigurasi tidak ditemukan di {config_path}, menggunakan default.[/yellow]")
        return copy.deepcopy(DEFAULT_CONFIG)
    logger.debug(f"Konfigurasi dimuat dari {config_path}")
    return _merge(DEFAULT_CONFIG, loaded)

"""Tests - Storage dan CLI: round-trip CSV populasi/sampel serta alur perintah rds-mdr."""

import csv
import json
import os
import tempfile

import numpy as np

from rds_core.errors import DataError
from rds_core.estimators import lu, vh
from rds_core.main import main
from rds_core.netgen import ErgmParams, PopulationRecipe
from rds_core.sampler import EgoReport, SampleMode
from rds_core.storage import read_json, read_population, read_sample, write_json, write_population, write_sample
from tests.helpers import four_member_sample, random_population, simulated_sample


def test_population_roundtrip():
    pop = random_population(n=80, seed=4)
    with tempfile.TemporaryDirectory() as tmp:
        nodes, edges = os.path.join(tmp, "nodes.csv"), os.path.join(tmp, "edges.csv")
        write_population(pop, nodes, edges)
        loaded = read_population(nodes, edges)
    assert loaded.n == pop.n
    assert np.array_equal(loaded.edge_list(), pop.edge_list())
    assert np.allclose(loaded.ages, pop.ages)
    assert np.array_equal(loaded.infection, pop.infection)
    return "Population roundtrip OK"


def test_sample_roundtrip_preserves_estimates():
    sample = simulated_sample(seed=7)
    with tempfile.TemporaryDirectory() as tmp:
        path, alters = os.path.join(tmp, "sample.csv"), os.path.join(tmp, "alters.csv")
        write_sample(sample, path, alters)
        loaded = read_sample(path, alters, coupons=2)
    assert loaded.mode == SampleMode.SIMULATION
    assert np.array_equal(loaded.ids, sample.ids)
    assert np.array_equal(loaded.recruiter, sample.recruiter)
    assert abs(vh(loaded) - vh(sample)) < 1e-12
    assert abs(lu(loaded) - lu(sample)) < 1e-12
    for p in range(sample.n):
        assert np.array_equal(loaded.report(p).attrs["z"], sample.report(p).attrs["z"])
    return "Sample roundtrip OK"


def test_ingestion_sample_has_no_node_column():
    sample = four_member_sample()
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "sample.csv")
        write_sample(sample, path, os.path.join(tmp, "alters.csv"))
        with open(path, newline="") as f:
            header = next(csv.reader(f))
        loaded = read_sample(path, os.path.join(tmp, "alters.csv"))
    assert "node" not in header
    assert loaded.mode == SampleMode.INGESTION
    assert abs(lu(loaded) - 0.25) < 1e-12
    return "Ingestion sample OK"


def test_missing_ego_report_roundtrip():
    sample = four_member_sample()
    sample.ego_reports[3] = None
    sample.ego_reports[2] = EgoReport(attrs={"z": np.empty(0, dtype=np.int64), "age": np.empty(0)})
    with tempfile.TemporaryDirectory() as tmp:
        path, alters = os.path.join(tmp, "sample.csv"), os.path.join(tmp, "alters.csv")
        write_sample(sample, path, alters)
        loaded = read_sample(path, alters)
    assert loaded.ego_reports[3] is None
    assert loaded.ego_reports[2] is not None and loaded.ego_reports[2].size == 0
    assert loaded.report(0).attrs["z"].tolist() == [1, 0]
    assert abs(vh(loaded) - vh(sample)) < 1e-12
    return "Missing report roundtrip OK"


def test_storage_errors():
    with tempfile.TemporaryDirectory() as tmp:
        bad = os.path.join(tmp, "bad.csv")
        with open(bad, "w") as f:
            f.write("id,recruiter_id,wave,degree,z\n1,9,1,2,0\n")
        for call in (lambda: read_sample(os.path.join(tmp, "missing.csv")),
                     lambda: read_sample(bad),
                     lambda: read_json(os.path.join(tmp, "missing.json"))):
            try:
                call()
            except DataError:
                continue
            raise AssertionError("Berkas tidak valid diterima")
        write_json({"b": 1, "a": [1, 2]}, os.path.join(tmp, "out", "data.json"))
        assert read_json(os.path.join(tmp, "out", "data.json")) == {"a": [1, 2], "b": 1}
    return "Storage errors OK"


def _cli_config(tmp: str) -> str:
    path = os.path.join(tmp, "settings.yaml")
    with open(path, "w") as f:
        f.write(f"logging:\n  directory: {os.path.join(tmp, 'logs')}\n")
    return path


def test_cli_pipeline():
    with tempfile.TemporaryDirectory() as tmp:
        config = _cli_config(tmp)
        common = ["--config", config, "--seed", "3"]
        recipe = os.path.join(tmp, "recipe.json")
        PopulationRecipe(n=300, ergm=ErgmParams(-2.5, 0.0)).save(recipe)
        design = os.path.join(tmp, "design.json")
        write_json({"n_target": 100, "n_seeds": 5, "coupons": 2}, design)
        pop_dir, sample_dir = os.path.join(tmp, "pop"), os.path.join(tmp, "sample")

        assert main(["generate", "--recipe", recipe, "--out-dir", pop_dir,
                     "--output", os.path.join(tmp, "pop.json")] + common) == 0
        assert read_json(os.path.join(tmp, "pop.json"))["n"] == 300
        assert main(["sample", "--nodes", os.path.join(pop_dir, "nodes.csv"),
                     "--edges", os.path.join(pop_dir, "edges.csv"), "--design", design,
                     "--out-dir", sample_dir, "--output", os.path.join(tmp, "summary.json")] + common) == 0
        assert read_json(os.path.join(tmp, "summary.json"))["n"] == 100

        sample_args = ["--sample", os.path.join(sample_dir, "sample.csv"),
                       "--alters", os.path.join(sample_dir, "alters.csv"), "--coupons", "2"]
        fit_path = os.path.join(tmp, "fit.json")
        assert main(["fit", "--dr", "--output", fit_path] + sample_args + common) == 0
        assert read_json(fit_path)["phi_hat"] > 0

        estimates = os.path.join(tmp, "estimates.csv")
        assert main(["estimate", "--estimators", "vh,lu,dr_ii", "--format", "csv", "--output", estimates]
                    + sample_args + common) == 0
        with open(estimates, newline="") as f:
            rows = list(csv.DictReader(f))
        assert [r["estimator"] for r in rows] == ["vh", "lu", "dr_ii"]

        boot = os.path.join(tmp, "boot.json")
        assert main(["bootstrap", "--estimators", "vh,lu", "-B", "10", "--output", boot]
                    + sample_args + common) == 0
        reports = read_json(boot)
        assert [r["estimator"] for r in reports] == ["vh", "lu"]
        assert all(r["replicates"] == 10 for r in reports)
        assert os.path.exists(os.path.join(tmp, "logs", "rds_activity.log"))
    return "CLI pipeline OK"


def test_cli_exit_codes():
    with tempfile.TemporaryDirectory() as tmp:
        config = _cli_config(tmp)
        scenario = os.path.join(tmp, "scenario.json")
        with open(scenario, "w") as f:
            json.dump({"homophily_level": "none", "mdr_level": "none", "samples_per_network": 0}, f)
        assert main(["scenario", "--config-json", scenario, "--out-dir", tmp, "--config", config]) == 2
        assert main(["fit", "--sample", os.path.join(tmp, "missing.csv"), "--config", config]) == 3
        assert main(["estimate", "--sample", os.path.join(tmp, "missing.csv"), "--estimators", "nope",
                     "--config", config]) in (2, 3)
    return "CLI exit codes OK"

"""Storage - Baca/tulis populasi, sampel RDS, dan laporan alter dalam CSV serta hasil JSON."""

import csv
import json
import logging
import os
from typing import Any, Optional

import numpy as np

from rds_core.errors import DataError
from rds_core.population import Population
from rds_core.sampler import EgoReport, RDSSample, SampleMode

logger = logging.getLogger(__name__)

SAMPLE_FIXED_COLUMNS = ["id", "recruiter_id", "wave", "degree", "z"]


def _format(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def _is_int(text: str) -> bool:
    try:
        int(text)
        return True
    except ValueError:
        return False


def _parse_column(values: list[str], name: str) -> np.ndarray:
    if all(_is_int(v) for v in values):
        return np.array([int(v) for v in values], dtype=np.int64)
    try:
        return np.array([float(v) for v in values], dtype=float)
    except ValueError:
        raise DataError(f"Kolom '{name}' berisi nilai non-numerik", {"column": name})


def _read_rows(path: str, required: list[str]) -> tuple[list[str], list[dict]]:
    if not os.path.exists(path):
        raise DataError(f"Berkas tidak ditemukan: {path}", {"path": path})
    with open(path, "r", newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise DataError(f"Kolom wajib hilang di {path}: {', '.join(missing)}", {"missing": missing})
        return header, list(reader)


def _ensure_dir(path: str):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)


def write_population(pop: Population, nodes_path: str, edges_path: str):
    """Node: ``id,age,z[,atribut...]``; edge: ``src,dst`` dengan src < dst."""
    _ensure_dir(nodes_path)
    extras = sorted(pop.extra_node_attrs)
    with open(nodes_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["id", "age", "z"] + extras)
        for i in range(pop.n):
            writer.writerow([i, _format(pop.ages[i]), int(pop.infection[i])]
                            + [_format(pop.extra_node_attrs[name][i]) for name in extras])
    _ensure_dir(edges_path)
    with open(edges_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["src", "dst"])
        writer.writerows(pop.edge_list().tolist())
    logger.info(f"Populasi disimpan: {nodes_path}, {edges_path}")


def read_population(nodes_path: str, edges_path: str) -> Population:
    header, rows = _read_rows(nodes_path, ["id", "age", "z"])
    ids = [int(r["id"]) for r in rows]
    if ids != list(range(len(ids))):
        raise DataError("Kolom id node harus berurutan 0..n-1", {"path": nodes_path})
    extras = {name: _parse_column([r[name] for r in rows], name) for name in header if name not in ("id", "age", "z")}
    ages = [float(r["age"]) for r in rows]
    infection = [int(r["z"]) for r in rows]
    _, edge_rows = _read_rows(edges_path, ["src", "dst"])
    edges = [(int(r["src"]), int(r["dst"])) for r in edge_rows]
    return Population.from_edges(len(ids), edges, ages, infection, extras)


def write_sample(sample: RDSSample, sample_path: str, alters_path: Optional[str] = None):
    """Sampel: ``id,recruiter_id,wave,degree,z[,kovariat...][,node]``; alter: ``ego_id,alter_index[,kovariat...]``."""
    _ensure_dir(sample_path)
    covariates = sorted(name for name in sample.attributes if name != "z")
    recruiter_ids = sample.recruiter_ids()
    with open(sample_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(SAMPLE_FIXED_COLUMNS + covariates + (["node"] if sample.nodes is not None else []))
        for p in range(sample.n):
            row = [
                int(sample.ids[p]),
                "" if recruiter_ids[p] < 0 else int(recruiter_ids[p]),
                int(sample.wave[p]),
                _format(sample.degree[p]),
                _format(sample.attributes["z"][p]) if "z" in sample.attributes else "",
            ]
            row += [_format(sample.attributes[name][p]) for name in covariates]
            if sample.nodes is not None:
                row.append(int(sample.nodes[p]))
            writer.writerow(row)
    if alters_path is not None:
        _write_alters(sample, alters_path)
    logger.info(f"Sampel disimpan: {sample_path} (n={sample.n})")


def _write_alters(sample: RDSSample, path: str):
    reports = [r for r in sample.ego_reports if r is not None]
    names = sorted({name for r in reports for name in r.attrs})
    with_nodes = any(r.nodes is not None for r in reports)
    _ensure_dir(path)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["ego_id", "alter_index"] + names + (["alter_node"] if with_nodes else []))
        for p, report in enumerate(sample.ego_reports):
            if report is None:
                writer.writerow([int(sample.ids[p]), ""] + [""] * (len(names) + int(with_nodes)))
                continue
            for k in range(report.size):
                row = [int(sample.ids[p]), k] + [_format(report.attrs[name][k]) for name in names]
                if with_nodes:
                    row.append(int(report.nodes[k]) if report.nodes is not None else -1)
                writer.writerow(row)


def read_sample(sample_path: str, alters_path: Optional[str] = None, coupons: Optional[int] = None) -> RDSSample:
    header, rows = _read_rows(sample_path, SAMPLE_FIXED_COLUMNS)
    ids = np.array([int(r["id"]) for r in rows], dtype=np.int64)
    position = {int(i): p for p, i in enumerate(ids)}
    recruiter = []
    for r in rows:
        if r["recruiter_id"] == "":
            recruiter.append(-1)
        elif int(r["recruiter_id"]) not in position:
            raise DataError(f"Perekrut {r['recruiter_id']} dari anggota {r['id']} tidak ada di sampel",
                            {"member": int(r["id"])})
        else:
            recruiter.append(position[int(r["recruiter_id"])])
    covariates = [name for name in header if name not in SAMPLE_FIXED_COLUMNS and name != "node"]
    attributes = {"z": _parse_column([r["z"] for r in rows], "z")}
    attributes.update({name: _parse_column([r[name] for r in rows], name) for name in covariates})
    nodes = np.array([int(r["node"]) for r in rows], dtype=np.int64) if "node" in header else None
    reports = _read_alters(alters_path, position) if alters_path else None
    return RDSSample(
        ids=ids,
        recruiter=recruiter,
        wave=[int(r["wave"]) for r in rows],
        degree=[float(r["degree"]) for r in rows],
        attributes=attributes,
        ego_reports=reports,
        nodes=nodes,
        mode=SampleMode.SIMULATION if nodes is not None else SampleMode.INGESTION,
        coupons=coupons,
    )


def _read_alters(path: str, position: dict) -> list[Optional[EgoReport]]:
    """Baris dengan ``alter_index`` kosong menandai ego tanpa laporan (None)."""
    header, all_rows = _read_rows(path, ["ego_id", "alter_index"])
    unreported = set()
    for r in all_rows:
        ego = int(r["ego_id"])
        if r["alter_index"] != "":
            continue
        if ego not in position:
            raise DataError(f"Alter merujuk ego {ego} yang tidak ada di sampel", {"ego": ego})
        unreported.add(position[ego])
    rows = [r for r in all_rows if r["alter_index"] != ""]
    names = [c for c in header if c not in ("ego_id", "alter_index", "alter_node")]
    columns = {name: _parse_column([r[name] for r in rows], name) for name in names} if rows else {}
    offsets, reports = {}, []
    for index, r in enumerate(rows):
        ego = int(r["ego_id"])
        if ego not in position:
            raise DataError(f"Alter merujuk ego {ego} yang tidak ada di sampel", {"ego": ego})
        offsets.setdefault(position[ego], []).append(index)
    for p in range(len(position)):
        if p in unreported:
            if p in offsets:
                raise DataError(f"Ego pada posisi {p} ditandai tanpa laporan tetapi memiliki alter", {"position": p})
            reports.append(None)
            continue
        picks = sorted(offsets.get(p, []), key=lambda k: int(rows[k]["alter_index"]))
        attrs = {name: columns[name][picks] if rows else np.empty(0) for name in names}
        nodes = None
        if "alter_node" in header:
            nodes = np.array([int(rows[k]["alter_node"]) for k in picks], dtype=np.int64)
        reports.append(EgoReport(attrs=attrs, nodes=nodes))
    return reports


def write_json(data: Any, path: str):
    _ensure_dir(path)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")


def read_json(path: str) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        raise DataError(f"Berkas tidak ditemukan: {path}", {"path": path})
    except json.JSONDecodeError as e:
        raise DataError(f"JSON tidak valid di {path}: {e}", {"path": path})

"""Recruitment - Model transisi rekrutmen (acak, DR, MDR), distribusi stasioner, dan metrik phi MDR."""

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from rds_core.errors import AttributeMissingError, ConfigError, DataError, NumericOverflowError
from rds_core.population import Population

logger = logging.getLogger(__name__)


class CovariateKind(Enum):
    NODE = "node-attribute"
    TIE = "symmetric-tie-function"


NODE_FUNCTIONS = ("attribute", "product")
TIE_FUNCTIONS = ("abs-difference", "same-attribute", "custom-table")


def load_custom_table(path: str) -> dict[tuple[int, int], float]:
    """Baca CSV ``src,dst,value`` dan simetrikan; duplikat dengan nilai berbeda ditolak."""
    table: dict[tuple[int, int], float] = {}
    with open(path, "r", newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or not {"src", "dst", "value"} <= set(reader.fieldnames):
            raise DataError(f"Header tabel kovariat harus 'src,dst,value': {path}")
        for row in reader:
            table = _table_insert(table, int(row["src"]), int(row["dst"]), float(row["value"]))
    return table


def _table_insert(table: dict, src: int, dst: int, value: float) -> dict:
    key = (min(src, dst), max(src, dst))
    if key in table and table[key] != value:
        raise DataError(f"Nilai asimetris untuk pasangan {key}: {table[key]} vs {value}", {"pair": list(key)})
    table[key] = value
    return table


@dataclass
class CovariateSpec:
    """Satu komponen x_ij: atribut calon rekrut (r_jk) atau fungsi simetris dyad (w_ijk)."""

    name: str
    kind: CovariateKind = CovariateKind.NODE
    function: str = "attribute"
    attrs: tuple = ()
    table: Optional[dict] = None
    default: float = 0.0

    def __post_init__(self):
        if isinstance(self.kind, str):
            self.kind = CovariateKind(self.kind)
        self.attrs = tuple(self.attrs) or (self.name,)
        allowed = NODE_FUNCTIONS if self.kind == CovariateKind.NODE else TIE_FUNCTIONS
        if self.function not in allowed:
            raise ConfigError(
                f"Fungsi '{self.function}' tidak valid untuk kovariat {self.kind.value}",
                {"covariate": self.name, "allowed": list(allowed)},
            )
        if self.function == "custom-table":
            if self.table is None:
                raise ConfigError(f"Kovariat '{self.name}' membutuhkan tabel nilai")
            self.attrs = ()
        if self.function in ("attribute", "abs-difference", "same-attribute") and len(self.attrs) != 1:
            raise ConfigError(f"Kovariat '{self.name}' membutuhkan tepat satu atribut")

    @classmethod
    def node(cls, name: str, attr: Optional[str] = None) -> "CovariateSpec":
        return cls(name, CovariateKind.NODE, "attribute", (attr or name,))

    @classmethod
    def product(cls, name: str, *attrs: str) -> "CovariateSpec":
        return cls(name, CovariateKind.NODE, "product", attrs)

    @classmethod
    def abs_difference(cls, name: str, attr: str = "age") -> "CovariateSpec":
        return cls(name, CovariateKind.TIE, "abs-difference", (attr,))

    @classmethod
    def same_attribute(cls, name: str, attr: str) -> "CovariateSpec":
        return cls(name, CovariateKind.TIE, "same-attribute", (attr,))

    @classmethod
    def custom_table(cls, name: str, entries: Union[Mapping, Iterable], default: float = 0.0) -> "CovariateSpec":
        table: dict = {}
        items = entries.items() if isinstance(entries, Mapping) else ((tuple(e[:2]), e[2]) for e in entries)
        for (src, dst), value in items:
            table = _table_insert(table, int(src), int(dst), float(value))
        return cls(name, CovariateKind.TIE, "custom-table", (), table=table, default=default)

    @property
    def is_node(self) -> bool:
        return self.kind == CovariateKind.NODE

    def evaluate(self, ego: Mapping, alter: Mapping, ego_nodes=None, alter_nodes=None) -> np.ndarray:
        """Nilai kovariat untuk pasangan (ego=perekrut, alter=calon rekrut), dengan broadcasting."""
        if self.function == "custom-table":
            if ego_nodes is None or alter_nodes is None:
                raise DataError(f"Kovariat '{self.name}' membutuhkan identitas node alter")
            src, dst = np.broadcast_arrays(np.asarray(ego_nodes), np.asarray(alter_nodes))
            values = [self.table.get((min(a, b), max(a, b)), self.default) for a, b in zip(src.ravel(), dst.ravel())]
            return np.asarray(values, dtype=float).reshape(src.shape)
        alter_values = [_lookup(alter, attr, self.name) for attr in self.attrs]
        if self.function == "attribute":
            return alter_values[0].astype(float)
        if self.function == "product":
            return np.prod(np.broadcast_arrays(*[v.astype(float) for v in alter_values]), axis=0)
        ego_value = _lookup(ego, self.attrs[0], self.name)
        if self.function == "abs-difference":
            return np.abs(ego_value.astype(float) - alter_values[0].astype(float))
        return (ego_value == alter_values[0]).astype(float)

    def to_dict(self) -> dict:
        data = {"name": self.name, "kind": self.kind.value, "function": self.function, "attrs": list(self.attrs)}
        if self.table is not None:
            data["table"] = [[a, b, v] for (a, b), v in sorted(self.table.items())]
            data["default"] = self.default
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "CovariateSpec":
        kind = CovariateKind(data.get("kind", CovariateKind.NODE.value))
        function = data.get("function", "attribute")
        if function == "custom-table":
            entries = data.get("table")
            table = load_custom_table(data["table_path"]) if entries is None else None
            spec = cls.custom_table(data["name"], entries if entries is not None else table,
                                    float(data.get("default", 0.0)))
            return spec
        return cls(data["name"], kind, function, tuple(data.get("attrs", ())))


def _lookup(values: Mapping, attr: str, covariate: str) -> np.ndarray:
    if attr not in values or values[attr] is None:
        raise AttributeMissingError(
            f"Atribut '{attr}' tidak tersedia untuk kovariat '{covariate}'", {"attr": attr, "covariate": covariate}
        )
    return np.asarray(values[attr])


def covariate_matrix(covariates: Sequence[CovariateSpec], ego: Mapping, alter: Mapping,
                     ego_nodes=None, alter_nodes=None, size: Optional[int] = None) -> np.ndarray:
    """Matriks (m, K) baris x_il untuk m alter."""
    columns = [np.atleast_1d(spec.evaluate(ego, alter, ego_nodes, alter_nodes)) for spec in covariates]
    if not columns:
        if size is None:
            lengths = [np.size(v) for v in alter.values() if v is not None]
            size = max(lengths) if lengths else 0
        return np.zeros((size, 0))
    columns = np.broadcast_arrays(*columns)
    return np.column_stack(columns).astype(float)


def required_attributes(covariates: Sequence[CovariateSpec]) -> set[str]:
    return {attr for spec in covariates for attr in spec.attrs}


def log_sum_exp(values: np.ndarray) -> float:
    if values.size == 0:
        return -math.inf
    peak = float(np.max(values))
    return peak + math.log(float(np.sum(np.exp(values - peak))))


def softmax(values: np.ndarray) -> np.ndarray:
    shifted = np.exp(values - np.max(values))
    return shifted / shifted.sum()


class RecruitmentModel:
    """Antarmuka bersama: setiap model direduksi menjadi MDRModel."""

    kind = "base"

    def as_mdr(self) -> "MDRModel":
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


class RandomModel(RecruitmentModel):
    kind = "random"

    def as_mdr(self) -> "MDRModel":
        return MDRModel([], [])

    def to_dict(self) -> dict:
        return {"kind": self.kind}


@dataclass
class DRModel(RecruitmentModel):
    attr: str
    phi: float = 1.0

    kind = "dr"

    def __post_init__(self):
        if not self.phi > 0:
            raise ConfigError(f"phi harus positif, diberikan {self.phi}")

    def as_mdr(self) -> "MDRModel":
        return MDRModel([CovariateSpec.node(self.attr)], [math.log(self.phi)])

    def to_dict(self) -> dict:
        return {"kind": self.kind, "attr": self.attr, "phi": self.phi}


class MDRModel(RecruitmentModel):
    kind = "mdr"

    def __init__(self, covariates: Sequence[CovariateSpec], beta: Sequence[float]):
        self.covariates = list(covariates)
        self.beta = np.array(beta, dtype=float).reshape(-1)
        if len(self.beta) != len(self.covariates):
            raise ConfigError(
                f"Panjang beta ({len(self.beta)}) tidak sama dengan jumlah kovariat ({len(self.covariates)})"
            )
        kinds = [spec.is_node for spec in self.covariates]
        if kinds != sorted(kinds, reverse=True):
            raise ConfigError("Kovariat node harus mendahului kovariat tie")
        if not np.all(np.isfinite(self.beta)):
            raise ConfigError("Koefisien beta harus berhingga")
        self.k1 = int(sum(kinds))

    @property
    def alpha(self) -> np.ndarray:
        return self.beta[:self.k1]

    @property
    def gamma(self) -> np.ndarray:
        return self.beta[self.k1:]

    @property
    def node_covariates(self) -> list[CovariateSpec]:
        return self.covariates[:self.k1]

    @property
    def names(self) -> list[str]:
        return [spec.name for spec in self.covariates]

    def as_mdr(self) -> "MDRModel":
        return self

    def with_beta(self, beta: Sequence[float]) -> "MDRModel":
        return MDRModel(self.covariates, beta)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "covariates": [spec.to_dict() for spec in self.covariates],
            "beta": [float(b) for b in self.beta],
        }

    def save(self, path: str):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)


def model_from_dict(data: dict) -> RecruitmentModel:
    kind = data.get("kind", "mdr")
    if kind == "random":
        return RandomModel()
    if kind == "dr":
        return DRModel(attr=data["attr"], phi=float(data["phi"]))
    if kind == "mdr":
        covariates = [CovariateSpec.from_dict(c) for c in data.get("covariates", [])]
        beta = data.get("beta", [0.0] * len(covariates))
        return MDRModel(covariates, beta)
    raise ConfigError(f"Jenis model rekrutmen tidak dikenal: {kind}")


def load_model(path: str) -> RecruitmentModel:
    try:
        with open(path, "r") as f:
            return model_from_dict(json.load(f))
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"Model rekrutmen tidak valid: {e}", {"path": path})


SCENARIO_COVARIATES = [
    CovariateSpec.node("age"),
    CovariateSpec.node("z"),
    CovariateSpec.product("age_z", "age", "z"),
    CovariateSpec.abs_difference("age_diff", "age"),
]

MDR_LEVELS = {
    "none": (0.0, 0.0, 0.0, 0.0),
    "moderate": (0.126, 0.064, 0.010, -0.017),
    "high": (0.230, 0.031, 0.018, -0.003),
}

PHI_MDR_TARGETS = {"none": 1.0, "moderate": 2.0, "high": 4.0}


def scenario_model(level: str) -> MDRModel:
    if level not in MDR_LEVELS:
        raise ConfigError(f"Level MDR tidak dikenal: {level}", {"levels": list(MDR_LEVELS)})
    return MDRModel(SCENARIO_COVARIATES, MDR_LEVELS[level])


def _population_attrs(pop: Population, covariates: Sequence[CovariateSpec], index) -> dict:
    return {attr: pop.attribute(attr)[index] for attr in required_attributes(covariates)}


def covariate_vector(pop: Population, model: RecruitmentModel, i: int, j: int) -> np.ndarray:
    """x_ij untuk perekrut i dan calon rekrut j."""
    if i == j:
        raise DataError("covariate_vector membutuhkan i != j", {"node": int(i)})
    pop._check_node(i)
    pop._check_node(j)
    mdr = model.as_mdr()
    ego = _population_attrs(pop, mdr.covariates, [i])
    alter = _population_attrs(pop, mdr.covariates, [j])
    return covariate_matrix(mdr.covariates, ego, alter, np.array([i]), np.array([j]), size=1)[0]


class TransitionKernel:
    """Bobot log x_ij'beta per edge berarah dan r_i'alpha per node untuk satu (populasi, model)."""

    def __init__(self, pop: Population, model: RecruitmentModel):
        self.pop = pop
        self.model = model.as_mdr()
        covariates = self.model.covariates
        src, dst = pop.edge_sources, pop.edge_targets
        if covariates:
            design = covariate_matrix(
                covariates,
                _population_attrs(pop, covariates, src),
                _population_attrs(pop, covariates, dst),
                src, dst, size=len(dst),
            )
            self.edge_log_weights = design @ self.model.beta
        else:
            self.edge_log_weights = np.zeros(len(dst))
        if self.model.k1:
            node_design = covariate_matrix(
                self.model.node_covariates, {}, _population_attrs(pop, self.model.node_covariates, slice(None)),
                size=pop.n,
            )
            self.node_log_weights = node_design @ self.model.alpha
        else:
            self.node_log_weights = np.zeros(pop.n)

    def row_log_weights(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        start, stop = self.pop.indptr[i], self.pop.indptr[i + 1]
        return self.pop.indices[start:stop], self.edge_log_weights[start:stop]

    def row_arrays(self, i: int, excluded: Optional[np.ndarray] = None) -> tuple[np.ndarray, np.ndarray]:
        """(tetangga yang memenuhi syarat, probabilitas) setelah mengecualikan node bertanda."""
        neighbors, log_weights = self.row_log_weights(i)
        if excluded is not None:
            keep = ~excluded[neighbors]
            neighbors, log_weights = neighbors[keep], log_weights[keep]
        if neighbors.size == 0:
            return neighbors, np.empty(0)
        return neighbors, softmax(log_weights)

    def row(self, i: int, exclude: Iterable[int] = ()) -> dict[int, float]:
        excluded = np.zeros(self.pop.n, dtype=bool)
        excluded[list(exclude)] = True
        neighbors, probs = self.row_arrays(i, excluded)
        return {int(j): float(p) for j, p in zip(neighbors, probs)}

    def stationary_log_weights(self) -> np.ndarray:
        """log(sum_j y_ij exp(x_ij'beta + r_i'alpha)) per node."""
        pop = self.pop
        if pop.isolated_nodes().size:
            raise DataError(
                f"Distribusi stasioner membutuhkan jaringan tanpa node terisolasi "
                f"({pop.isolated_nodes().size} node terisolasi)"
            )
        starts = pop.indptr[:-1]
        row_max = np.maximum.reduceat(self.edge_log_weights, starts)
        sums = np.add.reduceat(np.exp(self.edge_log_weights - row_max[pop.edge_sources]), starts)
        return row_max + np.log(sums) + self.node_log_weights


def transition_row(pop: Population, model: RecruitmentModel, i: int,
                   exclude: Iterable[int] = ()) -> dict[int, float]:
    """Probabilitas transisi dari i ke tetangga yang tidak dikecualikan; dict kosong berarti macet."""
    pop._check_node(i)
    mdr = model.as_mdr()
    excluded = set(int(e) for e in exclude)
    neighbors = np.array([j for j in pop.neighbors(i) if int(j) not in excluded], dtype=np.int64)
    if neighbors.size == 0:
        logger.debug(f"Node {i} tidak memiliki tetangga yang memenuhi syarat (rantai macet)")
        return {}
    design = covariate_matrix(
        mdr.covariates,
        _population_attrs(pop, mdr.covariates, np.full(neighbors.size, i)),
        _population_attrs(pop, mdr.covariates, neighbors),
        np.full(neighbors.size, i), neighbors, size=neighbors.size,
    )
    probs = softmax(design @ mdr.beta)
    return {int(j): float(p) for j, p in zip(neighbors, probs)}


def transition_matrix(pop: Population, model: RecruitmentModel) -> np.ndarray:
    kernel = TransitionKernel(pop, model)
    matrix = np.zeros((pop.n, pop.n))
    for i in range(pop.n):
        neighbors, probs = kernel.row_arrays(i)
        matrix[i, neighbors] = probs
    if pop.n > 200:
        logger.warning(f"Matriks transisi padat dibangun untuk n={pop.n}")
    return matrix


@dataclass
class StationaryDistribution:
    weights: np.ndarray
    log_scale: float
    kappa: float
    log_weights: np.ndarray = field(repr=False, default=None)

    @property
    def probabilities(self) -> np.ndarray:
        return self.weights / self.kappa

    def to_dict(self) -> dict:
        return {
            "weights": [float(w) for w in self.weights],
            "log_scale": self.log_scale,
            "kappa": self.kappa,
        }


def stationary(pop: Population, model: RecruitmentModel, kernel: Optional[TransitionKernel] = None) -> StationaryDistribution:
    """Bobot tak ternormalisasi pi_i dan konstanta kappa; bobot asli = weights * exp(log_scale)."""
    kernel = kernel or TransitionKernel(pop, model)
    log_weights = kernel.stationary_log_weights()
    if not np.all(np.isfinite(log_weights)):
        raise NumericOverflowError("Bobot stasioner tidak berhingga setelah normalisasi log")
    log_scale = float(np.max(log_weights))
    weights = np.exp(log_weights - log_scale)
    kappa = float(math.fsum(weights))
    components = pop.n_components()
    if components > 1:
        logger.warning(f"Jaringan tidak terhubung ({components} komponen); distribusi stasioner unik per komponen")
    return StationaryDistribution(weights=weights, log_scale=log_scale, kappa=kappa, log_weights=log_weights)


def phi_i(probabilities: Sequence[float]) -> float:
    """Rata-rata rasio P_ik/P_ij >= 1 atas pasangan terurut k != j; 1 bila hanya satu alter."""
    probs = np.asarray(probabilities, dtype=float)
    if probs.size <= 1:
        return 1.0
    ratios = probs[:, None] / probs[None, :]
    mask = ~np.eye(probs.size, dtype=bool) & (ratios >= 1.0)
    return float(ratios[mask].mean())


def _phi_from_logs(log_weights: np.ndarray) -> float:
    if log_weights.size <= 1:
        return 1.0
    diffs = log_weights[:, None] - log_weights[None, :]
    mask = ~np.eye(log_weights.size, dtype=bool) & (diffs >= 0.0)
    return float(np.exp(diffs[mask]).mean())


def phi_mdr(pop: Population, model: RecruitmentModel, kernel: Optional[TransitionKernel] = None) -> float:
    """Kekuatan MDR keseluruhan: rata-rata phi_i atas semua node."""
    kernel = kernel or TransitionKernel(pop, model)
    values = [_phi_from_logs(kernel.row_log_weights(i)[1]) for i in range(pop.n)]
    return float(np.mean(values)) if values else 1.0


def pair_ratio(pop: Population, model: RecruitmentModel, i: int, j: int, k: int) -> float:
    """P_ij / P_ik untuk perekrut i (penyebut softmax saling menghapus)."""
    mdr = model.as_mdr()
    return math.exp(float((covariate_vector(pop, mdr, i, j) - covariate_vector(pop, mdr, i, k)) @ mdr.beta))

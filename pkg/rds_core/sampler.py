"""Sampler - Simulasi rekrutmen RDS: seed dari distribusi stasioner, kupon terbatas, tanpa pengembalian."""

import json
import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Sequence

import numpy as np

from rds_core.errors import AttributeMissingError, DataError, DesignError, StallError
from rds_core.population import Population
from rds_core.recruitment import RecruitmentModel, TransitionKernel, stationary
from rds_core.rng import SeedLike, make_rng

logger = logging.getLogger(__name__)


class SeedRule(Enum):
    STATIONARY = "stationary"
    UNIFORM = "uniform"
    FIXED_LIST = "fixed-list"


class StallRule(Enum):
    REPLACE_SEED = "replace-seed"
    ABORT = "abort"


class SampleMode(Enum):
    SIMULATION = "simulation"
    INGESTION = "ingestion"


@dataclass
class SamplingDesign:
    n_target: int = 200
    n_seeds: int = 7
    coupons: int = 2
    seed_rule: SeedRule = SeedRule.STATIONARY
    stall_rule: StallRule = StallRule.REPLACE_SEED
    fixed_seeds: tuple = ()

    def __post_init__(self):
        self.seed_rule = SeedRule(self.seed_rule)
        self.stall_rule = StallRule(self.stall_rule)
        self.fixed_seeds = tuple(int(s) for s in self.fixed_seeds)
        if self.n_seeds < 1:
            raise DesignError(f"n_seeds minimal 1, diberikan {self.n_seeds}")
        if self.coupons < 1:
            raise DesignError(f"coupons minimal 1, diberikan {self.coupons}")
        if self.n_target < self.n_seeds:
            raise DesignError(
                f"n_target ({self.n_target}) harus >= n_seeds ({self.n_seeds})",
                {"n_target": self.n_target, "n_seeds": self.n_seeds},
            )
        if self.seed_rule == SeedRule.FIXED_LIST and len(set(self.fixed_seeds)) != self.n_seeds:
            raise DesignError("Aturan fixed-list membutuhkan tepat n_seeds seed yang berbeda")

    def to_dict(self) -> dict:
        return {
            "n_target": self.n_target,
            "n_seeds": self.n_seeds,
            "coupons": self.coupons,
            "seed_rule": self.seed_rule.value,
            "stall_rule": self.stall_rule.value,
            "fixed_seeds": list(self.fixed_seeds),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SamplingDesign":
        known = {"n_target", "n_seeds", "coupons", "seed_rule", "stall_rule", "fixed_seeds"}
        return cls(**{k: v for k, v in data.items() if k in known})


@dataclass
class EgoReport:
    """Daftar alter yang dilaporkan satu responden: kovariat per alter dan identitas bila diketahui."""

    attrs: dict = field(default_factory=dict)
    nodes: Optional[np.ndarray] = None

    def __post_init__(self):
        self.attrs = {name: np.asarray(values) for name, values in self.attrs.items()}
        sizes = {len(values) for values in self.attrs.values()}
        if self.nodes is not None:
            self.nodes = np.asarray(self.nodes, dtype=np.int64)
            sizes.add(len(self.nodes))
        if len(sizes) > 1:
            raise DataError("Panjang kolom alter tidak seragam", {"sizes": sorted(sizes)})

    @property
    def size(self) -> int:
        if self.attrs:
            return len(next(iter(self.attrs.values())))
        return 0 if self.nodes is None else len(self.nodes)

    def values(self, attr: str) -> np.ndarray:
        if attr not in self.attrs:
            raise AttributeMissingError(f"Atribut alter '{attr}' tidak dilaporkan", {"attr": attr})
        return self.attrs[attr]

    def count(self, attr: str, level) -> int:
        return int(np.count_nonzero(self.values(attr) == level))

    def to_dict(self) -> dict:
        data = {name: values.tolist() for name, values in self.attrs.items()}
        if self.nodes is not None:
            data["alter_node"] = self.nodes.tolist()
        return data


class RDSSample:
    """Sampel RDS dalam urutan rekrutmen.

    ``recruiter[p]`` adalah posisi perekrut anggota ke-p (-1 untuk seed), sehingga
    perekrut selalu mendahului rekrutnya. ``nodes`` berisi indeks node populasi
    pada mode simulasi.
    """

    def __init__(self, ids: Sequence[int], recruiter: Sequence[int], wave: Sequence[int],
                 degree: Sequence[float], attributes: Mapping[str, Sequence],
                 ego_reports: Optional[Sequence[Optional[EgoReport]]] = None,
                 nodes: Optional[Sequence[int]] = None, mode: SampleMode = SampleMode.SIMULATION,
                 coupons: Optional[int] = None, validate: bool = True):
        self.ids = np.asarray(ids, dtype=np.int64)
        self.recruiter = np.asarray(recruiter, dtype=np.int64)
        self.wave = np.asarray(wave, dtype=np.int64)
        self.degree = np.asarray(degree, dtype=float)
        self.attributes = {name: np.asarray(values) for name, values in attributes.items()}
        self.ego_reports = list(ego_reports) if ego_reports is not None else [None] * len(self.ids)
        self.nodes = None if nodes is None else np.asarray(nodes, dtype=np.int64)
        self.mode = SampleMode(mode)
        self.coupons = coupons
        if validate:
            self.validate()

    def validate(self):
        n = self.n
        for name, values in [("recruiter", self.recruiter), ("wave", self.wave), ("degree", self.degree)]:
            if len(values) != n:
                raise DataError(f"Panjang kolom '{name}' tidak sama dengan jumlah anggota")
        for name, values in self.attributes.items():
            if len(values) != n:
                raise DataError(f"Panjang atribut '{name}' tidak sama dengan jumlah anggota")
        if len(self.ego_reports) != n:
            raise DataError("Jumlah laporan ego tidak sama dengan jumlah anggota")
        if len(np.unique(self.ids)) != n:
            raise DataError("Anggota sampel harus unik (tanpa pengembalian)")
        positions = np.arange(n)
        recruits = self.recruiter >= 0
        if np.any(self.recruiter[recruits] >= positions[recruits]):
            bad = int(self.ids[np.argmax(recruits & (self.recruiter >= positions))])
            raise DataError(f"Perekrut anggota {bad} tidak mendahuluinya", {"member": bad})
        if np.any(self.wave[~recruits] != 0):
            raise DataError("Seed harus berada pada gelombang 0")
        if np.any(self.wave[recruits] != self.wave[self.recruiter[recruits]] + 1):
            raise DataError("Gelombang rekrut harus gelombang perekrut + 1")
        if self.coupons is not None and n and self.recruit_counts().max() > self.coupons:
            raise DataError(f"Ada perekrut dengan lebih dari {self.coupons} rekrut")
        if np.any(self.degree < 0):
            raise DataError("Derajat yang dilaporkan tidak boleh negatif")

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def outcome(self) -> np.ndarray:
        return self.attribute("z")

    @property
    def is_seed(self) -> np.ndarray:
        return self.recruiter < 0

    @property
    def seeds(self) -> np.ndarray:
        return np.flatnonzero(self.is_seed)

    @property
    def n_recruits(self) -> int:
        return int(np.count_nonzero(~self.is_seed))

    def attribute(self, name: str) -> np.ndarray:
        if name not in self.attributes:
            raise AttributeMissingError(f"Atribut sampel tidak dikenal: '{name}'", {"attr": name})
        return self.attributes[name]

    def recruiter_ids(self) -> np.ndarray:
        ids = np.full(self.n, -1, dtype=np.int64)
        recruits = ~self.is_seed
        ids[recruits] = self.ids[self.recruiter[recruits]]
        return ids

    def recruitment_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """(posisi perekrut, posisi rekrut) untuk semua non-seed."""
        recruits = np.flatnonzero(~self.is_seed)
        return self.recruiter[recruits], recruits

    def recruit_counts(self) -> np.ndarray:
        recruiters, _ = self.recruitment_pairs()
        return np.bincount(recruiters, minlength=self.n)

    def children(self, position: int) -> np.ndarray:
        return np.flatnonzero(self.recruiter == position)

    def report(self, position: int) -> EgoReport:
        report = self.ego_reports[position]
        if report is None:
            raise DataError(
                f"Laporan ego untuk anggota {int(self.ids[position])} tidak tersedia",
                {"member": int(self.ids[position])},
            )
        return report

    def alter_counts(self, attr: str, level) -> np.ndarray:
        """d_ik per anggota dari laporan ego."""
        return np.array([self.report(p).count(attr, level) for p in range(self.n)], dtype=float)

    def take(self, k: int) -> "RDSSample":
        """k anggota pertama menurut urutan rekrutmen."""
        if not 0 < k <= self.n:
            raise DesignError(f"Ukuran prefiks {k} di luar rentang [1, {self.n}]")
        return self.select(np.arange(k), self.recruiter[:k], validate=True)

    def select(self, positions: Sequence[int], recruiter: Sequence[int], validate: bool = False) -> "RDSSample":
        """Sampel turunan dari posisi terpilih dengan struktur perekrut baru (posisi dalam turunan)."""
        positions = np.asarray(positions, dtype=np.int64)
        recruiter = np.asarray(recruiter, dtype=np.int64)
        wave = np.zeros(len(positions), dtype=np.int64)
        for p, r in enumerate(recruiter):
            if r >= 0:
                wave[p] = wave[r] + 1 if r < p else self.wave[positions[p]]
        return RDSSample(
            ids=self.ids[positions],
            recruiter=recruiter,
            wave=wave,
            degree=self.degree[positions],
            attributes={name: values[positions] for name, values in self.attributes.items()},
            ego_reports=[self.ego_reports[p] for p in positions],
            nodes=None if self.nodes is None else self.nodes[positions],
            mode=self.mode,
            coupons=self.coupons if validate else None,
            validate=validate,
        )

    def summary(self) -> dict:
        return {
            "n": self.n,
            "seeds": int(self.seeds.size),
            "recruits": self.n_recruits,
            "max_wave": int(self.wave.max()) if self.n else 0,
            "mode": self.mode.value,
            "prevalence": round(float(self.outcome.mean()), 4) if "z" in self.attributes and self.n else None,
        }

    def to_dict(self) -> dict:
        return {
            "ids": self.ids.tolist(),
            "recruiter_ids": self.recruiter_ids().tolist(),
            "wave": self.wave.tolist(),
            "degree": self.degree.tolist(),
            "attributes": {name: values.tolist() for name, values in self.attributes.items()},
            "mode": self.mode.value,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _stationary_probabilities(pop: Population, model: RecruitmentModel,
                              kernel: Optional[TransitionKernel] = None) -> np.ndarray:
    return stationary(pop, model, kernel).probabilities


def draw_seeds(pop: Population, model: RecruitmentModel, k: int, rng: SeedLike = None,
               kernel: Optional[TransitionKernel] = None) -> np.ndarray:
    """k node berbeda tanpa pengembalian, berpeluang sebanding bobot stasioner."""
    if k > pop.n:
        raise DesignError(f"Jumlah seed {k} melebihi ukuran populasi {pop.n}", {"k": k, "n": pop.n})
    if k < 1:
        raise DesignError(f"Jumlah seed minimal 1, diberikan {k}")
    rng = make_rng(rng)
    probs = _stationary_probabilities(pop, model, kernel)
    return rng.choice(pop.n, size=k, replace=False, p=probs)


def _draw_uniform(pop: Population, k: int, rng: np.random.Generator) -> np.ndarray:
    return rng.choice(pop.n, size=k, replace=False)


def _ego_report(pop: Population, node: int) -> EgoReport:
    neighbors = pop.neighbors(node)
    return EgoReport(attrs={name: values[neighbors] for name, values in pop.attributes().items()}, nodes=neighbors)


def run_rds(pop: Population, model: RecruitmentModel, design: SamplingDesign, rng: SeedLike = None,
            kernel: Optional[TransitionKernel] = None) -> RDSSample:
    """Tumbuhkan sampel gelombang demi gelombang dengan antrean breadth-first.

    Setiap anggota yang dikeluarkan dari antrean mencoba tepat ``coupons``
    rekrutmen; probabilitas transisi dinormalisasi ulang atas tetangga yang
    belum tersampel.
    """
    if design.n_target > pop.n:
        raise DesignError(f"n_target {design.n_target} melebihi ukuran populasi {pop.n}")
    rng = make_rng(rng)
    kernel = kernel or TransitionKernel(pop, model)
    probs = _stationary_probabilities(pop, model, kernel)

    if design.seed_rule == SeedRule.STATIONARY:
        seeds = rng.choice(pop.n, size=design.n_seeds, replace=False, p=probs)
    elif design.seed_rule == SeedRule.UNIFORM:
        seeds = _draw_uniform(pop, design.n_seeds, rng)
    else:
        seeds = np.array(design.fixed_seeds, dtype=np.int64)
        for s in seeds:
            pop._check_node(s)

    sampled = np.zeros(pop.n, dtype=bool)
    members: list[int] = []
    recruiter: list[int] = []
    wave: list[int] = []
    queue: deque = deque()

    def enroll(node: int, parent: int):
        sampled[node] = True
        members.append(int(node))
        recruiter.append(parent)
        wave.append(0 if parent < 0 else wave[parent] + 1)
        queue.append(len(members) - 1)

    for s in seeds:
        enroll(int(s), -1)

    replacements = 0
    while len(members) < design.n_target:
        if not queue:
            if design.stall_rule == StallRule.ABORT:
                raise StallError(
                    f"Semua rantai macet pada ukuran {len(members)} dari {design.n_target}",
                    {"achieved": len(members), "target": design.n_target},
                )
            remaining = probs * ~sampled
            if remaining.sum() <= 0:
                raise StallError(f"Tidak ada node tersisa untuk seed pengganti", {"achieved": len(members)})
            enroll(int(rng.choice(pop.n, p=remaining / remaining.sum())), -1)
            replacements += 1
            continue
        position = queue.popleft()
        for _ in range(design.coupons):
            if len(members) >= design.n_target:
                break
            neighbors, row = kernel.row_arrays(members[position], sampled)
            if neighbors.size == 0:
                break
            enroll(int(rng.choice(neighbors, p=row)), position)

    if replacements:
        logger.warning(f"{replacements} seed pengganti ditarik karena rantai macet")
    nodes = np.array(members, dtype=np.int64)
    attributes = {name: values[nodes] for name, values in pop.attributes().items()}
    sample = RDSSample(
        ids=nodes,
        recruiter=recruiter,
        wave=wave,
        degree=pop.degrees[nodes],
        attributes=attributes,
        ego_reports=[_ego_report(pop, node) for node in nodes],
        nodes=nodes,
        mode=SampleMode.SIMULATION,
        coupons=design.coupons,
    )
    logger.debug(f"Sampel RDS: n={sample.n}, seed={sample.seeds.size}, gelombang maks={int(sample.wave.max())}")
    return sample

"""Population - Representasi jaringan populasi tersembunyi beserta besaran tingkat populasi."""

import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from rds_core.errors import AttributeMissingError, ConfigError, DataError, NodeIndexError

logger = logging.getLogger(__name__)

DENSE_VIEW_LIMIT = 200


@dataclass(frozen=True)
class GroupDegrees:
    node: int
    attr: str
    counts: dict = field(default_factory=dict)

    @property
    def total(self) -> int:
        return int(sum(self.counts.values()))

    def to_dict(self) -> dict:
        return {
            "node": self.node,
            "attr": self.attr,
            "counts": {str(k): int(v) for k, v in self.counts.items()},
        }


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


class Population:
    """Jaringan tak berarah dengan atribut node.

    Ketetanggaan disimpan dalam bentuk CSR: tetangga node i adalah
    ``indices[indptr[i]:indptr[i + 1]]``, terurut naik. Objek tidak diubah
    setelah dibuat sehingga aman dibagi antar worker.
    """

    def __init__(self, indptr: Sequence[int], indices: Sequence[int], ages: Sequence[float],
                 infection: Sequence[int], extra_node_attrs: Optional[Mapping[str, Sequence]] = None,
                 levels: Optional[Mapping[str, Sequence]] = None, validate: bool = True):
        self.indptr = _readonly(np.array(indptr, dtype=np.int64))
        self.indices = _readonly(np.array(indices, dtype=np.int64))
        self.ages = _readonly(np.array(ages, dtype=float))
        self.infection = _readonly(np.array(infection, dtype=np.int64))
        self.extra_node_attrs = {
            name: _readonly(np.array(values)) for name, values in (extra_node_attrs or {}).items()
        }
        self.levels = {name: list(values) for name, values in (levels or {}).items()}
        self.n = len(self.ages)
        self._edge_sources: Optional[np.ndarray] = None
        if validate:
            self._validate()

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[int]], ages: Sequence[float],
                   infection: Sequence[int], extra_node_attrs: Optional[Mapping[str, Sequence]] = None,
                   levels: Optional[Mapping[str, Sequence]] = None) -> "Population":
        edge_array = np.array([tuple(e) for e in edges], dtype=np.int64).reshape(-1, 2)
        if edge_array.size and (edge_array.min() < 0 or edge_array.max() >= n):
            raise DataError("Edge merujuk node di luar rentang", {"n": n})
        src, dst = edge_array[:, 0], edge_array[:, 1]
        loops = np.flatnonzero(src == dst)
        if loops.size:
            raise DataError(f"Self-loop ditolak pada node {int(src[loops[0]])}", {"node": int(src[loops[0]])})
        lo, hi = np.minimum(src, dst), np.maximum(src, dst)
        keys = lo * n + hi
        unique_keys, counts = np.unique(keys, return_counts=True)
        if np.any(counts > 1):
            dup = int(unique_keys[np.argmax(counts > 1)])
            raise DataError(f"Edge duplikat ditolak: ({dup // n}, {dup % n})", {"edge": [dup // n, dup % n]})
        return cls.from_pairs(n, lo, hi, ages, infection, extra_node_attrs, levels)

    @classmethod
    def from_pairs(cls, n: int, lo: np.ndarray, hi: np.ndarray, ages: Sequence[float],
                   infection: Sequence[int], extra_node_attrs: Optional[Mapping[str, Sequence]] = None,
                   levels: Optional[Mapping[str, Sequence]] = None, validate: bool = True) -> "Population":
        """Bangun dari pasangan unik i < j tanpa pemeriksaan duplikat."""
        src = np.concatenate([lo, hi]).astype(np.int64)
        dst = np.concatenate([hi, lo]).astype(np.int64)
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        return cls(indptr, dst, ages, infection, extra_node_attrs, levels, validate=validate)

    @classmethod
    def from_adjacency(cls, adjacency: np.ndarray, ages: Sequence[float], infection: Sequence[int],
                       extra_node_attrs: Optional[Mapping[str, Sequence]] = None,
                       levels: Optional[Mapping[str, Sequence]] = None) -> "Population":
        adj = np.asarray(adjacency)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise DataError("Matriks ketetanggaan harus persegi")
        if not np.array_equal(adj, adj.T):
            raise DataError("Matriks ketetanggaan tidak simetris")
        if np.any(np.diag(adj) != 0):
            raise DataError("Diagonal ketetanggaan harus nol")
        lo, hi = np.nonzero(np.triu(adj, k=1))
        return cls.from_pairs(adj.shape[0], lo, hi, ages, infection, extra_node_attrs, levels)

    def _validate(self):
        n = self.n
        if self.indptr.shape != (n + 1,) or self.indptr[0] != 0 or self.indptr[-1] != len(self.indices):
            raise DataError("Struktur CSR tidak konsisten dengan jumlah node")
        if len(self.infection) != n:
            raise DataError("Panjang status infeksi tidak sama dengan jumlah node")
        for name, values in self.extra_node_attrs.items():
            if len(values) != n:
                raise DataError(f"Panjang atribut '{name}' tidak sama dengan jumlah node")
        if n and np.any(self.ages <= 0):
            raise DataError("Usia harus positif")
        if np.any((self.infection != 0) & (self.infection != 1)):
            raise DataError("Status infeksi harus bernilai 0 atau 1")
        src = self.edge_sources
        if np.any(src == self.indices):
            raise DataError("Self-loop ditemukan pada ketetanggaan")
        if self.indices.size:
            keys = src * n + self.indices
            if np.any(np.diff(keys) <= 0):
                raise DataError("Daftar tetangga harus terurut dan unik")
            reverse = np.sort(self.indices * n + src)
            if not np.array_equal(keys, reverse):
                raise DataError("Ketetanggaan tidak simetris")

    @property
    def edge_sources(self) -> np.ndarray:
        if self._edge_sources is None:
            self._edge_sources = _readonly(np.repeat(np.arange(self.n, dtype=np.int64), self.degrees))
        return self._edge_sources

    @property
    def edge_targets(self) -> np.ndarray:
        return self.indices

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def n_edges(self) -> int:
        return len(self.indices) // 2

    @property
    def attribute_names(self) -> list[str]:
        return ["age", "z"] + sorted(self.extra_node_attrs)

    def _check_node(self, i: int):
        if not 0 <= int(i) < self.n:
            raise NodeIndexError(f"Indeks node {i} di luar rentang [0, {self.n})", {"node": int(i)})

    def neighbors(self, i: int) -> np.ndarray:
        self._check_node(i)
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def degree(self, i: int) -> int:
        self._check_node(i)
        return int(self.indptr[i + 1] - self.indptr[i])

    def attribute(self, name: str) -> np.ndarray:
        if name == "age":
            return self.ages
        if name == "z":
            return self.infection
        if name in self.extra_node_attrs:
            return self.extra_node_attrs[name]
        raise AttributeMissingError(f"Atribut tidak dikenal: '{name}'", {"attr": name})

    def attributes(self) -> dict[str, np.ndarray]:
        return {name: self.attribute(name) for name in self.attribute_names}

    def is_categorical(self, name: str) -> bool:
        values = self.attribute(name)
        return name == "z" or name in self.levels or np.issubdtype(values.dtype, np.integer) \
            or np.issubdtype(values.dtype, np.bool_)

    def attribute_levels(self, name: str) -> list:
        if name == "z":
            return [0, 1]
        if name in self.levels:
            return list(range(len(self.levels[name])))
        return [v.item() for v in np.unique(self.attribute(name))]

    def group_degrees(self, i: int, attr: str) -> GroupDegrees:
        self._check_node(i)
        values = self.attribute(attr)
        if not self.is_categorical(attr):
            raise DataError(f"Atribut '{attr}' bukan kategorikal", {"attr": attr})
        neighbor_values = values[self.neighbors(i)]
        counts = {level: int(np.count_nonzero(neighbor_values == level)) for level in self.attribute_levels(attr)}
        return GroupDegrees(node=int(i), attr=attr, counts=counts)

    def group_degree_vector(self, attr: str, level) -> np.ndarray:
        """d_ik untuk semua node sekaligus."""
        values = self.attribute(attr)
        hits = (values[self.indices] == level).astype(float)
        return np.bincount(self.edge_sources, weights=hits, minlength=self.n).astype(np.int64)

    def cross_group_ties(self) -> tuple[int, int]:
        z_src = self.infection[self.edge_sources]
        z_dst = self.infection[self.indices]
        t01 = int(np.sum((1 - z_src) * z_dst))
        t10 = int(np.sum(z_src * (1 - z_dst)))
        return t01, t10

    def true_prevalence(self) -> float:
        if self.n == 0:
            return 0.0
        return float(self.infection.sum()) / self.n

    def isolated_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.degrees == 0)

    def n_components(self) -> int:
        matrix = sparse.csr_matrix((np.ones(len(self.indices)), self.indices, self.indptr), shape=(self.n, self.n))
        count, _ = csgraph.connected_components(matrix, directed=False)
        return int(count)

    def dense(self) -> np.ndarray:
        if self.n > DENSE_VIEW_LIMIT:
            raise ConfigError(f"Tampilan matriks padat hanya untuk n <= {DENSE_VIEW_LIMIT}", {"n": self.n})
        adj = np.zeros((self.n, self.n), dtype=np.int64)
        adj[self.edge_sources, self.indices] = 1
        return adj

    def edge_list(self) -> np.ndarray:
        mask = self.edge_sources < self.indices
        return np.column_stack([self.edge_sources[mask], self.indices[mask]])

    def with_attribute(self, name: str, values: Sequence, levels: Optional[Sequence] = None) -> "Population":
        extra = dict(self.extra_node_attrs)
        extra[name] = values
        all_levels = dict(self.levels)
        if levels is not None:
            all_levels[name] = list(levels)
        return Population(self.indptr, self.indices, self.ages, self.infection, extra, all_levels)

    def summary(self) -> dict:
        degrees = self.degrees
        return {
            "n": self.n,
            "edges": self.n_edges,
            "mean_degree": round(float(degrees.mean()), 4) if self.n else 0.0,
            "isolated_nodes": int(np.count_nonzero(degrees == 0)),
            "prevalence": round(self.true_prevalence(), 4),
            "attributes": self.attribute_names,
        }


def population_mixing(pop: Population) -> dict:
    """C_kl dan D_k eksak dari jaringan penuh; mu = C01*D0 / (C01*D0 + C10*D1)."""
    degrees = pop.degrees.astype(float)
    z = pop.infection
    d1 = pop.group_degree_vector("z", 1).astype(float)
    d0 = degrees - d1
    stats = {}
    for k in (0, 1):
        in_group = z == k
        ties = degrees[in_group].sum()
        cross = (d1 if k == 0 else d0)[in_group].sum()
        stats[f"c{k}{1 - k}"] = float(cross / ties) if ties > 0 else float("nan")
        stats[f"d{k}"] = float(degrees[in_group].mean()) if in_group.any() else float("nan")
    return stats

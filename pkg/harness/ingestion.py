"""Ingestion - Data responden mentah menjadi RDSSample: imputasi, rekonsiliasi derajat, rekonstruksi alter."""

import csv
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from rds_core.errors import DataError, ImputationError, RepairError
from rds_core.recruitment import CovariateSpec
from rds_core.rng import SeedLike, make_rng
from rds_core.sampler import EgoReport, RDSSample, SampleMode

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AgeGroup:
    name: str
    lower: float
    upper: Optional[float] = None

    def contains(self, age: float) -> bool:
        return age >= self.lower and (self.upper is None or age < self.upper)


AGE_GROUPS = (
    [AgeGroup("age_18_19", 18, 20)]
    + [AgeGroup(f"age_{lo}_{lo + 4}", lo, lo + 5) for lo in range(20, 80, 5)]
    + [AgeGroup("age_80_plus", 80, None)]
)

RAW_COLUMNS = ["id", "recruiter_id", "age", "gender", "degree", "male_contacts", "nonmale_contacts"] \
    + [g.name for g in AGE_GROUPS]

APPLICATION_COVARIATES = [
    CovariateSpec.node("age"),
    CovariateSpec.node("z"),
    CovariateSpec.abs_difference("age_diff", "age"),
]


def age_group_index(age: float) -> int:
    for k, group in enumerate(AGE_GROUPS):
        if group.contains(age):
            return k
    return 0 if age < AGE_GROUPS[0].lower else len(AGE_GROUPS) - 1


def group_distance(a: int, b: int) -> float:
    """Jarak tahun antar batas bawah grup; grup yang sama berjarak 1."""
    if a == b:
        return 1.0
    return abs(AGE_GROUPS[a].lower - AGE_GROUPS[b].lower)


@dataclass
class RawRespondent:
    id: int
    recruiter_id: Optional[int]
    age: float
    gender: Optional[int]
    degree: int
    male_contacts: int
    nonmale_contacts: int
    age_counts: np.ndarray
    frozen: bool = False

    @property
    def age_total(self) -> int:
        return int(self.age_counts.sum())

    @property
    def gender_total(self) -> int:
        return self.male_contacts + self.nonmale_contacts

    def copy(self) -> "RawRespondent":
        return RawRespondent(self.id, self.recruiter_id, self.age, self.gender, self.degree, self.male_contacts,
                             self.nonmale_contacts, self.age_counts.copy(), self.frozen)


def _int_or_zero(text: str) -> int:
    return int(float(text)) if text not in ("", None) else 0


def read_raw(path: str, outcome_positive: str = "male") -> list[RawRespondent]:
    """Baca CSV responden mentah; gender kosong menjadi None (diimputasi kemudian)."""
    if not os.path.exists(path):
        raise DataError(f"Berkas responden tidak ditemukan: {path}", {"path": path})
    with open(path, "r", newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames or []
        missing = [c for c in RAW_COLUMNS if c not in header]
        if missing:
            raise DataError(f"Kolom responden hilang: {', '.join(missing)}", {"missing": missing})
        respondents = []
        for row in reader:
            gender_text = (row["gender"] or "").strip().lower()
            if gender_text == "":
                gender = None
            else:
                gender = 1 if gender_text in (outcome_positive.lower(), "1") else 0
            respondents.append(RawRespondent(
                id=int(row["id"]),
                recruiter_id=int(row["recruiter_id"]) if row["recruiter_id"] else None,
                age=float(row["age"]),
                gender=gender,
                degree=_int_or_zero(row["degree"]),
                male_contacts=_int_or_zero(row["male_contacts"]),
                nonmale_contacts=_int_or_zero(row["nonmale_contacts"]),
                age_counts=np.array([_int_or_zero(row[g.name]) for g in AGE_GROUPS], dtype=np.int64),
                frozen=str(row.get("frozen", "")).strip().lower() in ("1", "true", "yes"),
            ))
    logger.info(f"{len(respondents)} responden dibaca dari {path}")
    return respondents


def recruitment_order(respondents: Sequence[RawRespondent]) -> list[RawRespondent]:
    """Urutkan agar perekrut mendahului rekrut (breadth-first dari seed, urutan berkas dipertahankan)."""
    by_id = {r.id: r for r in respondents}
    if len(by_id) != len(respondents):
        raise DataError("ID responden duplikat")
    children: dict[int, list[RawRespondent]] = {}
    roots = []
    for r in respondents:
        if r.recruiter_id is None:
            roots.append(r)
        elif r.recruiter_id not in by_id:
            raise DataError(f"Perekrut {r.recruiter_id} dari responden {r.id} tidak ada", {"member": r.id})
        else:
            children.setdefault(r.recruiter_id, []).append(r)
    ordered, frontier = [], list(roots)
    while frontier:
        ordered.extend(frontier)
        frontier = [c for r in frontier for c in children.get(r.id, [])]
    if len(ordered) != len(respondents):
        raise DataError("Struktur rekrutmen mengandung siklus")
    return ordered


def same_group_rate(values: Sequence[Optional[int]], recruiter: Sequence[int]) -> float:
    """Proporsi rekrutmen (keduanya teramati) dengan nilai atribut sama."""
    pairs = [(values[r], values[j]) for j, r in enumerate(recruiter)
             if r >= 0 and values[r] is not None and values[j] is not None]
    if not pairs:
        raise ImputationError("Tidak ada pasangan rekrutmen dengan nilai teramati")
    return sum(1 for a, b in pairs if a == b) / len(pairs)


def impute_binary(values: Sequence[Optional[int]], same_group_prob: float, recruiter: Sequence[int],
                  rng: SeedLike = None) -> np.ndarray:
    """Isi nilai hilang dengan nilai tetangga pohon (perekrut, lalu rekrut) dengan peluang p, dibalik dengan 1-p."""
    rng = make_rng(rng)
    observed = list(values)
    completed = np.array([-1 if v is None else int(v) for v in values], dtype=np.int64)
    for j, value in enumerate(observed):
        if value is not None:
            continue
        r = recruiter[j]
        neighbors = ([r] if r >= 0 else []) + [k for k, rk in enumerate(recruiter) if rk == j]
        known = [observed[k] for k in neighbors if observed[k] is not None]
        if not known:
            raise ImputationError(f"Anggota pada posisi {j} tidak memiliki tetangga pohon yang teramati",
                                  {"position": j})
        anchor = int(known[0])
        completed[j] = anchor if rng.random() < same_group_prob else 1 - anchor
    return completed


def group_frequencies(ages: Sequence[float]) -> np.ndarray:
    """f_g dari usia responden; grup kosong diberi frekuensi positif terkecil."""
    counts = np.bincount([age_group_index(a) for a in ages], minlength=len(AGE_GROUPS)).astype(float)
    freqs = counts / counts.sum()
    positive = freqs[freqs > 0]
    return np.where(freqs > 0, freqs, positive.min() if positive.size else 1.0)


def _majority(values: Sequence[int]) -> int:
    a, b, c = values
    if a == b or a == c:
        return a
    if b == c:
        return b
    return a


@dataclass
class Reconciliation:
    respondent: RawRespondent
    modified: bool
    degree_raised: bool


def reconcile_degrees(respondent: RawRespondent, activity: int, frequencies: np.ndarray,
                      same_group_prob: float = 0.62, rng: SeedLike = None,
                      known_genders: Sequence[int] = ()) -> Reconciliation:
    """Samakan derajat total, per gender, dan per kelompok usia.

    Nilai mayoritas di antara tiga ukuran (atau total bila semuanya berbeda)
    dianggap benar, lalu dinaikkan setidaknya ke aktivitas rekrutmen teramati.
    Hitungan gender juga dinaikkan agar memuat gender alter pohon yang diketahui.
    """
    rng = make_rng(rng)
    member = respondent.copy()
    measures = [member.degree, member.gender_total, member.age_total]
    truth = _majority(measures)
    raised = truth < activity
    truth = max(truth, activity)
    known_males = sum(1 for g in known_genders if g == 1)
    known_nonmales = len(known_genders) - known_males
    if truth < len(known_genders):
        raise RepairError(
            f"Responden {member.id} memiliki lebih banyak alter diketahui daripada derajatnya",
            {"member": member.id, "known": len(known_genders)},
        )
    covers_known = member.male_contacts >= known_males and member.nonmale_contacts >= known_nonmales
    if all(m == truth for m in measures) and covers_known:
        return Reconciliation(member, modified=False, degree_raised=False)
    if member.frozen:
        raise RepairError(
            f"Laporan responden {member.id} tidak dapat direkonsiliasi (ditandai beku)",
            {"member": member.id, "measures": measures, "activity": activity},
        )

    own = age_group_index(member.age)
    add_weight = np.array([1.0 / (group_distance(own, g) * frequencies[g]) for g in range(len(AGE_GROUPS))])
    while member.age_total < truth:
        g = rng.choice(len(AGE_GROUPS), p=add_weight / add_weight.sum())
        member.age_counts[g] += 1
    while member.age_total > truth:
        remove_weight = np.where(member.age_counts > 0, 1.0 / add_weight, 0.0)
        g = rng.choice(len(AGE_GROUPS), p=remove_weight / remove_weight.sum())
        member.age_counts[g] -= 1

    same_is_male = member.gender == 1
    while member.gender_total < truth:
        same = rng.random() < same_group_prob
        if same == same_is_male:
            member.male_contacts += 1
        else:
            member.nonmale_contacts += 1
    while member.gender_total > truth:
        opposite = rng.random() < same_group_prob
        remove_male = opposite != same_is_male
        if remove_male and member.male_contacts == 0:
            remove_male = False
        elif not remove_male and member.nonmale_contacts == 0:
            remove_male = True
        if remove_male:
            member.male_contacts -= 1
        else:
            member.nonmale_contacts -= 1

    while member.male_contacts < known_males:
        member.male_contacts += 1
        member.nonmale_contacts -= 1
    while member.nonmale_contacts < known_nonmales:
        member.nonmale_contacts += 1
        member.male_contacts -= 1

    member.degree = truth
    return Reconciliation(member, modified=True, degree_raised=raised)


@dataclass
class KnownAlter:
    """Alter yang identitasnya diketahui (perekrut atau rekrut)."""

    id: int
    age: float
    gender: int


def reconstruct_alters(member: RawRespondent, known: Sequence[KnownAlter] = (), max_age: float = 90.0,
                       rng: SeedLike = None) -> EgoReport:
    """Satu alter sintetis per kontak: usia ~ Uniform dalam interval grup, gender sesuai total yang dilaporkan.

    Alter yang diketahui memakai hitungan dari grup usianya sendiri (atau grup
    terdekat yang masih berisi) dan dari gendernya sendiri.
    """
    rng = make_rng(rng)
    counts = member.age_counts.copy()
    males, nonmales = member.male_contacts, member.nonmale_contacts
    if counts.sum() != member.degree or males + nonmales != member.degree:
        raise RepairError(f"Hitungan alter responden {member.id} tidak konsisten", {"member": member.id})
    if len(known) > member.degree:
        raise RepairError(f"Responden {member.id} memiliki lebih banyak alter diketahui daripada derajatnya")

    ages, genders, nodes, recruited, groups = [], [], [], [], []
    for alter in known:
        g = age_group_index(alter.age)
        if counts[g] == 0:
            available = np.flatnonzero(counts > 0)
            g = int(available[np.argmin(np.abs(available - g))])
        counts[g] -= 1
        if alter.gender == 1:
            males -= 1
        else:
            nonmales -= 1
        if males < 0 or nonmales < 0:
            raise RepairError(
                f"Gender alter diketahui {alter.id} tidak sesuai hitungan gender responden {member.id}",
                {"member": member.id, "alter": alter.id},
            )
        ages.append(alter.age)
        genders.append(alter.gender)
        nodes.append(alter.id)
        recruited.append(1)
        groups.append(g)

    synthetic_genders = np.array([1] * males + [0] * nonmales, dtype=np.int64)
    rng.shuffle(synthetic_genders)
    cursor = 0
    for g, count in enumerate(counts):
        group = AGE_GROUPS[g]
        upper = group.upper if group.upper is not None else max_age
        for _ in range(int(count)):
            ages.append(float(rng.uniform(group.lower, upper)))
            genders.append(int(synthetic_genders[cursor]))
            cursor += 1
            nodes.append(-1)
            recruited.append(0)
            groups.append(g)

    return EgoReport(
        attrs={
            "age": np.array(ages, dtype=float),
            "z": np.array(genders, dtype=np.int64),
            "age_group": np.array(groups, dtype=np.int64),
            "recruited": np.array(recruited, dtype=np.int64),
        },
        nodes=np.array(nodes, dtype=np.int64),
    )


@dataclass
class RepairAudit:
    members: int = 0
    modified: int = 0
    imputed: int = 0
    degree_raised: int = 0
    agreement_rate: float = 1.0
    repaired_agreement_rate: float = 1.0
    same_group_probability: float = 0.62
    modified_ids: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "members": self.members,
            "modified": self.modified,
            "imputed": self.imputed,
            "degree_raised": self.degree_raised,
            "agreement_rate": self.agreement_rate,
            "repaired_agreement_rate": self.repaired_agreement_rate,
            "same_group_probability": self.same_group_probability,
            "modified_ids": list(self.modified_ids),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def ingest_raw(path: str, config: Optional[dict] = None, rng: SeedLike = None,
               estimate_same_group: bool = False) -> tuple[RDSSample, RepairAudit]:
    """CSV responden mentah -> RDSSample mode ingestion yang konsisten beserta audit perbaikan."""
    settings = (config or {}).get("ingestion", {})
    same_group_prob = float(settings.get("same_group_probability", 0.62))
    max_age = float(settings.get("open_group_max_age", 90.0))
    rng = make_rng(rng)

    respondents = recruitment_order(read_raw(path, settings.get("outcome_positive", "male")))
    position = {r.id: p for p, r in enumerate(respondents)}
    recruiter = [-1 if r.recruiter_id is None else position[r.recruiter_id] for r in respondents]
    genders = [r.gender for r in respondents]
    if estimate_same_group:
        same_group_prob = same_group_rate(genders, recruiter)
        logger.info(f"Peluang rekrutmen sesama gender diestimasi: {same_group_prob:.3f}")
    completed = impute_binary(genders, same_group_prob, recruiter, rng)
    imputed = sum(1 for g in genders if g is None)
    for r, g in zip(respondents, completed):
        r.gender = int(g)

    frequencies = group_frequencies([r.age for r in respondents])
    audit = RepairAudit(members=len(respondents), imputed=imputed, same_group_probability=same_group_prob)
    repaired, agreeing = [], 0
    for p, r in enumerate(respondents):
        if r.degree == r.gender_total == r.age_total:
            agreeing += 1
        tree = ([recruiter[p]] if recruiter[p] >= 0 else []) + [k for k, rk in enumerate(recruiter) if rk == p]
        result = reconcile_degrees(r, len(tree), frequencies, same_group_prob, rng,
                                   known_genders=[respondents[k].gender for k in tree])
        repaired.append(result.respondent)
        if result.modified:
            audit.modified += 1
            audit.modified_ids.append(r.id)
        audit.degree_raised += int(result.degree_raised)
    audit.agreement_rate = agreeing / len(respondents) if respondents else 1.0
    consistent = sum(1 for m in repaired if m.degree == m.gender_total == m.age_total)
    audit.repaired_agreement_rate = consistent / len(repaired) if repaired else 1.0

    reports = []
    for p, member in enumerate(repaired):
        tree = ([recruiter[p]] if recruiter[p] >= 0 else []) + [k for k, rk in enumerate(recruiter) if rk == p]
        known = [KnownAlter(repaired[k].id, repaired[k].age, repaired[k].gender) for k in tree]
        reports.append(reconstruct_alters(member, known, max_age, rng))

    wave = np.zeros(len(repaired), dtype=np.int64)
    for p, r in enumerate(recruiter):
        if r >= 0:
            wave[p] = wave[r] + 1
    sample = RDSSample(
        ids=[m.id for m in repaired],
        recruiter=recruiter,
        wave=wave,
        degree=[m.degree for m in repaired],
        attributes={
            "z": np.array([m.gender for m in repaired], dtype=np.int64),
            "age": np.array([m.age for m in repaired], dtype=float),
        },
        ego_reports=reports,
        mode=SampleMode.INGESTION,
    )
    logger.info(
        f"Ingestion selesai: {audit.members} anggota, {audit.modified} diperbaiki, {audit.imputed} diimputasi"
    )
    return sample, audit


def sensitivity_transform(sample: RDSSample, attr: str = "z", convert_fraction: float = 0.7,
                          age_shift: float = 3.0, rng: SeedLike = None) -> RDSSample:
    """Perkuat MDR: alter non-rekrut diubah sehingga >= convert_fraction bernilai attr = 0,
    dan usianya digeser ``age_shift`` tahun mendekati usia ego."""
    rng = make_rng(rng)
    ego_ages = sample.attribute("age")
    reports = []
    for p, report in enumerate(sample.ego_reports):
        if report is None:
            reports.append(None)
            continue
        attrs = {name: values.copy() for name, values in report.attrs.items()}
        recruited = attrs.get("recruited", np.zeros(report.size, dtype=np.int64))
        free = np.flatnonzero(recruited == 0)
        values = attrs[attr]
        target = int(round(convert_fraction * free.size))
        zeros = int(np.count_nonzero(values[free] == 0))
        if zeros < target:
            ones = free[values[free] != 0]
            values[rng.choice(ones, size=target - zeros, replace=False)] = 0
        gap = attrs["age"][free] - ego_ages[p]
        attrs["age"][free] = ego_ages[p] + np.sign(gap) * np.maximum(np.abs(gap) - age_shift, 0.0)
        reports.append(EgoReport(attrs=attrs, nodes=report.nodes))
    return RDSSample(
        ids=sample.ids, recruiter=sample.recruiter, wave=sample.wave, degree=sample.degree,
        attributes=sample.attributes, ego_reports=reports, nodes=sample.nodes, mode=sample.mode,
        coupons=sample.coupons,
    )


def write_raw(respondents: Sequence[RawRespondent], path: str):
    """Tulis responden dalam format CSV mentah (untuk data sintetis dan pengujian)."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(RAW_COLUMNS)
        for r in respondents:
            writer.writerow(
                [r.id, "" if r.recruiter_id is None else r.recruiter_id, repr(float(r.age)),
                 "" if r.gender is None else ("male" if r.gender == 1 else "female"),
                 r.degree, r.male_contacts, r.nonmale_contacts] + [int(c) for c in r.age_counts]
            )

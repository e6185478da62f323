"""Area profiles and synthetic family populations sampled from them.

Profiles are aggregate statistics for one weighted area. A profile file is
UTF-8 comma-separated text whose header names the :class:`AreaProfile`
fields; ``geometry`` (a WKT polygon) is an optional last column and lines
starting with ``#`` are comments.
"""

from __future__ import annotations

import csv
import dataclasses
import functools
import logging
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import least_squares
from scipy.special import ndtr, ndtri
from scipy.stats import truncnorm

from ._kernels import normalize
from .domain import AreaProfile, Family, Gender, PersonAgent, SimParams, ValidationError, VictimGroup

PROFILE_COLUMNS = [f.name for f in dataclasses.fields(AreaProfile)]
_REQUIRED = PROFILE_COLUMNS[:-1]
_INT_COLUMNS = {"num_families_sample"}
_STR_COLUMNS = {"area_id", "region_id", "name", "geometry"}

log = logging.getLogger(__name__)

MIN_ADULT_AGE = 18
MAX_SCHOOLING = 17


class ProfileFormatError(ValueError):
    """A profile file could not be parsed."""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


def _data_lines(handle):
    for line in handle:
        if not line.lstrip().startswith("#"):
            yield line


def load_area_profiles(path) -> list[AreaProfile]:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(_data_lines(fh))
        try:
            header = next(reader)
        except StopIteration:
            raise ProfileFormatError(f"{path}: missing header row")
        header = [h.strip() for h in header]
        if header not in (_REQUIRED, PROFILE_COLUMNS):
            missing = [c for c in _REQUIRED if c not in header]
            extra = [c for c in header if c not in PROFILE_COLUMNS]
            raise ProfileFormatError(
                f"{path}: header must be {','.join(PROFILE_COLUMNS)} (geometry optional); "
                f"missing={missing} unexpected={extra}", row=1)

        profiles: list[AreaProfile] = []
        seen: set[str] = set()
        for row_no, row in enumerate(reader, start=2):
            if not any(cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ProfileFormatError(f"expected {len(header)} fields, got {len(row)}", row=row_no)
            values = {}
            for column, cell in zip(header, row):
                cell = cell.strip()
                if column in _STR_COLUMNS:
                    values[column] = (cell or None) if column == "geometry" else cell
                    continue
                try:
                    values[column] = int(cell) if column in _INT_COLUMNS else float(cell)
                except ValueError:
                    raise ProfileFormatError(f"cannot parse {cell!r} as a number", row=row_no, column=column)
            try:
                profile = AreaProfile(**values)
            except ValidationError as exc:
                raise ValidationError(exc.field, str(exc).split(": ", 1)[1], row=row_no) from None
            if profile.area_id in seen:
                raise ProfileFormatError(f"duplicate area_id {profile.area_id!r}", row=row_no, column="area_id")
            seen.add(profile.area_id)
            profiles.append(profile)
    return profiles


def write_area_profiles(profiles: Iterable[AreaProfile], path, comment: str | None = None) -> None:
    profiles = list(profiles)
    with_geometry = any(p.geometry for p in profiles)
    columns = PROFILE_COLUMNS if with_geometry else _REQUIRED
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for p in profiles:
            row = []
            for c in columns:
                v = getattr(p, c)
                row.append("" if v is None else repr(float(v)) if isinstance(v, float) else v)
            writer.writerow(row)


def bundled_profiles_path(name: str = "brasilia_like.csv") -> Path:
    return Path(str(resources.files("vida") / "data" / name))


def brasilia_like_profiles() -> list[AreaProfile]:
    """The bundled acceptance fixture: eight weighted areas of a Brasília-like region."""
    return load_area_profiles(bundled_profiles_path())


def synthetic_profile(area_id: str = "synthetic", region_id: str = "synthetic", name: str | None = None,
                      num_families_sample: int = 1000, pct_female_black: float = 0.5,
                      pct_male_black: float = 0.5, age_mean: float = 38.0, age_sd: float = 12.0,
                      schooling_mean: float = 8.0, schooling_sd: float = 4.0,
                      income_mean: float = 1500.0, income_sd: float = 1200.0,
                      avg_children: float = 1.2, geometry: str | None = None) -> AreaProfile:
    return AreaProfile(
        area_id=area_id, region_id=region_id, name=name or area_id,
        num_families_sample=num_families_sample, pct_female_black=pct_female_black,
        pct_male_black=pct_male_black, age_mean=age_mean, age_sd=age_sd,
        schooling_mean=schooling_mean, schooling_sd=schooling_sd,
        income_mean=income_mean, income_sd=income_sd, avg_children=avg_children,
        geometry=geometry,
    )


@functools.lru_cache(maxsize=4096)
def parent_normal(mean: float, sd: float, lo: float = -math.inf, hi: float = math.inf) -> tuple[float, float]:
    """Location and scale of the normal whose restriction to [lo, hi] has the
    given mean and standard deviation.

    When no truncated normal has those moments (e.g. an sd too large for the
    distance between the mean and a bound) the untruncated (mean, sd) is used.
    """
    if sd == 0 or (math.isinf(lo) and math.isinf(hi)):
        return mean, sd

    def residual(x):
        mu, sigma = x[0], math.exp(x[1])
        m, v = truncnorm.stats((lo - mu) / sigma, (hi - mu) / sigma, loc=mu, scale=sigma, moments="mv")
        return [(float(m) - mean) / sd, (math.sqrt(max(float(v), 0.0)) - sd) / sd]

    fit = least_squares(residual, x0=[mean, math.log(sd)], xtol=1e-14, ftol=1e-14, gtol=1e-14)
    if fit.cost > 1e-12 or not np.all(np.isfinite(fit.x)):
        log.warning("no truncated normal on [%s, %s] has mean=%s sd=%s; sampling N(mean, sd) "
                    "clipped to the bounds instead", lo, hi, mean, sd)
        return mean, sd
    return float(fit.x[0]), float(math.exp(fit.x[1]))


def truncated_normal(rng, mean: float, sd: float, size: int,
                     lo: float = -np.inf, hi: float = np.inf) -> np.ndarray:
    """Inverse-CDF draws restricted to [lo, hi] whose mean and sd are ``mean`` and ``sd``.

    Always consumes exactly ``size`` uniforms so stream alignment does not
    depend on the profile.
    """
    u = rng.random(size)
    if sd == 0:
        return np.full(size, float(np.clip(mean, lo, hi)))
    mu, sigma = parent_normal(float(mean), float(sd), float(lo), float(hi))
    a = ndtr((lo - mu) / sigma)
    b = ndtr((hi - mu) / sigma)
    q = a + u * (b - a)
    # keep ndtri finite at the unit-interval edges
    q = np.clip(q, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
    return np.clip(mu + sigma * ndtri(q), lo, hi)


@dataclass
class PopulationSample:
    """A sampled world stored as parallel arrays.

    Agents are family-major: agent ``2*f`` is the man and ``2*f + 1`` the
    woman of family ``f``. ``income_normalization`` holds the (lo, hi)
    bounds for individual, household and per-capita raw income, in that
    order. The engine mutates these arrays in place.
    """

    area_id: str
    gender: np.ndarray
    age: np.ndarray
    schooling: np.ndarray
    is_black: np.ndarray
    income_raw: np.ndarray
    income_norm: np.ndarray
    employed: np.ndarray
    has_gun: np.ndarray
    is_addicted: np.ndarray
    base_stress: np.ndarray
    current_stress: np.ndarray
    num_children: np.ndarray
    household_norm: np.ndarray
    pc_norm: np.ndarray
    violence_history: np.ndarray
    denounce_count: np.ndarray
    protection: np.ndarray
    conviction: np.ndarray
    victim_group: np.ndarray
    income_normalization: np.ndarray

    @property
    def num_families(self) -> int:
        return self.victim_group.shape[0]

    @property
    def num_agents(self) -> int:
        return self.gender.shape[0]

    @property
    def agents(self) -> list[PersonAgent]:
        return [self.agent(i) for i in range(self.num_agents)]

    @property
    def families(self) -> list[Family]:
        return [self.family(f) for f in range(self.num_families)]

    def agent(self, i: int) -> PersonAgent:
        return PersonAgent(
            id=i, gender=Gender(int(self.gender[i])), age=int(self.age[i]),
            years_schooling=int(self.schooling[i]), is_black=bool(self.is_black[i]),
            income_norm=float(self.income_norm[i]), employed=bool(self.employed[i]),
            has_gun=bool(self.has_gun[i]), is_addicted=bool(self.is_addicted[i]),
            base_stress=float(self.base_stress[i]), family_id=i // 2,
            current_stress=float(self.current_stress[i]),
        )

    def family(self, f: int) -> Family:
        return Family(
            id=f, area_id=self.area_id, male_id=2 * f, female_id=2 * f + 1,
            num_children=int(self.num_children[f]),
            household_income_norm=float(self.household_norm[f]),
            income_pc_norm=float(self.pc_norm[f]),
            victim_group=VictimGroup(int(self.victim_group[f])),
            violence_history=int(self.violence_history[f]),
            denounce_count=int(self.denounce_count[f]),
            protection_granted=bool(self.protection[f]), conviction=bool(self.conviction[f]),
        )

    def copy(self) -> "PopulationSample":
        return dataclasses.replace(self, **{
            f.name: getattr(self, f.name).copy()
            for f in dataclasses.fields(self) if isinstance(getattr(self, f.name), np.ndarray)
        })

    def validate(self) -> None:
        n = self.num_families
        if self.num_agents != 2 * n:
            raise ValidationError("agents", "every family needs exactly two adults")
        if np.any(self.gender[0::2] != Gender.MALE) or np.any(self.gender[1::2] != Gender.FEMALE):
            raise ValidationError("gender", "each family needs one man and one woman")
        for name in ("income_norm", "household_norm", "pc_norm"):
            arr = getattr(self, name)
            if np.any((arr < 0) | (arr > 1)):
                raise ValidationError(name, "normalised incomes must lie in [0, 1]")

    @classmethod
    def from_objects(cls, families: Sequence[Family], agents: Sequence[PersonAgent],
                     area_id: str | None = None) -> "PopulationSample":
        """Build a world from domain objects.

        Raw incomes are taken equal to the normalised ones, so income
        volatility on such a world works on the unit scale.
        """
        by_id = {a.id: a for a in agents}
        ordered: list[PersonAgent] = []
        for fam in families:
            male, female = by_id[fam.male_id], by_id[fam.female_id]
            if male.gender is not Gender.MALE or female.gender is not Gender.FEMALE:
                raise ValidationError("gender", f"family {fam.id} needs one man and one woman")
            if male.family_id != fam.id or female.family_id != fam.id:
                raise ValidationError("family_id", f"adults of family {fam.id} reference another family")
            ordered += [male, female]

        def col(objs, attr, dtype):
            return np.array([getattr(o, attr) for o in objs], dtype=dtype)

        fams = list(families)
        return cls(
            area_id=area_id or (fams[0].area_id if fams else ""),
            gender=col(ordered, "gender", np.int8),
            age=col(ordered, "age", np.int64),
            schooling=col(ordered, "years_schooling", np.int64),
            is_black=col(ordered, "is_black", np.bool_),
            income_raw=col(ordered, "income_norm", np.float64),
            income_norm=col(ordered, "income_norm", np.float64),
            employed=col(ordered, "employed", np.bool_),
            has_gun=col(ordered, "has_gun", np.bool_),
            is_addicted=col(ordered, "is_addicted", np.bool_),
            base_stress=col(ordered, "base_stress", np.float64),
            current_stress=col(ordered, "current_stress", np.float64),
            num_children=col(fams, "num_children", np.int64),
            household_norm=col(fams, "household_income_norm", np.float64),
            pc_norm=col(fams, "income_pc_norm", np.float64),
            violence_history=col(fams, "violence_history", np.int64),
            denounce_count=col(fams, "denounce_count", np.int64),
            protection=col(fams, "protection_granted", np.bool_),
            conviction=col(fams, "conviction", np.bool_),
            victim_group=col(fams, "victim_group", np.int8),
            income_normalization=np.array([0.0, 1.0, 0.0, 2.0, 0.0, 1.0]),
        )


def _bounds(x: np.ndarray) -> tuple[float, float]:
    return float(x.min()), float(x.max())


def sample_population(profile: AreaProfile, params: SimParams, rng) -> PopulationSample:
    """Draw ``profile.num_families_sample`` couples from the profile's aggregates.

    Ages, schooling and raw incomes come from truncated normals matching the
    profile moments (ages >= 18, schooling in [0, 17], incomes >= 0); ages
    and schooling are rounded to whole years. Incomes are min-max normalised
    within the sample.
    """
    n = profile.num_families_sample
    if n < 1:
        raise ValidationError("num_families_sample", "must be >= 1")
    m = 2 * n
    gender = np.tile(np.array([Gender.MALE, Gender.FEMALE], dtype=np.int8), n)
    male = gender == Gender.MALE

    age = np.rint(truncated_normal(rng, profile.age_mean, profile.age_sd, m, lo=MIN_ADULT_AGE)).astype(np.int64)
    schooling = np.rint(truncated_normal(rng, profile.schooling_mean, profile.schooling_sd, m,
                                         lo=0.0, hi=MAX_SCHOOLING)).astype(np.int64)
    income_raw = truncated_normal(rng, profile.income_mean, profile.income_sd, m, lo=0.0)
    num_children = rng.poisson(profile.avg_children, n).astype(np.int64)
    black_p = np.where(male, profile.pct_male_black, profile.pct_female_black)
    is_black = rng.random(m) < black_p
    employed = rng.random(m) < params.pct_employed
    has_gun = rng.random(m) < params.pct_gun
    is_addicted = rng.random(m) < params.pct_addicted
    victim_group = rng.integers(0, 3, n).astype(np.int8)

    household = income_raw[0::2] + income_raw[1::2]
    per_capita = household / (2.0 + num_children)
    bounds = np.array(_bounds(income_raw) + _bounds(household) + _bounds(per_capita))

    base = np.where(male, params.gender_stress_male, params.gender_stress_female)
    return PopulationSample(
        area_id=profile.area_id,
        gender=gender, age=age, schooling=schooling, is_black=is_black,
        income_raw=income_raw,
        income_norm=normalize(income_raw, bounds[0], bounds[1]),
        employed=employed, has_gun=has_gun, is_addicted=is_addicted,
        base_stress=base, current_stress=base.copy(),
        num_children=num_children,
        household_norm=normalize(household, bounds[2], bounds[3]),
        pc_norm=normalize(per_capita, bounds[4], bounds[5]),
        violence_history=np.zeros(n, dtype=np.int64),
        denounce_count=np.zeros(n, dtype=np.int64),
        protection=np.zeros(n, dtype=np.bool_),
        conviction=np.zeros(n, dtype=np.bool_),
        victim_group=victim_group,
        income_normalization=bounds,
    )

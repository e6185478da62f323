"""Core data types shared across the simulator.

Everything here is plain data. Constructors validate their invariants and
raise :class:`ValidationError` naming the offending field. ``to_dict`` /
``from_dict`` give a JSON-safe form that round-trips exactly.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field
from typing import Any, Optional


class ValidationError(ValueError):
    """A domain value violated one of its invariants."""

    def __init__(self, field_name: str, message: str, row: Optional[int] = None):
        self.field = field_name
        self.row = row
        where = f"row {row}, " if row is not None else ""
        super().__init__(f"{where}{field_name}: {message}")


class Gender(enum.IntEnum):
    MALE = 0
    FEMALE = 1


class VictimGroup(enum.IntEnum):
    NEVER_DENOUNCES = 0
    DENOUNCES_AFTER_FIRST = 1
    DENOUNCES_AFTER_THIRD = 2


def _check_unit(obj: Any, *names: str) -> None:
    for name in names:
        value = getattr(obj, name)
        if not (0.0 <= value <= 1.0):
            raise ValidationError(name, f"must lie in [0, 1], got {value!r}")


def _check_nonneg(obj: Any, *names: str) -> None:
    for name in names:
        value = getattr(obj, name)
        if not value >= 0:
            raise ValidationError(name, f"must be >= 0, got {value!r}")


def _check_positive(obj: Any, *names: str) -> None:
    for name in names:
        value = getattr(obj, name)
        if not value > 0:
            raise ValidationError(name, f"must be > 0, got {value!r}")


def _check_finite(obj: Any, *names: str) -> None:
    for name in names:
        value = getattr(obj, name)
        if not math.isfinite(value):
            raise ValidationError(name, f"must be finite, got {value!r}")


def _encode(value: Any) -> Any:
    if isinstance(value, enum.Enum):
        return value.name
    return value


class _Serializable:
    _enums: dict = {}

    def to_dict(self) -> dict:
        return {f.name: _encode(getattr(self, f.name)) for f in dataclasses.fields(self)}

    @classmethod
    def from_dict(cls, data: dict):
        kwargs = dict(data)
        for name, enum_cls in cls._enums.items():
            if name in kwargs and isinstance(kwargs[name], str):
                kwargs[name] = enum_cls[kwargs[name]]
        return cls(**kwargs)


@dataclass
class PersonAgent(_Serializable):
    id: int
    gender: Gender
    age: int
    years_schooling: int
    is_black: bool
    income_norm: float
    employed: bool
    has_gun: bool
    is_addicted: bool
    base_stress: float
    family_id: int
    current_stress: float = 0.0

    _enums = {"gender": Gender}

    def __post_init__(self):
        self.gender = Gender(self.gender)
        _check_nonneg(self, "age", "base_stress")
        if not 0 <= self.years_schooling <= 17:
            raise ValidationError("years_schooling", f"must lie in [0, 17], got {self.years_schooling!r}")
        _check_unit(self, "income_norm")
        _check_finite(self, "current_stress")


@dataclass
class Family(_Serializable):
    id: int
    area_id: str
    male_id: int
    female_id: int
    num_children: int
    household_income_norm: float
    income_pc_norm: float
    victim_group: VictimGroup
    violence_history: int = 0
    denounce_count: int = 0
    protection_granted: bool = False
    conviction: bool = False

    _enums = {"victim_group": VictimGroup}

    def __post_init__(self):
        self.victim_group = VictimGroup(self.victim_group)
        _check_nonneg(self, "num_children", "violence_history", "denounce_count")
        _check_unit(self, "household_income_norm", "income_pc_norm")
        if self.male_id == self.female_id:
            raise ValidationError("female_id", "adults must be two distinct agents")
        if self.denounce_count > 0 and self.victim_group is VictimGroup.NEVER_DENOUNCES:
            raise ValidationError("denounce_count", "victims who never denounce cannot have denounces")
        if self.protection_granted and self.denounce_count < 1:
            raise ValidationError("protection_granted", "protection requires at least one denounce")
        if self.conviction and not self.protection_granted:
            raise ValidationError("conviction", "conviction requires protection")


@dataclass(frozen=True)
class SimParams(_Serializable):
    """Every modeller-controlled knob of a simulation.

    ``distancing_denounce_chance`` is the probability that an eligible victim
    still manages to denounce while distancing is enforced.
    """

    gender_stress_male: float = 0.8
    gender_stress_female: float = 0.2
    pct_employed: float = 0.8
    pct_gun: float = 0.1
    pct_addicted: float = 0.1
    weight_high: float = 10.0
    weight_medium: float = 5.0
    divisor_constant: float = 10.0
    model_scale: float = 1000.0
    home_term_no_work: float = 0.67
    home_term_work: float = 0.34
    low_schooling_threshold: int = 6
    low_schooling_uplift: float = 0.60
    race_uplift: float = 0.30
    deterrence_enabled: bool = True
    distancing_enabled: bool = False
    chance_protection: float = 0.5
    chance_conviction: float = 0.5
    distancing_denounce_chance: float = 0.7
    steps_per_run: int = 10
    replications: int = 200
    employment_volatility: float = 0.05
    income_volatility: float = 0.05
    master_seed: int = 0

    PROBABILITIES = (
        "gender_stress_male", "gender_stress_female", "pct_employed", "pct_gun",
        "pct_addicted", "chance_protection", "chance_conviction",
        "distancing_denounce_chance", "employment_volatility", "income_volatility",
    )

    def __post_init__(self):
        _check_unit(self, *self.PROBABILITIES)
        _check_positive(self, "weight_high", "weight_medium", "divisor_constant", "model_scale")
        _check_nonneg(self, "home_term_no_work", "home_term_work", "low_schooling_threshold",
                      "low_schooling_uplift", "race_uplift")
        _check_finite(self, "weight_high", "weight_medium", "divisor_constant", "model_scale",
                      "home_term_no_work", "home_term_work", "low_schooling_uplift", "race_uplift")
        if self.steps_per_run < 1:
            raise ValidationError("steps_per_run", f"must be >= 1, got {self.steps_per_run!r}")
        if self.replications < 1:
            raise ValidationError("replications", f"must be >= 1, got {self.replications!r}")
        if not 0 <= self.master_seed < 2**64:
            raise ValidationError("master_seed", "must be a 64-bit unsigned integer")

    def replace(self, **changes) -> "SimParams":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class AreaProfile(_Serializable):
    area_id: str
    region_id: str
    name: str
    num_families_sample: int
    pct_female_black: float
    pct_male_black: float
    age_mean: float
    age_sd: float
    schooling_mean: float
    schooling_sd: float
    income_mean: float
    income_sd: float
    avg_children: float
    geometry: Optional[str] = None

    def __post_init__(self):
        if not self.area_id:
            raise ValidationError("area_id", "must be non-empty")
        if self.num_families_sample < 1:
            raise ValidationError("num_families_sample", f"must be >= 1, got {self.num_families_sample!r}")
        _check_unit(self, "pct_female_black", "pct_male_black")
        _check_nonneg(self, "age_sd", "schooling_sd", "income_sd", "avg_children")
        _check_finite(self, "age_mean", "age_sd", "schooling_mean", "schooling_sd",
                      "income_mean", "income_sd", "avg_children")


@dataclass
class RunMetrics(_Serializable):
    replication_id: int
    area_id: str
    women_count: int
    attacks: int = 0
    denounces: int = 0
    protections: int = 0
    convictions: int = 0

    def __post_init__(self):
        if self.women_count < 1:
            raise ValidationError("women_count", f"must be >= 1, got {self.women_count!r}")
        _check_nonneg(self, "attacks", "denounces", "protections", "convictions")

    @property
    def cases_per_100k(self) -> float:
        return self.attacks / self.women_count * 100000

    @property
    def denounces_per_100k(self) -> float:
        return self.denounces / self.women_count * 100000

    def counters_ordered(self) -> bool:
        return self.convictions <= self.protections <= self.denounces <= self.attacks

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["cases_per_100k"] = self.cases_per_100k
        d["denounces_per_100k"] = self.denounces_per_100k
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "RunMetrics":
        names = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})

"""The indicator of stress and its conversion to an attack probability.

The indicator is an additive score over demographic and situational
components, each scaled by a relevance weight (high or medium). A black
female agent gets a proportional uplift on the running sum, and the abuser's
score is then reduced by the family's deterrence history.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from .domain import Family, Gender, PersonAgent, SimParams, ValidationError

_PARTS = (
    "gender_base", "income_term", "household_income_term", "income_pc_term",
    "schooling_term", "age_term", "employment_term", "home_term",
    "firearm_term", "addiction_term", "history_term",
)


@dataclass(frozen=True)
class StressBreakdown:
    """Weighted contribution of every component plus the composed total."""

    gender_base: float
    income_term: float
    household_income_term: float
    income_pc_term: float
    schooling_term: float
    age_term: float
    employment_term: float
    home_term: float
    firearm_term: float
    addiction_term: float
    history_term: float
    race_multiplier_applied: bool
    race_uplift: float
    deterrence_reduction: float
    total: float

    @property
    def pre_race_sum(self) -> float:
        s = 0.0
        for name in _PARTS:
            s = s + getattr(self, name)
        return s

    def recompose(self) -> float:
        s = self.pre_race_sum
        if self.race_multiplier_applied:
            s = s * (1.0 + self.race_uplift)
        return s - self.deterrence_reduction

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def deterrence_reduction(family: Family, params: SimParams) -> float:
    """Stress removed from the abuser by denounces, protection and conviction."""
    return (params.weight_medium * family.denounce_count
            + params.weight_high * float(family.protection_granted)
            + params.weight_high * float(family.conviction))


def attack_probability(stress_total: float, params: SimParams) -> float:
    p = stress_total / params.model_scale
    if not p > 0.0:
        return 0.0
    return min(p, 1.0)


def schooling_factor(years_schooling: float, params: SimParams) -> float:
    term = 1.0 - years_schooling / params.divisor_constant
    if years_schooling < params.low_schooling_threshold:
        term = term * (1.0 + params.low_schooling_uplift)
    return term


def at_home(agent: PersonAgent, params: SimParams) -> bool:
    return params.distancing_enabled or not agent.employed


def compute_stress(agent: PersonAgent, family: Family, params: SimParams,
                   addiction_draw: float) -> StressBreakdown:
    """Score one adult.

    ``addiction_draw`` is the per-step uniform draw that scales the
    substance-use component; it only counts when the agent is addicted.
    """
    if agent.family_id != family.id:
        raise ValidationError("family_id", f"agent {agent.id} does not belong to family {family.id}")
    if agent.id not in (family.male_id, family.female_id):
        raise ValidationError("id", f"agent {agent.id} is not an adult of family {family.id}")
    if not 0.0 <= addiction_draw <= 1.0:
        raise ValidationError("addiction_draw", f"must lie in [0, 1], got {addiction_draw!r}")

    wh, wm = params.weight_high, params.weight_medium
    male = agent.gender is Gender.MALE
    home = params.home_term_no_work if at_home(agent, params) else params.home_term_work

    parts = dict(
        gender_base=params.gender_stress_male if male else params.gender_stress_female,
        income_term=wh * (1.0 - agent.income_norm),
        household_income_term=wm * (-family.household_income_norm),
        income_pc_term=wm * (1.0 - family.income_pc_norm),
        schooling_term=wh * schooling_factor(agent.years_schooling, params),
        age_term=wh * (1.0 if 18 < agent.age < 29 else 0.0),
        employment_term=wm * (1.0 if agent.employed else 0.0),
        home_term=wm * home,
        firearm_term=wh * wh * (1.0 if agent.has_gun else 0.0),
        addiction_term=wh * addiction_draw * (1.0 if agent.is_addicted else 0.0),
        history_term=wh * (family.violence_history / params.divisor_constant),
    )
    s = 0.0
    for name in _PARTS:
        s = s + parts[name]
    race = (not male) and agent.is_black
    if race:
        s = s * (1.0 + params.race_uplift)
    reduction = deterrence_reduction(family, params) if male else 0.0
    return StressBreakdown(
        **parts,
        race_multiplier_applied=race,
        race_uplift=params.race_uplift,
        deterrence_reduction=reduction,
        total=s - reduction,
    )

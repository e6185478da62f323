import math

import pytest
from hypothesis import given, settings, strategies as st

from vida.domain import Gender, SimParams, VictimGroup
from vida.stress import attack_probability, compute_stress, deterrence_reduction

from conftest import make_agent, make_family
from oracles import brute_force_stress


def test_female_example(params):
    agent = make_agent(id=1, gender=Gender.FEMALE, income_norm=1.0, years_schooling=10, age=40)
    family = make_family(household_income_norm=0.0, income_pc_norm=1.0)
    b = compute_stress(agent, family, params, 0.0)
    assert b.total == pytest.approx(3.55, abs=1e-12)
    assert b.home_term == pytest.approx(5 * 0.67)


def test_male_example(params):
    agent = make_agent(income_norm=0.5, years_schooling=4, age=25, employed=False, has_gun=True)
    family = make_family(household_income_norm=0.5, income_pc_norm=0.5, violence_history=2)
    b = compute_stress(agent, family, params, 0.9)
    assert b.schooling_term == pytest.approx(10 * 0.6 * 1.6)
    assert b.firearm_term == 100
    assert b.total == pytest.approx(130.75, abs=1e-9)
    assert attack_probability(b.total, params) == pytest.approx(0.13075, abs=1e-12)


def test_black_female_uplift(params):
    # income 0.1 -> 9, household 0 -> 0, pc 1 -> 0, schooling 10 -> 0, age 40, home 0.67 -> 3.35
    # -> S0 = 0.2 + 9 + 3.35 = 12.55; pick income to make S0 exactly 10
    agent = make_agent(id=1, gender=Gender.FEMALE, is_black=True, income_norm=1 - 6.45 / 10)
    family = make_family(household_income_norm=0.0, income_pc_norm=1.0)
    b = compute_stress(agent, family, params, 0.0)
    assert b.pre_race_sum == pytest.approx(10.0, abs=1e-12)
    assert b.race_multiplier_applied
    assert b.total == pytest.approx(13.0, abs=1e-12)


@pytest.mark.parametrize("den, prot, conv, expected", [(0, False, False, 0), (1, True, False, 15), (2, True, True, 30)])
def test_deterrence_reduction_examples(params, den, prot, conv, expected):
    group = VictimGroup.DENOUNCES_AFTER_FIRST if den else VictimGroup.NEVER_DENOUNCES
    fam = make_family(victim_group=group, denounce_count=den, protection_granted=prot, conviction=conv)
    assert deterrence_reduction(fam, params) == expected


def test_deterrence_only_hits_the_abuser(params):
    fam = make_family(victim_group=VictimGroup.DENOUNCES_AFTER_FIRST, denounce_count=1, protection_granted=True)
    male = compute_stress(make_agent(), fam, params, 0.0)
    female = compute_stress(make_agent(id=1, gender=Gender.FEMALE), fam, params, 0.0)
    assert male.deterrence_reduction == 15 and female.deterrence_reduction == 0


@pytest.mark.parametrize("s, p", [(130.75, 0.13075), (0.0, 0.0), (-5.0, 0.0), (2000.0, 1.0)])
def test_attack_probability_examples(params, s, p):
    assert attack_probability(s, params) == pytest.approx(p, abs=1e-15)


@given(st.floats(allow_nan=False))
def test_attack_probability_in_unit_interval(s):
    assert 0.0 <= attack_probability(s, SimParams()) <= 1.0


def test_rejects_mismatched_family(params):
    with pytest.raises(ValueError, match="family_id"):
        compute_stress(make_agent(family_id=3), make_family(id=0), params, 0.0)
    with pytest.raises(ValueError, match="addiction_draw"):
        compute_stress(make_agent(), make_family(), params, 1.5)


agents = st.fixed_dictionaries(dict(
    gender=st.sampled_from(list(Gender)), age=st.integers(18, 80), years_schooling=st.integers(0, 17),
    is_black=st.booleans(), income_norm=st.floats(0, 1), employed=st.booleans(), has_gun=st.booleans(),
    is_addicted=st.booleans(),
))
families = st.fixed_dictionaries(dict(
    household_income_norm=st.floats(0, 1), income_pc_norm=st.floats(0, 1), violence_history=st.integers(0, 30),
))


def _build(a, f):
    agent = make_agent(id=0 if a["gender"] is Gender.MALE else 1, **a)
    return agent, make_family(**f)


@given(a=agents, f=families, draw=st.floats(0, 1), dist=st.booleans())
def test_matches_brute_force(a, f, draw, dist):
    params = SimParams(distancing_enabled=dist)
    agent, fam = _build(a, f)
    got = compute_stress(agent, fam, params, draw)
    expected = brute_force_stress(dict(
        male=a["gender"] is Gender.MALE, income=a["income_norm"], household=f["household_income_norm"],
        income_pc=f["income_pc_norm"], schooling=a["years_schooling"], age=a["age"], black=a["is_black"],
        employed=a["employed"], gun=a["has_gun"], addicted=a["is_addicted"], draw=draw,
        history=f["violence_history"], denounces=0, protection=False, conviction=False),
        dict(params.to_dict(), distancing=dist))
    assert got.total == pytest.approx(expected, abs=1e-9)
    assert got.recompose() == pytest.approx(got.total, abs=1e-9)


@given(a=agents, f=families, draw=st.floats(0, 1))
def test_gun_adds_weight_high_squared(a, f, draw):
    params = SimParams()
    a = dict(a, has_gun=False)
    agent, fam = _build(a, f)
    without = compute_stress(agent, fam, params, draw).total
    agent.has_gun = True
    with_gun = compute_stress(agent, fam, params, draw).total
    factor = 1.3 if (a["gender"] is Gender.FEMALE and a["is_black"]) else 1.0
    assert with_gun - without == pytest.approx(100 * factor, abs=1e-9)


@settings(max_examples=200)
@given(a=agents, f=families, draw=st.floats(0, 1), field=st.sampled_from(["income_norm", "household_income_norm", "income_pc_norm"]),
       lo=st.floats(0, 1), hi=st.floats(0, 1))
def test_non_increasing_in_incomes(a, f, draw, field, lo, hi):
    lo, hi = min(lo, hi), max(lo, hi)
    params = SimParams()
    agent, fam = _build(a, f)
    target = agent if field == "income_norm" else fam
    setattr(target, field, lo)
    s_lo = compute_stress(agent, fam, params, draw).total
    setattr(target, field, hi)
    s_hi = compute_stress(agent, fam, params, draw).total
    assert s_hi <= s_lo + 1e-12


@given(a=agents, f=families, draw=st.floats(0, 1))
def test_non_increasing_in_schooling(a, f, draw):
    params = SimParams()
    agent, fam = _build(a, f)
    totals = []
    for years in range(18):
        agent.years_schooling = years
        totals.append(compute_stress(agent, fam, params, draw).total)
    assert all(b <= a_ + 1e-12 for a_, b in zip(totals, totals[1:]))


@given(d=st.integers(0, 10), prot=st.booleans(), conv=st.booleans())
def test_reduction_monotone(d, prot, conv):
    params = SimParams()
    conv = conv and prot
    d = max(d, 1) if prot else d
    base = deterrence_reduction(make_family(victim_group=1, denounce_count=d, protection_granted=prot, conviction=conv), params)
    more = deterrence_reduction(make_family(victim_group=1, denounce_count=d + 1, protection_granted=prot, conviction=conv), params)
    assert more >= base
    if not prot:
        with_prot = deterrence_reduction(make_family(victim_group=1, denounce_count=max(d, 1), protection_granted=True), params)
        assert with_prot >= deterrence_reduction(make_family(victim_group=1, denounce_count=max(d, 1)), params)
    if prot and not conv:
        with_conv = deterrence_reduction(make_family(victim_group=1, denounce_count=d, protection_granted=True, conviction=True), params)
        assert with_conv >= base


def test_age_window_is_open(params):
    fam = make_family()
    terms = {age: compute_stress(make_agent(age=age), fam, params, 0).age_term for age in (18, 19, 28, 29)}
    assert terms == {18: 0.0, 19: 10.0, 28: 10.0, 29: 0.0}


def test_distancing_forces_home(params):
    fam = make_family()
    worker = make_agent(employed=True)
    assert compute_stress(worker, fam, params, 0).home_term == pytest.approx(5 * 0.34)
    assert compute_stress(worker, fam, params.replace(distancing_enabled=True), 0).home_term == pytest.approx(5 * 0.67)
    assert math.isclose(compute_stress(worker, fam, params, 0).employment_term, 5.0)

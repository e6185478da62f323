import numpy as np
import pytest

from vida.domain import Family, Gender, PersonAgent, SimParams, VictimGroup
from vida.population import PopulationSample, synthetic_profile


class ScriptedRng:
    """Stands in for a Generator: hands out scripted uniforms in order."""

    def __init__(self, values):
        self.values = list(values)
        self.pos = 0

    def random(self, size=None):
        n = 1 if size is None else int(np.prod(size))
        chunk = self.values[self.pos:self.pos + n]
        if len(chunk) != n:
            raise AssertionError(f"script exhausted at position {self.pos} (wanted {n})")
        self.pos += n
        if size is None:
            return chunk[0]
        return np.array(chunk, dtype=float).reshape(size)


def make_agent(id=0, family_id=0, gender=Gender.MALE, age=40, years_schooling=10, is_black=False,
               income_norm=0.5, employed=False, has_gun=False, is_addicted=False, base_stress=None):
    if base_stress is None:
        base_stress = 0.8 if gender is Gender.MALE else 0.2
    return PersonAgent(id=id, gender=gender, age=age, years_schooling=years_schooling, is_black=is_black,
                       income_norm=income_norm, employed=employed, has_gun=has_gun,
                       is_addicted=is_addicted, base_stress=base_stress, family_id=family_id)


def make_family(id=0, household_income_norm=0.5, income_pc_norm=0.5, victim_group=VictimGroup.NEVER_DENOUNCES,
                **kw):
    return Family(id=id, area_id="test", male_id=2 * id, female_id=2 * id + 1, num_children=kw.pop("num_children", 0),
                  household_income_norm=household_income_norm, income_pc_norm=income_pc_norm,
                  victim_group=victim_group, **kw)


def make_world(n, male_kw=None, female_kw=None, family_kw=None):
    agents, families = [], []
    for f in range(n):
        agents.append(make_agent(id=2 * f, family_id=f, gender=Gender.MALE, **(male_kw or {})))
        agents.append(make_agent(id=2 * f + 1, family_id=f, gender=Gender.FEMALE, **(female_kw or {})))
        families.append(make_family(id=f, **(family_kw or {})))
    return PopulationSample.from_objects(families, agents, area_id="test")


@pytest.fixture
def params():
    return SimParams()


@pytest.fixture
def small_profile():
    return synthetic_profile(area_id="small", num_families_sample=200)


@pytest.fixture
def quiet_params():
    """Default model with volatility switched off."""
    return SimParams(employment_volatility=0.0, income_volatility=0.0)


# ------------------------------------------------------------------ acceptance reporting

ACCEPTANCE_RESULTS: dict[int, str] = {}


def record_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_RESULTS[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(ACCEPTANCE_RESULTS[number])

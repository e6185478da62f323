import numpy as np
import pytest
from scipy import stats

from vida.domain import Gender, SimParams, ValidationError
from vida.population import (ProfileFormatError, brasilia_like_profiles, load_area_profiles, sample_population,
                             synthetic_profile, write_area_profiles)

HEADER = ("area_id,region_id,name,num_families_sample,pct_female_black,pct_male_black,age_mean,age_sd,"
          "schooling_mean,schooling_sd,income_mean,income_sd,avg_children")


def _write(tmp_path, body, header=HEADER):
    path = tmp_path / "profiles.csv"
    path.write_text(header + "\n" + body, encoding="utf-8")
    return path


def test_load_three_rows(tmp_path):
    rows = "\n".join(f"a{i},r,Area {i},10,0.5,0.4,38,12,8,4,1500,1000,1.2" for i in range(3)) + "\n"
    profiles = load_area_profiles(_write(tmp_path, rows))
    assert [p.area_id for p in profiles] == ["a0", "a1", "a2"]
    assert profiles[0].pct_male_black == 0.4 and profiles[0].geometry is None


def test_out_of_range_names_row_and_field(tmp_path):
    path = _write(tmp_path, "a,r,A,10,0.5,0.4,38,12,8,4,1500,1000,1.2\nb,r,B,10,1.4,0.4,38,12,8,4,1500,1000,1.2\n")
    with pytest.raises(ValidationError) as err:
        load_area_profiles(path)
    assert err.value.field == "pct_female_black" and err.value.row == 3
    assert "row 3" in str(err.value)


def test_header_only_is_empty(tmp_path):
    assert load_area_profiles(_write(tmp_path, "")) == []


def test_parse_error_names_column(tmp_path):
    with pytest.raises(ProfileFormatError) as err:
        load_area_profiles(_write(tmp_path, "a,r,A,10,0.5,0.4,old,12,8,4,1500,1000,1.2\n"))
    assert err.value.column == "age_mean" and err.value.row == 2


def test_duplicate_area_rejected(tmp_path):
    row = "a,r,A,10,0.5,0.4,38,12,8,4,1500,1000,1.2\n"
    with pytest.raises(ProfileFormatError, match="duplicate"):
        load_area_profiles(_write(tmp_path, row + row))


def test_bad_header(tmp_path):
    with pytest.raises(ProfileFormatError, match="header"):
        load_area_profiles(_write(tmp_path, "", header="area_id,name"))


def test_write_then_load_roundtrip(tmp_path):
    profiles = [synthetic_profile(area_id=f"x{i}", income_mean=1000.1 + i,
                                  geometry="POLYGON ((0 0, 1 0, 1 1, 0 0))" if i else None) for i in range(3)]
    write_area_profiles(profiles, tmp_path / "p.csv", comment="note")
    assert load_area_profiles(tmp_path / "p.csv") == profiles


def test_bundled_fixture():
    profiles = brasilia_like_profiles()
    assert len(profiles) == 8
    assert all(p.geometry and p.region_id == "brasilia" for p in profiles)


def test_counts_and_structure(params):
    world = sample_population(synthetic_profile(num_families_sample=100), params, np.random.default_rng(0))
    world.validate()
    assert world.num_families == 100 and world.num_agents == 200
    assert len(world.families) == 100 and len(world.agents) == 200
    assert all(a.gender is (Gender.MALE if a.id % 2 == 0 else Gender.FEMALE) for a in world.agents)
    assert all(f.male_id == 2 * f.id and f.female_id == 2 * f.id + 1 for f in world.families)
    assert world.age.min() >= 18 and 0 <= world.schooling.min() and world.schooling.max() <= 17


def test_constant_income_normalises_to_half(params):
    world = sample_population(synthetic_profile(income_sd=0.0), params, np.random.default_rng(0))
    assert np.all(world.income_raw == 1500.0)
    assert np.all(world.income_norm == 0.5)
    # household still varies with children only through per-capita income
    assert np.all(world.household_norm == 0.5)


def test_sampling_is_deterministic(params, small_profile):
    a = sample_population(small_profile, params, np.random.default_rng(9))
    b = sample_population(small_profile, params, np.random.default_rng(9))
    for name in ("age", "schooling", "income_raw", "employed", "has_gun", "victim_group", "num_children"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))


def test_normalisation_spans_unit_interval(params, small_profile):
    world = sample_population(small_profile, params, np.random.default_rng(1))
    for arr in (world.income_norm, world.household_norm, world.pc_norm):
        assert arr.min() == 0.0 and arr.max() == 1.0


def test_large_sample_reproduces_profile_means():
    params = SimParams(pct_employed=0.3, pct_gun=0.2, pct_addicted=0.05)
    prof = synthetic_profile(num_families_sample=10000, age_mean=38, age_sd=12, schooling_mean=8, schooling_sd=4,
                             income_mean=1500, income_sd=1200, avg_children=1.3, pct_female_black=0.6,
                             pct_male_black=0.3)
    w = sample_population(prof, params, np.random.default_rng(2024))
    n = w.num_agents

    def within_3se(values, mean, sd):
        assert abs(values.mean() - mean) <= 3 * sd / np.sqrt(len(values))

    within_3se(w.age, 38, 12)
    within_3se(w.schooling, 8, 4)
    within_3se(w.income_raw, 1500, 1200)
    within_3se(w.num_children, 1.3, np.sqrt(1.3))
    for arr, p in ((w.employed, 0.3), (w.has_gun, 0.2), (w.is_addicted, 0.05),
                   (w.is_black[1::2], 0.6), (w.is_black[0::2], 0.3)):
        within_3se(arr.astype(float), p, np.sqrt(p * (1 - p)))
    assert n == 20000


def test_victim_groups_equal_thirds(params):
    w = sample_population(synthetic_profile(num_families_sample=10000), params, np.random.default_rng(5))
    counts = np.bincount(w.victim_group, minlength=3)
    assert stats.chisquare(counts).pvalue > 0.01

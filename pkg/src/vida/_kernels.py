"""Hot per-step kernels, in a vectorised numpy form and a numba loop form.

Both backends take the same arguments, mutate the same arrays in place and
produce bit-identical results (same operation order, no fastmath). The numba
path is used when numba imports and ``VIDA_USE_NUMBA`` is not ``0``.

Agent arrays are laid out family-major: agent ``2*f`` is the man of family
``f`` and agent ``2*f + 1`` the woman.

``coef`` packs the scalar parameters; see :func:`pack_coefficients`.
"""

from __future__ import annotations

import os

import numpy as np

# coef layout
GS_MALE, GS_FEMALE, W_HIGH, W_MED, DIVISOR, HOME_NO_WORK, HOME_WORK, \
    SCHOOL_THR, SCHOOL_UPLIFT, RACE_UPLIFT, DISTANCING, SCALE, DETERRENCE, \
    P_PROTECT, P_CONVICT, P_DENOUNCE_DIST, EMP_VOL, INC_VOL = range(18)
N_COEF = 18

# per-family event flags written by the trigger kernel
EV_ATTACK, EV_DENOUNCE, EV_PROTECT, EV_CONVICT = 1, 2, 4, 8


def pack_coefficients(params) -> np.ndarray:
    k = np.empty(N_COEF)
    k[GS_MALE] = params.gender_stress_male
    k[GS_FEMALE] = params.gender_stress_female
    k[W_HIGH] = params.weight_high
    k[W_MED] = params.weight_medium
    k[DIVISOR] = params.divisor_constant
    k[HOME_NO_WORK] = params.home_term_no_work
    k[HOME_WORK] = params.home_term_work
    k[SCHOOL_THR] = params.low_schooling_threshold
    k[SCHOOL_UPLIFT] = params.low_schooling_uplift
    k[RACE_UPLIFT] = params.race_uplift
    k[DISTANCING] = 1.0 if params.distancing_enabled else 0.0
    k[SCALE] = params.model_scale
    k[DETERRENCE] = 1.0 if params.deterrence_enabled else 0.0
    k[P_PROTECT] = params.chance_protection
    k[P_CONVICT] = params.chance_conviction
    k[P_DENOUNCE_DIST] = params.distancing_denounce_chance
    k[EMP_VOL] = params.employment_volatility
    k[INC_VOL] = params.income_volatility
    return k


def normalize(x, lo, hi):
    """Min-max map onto [0, 1]; a degenerate range maps everything to 0.5."""
    if hi > lo:
        return np.clip((x - lo) / (hi - lo), 0.0, 1.0)
    return np.full(np.shape(x), 0.5)


# ---------------------------------------------------------------- numpy path

def stress_numpy(gender, age, schooling, is_black, income_norm, employed, has_gun,
                 is_addicted, hh_norm, pc_norm, history, denounce, protection,
                 conviction, addiction_draw, coef, out):
    wh = coef[W_HIGH]
    wm = coef[W_MED]
    male = gender == 0
    hh = np.repeat(hh_norm, 2)
    pc = np.repeat(pc_norm, 2)
    hist = np.repeat(history, 2)

    school = 1.0 - schooling / coef[DIVISOR]
    school = np.where(schooling < coef[SCHOOL_THR], school * (1.0 + coef[SCHOOL_UPLIFT]), school)
    at_home = employed == 0
    if coef[DISTANCING] != 0.0:
        at_home = np.ones_like(at_home)
    home = np.where(at_home, coef[HOME_NO_WORK], coef[HOME_WORK])
    young = (age > 18) & (age < 29)

    s = np.where(male, coef[GS_MALE], coef[GS_FEMALE])
    s = s + wh * (1.0 - income_norm)
    s = s + wm * (-hh)
    s = s + wm * (1.0 - pc)
    s = s + wh * school
    s = s + wh * young.astype(np.float64)
    s = s + wm * employed.astype(np.float64)
    s = s + wm * home
    s = s + wh * wh * has_gun.astype(np.float64)
    s = s + wh * addiction_draw * is_addicted.astype(np.float64)
    s = s + wh * (hist / coef[DIVISOR])
    s = np.where(~male & is_black, s * (1.0 + coef[RACE_UPLIFT]), s)

    reduction = (wm * denounce + wh * protection.astype(np.float64)
                 + wh * conviction.astype(np.float64))
    s[0::2] = s[0::2] - reduction
    out[:] = s


def trigger_numpy(stress, attack_draw, deter_draw, group, history, denounce,
                  protection, conviction, coef, events):
    """Violence trigger then, if enabled, the deterrence ladder.

    ``deter_draw`` has shape (n_families, 3): distancing denounce gate,
    protection gate, conviction gate. Returns the four step counters.
    """
    p = np.clip(stress[0::2] / coef[SCALE], 0.0, 1.0)
    attacked = attack_draw < p
    history += attacked
    events[:] = attacked * EV_ATTACK
    n_attacks = int(attacked.sum())
    if coef[DETERRENCE] == 0.0:
        return n_attacks, 0, 0, 0

    eligible = attacked & (((group == 1) & (history >= 1)) | ((group == 2) & (history >= 3)))
    if coef[DISTANCING] != 0.0:
        eligible &= deter_draw[:, 0] < coef[P_DENOUNCE_DIST]
    denounce += eligible
    new_prot = eligible & ~protection & (deter_draw[:, 1] < coef[P_PROTECT])
    protection |= new_prot
    new_conv = new_prot & ~conviction & (deter_draw[:, 2] < coef[P_CONVICT])
    conviction |= new_conv
    events += eligible * EV_DENOUNCE + new_prot * EV_PROTECT + new_conv * EV_CONVICT
    return n_attacks, int(eligible.sum()), int(new_prot.sum()), int(new_conv.sum())


def volatility_numpy(employed, income_raw, income_norm, num_children, hh_norm, pc_norm,
                     bounds, flip_draw, eps_draw, coef):
    """Random employment flips and symmetric multiplicative income jitter.

    ``bounds`` holds the sample's original (lo, hi) pairs for individual,
    household and per-capita income. With zero income volatility incomes and
    their normalised values are left untouched.
    """
    flips = flip_draw < coef[EMP_VOL]
    employed ^= flips
    if coef[INC_VOL] == 0.0:
        return
    eps = (2.0 * eps_draw - 1.0) * coef[INC_VOL]
    income_raw *= 1.0 + eps
    income_norm[:] = normalize(income_raw, bounds[0], bounds[1])
    household = income_raw[0::2] + income_raw[1::2]
    hh_norm[:] = normalize(household, bounds[2], bounds[3])
    pc_norm[:] = normalize(household / (2.0 + num_children), bounds[4], bounds[5])


# ---------------------------------------------------------------- loop path

def _norm1(x, lo, hi):
    if hi > lo:
        v = (x - lo) / (hi - lo)
        if v < 0.0:
            return 0.0
        if v > 1.0:
            return 1.0
        return v
    return 0.5


def stress_loop(gender, age, schooling, is_black, income_norm, employed, has_gun,
                is_addicted, hh_norm, pc_norm, history, denounce, protection,
                conviction, addiction_draw, coef, out):
    wh = coef[W_HIGH]
    wm = coef[W_MED]
    for i in range(gender.shape[0]):
        f = i // 2
        male = gender[i] == 0
        school = 1.0 - schooling[i] / coef[DIVISOR]
        if schooling[i] < coef[SCHOOL_THR]:
            school = school * (1.0 + coef[SCHOOL_UPLIFT])
        if coef[DISTANCING] != 0.0 or not employed[i]:
            home = coef[HOME_NO_WORK]
        else:
            home = coef[HOME_WORK]
        young = 1.0 if (age[i] > 18 and age[i] < 29) else 0.0

        s = coef[GS_MALE] if male else coef[GS_FEMALE]
        s = s + wh * (1.0 - income_norm[i])
        s = s + wm * (-hh_norm[f])
        s = s + wm * (1.0 - pc_norm[f])
        s = s + wh * school
        s = s + wh * young
        s = s + wm * (1.0 if employed[i] else 0.0)
        s = s + wm * home
        s = s + wh * wh * (1.0 if has_gun[i] else 0.0)
        s = s + wh * addiction_draw[i] * (1.0 if is_addicted[i] else 0.0)
        s = s + wh * (history[f] / coef[DIVISOR])
        if not male and is_black[i]:
            s = s * (1.0 + coef[RACE_UPLIFT])
        if male:
            reduction = (wm * denounce[f] + wh * (1.0 if protection[f] else 0.0)
                         + wh * (1.0 if conviction[f] else 0.0))
            s = s - reduction
        out[i] = s


def trigger_loop(stress, attack_draw, deter_draw, group, history, denounce,
                 protection, conviction, coef, events):
    n_att = 0
    n_den = 0
    n_prot = 0
    n_conv = 0
    deter_on = coef[DETERRENCE] != 0.0
    distancing = coef[DISTANCING] != 0.0
    for f in range(group.shape[0]):
        p = stress[2 * f] / coef[SCALE]
        p = min(max(p, 0.0), 1.0)
        ev = 0
        if attack_draw[f] < p:
            ev = EV_ATTACK
            history[f] += 1
            n_att += 1
            if deter_on:
                g = group[f]
                eligible = (g == 1 and history[f] >= 1) or (g == 2 and history[f] >= 3)
                if eligible and distancing:
                    eligible = deter_draw[f, 0] < coef[P_DENOUNCE_DIST]
                if eligible:
                    ev += EV_DENOUNCE
                    denounce[f] += 1
                    n_den += 1
                    if not protection[f] and deter_draw[f, 1] < coef[P_PROTECT]:
                        protection[f] = True
                        ev += EV_PROTECT
                        n_prot += 1
                        if not conviction[f] and deter_draw[f, 2] < coef[P_CONVICT]:
                            conviction[f] = True
                            ev += EV_CONVICT
                            n_conv += 1
        events[f] = ev
    return n_att, n_den, n_prot, n_conv


def volatility_loop(employed, income_raw, income_norm, num_children, hh_norm, pc_norm,
                    bounds, flip_draw, eps_draw, coef):
    for i in range(employed.shape[0]):
        if flip_draw[i] < coef[EMP_VOL]:
            employed[i] = not employed[i]
    if coef[INC_VOL] == 0.0:
        return
    for i in range(employed.shape[0]):
        eps = (2.0 * eps_draw[i] - 1.0) * coef[INC_VOL]
        income_raw[i] *= 1.0 + eps
        income_norm[i] = _norm1(income_raw[i], bounds[0], bounds[1])
    for f in range(hh_norm.shape[0]):
        household = income_raw[2 * f] + income_raw[2 * f + 1]
        hh_norm[f] = _norm1(household, bounds[2], bounds[3])
        pc_norm[f] = _norm1(household / (2.0 + num_children[f]), bounds[4], bounds[5])


# ---------------------------------------------------------------- selection

NUMPY = {"stress": stress_numpy, "trigger": trigger_numpy, "volatility": volatility_numpy}

try:
    import numba

    _jit = numba.njit(cache=True, nogil=True)
    _norm1 = _jit(_norm1)
    NUMBA = {
        "stress": _jit(stress_loop),
        "trigger": _jit(trigger_loop),
        "volatility": _jit(volatility_loop),
    }
except ImportError:  # pragma: no cover - numba is optional
    NUMBA = None

NUMBA_AVAILABLE = NUMBA is not None


def numba_requested() -> bool:
    return os.environ.get("VIDA_USE_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


def get_backend(name: str | None = None) -> dict:
    """Return the kernel table for ``"numba"``, ``"numpy"`` or the env default."""
    if name is None:
        name = "numba" if (NUMBA_AVAILABLE and numba_requested()) else "numpy"
    if name == "numba":
        if not NUMBA_AVAILABLE:
            raise RuntimeError("numba backend requested but numba is not installed")
        return NUMBA
    if name == "numpy":
        return NUMPY
    raise ValueError(f"unknown kernel backend {name!r}")


def backend_name(table: dict) -> str:
    return "numba" if table is NUMBA else "numpy"

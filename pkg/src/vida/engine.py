"""Replication engine: the per-step loop and the parallel batch harness.

Each step (1) rescores every adult, (2) lets each abuser attack with
probability given by his score, (3) runs the deterrence ladder for attacked
families when enabled and (4) applies employment and income volatility.

Every step consumes the same fixed blocks of uniforms whatever happens, in
this order: addiction draws (one per adult), attack draws (one per family),
deterrence draws (three per family: distancing gate, protection,
conviction), employment flips and income jitter (one each per adult). Cells
that differ only in flags therefore see identical random numbers.
"""

from __future__ import annotations

import logging
import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .domain import AreaProfile, Family, RunMetrics, SimParams, VictimGroup
from .population import PopulationSample, sample_population

log = logging.getLogger(__name__)

POPULATION_STREAM = 0
DYNAMICS_STREAM = 1


@dataclass(frozen=True)
class RngPlan:
    """Counter-style seed splitting.

    The stream for (replication, area, purpose) is a Philox generator keyed
    by ``SeedSequence(master_seed, spawn_key=(replication_id, crc32(area_id),
    purpose))``; nothing depends on scheduling or on which other streams
    were used.
    """

    master_seed: int

    @staticmethod
    def area_key(area_id: str) -> int:
        return zlib.crc32(area_id.encode("utf-8"))

    def seed_sequence(self, replication_id: int, area_id: str = "", stream: int = 0) -> np.random.SeedSequence:
        return np.random.SeedSequence(
            self.master_seed, spawn_key=(replication_id, self.area_key(area_id), stream))

    def child_seed(self, replication_id: int, area_id: str = "", stream: int = 0) -> int:
        words = self.seed_sequence(replication_id, area_id, stream).generate_state(2, np.uint64)
        return int(words[0]) << 64 | int(words[1])

    def generator(self, replication_id: int, area_id: str = "", stream: int = 0) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(self.seed_sequence(replication_id, area_id, stream)))


def new_metrics(world: PopulationSample, replication_id: int = 0) -> RunMetrics:
    return RunMetrics(replication_id=replication_id, area_id=world.area_id, women_count=world.num_families)


def update_stress(world: PopulationSample, params: SimParams, addiction_draw, kernels=None,
                  coef=None) -> None:
    kernels = kernels or _kernels.get_backend()
    coef = _kernels.pack_coefficients(params) if coef is None else coef
    kernels["stress"](
        world.gender, world.age, world.schooling, world.is_black, world.income_norm,
        world.employed, world.has_gun, world.is_addicted, world.household_norm, world.pc_norm,
        world.violence_history, world.denounce_count, world.protection, world.conviction,
        np.ascontiguousarray(addiction_draw, dtype=np.float64), coef, world.current_stress)


def apply_volatility(world: PopulationSample, params: SimParams, rng, kernels=None, coef=None) -> None:
    """Flip each adult's employment with ``employment_volatility`` and jitter
    raw income by a uniform factor in ``1 ± income_volatility``."""
    kernels = kernels or _kernels.get_backend()
    coef = _kernels.pack_coefficients(params) if coef is None else coef
    m = world.num_agents
    flip = np.asarray(rng.random(m), dtype=np.float64)
    eps = np.asarray(rng.random(m), dtype=np.float64)
    kernels["volatility"](world.employed, world.income_raw, world.income_norm, world.num_children,
                          world.household_norm, world.pc_norm, world.income_normalization,
                          flip, eps, coef)


def step(world: PopulationSample, params: SimParams, rng, metrics: RunMetrics,
         kernels=None, coef=None) -> np.ndarray:
    """Advance ``world`` by one step and return per-family event flags.

    Flags are bit masks of ``EV_ATTACK``, ``EV_DENOUNCE``, ``EV_PROTECT`` and
    ``EV_CONVICT`` from :mod:`vida._kernels`.
    """
    kernels = kernels or _kernels.get_backend()
    coef = _kernels.pack_coefficients(params) if coef is None else coef
    n, m = world.num_families, world.num_agents

    update_stress(world, params, rng.random(m), kernels, coef)
    attack_draw = np.asarray(rng.random(n), dtype=np.float64)
    deter_draw = np.asarray(rng.random((n, 3)), dtype=np.float64).reshape(n, 3)
    events = np.zeros(n, dtype=np.int64)
    a, d, p, c = kernels["trigger"](world.current_stress, attack_draw, deter_draw, world.victim_group,
                                    world.violence_history, world.denounce_count, world.protection,
                                    world.conviction, coef, events)
    metrics.attacks += int(a)
    metrics.denounces += int(d)
    metrics.protections += int(p)
    metrics.convictions += int(c)
    apply_volatility(world, params, rng, kernels, coef)
    return events


def deterrence_process(family: Family, params: SimParams, rng, metrics: RunMetrics) -> None:
    """Run the denounce -> protection -> conviction ladder for one attacked family.

    Consumes three uniforms (distancing gate, protection, conviction) so it
    lines up with the vectorised path in :func:`step`.
    """
    gate, u_prot, u_conv = (float(x) for x in np.asarray(rng.random(3)).ravel())
    group = family.victim_group
    if group is VictimGroup.NEVER_DENOUNCES:
        return
    threshold = 1 if group is VictimGroup.DENOUNCES_AFTER_FIRST else 3
    if family.violence_history < threshold:
        return
    if params.distancing_enabled and not gate < params.distancing_denounce_chance:
        return
    family.denounce_count += 1
    metrics.denounces += 1
    if not family.protection_granted and u_prot < params.chance_protection:
        family.protection_granted = True
        metrics.protections += 1
        if not family.conviction and u_conv < params.chance_conviction:
            family.conviction = True
            metrics.convictions += 1


def run_world(world: PopulationSample, params: SimParams, rng, metrics: RunMetrics,
              kernels=None) -> RunMetrics:
    kernels = kernels or _kernels.get_backend()
    coef = _kernels.pack_coefficients(params)
    for _ in range(params.steps_per_run):
        step(world, params, rng, metrics, kernels, coef)
    return metrics


def run_replication(profile: AreaProfile, params: SimParams, replication_id: int,
                    kernels=None) -> RunMetrics:
    plan = RngPlan(params.master_seed)
    world = sample_population(profile, params, plan.generator(replication_id, profile.area_id, POPULATION_STREAM))
    metrics = new_metrics(world, replication_id)
    rng = plan.generator(replication_id, profile.area_id, DYNAMICS_STREAM)
    return run_world(world, params, rng, metrics, kernels)


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get("VIDA_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    return threads


class BatchError(RuntimeError):
    pass


def run_batch(profiles: Sequence[AreaProfile], params: SimParams, threads: int | None = None,
              kernels=None) -> list[RunMetrics]:
    """Run ``params.replications`` replications of every profile.

    Results are profile-major (all replications of the first profile, then
    the second...) and identical for any thread count.
    """
    kernels = kernels or _kernels.get_backend()
    jobs = [(p, r) for p in profiles for r in range(params.replications)]
    workers = min(resolve_threads(threads), max(len(jobs), 1))

    def one(job):
        profile, rep = job
        try:
            return run_replication(profile, params, rep, kernels)
        except Exception as exc:
            raise BatchError(f"replication {rep} of area {profile.area_id!r} failed: {exc}") from exc

    log.debug("running %d replications on %d thread(s) with %s kernels",
              len(jobs), workers, _kernels.backend_name(kernels))
    if workers == 1:
        return [one(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, jobs))

"""Packet-error evaluation with true gains, user mobility and the online loop."""
from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .assign import SlotAssignment, binary_search, complete_randomly, round_gram
from .baselines import HeuristicKind, greedy_assign
from .canonical import GramSolution
from .errors import InvalidArgument, SigSdpError
from .graph import NetworkState, build_state
from .mmw import MmwConfig, MmwSolver
from .scenario import PowerProfile, Scenario, decoding_error_rate, power_profile


@dataclass(frozen=True)
class ErrorReport:
    per_user_error: np.ndarray
    sinr: np.ndarray
    max_error_rate: float

    @property
    def mean_error(self) -> float:
        return float(np.mean(self.per_user_error))

    @property
    def violation_fraction(self) -> float:
        return float(np.mean(self.per_user_error > self.max_error_rate))


def slot_sinr(scenario: Scenario, profile: PowerProfile, slots) -> np.ndarray:
    """SINR of every user at its own BS given everyone's slot, true gains."""
    slots = np.asarray(slots)
    assoc = np.asarray(profile.assoc)
    users = np.arange(scenario.n_users)
    rx = profile.tx_power[:, None] * scenario.path_gain        # (K, A) watts at each BS
    per_slot = np.zeros((int(slots.max()) + 1, scenario.n_bs))
    np.add.at(per_slot, slots, rx)
    own = rx[users, assoc]
    interference = per_slot[slots, assoc] - own
    return own / (scenario.phy.noise_power + np.maximum(interference, 0.0))


def evaluate(scenario: Scenario, profile: PowerProfile, assignment: SlotAssignment) -> ErrorReport:
    """Per-user packet error rates.

    Within each (BS, slot) only the strongest user is decoded; ties go to
    the lower index and the others lose their packet.
    """
    if not assignment.complete:
        raise InvalidArgument("evaluate needs a complete assignment")
    if assignment.n_users != scenario.n_users:
        raise InvalidArgument("assignment and scenario disagree on the number of users")
    k = scenario.n_users
    slots = assignment.slots
    sinr = slot_sinr(scenario, profile, slots)
    err = decoding_error_rate(sinr, scenario.phy)
    group = slots * scenario.n_bs + np.asarray(profile.assoc)
    order = np.lexsort((np.arange(k), -sinr, group))
    first = np.ones(k, dtype=bool)
    first[1:] = group[order][1:] != group[order][:-1]
    lost = np.zeros(k, dtype=bool)
    lost[order[~first]] = True
    err = np.where(lost, 1.0, err)
    return ErrorReport(err, sinr, scenario.phy.max_error_rate)


# -- mobility --------------------------------------------------------------------

@dataclass(frozen=True)
class MobilityModel:
    speed_mps: float
    headings: np.ndarray
    seed: int
    step: int = 0

    def __post_init__(self):
        if self.speed_mps < 0:
            raise InvalidArgument("speed must be nonnegative")

    @classmethod
    def random(cls, n_users: int, speed_mps: float, seed: int) -> "MobilityModel":
        rng = np.random.default_rng([seed, 0x6D6F76])
        return cls(speed_mps, rng.uniform(0.0, 2 * math.pi, n_users), seed)


def step_mobility(scenario: Scenario, model: MobilityModel, dt_s: float):
    """Advance users along their headings; returns ``(scenario, model)``.

    A user that would leave the square stops on the boundary and draws a
    new heading uniformly over the directions pointing inside.
    """
    if dt_s <= 0:
        raise InvalidArgument("dt must be positive")
    if model.speed_mps == 0:
        return scenario, replace(model, step=model.step + 1)
    side = scenario.side_m
    h = model.headings
    pos = scenario.user_positions + model.speed_mps * dt_s * np.column_stack([np.cos(h), np.sin(h)])
    below, above = pos < 0, pos > side
    hit = np.any(below | above, axis=1)
    pos = np.clip(pos, 0.0, side)
    headings = h.copy()
    if hit.any():
        rng = np.random.default_rng([model.seed, model.step + 1])
        normal = below[hit].astype(float) - above[hit].astype(float)   # inward wall normals
        walls = np.abs(normal).sum(axis=1)
        half = np.where(walls > 1, math.pi / 4, math.pi / 2)
        base = np.arctan2(normal[:, 1], normal[:, 0])
        headings[hit] = base + rng.uniform(-1.0, 1.0, hit.sum()) * half
    return scenario.with_users(pos), replace(model, headings=headings, step=model.step + 1)


# -- planners ------------------------------------------------------------------------

@dataclass(frozen=True)
class Plan:
    z_slots: int
    assignment: SlotAssignment
    gram: GramSolution | None = None
    round_seed: list | None = None


Planner = Callable[[NetworkState], Plan]


def framework_planner(alpha: float, cfg: MmwConfig = MmwConfig(), seed: int = 0) -> Planner:
    def plan(state):
        r = binary_search(state, MmwSolver(cfg, alpha), alpha, seed)
        return Plan(r.z_slots, r.assignment, r.gram, r.round_seed)
    return plan


def heuristic_planner(alpha: float, kind: HeuristicKind = HeuristicKind.MIN_INTERFERENCE_POWER) -> Planner:
    def plan(state):
        a = greedy_assign(state, kind, alpha)
        return Plan(a.z_slots, a)
    return plan


# -- online loop -------------------------------------------------------------------

@dataclass(frozen=True)
class OnlineConfig:
    """``latency_s=None`` charges measured wall-clock time per planner call."""

    horizon_slots: int
    latency_s: float | None = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.horizon_slots < 1:
            raise InvalidArgument("horizon must be positive")
        if self.latency_s is not None and self.latency_s < 0:
            raise InvalidArgument("latency must be nonnegative")


@dataclass(frozen=True)
class PeriodRecord:
    period: int
    slot: int
    time_s: float
    z_slots: int
    mean_error: float
    violation_fraction: float
    stale: bool


@dataclass
class OnlineResult:
    periods: list = field(default_factory=list)
    events: list = field(default_factory=list)   # (slot, kind, detail)

    @property
    def mean_error(self) -> float:
        if not self.periods:
            return math.nan
        return float(np.mean([p.mean_error for p in self.periods]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["period", "time_s", "z_slots", "mean_error", "violation_fraction", "stale"])
        for p in self.periods:
            w.writerow([p.period, repr(p.time_s), p.z_slots, repr(p.mean_error),
                        repr(p.violation_fraction), int(p.stale)])
        return buf.getvalue()


def _measure(scenario):
    profile = power_profile(scenario)
    return profile, build_state(scenario, profile)


def run_online(scenario: Scenario, mobility: MobilityModel, cfg: OnlineConfig,
               planner: Planner, alpha: float | None = None) -> OnlineResult:
    """Planner and network in parallel on a virtual slot clock.

    While a plan is being computed the network re-rounds the plan in force
    against the state at the start of every period, reusing the rounding
    directions that produced the plan's own assignment.  A computation started
    at slot ``t`` returns at ``t + ceil(tau / (slot * Z)) * Z`` with ``Z``
    the slot count in force.  With zero latency the fresh plan is used
    directly in the period that starts when it was requested.
    """
    if alpha is None:
        alpha = scenario.phy.power_margin
    slot_s = scenario.phy.slot_duration_s
    out = OnlineResult()

    def launch(state, t):
        t0 = time.perf_counter()
        try:
            plan = planner(state)
        except SigSdpError as exc:
            out.events.append((t, "planner-failed", str(exc)))
            plan = None
        tau = time.perf_counter() - t0 if cfg.latency_s is None else cfg.latency_s
        return plan, tau

    def advance(sc, mob, slots_elapsed):
        if slots_elapsed > 0:
            sc, mob = step_mobility(sc, mob, slots_elapsed * slot_s)
        return sc, mob

    sc, mob = scenario, mobility
    profile, state = _measure(sc)
    t = 0
    # initial computation: nothing is transmitted until it returns
    plan, tau = launch(state, t)
    while plan is None:
        t += 1
        if t >= cfg.horizon_slots:
            return out
        sc, mob = advance(sc, mob, 1)
        profile, state = _measure(sc)
        plan, tau = launch(state, t)
    wait = math.ceil(tau / (slot_s * plan.z_slots)) * plan.z_slots
    out.events.append((t + wait, "plan", plan.z_slots))
    sc, mob = advance(sc, mob, wait)
    t += wait
    current, fresh = plan, wait == 0
    period = 0

    while t < cfg.horizon_slots:
        profile, state = _measure(sc)
        pending, tau = launch(state, t)
        n_periods = math.ceil(tau / (slot_s * current.z_slots))
        if pending is not None and n_periods == 0:
            current, fresh = pending, True
        for j in range(max(1, n_periods)):
            if t >= cfg.horizon_slots:
                break
            if j > 0:
                profile, state = _measure(sc)
            use_own = fresh and j == 0
            if use_own:
                asg = current.assignment
            elif current.gram is not None:
                seed = current.round_seed if current.round_seed is not None else [cfg.seed, t]
                asg = round_gram(current.gram, state, current.z_slots, alpha, seed)
            else:
                asg = SlotAssignment(current.z_slots, current.assignment.slots)
            if not asg.complete:
                asg = complete_randomly(asg, np.random.default_rng([cfg.seed, t, 1]))
            rep = evaluate(sc, profile, asg)
            out.periods.append(PeriodRecord(period, t, t * slot_s, current.z_slots, rep.mean_error,
                                            rep.violation_fraction, not use_own))
            period += 1
            sc, mob = advance(sc, mob, current.z_slots)
            t += current.z_slots
        fresh = False
        if pending is not None and n_periods > 0:
            current = pending
            out.events.append((t, "plan", pending.z_slots))
    return out

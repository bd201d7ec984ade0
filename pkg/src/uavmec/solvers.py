"""Decision-space solvers over the schedule evaluator.

The main solver is a whale-style metaheuristic run in a continuous
box [1, V]^M and discretized only at fitness evaluation. Alongside it:
an exhaustive oracle for small instances, the everything-local
baseline, three bandwidth allocators, and an alternating loop that
re-optimizes offloading and bandwidth in turns.
"""
from __future__ import annotations

import itertools
import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import channel
from .channel import BandwidthAllocation
from .evaluator import (
    Evaluator,
    OffloadDecision,
    PenaltyConfig,
    decision_from_vector,
    decision_to_vector,
)
from .scenario import Scenario


class NoFeasibleDecisionError(Exception):
    """Raised when no decision in the searched space meets every energy budget."""


class StateSpaceCapError(Exception):
    """Raised when the exhaustive space V**M exceeds the configured cap."""


@dataclass(frozen=True)
class DwoaConfig:
    agents: int = 100
    max_iterations: int = 50
    penalty: PenaltyConfig = field(default_factory=PenaltyConfig)
    seed: int = 0
    spiral_b: float = 1.0
    upload_model: str = "cumulative"

    def __post_init__(self):
        if self.agents < 1:
            raise ValueError("agents must be >= 1")
        # 0 is allowed and degenerates to random search over the initial pool
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")


@dataclass
class SolverRun:
    solver: str
    seed: Optional[int]
    decision: OffloadDecision
    beta: BandwidthAllocation
    objective_s: float
    feasible: bool
    trace: List[float]
    wall_time_s: float
    config: Dict[str, object] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, object]:
        return {
            "solver": self.solver,
            "seed": self.seed,
            "decision": {str(u): list(v) for u, v in self.decision.x.items()},
            "beta": {f"{v},{u}": b for (v, u), b in self.beta.fractions.items()},
            "objective_s": self.objective_s,
            "feasible": self.feasible,
            "trace": list(self.trace),
            "wall_time_s": self.wall_time_s,
            "config": self.config,
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    @staticmethod
    def from_dict(d: Dict[str, object]) -> "SolverRun":
        decision = OffloadDecision(
            {int(u): tuple(int(x) for x in v) for u, v in d["decision"].items()}
        )
        fr = {}
        for key, b in d["beta"].items():
            v, u = key.split(",")
            fr[(int(v), int(u))] = float(b)
        return SolverRun(
            solver=d["solver"],
            seed=d["seed"],
            decision=decision,
            beta=BandwidthAllocation(fr),
            objective_s=float(d["objective_s"]),
            feasible=bool(d["feasible"]),
            trace=[float(x) for x in d["trace"]],
            wall_time_s=float(d["wall_time_s"]),
            config=dict(d.get("config", {})),
        )


def discretize_slot(x: float, v_count: int) -> int:
    """Continuous coordinate -> UAV slot: round half down, clamp to [1, V]."""
    k = math.ceil(x - 0.5)
    if k < 1:
        return 1
    if k > v_count:
        return v_count
    return k


def discretize_vector(position: Sequence[float], v_count: int) -> Tuple[int, ...]:
    return tuple(discretize_slot(x, v_count) for x in position)


def discretize(position: Sequence[float], scenario: Scenario) -> OffloadDecision:
    """Continuous agent position -> concrete offloading decision."""
    return decision_from_vector(
        scenario, discretize_vector(position, len(scenario.uavs))
    )


def _discretize_into(row: np.ndarray, v_count: int, out: List[int]) -> List[int]:
    for i in range(len(out)):
        k = math.ceil(row[i] - 0.5)
        out[i] = 1 if k < 1 else (v_count if k > v_count else k)
    return out


@dataclass
class WoaState:
    """Population state of the whale search.

    Positions stay continuous in [1, V]^M; best_value is the penalized
    fitness of the best discretized position ever seen and never rises.
    The exploration weight a holds the value the next step will use.
    """

    positions: np.ndarray
    best_position: np.ndarray
    best_value: float
    iteration: int
    max_iterations: int
    a: float
    v_count: int
    spiral_b: float = 1.0
    rngs: List[np.random.Generator] = field(default_factory=list, repr=False)
    scratch: List[int] = field(default_factory=list, repr=False)


FitnessFn = Callable[[Sequence[int]], float]


def woa_init(
    fitness: FitnessFn,
    m: int,
    v_count: int,
    agents: int,
    max_iterations: int,
    seed: int,
    spiral_b: float = 1.0,
) -> WoaState:
    """Uniform random population in [1, V]^M, one independent stream per
    agent (so a population prefix is reproducible regardless of N)."""
    rngs = [
        np.random.Generator(np.random.PCG64(ss))
        for ss in np.random.SeedSequence(seed).spawn(agents)
    ]
    pos = np.empty((agents, m))
    scratch = [0] * m
    best_value = math.inf
    best_i = 0
    for i, rng in enumerate(rngs):
        pos[i] = rng.uniform(1.0, v_count, m)
        f = fitness(_discretize_into(pos[i], v_count, scratch))
        if f < best_value:
            best_value = f
            best_i = i
    return WoaState(
        positions=pos,
        best_position=pos[best_i].copy(),
        best_value=best_value,
        iteration=0,
        max_iterations=max_iterations,
        a=2.0,
        v_count=v_count,
        spiral_b=spiral_b,
        rngs=rngs,
        scratch=scratch,
    )


def woa_step(state: WoaState, fitness: FitnessFn) -> WoaState:
    """One synchronous population update (encircle / spiral / random
    search per agent), fitness re-evaluated on the discretized position,
    incumbent updated on strict improvement.

    All agents move relative to a snapshot of the population and the
    incumbent taken at iteration entry, and each draws from its own
    stream, so the result does not depend on evaluation order (fitness
    calls could run in parallel). Mutates and returns state.
    """
    a = state.a
    b = state.spiral_b
    v_count = state.v_count
    pos = state.positions
    old = pos.copy()
    best_pos = state.best_position
    scratch = state.scratch
    n = len(state.rngs)
    cand_val = math.inf
    cand_i = -1
    for i, rng in enumerate(state.rngs):
        r = rng.random()
        p = rng.random()
        l = rng.uniform(-1.0, 1.0)
        A = 2.0 * a * r - a
        C = 2.0 * r
        xi = pos[i]
        if p < 0.5:
            if abs(A) < 1.0:
                d = np.abs(C * best_pos - old[i])
                xi[:] = best_pos - A * d
            else:
                j = int(rng.integers(n))
                d = np.abs(C * old[j] - old[i])
                xi[:] = old[j] - A * d
        else:
            d = np.abs(best_pos - old[i])
            xi[:] = d * math.exp(b * l) * math.cos(2.0 * math.pi * l) + best_pos
        np.clip(xi, 1.0, v_count, out=xi)
        f = fitness(_discretize_into(xi, v_count, scratch))
        if f < cand_val:
            cand_val = f
            cand_i = i
    if cand_val < state.best_value:
        state.best_value = cand_val
        state.best_position = pos[cand_i].copy()
    state.iteration += 1
    if state.max_iterations > 0:
        state.a = max(0.0, 2.0 * (1.0 - state.iteration / state.max_iterations))
    else:
        state.a = 0.0
    return state


def dwoa_solve(
    scenario: Scenario,
    beta: BandwidthAllocation,
    config: Optional[DwoaConfig] = None,
) -> SolverRun:
    """Whale-style search over offloading vectors for a fixed allocation.

    The trace records the incumbent penalized fitness after every
    iteration; identical seeds give identical runs. An energy-infeasible
    incumbent is still returned, flagged feasible=False.
    """
    cfg = config or DwoaConfig()
    t0 = time.perf_counter()
    ev = Evaluator(scenario, beta, cfg.penalty, cfg.upload_model)
    state = woa_init(
        ev.fitness,
        ev.vector_length,
        len(scenario.uavs),
        cfg.agents,
        cfg.max_iterations,
        cfg.seed,
        cfg.spiral_b,
    )
    trace = []
    for _ in range(cfg.max_iterations):
        woa_step(state, ev.fitness)
        trace.append(state.best_value)

    vec = discretize_vector(state.best_position, state.v_count)
    decision = decision_from_vector(scenario, vec)
    obj, feasible = ev.objective_and_feasible(vec)
    return SolverRun(
        solver="dwoa",
        seed=cfg.seed,
        decision=decision,
        beta=beta,
        objective_s=obj,
        feasible=feasible,
        trace=trace,
        wall_time_s=time.perf_counter() - t0,
        config={
            "agents": cfg.agents,
            "max_iterations": cfg.max_iterations,
            "lambda": cfg.penalty.lambda_,
            "penalty_mode": cfg.penalty.mode,
            "spiral_b": cfg.spiral_b,
            "upload_model": cfg.upload_model,
        },
    )


def exhaustive_solve(
    scenario: Scenario,
    beta: BandwidthAllocation,
    cap: int = 10**7,
    upload_model: str = "cumulative",
) -> SolverRun:
    """Enumerates all V**M decisions in mixed-radix order; the returned
    objective is a true optimum over the feasible set. Raises
    StateSpaceCapError over the cap and NoFeasibleDecisionError when
    every decision blows an energy budget.
    """
    t0 = time.perf_counter()
    ev = Evaluator(scenario, beta, None, upload_model)
    m = ev.vector_length
    v_count = len(scenario.uavs)
    if v_count**m > cap:
        raise StateSpaceCapError(f"{v_count}**{m} decisions exceed cap {cap}")

    best_obj = math.inf
    best_vec: Optional[Tuple[int, ...]] = None
    for vec in itertools.product(range(1, v_count + 1), repeat=m):
        obj, feasible = ev.objective_and_feasible(vec)
        if feasible and obj < best_obj:
            best_obj = obj
            best_vec = vec
    if best_vec is None:
        raise NoFeasibleDecisionError("no decision satisfies all energy budgets")
    return SolverRun(
        solver="exhaustive",
        seed=None,
        decision=decision_from_vector(scenario, best_vec),
        beta=beta,
        objective_s=best_obj,
        feasible=True,
        trace=[best_obj],
        wall_time_s=time.perf_counter() - t0,
        config={"cap": cap, "upload_model": upload_model},
    )


def associated_decision(scenario: Scenario) -> OffloadDecision:
    """Everything-local baseline: each sub-task runs on the owner's UAV."""
    x = {}
    for t in scenario.tasks:
        user = scenario.user_by_id(t.owner_user)
        x[t.owner_user] = tuple(user.associated_uav for _ in t.non_dummy())
    return OffloadDecision(x)


def _active_bits(scenario: Scenario) -> Dict[int, float]:
    return {t.owner_user: t.total_input_bits() for t in scenario.tasks}


def alloc_equal(scenario: Scenario) -> BandwidthAllocation:
    """Uniform split over every served user, active or not."""
    fractions = {}
    for v in scenario.uavs:
        users = scenario.users_of_uav(v.id)
        if not users:
            continue
        share = 1.0 / len(users)
        for u in users:
            fractions[(v.id, u.id)] = share
    return BandwidthAllocation(fractions)


def alloc_proportional(
    scenario: Scenario, decision: Optional[OffloadDecision] = None
) -> BandwidthAllocation:
    """Splits each UAV's uplink over its active users proportional to
    their total task input size. The decision does not change the bits
    on the uplink (every input crosses it once), so it is accepted only
    for interface symmetry with alloc_optimal.
    """
    bits = _active_bits(scenario)
    fractions = {}
    for v in scenario.uavs:
        users = [u for u in scenario.users_of_uav(v.id) if bits.get(u.id, 0.0) > 0]
        total = math.fsum(bits[u.id] for u in users)
        if total <= 0:
            continue
        for u in users:
            fractions[(v.id, u.id)] = bits[u.id] / total
    return BandwidthAllocation(fractions)


def alloc_optimal(
    scenario: Scenario, decision: Optional[OffloadDecision] = None
) -> BandwidthAllocation:
    """Latency-optimal uplink split per UAV.

    Total upload time sum_u H_u / (beta_u B Gamma_u) subject to
    sum beta_u = 1 is minimized at beta_u proportional to
    sqrt(H_u / Gamma_u), with Gamma_u the user's spectral efficiency
    log2(1 + SNR). Closed form from the KKT stationarity condition;
    users with no bits to send get beta = 0.
    """
    bits = _active_bits(scenario)
    ph = scenario.physics
    fractions = {}
    for v in scenario.uavs:
        users = [u for u in scenario.users_of_uav(v.id) if bits.get(u.id, 0.0) > 0]
        weights = {}
        for u in users:
            budget = channel.user_uplink_budget(u, v, 1.0, ph)
            gamma = math.log2(1.0 + budget.snr)
            if gamma <= 0:
                raise ValueError(f"user {u.id}: zero spectral efficiency")
            weights[u.id] = math.sqrt(bits[u.id] / gamma)
        total = math.fsum(weights.values())
        if total <= 0:
            continue
        for u in users:
            fractions[(v.id, u.id)] = weights[u.id] / total
    return BandwidthAllocation(fractions)


ALLOCATORS = {
    "equal": alloc_equal,
    "proportional": alloc_proportional,
    "optimal": alloc_optimal,
}


def alternating_solve(
    scenario: Scenario,
    config: Optional[DwoaConfig] = None,
    max_outer: int = 10,
    tol: float = 1e-6,
) -> SolverRun:
    """Block-coordinate loop: whale search under the current allocation,
    then the closed-form allocation for the found decision, until the
    best penalized fitness moves by less than tol (relative) between
    rounds. Keeps the best (decision, allocation) pair across rounds, so
    the reported objective never regresses even if a round wanders.
    """
    t0 = time.perf_counter()
    cfg = config or DwoaConfig()
    round_seeds = np.random.SeedSequence(cfg.seed).spawn(max_outer)

    beta = alloc_equal(scenario)
    best: Optional[SolverRun] = None
    best_pen = math.inf
    trace: List[float] = []
    prev = math.inf
    rounds = 0
    for k in range(max_outer):
        rounds += 1
        seed_k = int(round_seeds[k].generate_state(1)[0])
        run = dwoa_solve(
            scenario,
            beta,
            DwoaConfig(
                agents=cfg.agents,
                max_iterations=cfg.max_iterations,
                penalty=cfg.penalty,
                seed=seed_k,
                spiral_b=cfg.spiral_b,
                upload_model=cfg.upload_model,
            ),
        )
        pen_run = run.trace[-1] if run.trace else Evaluator(
            scenario, beta, cfg.penalty, cfg.upload_model
        ).fitness(decision_to_vector(scenario, run.decision))
        beta_new = alloc_optimal(scenario, run.decision)
        ev = Evaluator(scenario, beta_new, cfg.penalty, cfg.upload_model)
        vec = decision_to_vector(scenario, run.decision)
        obj_new, feas_new = ev.objective_and_feasible(vec)
        pen_new = ev.fitness(vec)
        for pen, obj, feas, bt in (
            (pen_run, run.objective_s, run.feasible, beta),
            (pen_new, obj_new, feas_new, beta_new),
        ):
            if pen < best_pen:
                best_pen = pen
                best = SolverRun(
                    solver="alternating",
                    seed=cfg.seed,
                    decision=run.decision,
                    beta=bt,
                    objective_s=obj,
                    feasible=feas,
                    trace=[],
                    wall_time_s=0.0,
                    config={},
                )
        trace.append(best_pen)
        beta = beta_new
        if math.isfinite(prev) and abs(prev - best_pen) <= tol * max(1.0, abs(prev)):
            break
        prev = best_pen

    assert best is not None
    best.trace = trace
    best.wall_time_s = time.perf_counter() - t0
    best.config = {
        "agents": cfg.agents,
        "max_iterations": cfg.max_iterations,
        "lambda": cfg.penalty.lambda_,
        "penalty_mode": cfg.penalty.mode,
        "max_outer": max_outer,
        "tol": tol,
        "rounds": rounds,
        "upload_model": cfg.upload_model,
    }
    return best

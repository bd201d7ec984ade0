"""Turns (decision, bandwidth allocation, scenario) into a full schedule:
dependency-respecting start/finish times, per-task makespan, objective,
penalty, and energy feasibility. This is the fitness function behind
every solver, so the inner loops stay allocation-free.

Timing rules: sub-tasks are processed in topological order; arrival time
accumulates the task's uploads over the shared uplink (so one channel
never carries two inputs at once) plus the forwarding hop when the
executor is not the associated UAV; start time equals ready time, the
earliest instant at which the input has arrived and every predecessor
has finished and shipped its dependency payload.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from . import channel
from .channel import BandwidthAllocation
from .scenario import Scenario, topological_order
from .timing import EnergyLedger, check_energy_feasible, hover_power_w

# Sentinel fitness for decisions rejected outright in hard mode; larger
# than any realizable objective.
HARD_REJECT = 1e18

UPLOAD_MODELS = ("cumulative", "independent")


@dataclass(frozen=True)
class OffloadDecision:
    """One executing UAV id per non-dummy sub-task.

    x maps an active user id to a tuple of UAV ids, entry j-1 belonging
    to sub-task j. The dummy root stays pinned at the user and needs no
    entry.
    """

    x: Mapping[int, Tuple[int, ...]]

    def uav_for(self, user_id: int, subtask: int) -> int:
        return self.x[user_id][subtask - 1]

    def validate(self, scenario: Scenario) -> List[str]:
        out = []
        uav_ids = {v.id for v in scenario.uavs}
        for t in scenario.tasks:
            vec = self.x.get(t.owner_user)
            n = len(t.sub_tasks) - 1
            if vec is None:
                out.append(f"decision: no vector for user {t.owner_user}")
                continue
            if len(vec) != n:
                out.append(f"decision[{t.owner_user}]: length {len(vec)} != {n}")
            for j, v in enumerate(vec, start=1):
                if v not in uav_ids:
                    out.append(f"decision[{t.owner_user}][{j}]: unknown UAV {v}")
        return out


@dataclass(frozen=True)
class PenaltyConfig:
    """Quadratic energy penalty (Eq. form: objective + lambda * G * excess^2)
    or a hard rejection of infeasible decisions."""

    lambda_: float = 0.1
    mode: str = "penalty"  # or "hard"

    def __post_init__(self):
        if self.mode not in ("penalty", "hard"):
            raise ValueError(f"unknown penalty mode {self.mode!r}")
        if self.mode == "penalty" and self.lambda_ <= 0:
            raise ValueError("lambda must be positive in penalty mode")


@dataclass(frozen=True)
class ScheduleResult:
    arrival_s: Mapping[Tuple[int, int], float]
    ready_s: Mapping[Tuple[int, int], float]
    start_s: Mapping[Tuple[int, int], float]
    finish_s: Mapping[Tuple[int, int], float]
    exec_s: Mapping[Tuple[int, int], float]
    upload_s: Mapping[Tuple[int, int], float]
    forward_s: Mapping[Tuple[int, int], float]
    executor: Mapping[Tuple[int, int], int]
    makespan_s: Mapping[int, float]
    task_upload_s: Mapping[int, float]
    energy: EnergyLedger
    objective_s: float
    penalized_s: Optional[float]
    feasible: bool


def decision_order(scenario: Scenario) -> List[Tuple[int, int]]:
    """Flat (user, sub-task) layout of the merged decision vector:
    active users by ascending id, sub-tasks by ascending index."""
    order = []
    for t in sorted(scenario.tasks, key=lambda t: t.owner_user):
        for s in t.sub_tasks:
            if not s.is_dummy:
                order.append((t.owner_user, s.index))
    return order


def decision_from_vector(scenario: Scenario, values: Sequence[int]) -> OffloadDecision:
    """Build a decision from the flat solver vector of 1-based UAV slots."""
    uav_ids = sorted(v.id for v in scenario.uavs)
    order = decision_order(scenario)
    if len(values) != len(order):
        raise ValueError(f"vector length {len(values)} != {len(order)} sub-tasks")
    x: Dict[int, List[int]] = {}
    for (u, j), val in zip(order, values):
        k = int(val)
        if not 1 <= k <= len(uav_ids):
            raise ValueError(f"slot value {k} outside [1, {len(uav_ids)}]")
        x.setdefault(u, []).append(uav_ids[k - 1])
    return OffloadDecision({u: tuple(vals) for u, vals in x.items()})


def decision_to_vector(scenario: Scenario, decision: OffloadDecision) -> Tuple[int, ...]:
    uav_slot = {v: i + 1 for i, v in enumerate(sorted(v.id for v in scenario.uavs))}
    return tuple(uav_slot[decision.x[u][j - 1]] for u, j in decision_order(scenario))


class Evaluator:
    """Precomputes every decision-independent quantity for one
    (scenario, bandwidth allocation) pair, then maps decision vectors to
    objectives at a few tens of microseconds per call.

    Not thread-safe (scratch buffers are reused); build one per thread.
    """

    def __init__(
        self,
        scenario: Scenario,
        beta: BandwidthAllocation,
        penalty: Optional[PenaltyConfig] = None,
        upload_model: str = "cumulative",
    ):
        if upload_model not in UPLOAD_MODELS:
            raise ValueError(f"unknown upload model {upload_model!r}")
        self.scenario = scenario
        self.beta = beta
        self.penalty = penalty
        self.upload_model = upload_model
        ph = scenario.physics

        uavs = sorted(scenario.uavs, key=lambda v: v.id)
        self._uav_ids = [v.id for v in uavs]
        slot = {v.id: i for i, v in enumerate(uavs)}
        V = len(uavs)
        self._V = V
        self._fmax = [v.max_compute_hz for v in uavs]
        self._ebudget = [v.energy_budget_j for v in uavs]
        self._kappa = [ph.effective_switched_capacitance] * V
        self._p_fwd_w = [channel.dbm_to_watts(v.tx_power_u2u_dbm) for v in uavs]
        self._hover_p = [hover_power_w(v, ph) for v in uavs]
        self._report_t = []
        self._report_e = []
        for v in uavs:
            t_b = v.info_payload_bits / channel.u2b_rate(v, scenario.bs_position_m, ph)
            self._report_t.append(t_b)
            self._report_e.append(channel.dbm_to_watts(v.tx_power_to_bs_dbm) * t_b)

        # inverse inter-UAV rates; diagonal zero makes co-located transfers free
        self._inv_uu = [[0.0] * V for _ in range(V)]
        for a in range(V):
            for b in range(V):
                if a != b:
                    self._inv_uu[a][b] = 1.0 / channel.u2u_rate(uavs[a], uavs[b], ph)

        # per active user: static uploads, forward-time table, DAG shape
        self._users = []
        offset = 0
        for t in sorted(scenario.tasks, key=lambda t: t.owner_user):
            user = scenario.user_by_id(t.owner_user)
            assoc = slot[user.associated_uav]
            rate_up = channel.user_uplink_rate(
                user, uavs[assoc], beta.fraction(user.associated_uav, user.id), ph
            )
            n = len(t.sub_tasks) - 1
            subs = {s.index: s for s in t.sub_tasks}
            if rate_up <= 0 and any(subs[j].input_size_bits > 0 for j in range(1, n + 1)):
                raise ValueError(f"user {user.id}: zero uplink rate on a required link")
            up_t = [0.0] * (n + 1)
            h_bits = [0.0] * (n + 1)
            preds: List[Tuple[Tuple[int, float], ...]] = [()] * (n + 1)
            for j in range(1, n + 1):
                s = subs[j]
                h_bits[j] = s.input_size_bits
                up_t[j] = s.input_size_bits / rate_up
                preds[j] = tuple(s.predecessors)
            topo = [j for j in topological_order(t) if j != 0]
            fwd = []
            for j in range(1, n + 1):
                row = [0.0] * V
                for b in range(V):
                    if b != assoc:
                        row[b] = h_bits[j] * self._inv_uu[assoc][b]
                fwd.append(row)
            self._users.append(
                dict(
                    user_id=user.id,
                    assoc=assoc,
                    trel=t.release_time_s,
                    n=n,
                    offset=offset,
                    cycles_per_bit=t.sub_tasks[1].cycles_per_bit if n else 0.0,
                    h_bits=h_bits,
                    up_t=up_t,
                    task_upload=math.fsum(up_t),
                    preds=preds,
                    topo=topo,
                    fwd=fwd,
                    ft=[0.0] * (n + 1),
                )
            )
            offset += n
        self._m = offset

        # scratch buffers
        self._tot = [0.0] * V
        self._exec_unit = [0.0] * V
        self._exec_e = [0.0] * V
        self._fwd_e = [0.0] * V
        self._hov_t = [0.0] * V

    @property
    def vector_length(self) -> int:
        return self._m

    def _core(self, vec, collect: bool = False):
        """Shared fast path. Returns (objective, per-UAV energy totals)
        and, when collect is set, a detail dict for ScheduleResult."""
        V = self._V
        tot = self._tot
        exec_unit = self._exec_unit
        exec_e = self._exec_e
        fwd_e = self._fwd_e
        hov_t = self._hov_t
        for i in range(V):
            tot[i] = 0.0
            exec_e[i] = 0.0
            fwd_e[i] = 0.0
            hov_t[i] = 0.0

        for u in self._users:
            off = u["offset"]
            h = u["h_bits"]
            for j in range(1, u["n"] + 1):
                tot[vec[off + j - 1] - 1] += h[j]
        fmax_arr = self._fmax
        for i in range(V):
            exec_unit[i] = tot[i] / fmax_arr[i]

        inv_uu = self._inv_uu
        kappa = self._kappa
        cumulative = self.upload_model == "cumulative"
        detail = (
            dict(arrival={}, ready={}, start={}, finish={}, exec={}, upload={},
                 forward={}, executor={}, makespan={}, task_upload={})
            if collect
            else None
        )

        obj_sum = 0.0
        for u in self._users:
            off = u["offset"]
            uid = u["user_id"]
            trel = u["trel"]
            assoc = u["assoc"]
            up_t = u["up_t"]
            h = u["h_bits"]
            preds = u["preds"]
            fwd = u["fwd"]
            ft = u["ft"]
            cu = u["cycles_per_bit"]
            ft[0] = trel
            cum = trel
            f_last = trel
            loc_span = 0.0
            rem_span = 0.0
            for j in u["topo"]:
                v = vec[off + j - 1]
                v0 = v - 1
                if cumulative:
                    cum += up_t[j]
                    at = cum
                else:
                    at = trel + up_t[j]
                fwd_t = fwd[j - 1][v0]
                at += fwd_t
                rt = at
                for p, bits in preds[j]:
                    tp = ft[p]
                    if bits > 0.0 and p != 0:
                        vp = vec[off + p - 1]
                        if vp != v:
                            tp += bits * inv_uu[vp - 1][v0]
                    if tp > rt:
                        rt = tp
                exec_t = cu * exec_unit[v0]
                fin = rt + exec_t
                ft[j] = fin
                if fin > f_last:
                    f_last = fin

                f_share = h[j] * fmax_arr[v0] / tot[v0]
                exec_e[v0] += kappa[v0] * f_share * f_share * cu * h[j]
                if v0 == assoc:
                    loc_span += exec_t
                else:
                    fwd_e[assoc] += self._p_fwd_w[assoc] * fwd_t
                    rem_span += fwd_t + exec_t
                if collect:
                    key = (uid, j)
                    detail["arrival"][key] = at
                    detail["ready"][key] = rt
                    detail["start"][key] = rt
                    detail["finish"][key] = fin
                    detail["exec"][key] = exec_t
                    detail["upload"][key] = up_t[j]
                    detail["forward"][key] = fwd_t
                    detail["executor"][key] = self._uav_ids[v0]
            makespan = f_last - trel
            obj_sum += makespan + u["task_upload"]
            span = u["task_upload"] + self._report_t[assoc] + (
                loc_span if loc_span >= rem_span else rem_span
            )
            if span > hov_t[assoc]:
                hov_t[assoc] = span
            if collect:
                key = (uid, 0)
                detail["arrival"][key] = trel
                detail["ready"][key] = trel
                detail["start"][key] = trel
                detail["finish"][key] = trel
                detail["exec"][key] = 0.0
                detail["upload"][key] = 0.0
                detail["forward"][key] = 0.0
                detail["executor"][key] = self._uav_ids[assoc]
                detail["makespan"][uid] = makespan
                detail["task_upload"][uid] = u["task_upload"]

        objective = obj_sum / len(self._users)
        totals = [
            exec_e[i] + fwd_e[i] + self._report_e[i] + self._hover_p[i] * hov_t[i]
            for i in range(V)
        ]
        return objective, totals, detail

    def fitness(self, vec) -> float:
        """Penalized objective of an integer decision vector (1-based slots)."""
        objective, totals, _ = self._core(vec)
        pen = self.penalty
        if pen is None:
            return objective
        budgets = self._ebudget
        if pen.mode == "hard":
            for i, tot in enumerate(totals):
                if tot > budgets[i]:
                    return HARD_REJECT
            return objective
        for i, tot in enumerate(totals):
            over = tot - budgets[i]
            if over > 0.0:
                objective += pen.lambda_ * over * over
        return objective

    def objective_and_feasible(self, vec) -> Tuple[float, bool]:
        objective, totals, _ = self._core(vec)
        budgets = self._ebudget
        feasible = all(totals[i] <= budgets[i] for i in range(self._V))
        return objective, feasible

    def result(self, decision: OffloadDecision) -> ScheduleResult:
        problems = decision.validate(self.scenario)
        if problems:
            raise ValueError("; ".join(problems))
        vec = decision_to_vector(self.scenario, decision)
        objective, totals, detail = self._core(vec, collect=True)

        uav_ids = self._uav_ids
        exec_j = {uav_ids[i]: self._exec_e[i] for i in range(self._V)}
        fwd_j = {uav_ids[i]: self._fwd_e[i] for i in range(self._V)}
        report_j = {uav_ids[i]: self._report_e[i] for i in range(self._V)}
        hover_time = {uav_ids[i]: self._hov_t[i] for i in range(self._V)}
        hover_j = {uav_ids[i]: self._hover_p[i] * self._hov_t[i] for i in range(self._V)}
        total_j = {uav_ids[i]: totals[i] for i in range(self._V)}
        uplink = {}
        for u in self._users:
            user = self.scenario.user_by_id(u["user_id"])
            uplink[u["user_id"]] = channel.dbm_to_watts(user.tx_power_dbm) * u["task_upload"]
        ledger = EnergyLedger(exec_j, fwd_j, report_j, hover_j, total_j, hover_time, uplink)

        feasible = all(
            totals[i] <= self._ebudget[i] for i in range(self._V)
        )
        penalized = None
        if self.penalty is not None:
            penalized = _penalize(objective, totals, self._ebudget, self.penalty)
        return ScheduleResult(
            arrival_s=detail["arrival"],
            ready_s=detail["ready"],
            start_s=detail["start"],
            finish_s=detail["finish"],
            exec_s=detail["exec"],
            upload_s=detail["upload"],
            forward_s=detail["forward"],
            executor=detail["executor"],
            makespan_s=detail["makespan"],
            task_upload_s=detail["task_upload"],
            energy=ledger,
            objective_s=objective,
            penalized_s=penalized,
            feasible=feasible,
        )


def _penalize(objective: float, totals, budgets, pen: PenaltyConfig) -> float:
    if pen.mode == "hard":
        return objective if all(t <= b for t, b in zip(totals, budgets)) else HARD_REJECT
    out = objective
    for t, b in zip(totals, budgets):
        over = t - b
        if over > 0.0:
            out += pen.lambda_ * over * over
    return out


def evaluate(
    decision: OffloadDecision,
    beta: BandwidthAllocation,
    scenario: Scenario,
    penalty: Optional[PenaltyConfig] = None,
    upload_model: str = "cumulative",
) -> ScheduleResult:
    """One-shot schedule evaluation; see Evaluator for the batch path."""
    return Evaluator(scenario, beta, penalty, upload_model).result(decision)


def penalized_objective(result: ScheduleResult, penalty: PenaltyConfig, uavs) -> float:
    """Penalty-mode surcharge or hard-mode rejection applied to a result."""
    totals = [result.energy.total_j.get(v.id, 0.0) for v in uavs]
    budgets = [v.energy_budget_j for v in uavs]
    return _penalize(result.objective_s, totals, budgets, penalty)


def decision_latency_breakdown(result: ScheduleResult) -> Dict[str, float]:
    """Split the objective into forwarding (distributed) and the rest
    (computation); the parts sum to the total by construction."""
    users = list(result.makespan_s)
    dist = math.fsum(
        t for (u, _j), t in result.forward_s.items()
    ) / len(users)
    return {
        "computation": result.objective_s - dist,
        "distributed": dist,
        "total": result.objective_s,
    }


def schedule_to_csv(result: ScheduleResult) -> str:
    """Schedule trace as CSV text (task,subtask,uav,AT,RT,ST,FT)."""
    buf = io.StringIO()
    buf.write("task,subtask,uav,AT,RT,ST,FT\n")
    for (u, j) in sorted(result.start_s):
        buf.write(
            f"{u},{j},{result.executor[(u, j)]},"
            f"{result.arrival_s[(u, j)]!r},{result.ready_s[(u, j)]!r},"
            f"{result.start_s[(u, j)]!r},{result.finish_s[(u, j)]!r}\n"
        )
    return buf.getvalue()

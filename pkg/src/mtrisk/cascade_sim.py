"""Interval-by-interval cascading-outage simulator.

One call to :func:`simulate_transition` advances a :class:`SystemState` by one
mid-timescale interval: the interval's outage (if any) and the protection
trips it sets off, ramp-limited re-dispatch with an activation delay, then the
load-curve update. Every function here is pure: states are never mutated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np
from scipy.optimize import linprog

from .case import NetworkCase
from .config import AssessmentConfig, RateModel
from .errors import ContractViolation, InvalidEventError
from .grid_model import GridMatrices, dc_power_flow, island_labels

TIME_EPS = 1e-9
OVERLOAD_RTOL = 1e-9


# ---------------------------------------------------------------------------
# Outage rates and interval probabilities
# ---------------------------------------------------------------------------

def outage_rate(flow: float, rating: float, rate_model: RateModel) -> float:
    """Outage rate (1/h) of a branch carrying ``flow`` MW against ``rating``."""
    load = abs(flow) / rating
    rm = rate_model
    if load <= 1.0:
        return rm.lambda0
    if load >= rm.kappa_trip:
        return rm.lambda_max
    return rm.lambda0 + (rm.lambda_max - rm.lambda0) * (load - 1.0) / (rm.kappa_trip - 1.0)


def outage_rates(flows: np.ndarray, rating: np.ndarray, lambda0: np.ndarray,
                 lambda_max: float, kappa_trip: float) -> np.ndarray:
    """Vectorised :func:`outage_rate`; broadcasts over any array shape."""
    load = np.abs(flows) / rating
    ramp = (load - 1.0) / (kappa_trip - 1.0)
    rate = lambda0 + (lambda_max - lambda0) * np.clip(ramp, 0.0, 1.0)
    return rate


def mt_outage_probabilities(rates, tau_d_hours: float) -> tuple[np.ndarray, float]:
    """First-outage probabilities over one interval, plus the no-outage probability."""
    rates = np.asarray(rates, dtype=float)
    if np.any(rates < 0) or not np.all(np.isfinite(rates)):
        raise ContractViolation("outage rates must be finite and non-negative")
    if not tau_d_hours > 0:
        raise ContractViolation("interval length must be positive")
    total = rates.sum()
    if total == 0.0:
        return np.zeros_like(rates), 1.0
    p0 = math.exp(-total * tau_d_hours)
    # -expm1 keeps 1 - p0 accurate when total * tau is tiny
    return rates / total * (-math.expm1(-total * tau_d_hours)), p0


# ---------------------------------------------------------------------------
# State
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Command:
    id: int
    created: float
    due: float


@dataclass(frozen=True)
class ActiveCommand:
    command: Command
    gen_target: np.ndarray
    served_target: np.ndarray


@dataclass(frozen=True)
class SystemState:
    in_service: np.ndarray
    gen: np.ndarray              # MW per generator
    load_frac: np.ndarray        # connected share of each load's demand
    flows: np.ndarray            # MW per branch position
    clock: float = 0.0           # minutes
    level: int = 0
    queue: tuple[Command, ...] = ()
    executing: ActiveCommand | None = None
    next_command: int = 1
    c_r: float = 0.0
    c_b: float = 0.0
    total_loss: bool = False
    matrices: GridMatrices | None = field(default=None, compare=False, repr=False)

    def demand(self, case: NetworkCase) -> np.ndarray:
        return case.load_p * case.load_multiplier(self.clock)

    def served(self, case: NetworkCase) -> np.ndarray:
        return self.load_frac * self.demand(case)

    def grid(self, case: NetworkCase) -> GridMatrices:
        """Y/Z for this topology, rebuilt from scratch if they were dropped."""
        if self.matrices is None:
            return GridMatrices.build(case, self.in_service)
        return self.matrices

    def overloaded(self, case: NetworkCase) -> np.ndarray:
        return self.in_service & (np.abs(self.flows) > case.rating * (1.0 + OVERLOAD_RTOL))


@dataclass(frozen=True)
class TransitionOutcome:
    state: SystemState
    cost: float
    c_r: float
    c_b: float
    short_events: tuple[int, ...]
    terminal: bool


def branch_rates(case: NetworkCase, state: SystemState, config: AssessmentConfig) -> np.ndarray:
    """Current outage rate of every branch position (zero when out of service)."""
    rates = outage_rates(state.flows, case.rating, case.lambda0, config.lambda_max, config.kappa_trip)
    return np.where(state.in_service, rates, 0.0)


def injections(case: NetworkCase, gen: np.ndarray, served: np.ndarray) -> np.ndarray:
    P = np.zeros(case.n_bus)
    np.add.at(P, case.gen_bus, gen)
    np.add.at(P, case.load_bus, -served)
    return P


def _with_flows(case: NetworkCase, state: SystemState, grid: GridMatrices, **changes) -> SystemState:
    st = replace(state, matrices=grid, **changes)
    P = injections(case, st.gen, st.served(case))
    sol = dc_power_flow(case, st.in_service, P, grid.Z)
    return replace(st, flows=sol.flows)


# ---------------------------------------------------------------------------
# Island balancing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IslandBalance:
    gen: np.ndarray
    shed: np.ndarray
    curtailed: float


def balance_island(gen: np.ndarray, pmin: np.ndarray, pmax: np.ndarray, headroom: np.ndarray,
                   served: np.ndarray) -> IslandBalance:
    """Restore generation = load inside one island.

    ``headroom`` is how far each unit may move within one interval (MW).
    A shortfall beyond the upward headroom is shed pro rata to demand; a
    surplus beyond the downward headroom is curtailed pro rata to output.
    """
    gen = np.asarray(gen, dtype=float).copy()
    served = np.asarray(served, dtype=float)
    shed = np.zeros_like(served)
    demand = served.sum()
    if gen.size == 0:
        return IslandBalance(gen, served.copy(), 0.0)
    diff = demand - gen.sum()
    curtailed = 0.0
    if diff > 0:
        up = np.maximum(np.minimum(pmax, gen + headroom) - gen, 0.0)
        room = up.sum()
        if room >= diff:
            gen += up * (diff / room)
        else:
            gen += up
            short = diff - room
            shed = served * (short / demand)
    elif diff < 0:
        need = -diff
        down = np.maximum(gen - np.maximum(pmin, gen - headroom), 0.0)
        room = down.sum()
        if room >= need:
            gen -= down * (need / room)
        else:
            gen -= down
            rest = need - room
            total = gen.sum()
            gen *= max(1.0 - rest / total, 0.0)
            curtailed = rest
    return IslandBalance(gen, shed, curtailed)


def _balance_all(case: NetworkCase, state: SystemState, dt: float) -> tuple[SystemState, float]:
    """Balance every island of ``state``; returns the new state (flows stale) and MW shed."""
    ncomp, labels = island_labels(case, state.in_service)
    gen = state.gen.copy()
    demand = state.demand(case)
    served = state.load_frac * demand
    gl = labels[case.gen_bus]
    ll = labels[case.load_bus]
    headroom = case.gen_ramp * dt
    shed_total = 0.0
    frac = state.load_frac.copy()
    for c in range(ncomp):
        gi = np.flatnonzero(gl == c)
        li = np.flatnonzero(ll == c)
        if gi.size == 0 and li.size == 0:
            continue
        g_sum = gen[gi].sum()
        s_sum = served[li].sum()
        if abs(g_sum - s_sum) <= 1e-9:
            continue
        res = balance_island(gen[gi], case.gen_pmin[gi], case.gen_pmax[gi], headroom[gi], served[li])
        gen[gi] = res.gen
        if li.size:
            new_served = served[li] - res.shed
            shed_total += float(res.shed.sum())
            with np.errstate(divide="ignore", invalid="ignore"):
                frac[li] = np.where(demand[li] > 0, new_served / demand[li], frac[li])
            # exact balance on the rounded result
            resid = gen[gi].sum() - (frac[li] * demand[li]).sum() if gi.size else 0.0
            if gi.size and abs(resid) > 0 and gen[gi].sum() > 0:
                gen[gi] *= 1.0 - resid / gen[gi].sum()
    frac = np.clip(frac, 0.0, 1.0)
    return replace(state, gen=gen, load_frac=frac), shed_total


# ---------------------------------------------------------------------------
# Short timescale: outages and protection trips
# ---------------------------------------------------------------------------

def apply_outages(case: NetworkCase, state: SystemState, branch_ids: Iterable[int],
                  dt: float) -> tuple[SystemState, float]:
    """Remove branches, rebalance the resulting islands and re-solve flows."""
    ids = [int(i) for i in branch_ids]
    for i in ids:
        k = case.branch_index.get(i)
        if k is None or not state.in_service[k]:
            raise InvalidEventError(f"branch {i} is not in service")
    grid = state.grid(case).without(case, ids)
    st = replace(state, in_service=grid.in_service)
    st, shed = _balance_all(case, st, dt)
    return _with_flows(case, st, grid), shed


def apply_short_timescale(case: NetworkCase, state: SystemState, config: AssessmentConfig,
                          dt: float | None = None) -> tuple[SystemState, float, tuple[int, ...]]:
    """Trip every branch above the instant-trip threshold until none remain.

    Returns the settled state, the load shed by island balancing (MW) and the
    ids of tripped branches in trip order.
    """
    dt = config.tau_d if dt is None else dt
    cost = 0.0
    tripped: list[int] = []
    for _ in range(case.n_branch):
        over = state.in_service & (np.abs(state.flows) > config.kappa_trip * case.rating)
        if not over.any():
            break
        ids = case.branch_ids[over].tolist()
        state, shed = apply_outages(case, state, ids, dt)
        cost += shed
        tripped.extend(ids)
    return state, cost, tuple(tripped)


# ---------------------------------------------------------------------------
# Re-dispatch
# ---------------------------------------------------------------------------

class TotalLoss(Exception):
    """The re-dispatch program has no feasible point even with full shedding."""


def redispatch_program(case: NetworkCase, state: SystemState,
                       config: AssessmentConfig) -> tuple[np.ndarray, np.ndarray]:
    """Least-shed dispatch that clears all overloads.

    Minimises total shed + w_gen * total |generation change| subject to DC
    flows, branch ratings, unit limits and per-island balance. Returns
    ``(gen_target, shed)`` with shed in MW per load.
    """
    grid = state.grid(case)
    on = np.flatnonzero(state.in_service)
    ng, nl = len(case.generators), len(case.loads)
    served = state.served(case)
    p0 = state.gen

    # F = H @ injections
    H = case.susceptance[on, None] * (grid.Z[case.f_idx[on], :] - grid.Z[case.t_idx[on], :])
    Hg = H[:, case.gen_bus]
    Hl = H[:, case.load_bus]
    base_flow = -Hl @ served
    rating = case.rating[on]

    nv = 3 * ng + nl
    c = np.concatenate([np.zeros(ng), np.full(2 * ng, config.w_gen), np.ones(nl)])

    # P - up + dn = p0
    A_eq = [np.hstack([np.eye(ng), -np.eye(ng), np.eye(ng), np.zeros((ng, nl))])]
    b_eq = [p0]
    ncomp, labels = island_labels(case, state.in_service)
    gl, ll = labels[case.gen_bus], labels[case.load_bus]
    for comp in range(ncomp):
        row = np.zeros(nv)
        row[:ng][gl == comp] = 1.0
        row[3 * ng:][ll == comp] = 1.0
        if not row.any():
            continue
        A_eq.append(row[None, :])
        b_eq.append(np.array([served[ll == comp].sum()]))
    A_eq = np.vstack(A_eq)
    b_eq = np.concatenate(b_eq)

    flow_rows = np.hstack([Hg, np.zeros((on.size, 2 * ng)), Hl])
    A_ub = np.vstack([flow_rows, -flow_rows])
    b_ub = np.concatenate([rating - base_flow, rating + base_flow])

    for lower in (np.minimum(case.gen_pmin, p0), np.zeros(ng)):
        bounds = ([(lo, hi) for lo, hi in zip(lower, case.gen_pmax)]
                  + [(0, None)] * (2 * ng)
                  + [(0, s) for s in served])
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
        if res.status == 0:
            x = res.x
            gen_t = np.clip(x[:ng], 0.0, case.gen_pmax)
            shed = np.clip(x[3 * ng:], 0.0, served)
            return gen_t, shed
    raise TotalLoss("re-dispatch program infeasible")


def _newest(due: list[Command]) -> Command:
    return max(due, key=lambda c: (c.due, c.created, c.id))


def _move(case: NetworkCase, state: SystemState, active: ActiveCommand, duration: float,
          dt: float) -> tuple[SystemState, float, bool]:
    """Advance generators (and shedding) along a straight line toward the targets."""
    delta = active.gen_target - state.gen
    moving = np.abs(delta) > 1e-9
    if moving.any():
        with np.errstate(divide="ignore", invalid="ignore"):
            reach = np.where(moving, case.gen_ramp * duration / np.abs(delta), np.inf)
        f = float(min(1.0, reach.min()))
    else:
        f = 1.0
    demand = state.demand(case)
    served = state.load_frac * demand
    new_served = np.minimum(served, served + f * (active.served_target - served))
    new_served = np.maximum(new_served, 0.0)
    shed = float((served - new_served).sum())
    gen = state.gen + f * delta
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(demand > 0, new_served / demand, state.load_frac)
    st = replace(state, gen=gen, load_frac=np.clip(frac, 0.0, 1.0))
    st, extra = _balance_all(case, st, dt)
    st = _with_flows(case, st, st.grid(case))
    return st, shed + extra, f >= 1.0


def redispatch_step(case: NetworkCase, state: SystemState, config: AssessmentConfig,
                    dt: float | None = None, event: bool = False) -> tuple[SystemState, float]:
    """Run the re-dispatch queue over ``[clock, clock + dt)``.

    A new overload (or a persisting one nobody is working on) enqueues a
    command due ``config.delay`` minutes later. Whenever commands fall due,
    the newest one preempts whatever is executing; its targets come from
    :func:`redispatch_program` evaluated at that instant. Returns the state
    and the load shed by re-dispatch (MW).
    """
    dt = config.tau_d if dt is None else dt
    t0 = state.clock
    t1 = t0 + dt
    queue = list(state.queue)
    executing = state.executing
    next_id = state.next_command

    if state.overloaded(case).any():
        made_now = any(abs(c.created - t0) <= TIME_EPS for c in queue) or (
            executing is not None and abs(executing.command.created - t0) <= TIME_EPS)
        idle = not queue and executing is None
        if not made_now and (event or idle):
            queue.append(Command(next_id, t0, t0 + config.delay))
            next_id += 1

    if not queue and executing is None:
        return state, 0.0

    cost = 0.0
    t = t0
    st = state
    while True:
        due = [c for c in queue if c.due <= t + TIME_EPS]
        if due:
            cmd = _newest(due)
            queue = [c for c in queue if c.due > t + TIME_EPS]
            st = replace(st, clock=t)
            try:
                gen_t, shed = redispatch_program(case, st, config)
            except TotalLoss:
                served = st.served(case)
                st = replace(st, load_frac=np.zeros_like(st.load_frac), gen=np.zeros_like(st.gen))
                st = _with_flows(case, st, st.grid(case))
                cost += float(served.sum())
                return replace(st, clock=t0, queue=(), executing=None, next_command=next_id,
                               total_loss=True), cost
            executing = ActiveCommand(cmd, gen_t, st.served(case) - shed)
        pending = [c.due for c in queue if t + TIME_EPS < c.due < t1 - TIME_EPS]
        t_next = min(pending) if pending else t1
        if executing is not None and t_next > t:
            st, shed, done = _move(case, replace(st, clock=t), executing, t_next - t, dt)
            cost += shed
            if done:
                executing = None
        t = t_next
        if t >= t1 - TIME_EPS:
            break
    st = replace(st, clock=t0, queue=tuple(queue), executing=executing, next_command=next_id)
    return st, cost


# ---------------------------------------------------------------------------
# Long timescale
# ---------------------------------------------------------------------------

def update_load_level(case: NetworkCase, state: SystemState, t: float,
                      dt: float | None = None) -> tuple[SystemState, float]:
    """Move the clock to ``t`` and scale demand by the load curve.

    Generation follows within one interval of ramping; any shortfall is shed.
    Returns the new state and the shed (MW).
    """
    m_old = case.load_multiplier(state.clock)
    m_new = case.load_multiplier(t)
    st = replace(state, clock=t)
    if m_new == m_old:
        return st, 0.0
    dt = (t - state.clock) if dt is None else dt
    st, shed = _balance_all(case, st, max(dt, 0.0))
    return _with_flows(case, st, st.grid(case)), shed


# ---------------------------------------------------------------------------
# Transitions
# ---------------------------------------------------------------------------

def no_load_left(case: NetworkCase, state: SystemState) -> bool:
    return bool(np.all(state.load_frac * case.load_p <= 1e-9))


def is_terminal(case: NetworkCase, state: SystemState, config: AssessmentConfig) -> bool:
    return (state.clock >= config.horizon - TIME_EPS
            or state.total_loss
            or no_load_left(case, state)
            or not state.in_service.any())


def level_cost(c_r: float, c_b: float, config: AssessmentConfig) -> float:
    return c_r + (config.mu_e * c_b if config.economic else c_b)


def _normalise_event(event) -> tuple[int, ...]:
    if event is None:
        return ()
    if isinstance(event, (int, np.integer)):
        return () if int(event) == 0 else (int(event),)
    ids = sorted(int(e) for e in event if int(e) != 0)
    return tuple(ids)


def simulate_transition(case: NetworkCase, state: SystemState, event, config: AssessmentConfig,
                        dt: float | None = None) -> TransitionOutcome:
    """Advance one interval after ``event``.

    ``event`` is 0 (no outage), a branch id, or a collection of branch ids
    that fail in the same interval (applied in ascending id order, each
    followed by its protection trips).
    """
    dt = config.tau_d if dt is None else dt
    ids = _normalise_event(event)
    for i in ids:
        k = case.branch_index.get(i)
        if k is None or not state.in_service[k]:
            raise InvalidEventError(f"event branch {i} is not in service")

    c_b = 0.0
    short: list[int] = []
    st = state
    for i in ids:
        k = case.branch_index[i]
        if not st.in_service[k]:
            continue  # already tripped by an earlier outage this interval
        st, shed = apply_outages(case, st, [i], dt)
        c_b += shed
        st, shed, tripped = apply_short_timescale(case, st, config, dt)
        c_b += shed
        short.extend(tripped)

    st, c_r = redispatch_step(case, st, config, dt, event=bool(ids))
    if not st.total_loss:
        st, shed = update_load_level(case, st, st.clock + dt, dt)
        c_b += shed
        if (st.in_service & (np.abs(st.flows) > config.kappa_trip * case.rating)).any():
            st, shed, tripped = apply_short_timescale(case, st, config, dt)
            c_b += shed
            short.extend(tripped)
    else:
        st = replace(st, clock=st.clock + dt)
    st = replace(st, level=state.level + 1, c_r=c_r, c_b=c_b)
    return TransitionOutcome(state=st, cost=level_cost(c_r, c_b, config), c_r=c_r, c_b=c_b,
                             short_events=tuple(short), terminal=is_terminal(case, st, config))


def initial_state(case: NetworkCase, config: AssessmentConfig) -> tuple[SystemState, float]:
    """Base operating point with every branch in service, balanced per island."""
    on = np.ones(case.n_branch, dtype=bool)
    grid = GridMatrices.build(case, on)
    st = SystemState(in_service=on, gen=case.gen_p.copy(), load_frac=np.ones(len(case.loads)),
                     flows=np.zeros(case.n_branch), matrices=grid)
    st, shed = _balance_all(case, st, config.tau_d)
    return _with_flows(case, st, grid), shed


def make_root(case: NetworkCase, initial_outages: Iterable[int],
              config: AssessmentConfig) -> TransitionOutcome:
    """Apply the initial outages together at t = 0 and settle protection trips.

    The returned cost is C_0, the immediate cost after the initial outages.
    """
    st, c_b = initial_state(case, config)
    ids = sorted({int(i) for i in initial_outages})
    for i in ids:
        if i not in case.branch_index:
            raise InvalidEventError(f"initial outage {i} is not a branch id")
    short: tuple[int, ...] = ()
    if ids:
        st, shed = apply_outages(case, st, ids, config.tau_d)
        c_b += shed
        st, shed, short = apply_short_timescale(case, st, config)
        c_b += shed
    st = replace(st, c_r=0.0, c_b=c_b)
    return TransitionOutcome(state=st, cost=level_cost(0.0, c_b, config), c_r=0.0, c_b=c_b,
                             short_events=short, terminal=is_terminal(case, st, config))

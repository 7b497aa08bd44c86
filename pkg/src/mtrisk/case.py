"""Static grid description and its array view."""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import MalformedCaseError


@dataclass(frozen=True)
class Branch:
    id: int
    from_bus: int
    to_bus: int
    x_pu: float
    rating_mw: float
    lambda0_per_hr: float


@dataclass(frozen=True)
class Generator:
    bus: int
    p_mw: float
    pmin_mw: float
    pmax_mw: float
    ramp_mw_per_min: float


@dataclass(frozen=True)
class Load:
    bus: int
    p_mw: float


@dataclass(frozen=True)
class NetworkCase:
    """Buses, branches, generators and loads of a DC grid.

    Branch ids must be positive integers: label 0 is reserved for the
    no-outage event in outage sequences.
    """

    buses: tuple[int, ...]
    branches: tuple[Branch, ...]
    generators: tuple[Generator, ...]
    loads: tuple[Load, ...]
    base_mva: float = 100.0
    # (minute, multiplier) knots; empty means a constant 1.0
    load_curve: tuple[tuple[float, float], ...] = field(default=())
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "branches", tuple(self.branches))
        object.__setattr__(self, "generators", tuple(self.generators))
        object.__setattr__(self, "loads", tuple(self.loads))
        object.__setattr__(self, "load_curve", tuple(tuple(k) for k in self.load_curve))
        self._validate()

    def _validate(self):
        if not self.base_mva > 0:
            raise MalformedCaseError("base_mva", "must be positive")
        if len(set(self.buses)) != len(self.buses):
            raise MalformedCaseError("buses", "duplicate bus id")
        known = set(self.buses)
        seen = set()
        for k, br in enumerate(self.branches):
            where = f"branches[{k}]"
            if not isinstance(br.id, (int, np.integer)) or br.id <= 0:
                raise MalformedCaseError(f"{where}.id", "must be a positive integer")
            if br.id in seen:
                raise MalformedCaseError(f"{where}.id", f"duplicate branch id {br.id}")
            seen.add(br.id)
            if br.from_bus not in known:
                raise MalformedCaseError(f"{where}.from", f"branch {br.id} references unknown bus {br.from_bus}")
            if br.to_bus not in known:
                raise MalformedCaseError(f"{where}.to", f"branch {br.id} references unknown bus {br.to_bus}")
            if br.from_bus == br.to_bus:
                raise MalformedCaseError(where, f"branch {br.id} is a self-loop")
            if not br.x_pu > 0:
                raise MalformedCaseError(f"{where}.x_pu", "reactance must be positive")
            if not br.rating_mw > 0:
                raise MalformedCaseError(f"{where}.rating_mw", "rating must be positive")
            if not br.lambda0_per_hr >= 0:
                raise MalformedCaseError(f"{where}.lambda0_per_hr", "rate must be non-negative")
        for k, g in enumerate(self.generators):
            where = f"generators[{k}]"
            if g.bus not in known:
                raise MalformedCaseError(f"{where}.bus", f"unknown bus {g.bus}")
            if not (g.pmin_mw <= g.p_mw <= g.pmax_mw):
                raise MalformedCaseError(where, "requires pmin_mw <= p_mw <= pmax_mw")
            if not g.ramp_mw_per_min >= 0:
                raise MalformedCaseError(f"{where}.ramp_mw_per_min", "must be non-negative")
        for k, ld in enumerate(self.loads):
            where = f"loads[{k}]"
            if ld.bus not in known:
                raise MalformedCaseError(f"{where}.bus", f"unknown bus {ld.bus}")
            if not ld.p_mw >= 0:
                raise MalformedCaseError(f"{where}.p_mw", "demand must be non-negative")
        prev = -np.inf
        for k, knot in enumerate(self.load_curve):
            if len(knot) != 2:
                raise MalformedCaseError(f"load_curve[{k}]", "expected [minute, multiplier]")
            t, m = knot
            if not m >= 0:
                raise MalformedCaseError(f"load_curve[{k}]", "multiplier must be non-negative")
            if not t > prev:
                raise MalformedCaseError(f"load_curve[{k}]", "minutes must be strictly increasing")
            prev = t

    # -- array view ---------------------------------------------------------

    @cached_property
    def bus_index(self) -> dict[int, int]:
        return {b: i for i, b in enumerate(self.buses)}

    @cached_property
    def branch_index(self) -> dict[int, int]:
        return {br.id: k for k, br in enumerate(self.branches)}

    @cached_property
    def branch_ids(self) -> np.ndarray:
        return np.array([br.id for br in self.branches], dtype=np.int64)

    @cached_property
    def f_idx(self) -> np.ndarray:
        return np.array([self.bus_index[br.from_bus] for br in self.branches], dtype=np.int64)

    @cached_property
    def t_idx(self) -> np.ndarray:
        return np.array([self.bus_index[br.to_bus] for br in self.branches], dtype=np.int64)

    @cached_property
    def susceptance(self) -> np.ndarray:
        return np.array([1.0 / br.x_pu for br in self.branches])

    @cached_property
    def rating(self) -> np.ndarray:
        return np.array([br.rating_mw for br in self.branches])

    @cached_property
    def lambda0(self) -> np.ndarray:
        return np.array([br.lambda0_per_hr for br in self.branches])

    @cached_property
    def gen_bus(self) -> np.ndarray:
        return np.array([self.bus_index[g.bus] for g in self.generators], dtype=np.int64)

    @cached_property
    def gen_p(self) -> np.ndarray:
        return np.array([g.p_mw for g in self.generators], dtype=float)

    @cached_property
    def gen_pmin(self) -> np.ndarray:
        return np.array([g.pmin_mw for g in self.generators], dtype=float)

    @cached_property
    def gen_pmax(self) -> np.ndarray:
        return np.array([g.pmax_mw for g in self.generators], dtype=float)

    @cached_property
    def gen_ramp(self) -> np.ndarray:
        return np.array([g.ramp_mw_per_min for g in self.generators], dtype=float)

    @cached_property
    def load_bus(self) -> np.ndarray:
        return np.array([self.bus_index[ld.bus] for ld in self.loads], dtype=np.int64)

    @cached_property
    def load_p(self) -> np.ndarray:
        return np.array([ld.p_mw for ld in self.loads], dtype=float)

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def n_branch(self) -> int:
        return len(self.branches)

    def branch_mask(self, ids) -> np.ndarray:
        """Boolean mask over branch positions for an iterable of branch ids."""
        mask = np.zeros(self.n_branch, dtype=bool)
        for i in ids:
            mask[self.branch_index[i]] = True
        return mask

    def load_multiplier(self, minute: float) -> float:
        """Piecewise-linear load-curve multiplier; held constant outside the knots."""
        if not self.load_curve:
            return 1.0
        ts = [k[0] for k in self.load_curve]
        ms = [k[1] for k in self.load_curve]
        if minute <= ts[0]:
            return float(ms[0])
        if minute >= ts[-1]:
            return float(ms[-1])
        j = bisect.bisect_right(ts, minute)
        t0, t1, m0, m1 = ts[j - 1], ts[j], ms[j - 1], ms[j]
        return float(m0 + (m1 - m0) * (minute - t0) / (t1 - t0))

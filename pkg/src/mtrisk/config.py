"""Tunable parameters of the simulator and the tree search."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace

from .errors import ContractViolation


@dataclass(frozen=True)
class RateModel:
    """Loading-dependent outage rate of one branch.

    Flat at ``lambda0`` up to the rating, linear up to ``lambda_max`` at
    ``kappa_trip`` times the rating, flat beyond.
    """

    lambda0: float = 0.01       # 1/h
    lambda_max: float = 6.0     # 1/h
    kappa_trip: float = 1.4

    def __post_init__(self):
        if not (0 < self.lambda0 <= self.lambda_max):
            raise ContractViolation("need 0 < lambda0 <= lambda_max")
        if not self.kappa_trip > 1:
            raise ContractViolation("kappa_trip must exceed 1")


@dataclass(frozen=True)
class AssessmentConfig:
    tau_d: float = 15.0          # min, mid-timescale interval
    t_max: float = 60.0          # min, horizon
    trust_lambda: float = 5.0
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    mu: float = 0.8
    mu_e: float = 100.0
    economic: bool = False
    delay: float = 10.0          # min, re-dispatch activation delay
    eps_cut: float = 1e-10
    eps_r_gap: float = 60.0      # terminal index sits e^-gap below its best sibling
    lambda_max: float = 6.0      # 1/h
    kappa_trip: float = 1.4
    window: int = 5000
    eta: float = 1e-3
    p_cov: float = 0.97
    attempts: int = 5000
    seed: int = 0
    n_tau: int = 3
    enum_cap: int = 1_000_000
    w_gen: float = 1e-3
    top_paths: int = 50
    matrix_cache: int = 512      # nodes whose Y/Z stay resident; 0 keeps all

    def __post_init__(self):
        if not self.tau_d > 0:
            raise ContractViolation("tau_d must be positive")
        if not self.t_max >= self.tau_d:
            raise ContractViolation("t_max must be at least tau_d")
        if not self.trust_lambda >= 0:
            raise ContractViolation("trust_lambda must be non-negative")
        if not self.eta > 0:
            raise ContractViolation("eta must be positive")
        if not (0 < self.p_cov <= 1):
            raise ContractViolation("p_cov must lie in (0, 1]")
        if self.n_tau < 1 or self.window < 1:
            raise ContractViolation("n_tau and window must be >= 1")
        if not self.delay >= 0:
            raise ContractViolation("delay must be non-negative")
        RateModel(1e-12, self.lambda_max, self.kappa_trip)

    @property
    def k_d(self) -> int:
        return math.ceil(self.t_max / self.tau_d - 1e-12)

    @property
    def horizon(self) -> float:
        return self.k_d * self.tau_d

    def rate_model(self, lambda0: float) -> RateModel:
        return RateModel(lambda0, self.lambda_max, self.kappa_trip)

    def with_(self, **changes) -> "AssessmentConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "AssessmentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ContractViolation(f"unknown config keys: {unknown}")
        return cls(**data)

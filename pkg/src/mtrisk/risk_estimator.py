"""Cheap downstream-risk indices for the candidate events of a tree node.

Each candidate outage gets three components: separation (the branch is a
cut branch and its flow is stranded), overload (post-outage flow excess on
the survivors) and secondary (chance of a further outage next interval).
The no-outage candidate only gets a discounted secondary term.

The single-branch functions are written out plainly; :func:`candidate_indices`
computes the same numbers for every candidate at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .case import NetworkCase
from .cascade_sim import SystemState, branch_rates, mt_outage_probabilities, outage_rates
from .config import AssessmentConfig
from .errors import ContractViolation
from .grid_model import CUT_EPS, is_cut_branch, outage_sensitivities, ptdf

SECONDARY_LOAD_SHARE = 0.01


@dataclass(frozen=True)
class RiskIndexBreakdown:
    rho_alpha: float
    rho_beta: float
    rho_gamma: float
    rho: float
    sigma_alpha: float
    sigma_beta: float
    path_prob: float


def _flow(case: NetworkCase, state: SystemState, branch: int) -> float:
    return float(state.flows[case.branch_index[int(branch)]])


def separation_risk(case: NetworkCase, state: SystemState, branch: int, path_prob: float,
                    eps: float = CUT_EPS) -> tuple[float, float]:
    """(sigma, rho) for islanding: twice the stranded flow if ``branch`` is a cut branch."""
    Z = state.grid(case).Z
    if not is_cut_branch(case, Z, branch, eps):
        return 0.0, 0.0
    sigma = 2.0 * abs(_flow(case, state, branch))
    return sigma, path_prob * sigma


def post_outage_flows(case: NetworkCase, state: SystemState, branch: int,
                      eps: float = CUT_EPS) -> dict[int, float]:
    """Survivor flows after ``branch`` trips; unchanged flows for a cut branch."""
    Z = state.grid(case).Z
    cut = is_cut_branch(case, Z, branch, eps)
    f_out = _flow(case, state, branch)
    out = {}
    for k in np.flatnonzero(state.in_service):
        other = int(case.branch_ids[k])
        if other == int(branch):
            continue
        shift = 0.0 if cut else ptdf(case, Z, branch, other, eps) * f_out
        out[other] = float(state.flows[k]) + shift
    return out


def overload_risk(case: NetworkCase, state: SystemState, branch: int, path_prob: float,
                  eps: float = CUT_EPS) -> tuple[float, float]:
    """(sigma, rho) for overloads: total post-outage excess over ratings."""
    if is_cut_branch(case, state.grid(case).Z, branch, eps):
        return 0.0, 0.0
    sigma = 0.0
    for other, f in post_outage_flows(case, state, branch, eps).items():
        sigma += max(abs(f) - case.branches[case.branch_index[other]].rating_mw, 0.0)
    return sigma, path_prob * sigma


def secondary_risk(case: NetworkCase, state: SystemState, branch: int, path_prob: float,
                   config: AssessmentConfig) -> float:
    """Chance of a further outage next interval times 1% of served load, per survivor."""
    post = post_outage_flows(case, state, branch, config.eps_cut)
    if not post:
        return 0.0
    rates = []
    for other, f in post.items():
        br = case.branches[case.branch_index[other]]
        load = abs(f) / br.rating_mw
        if load <= 1.0:
            rates.append(br.lambda0_per_hr)
        elif load >= config.kappa_trip:
            rates.append(config.lambda_max)
        else:
            step = (load - 1.0) / (config.kappa_trip - 1.0)
            rates.append(br.lambda0_per_hr + (config.lambda_max - br.lambda0_per_hr) * step)
    probs, _ = mt_outage_probabilities(rates, config.tau_d / 60.0)
    c_tilde = SECONDARY_LOAD_SHARE * float(state.served(case).sum())
    return path_prob * float(sum(probs)) * c_tilde / len(post)


def no_outage_secondary_risk(sibling_rho, p0: float, n_edges: int, mu: float) -> float:
    """Discounted secondary index of the no-outage candidate."""
    if n_edges <= 0:
        return 0.0
    return mu * (p0 / n_edges) * float(np.sum(sibling_rho))


def combine_index(rho_alpha, rho_beta, rho_gamma, alpha: float = 1.0, beta: float = 1.0,
                  gamma: float = 1.0):
    return alpha * rho_alpha + beta * rho_beta + gamma * rho_gamma


def search_probabilities(indices, trust_lambda: float) -> np.ndarray:
    """Selection probabilities proportional to ``index ** trust_lambda``.

    Evaluated in the log domain so large exponents cannot overflow.
    ``trust_lambda = inf`` picks the first maximal entry; an all-zero
    index vector (or ``trust_lambda = 0``) gives the uniform distribution.
    """
    rho = np.asarray(indices, dtype=float)
    if rho.ndim != 1 or rho.size == 0:
        raise ContractViolation("need a non-empty index vector")
    if np.any(rho < 0) or np.any(np.isnan(rho)):
        raise ContractViolation("indices must be non-negative")
    if not trust_lambda >= 0:
        raise ContractViolation("trust factor must be non-negative")
    n = rho.size
    pos = rho > 0
    if trust_lambda == 0 or not pos.any():
        return np.full(n, 1.0 / n)
    if math.isinf(trust_lambda):
        out = np.zeros(n)
        out[int(np.argmax(rho))] = 1.0
        return out
    logw = np.full(n, -np.inf)
    logw[pos] = trust_lambda * np.log(rho[pos])
    w = np.exp(logw - logw.max())
    return w / w.sum()


@dataclass(frozen=True)
class CandidateIndices:
    """Indices of all next-level events of one node; entry 0 is the no-outage event."""

    labels: np.ndarray       # 0 then in-service branch ids ascending
    mt_prob: np.ndarray      # conditional interval probabilities
    rho: np.ndarray
    rho_alpha: np.ndarray
    rho_beta: np.ndarray
    rho_gamma: np.ndarray
    sigma_alpha: np.ndarray
    sigma_beta: np.ndarray

    def breakdown(self, j: int, path_prob: float) -> RiskIndexBreakdown:
        return RiskIndexBreakdown(float(self.rho_alpha[j]), float(self.rho_beta[j]),
                                  float(self.rho_gamma[j]), float(self.rho[j]),
                                  float(self.sigma_alpha[j]), float(self.sigma_beta[j]),
                                  path_prob * float(self.mt_prob[j]))


def candidate_indices(case: NetworkCase, state: SystemState, path_prob: float,
                      config: AssessmentConfig) -> CandidateIndices:
    """Risk indices of every candidate event at ``state`` in one vectorised pass.

    ``path_prob`` is the cumulative probability of ``state`` itself; each
    candidate's index is scaled by its own child path probability.
    """
    pos = np.flatnonzero(state.in_service)
    labels = np.concatenate([[0], case.branch_ids[pos]]).astype(np.int64)
    n = pos.size
    tau_h = config.tau_d / 60.0
    rates = branch_rates(case, state, config)[pos]
    pr, p0 = mt_outage_probabilities(rates, tau_h)
    mt_prob = np.concatenate([[p0], pr])
    child_prob = path_prob * pr

    F = state.flows[pos]
    rating = case.rating[pos]
    if n:
        lodf, cut = outage_sensitivities(case, state.grid(case).Z, pos, config.eps_cut)
    else:
        lodf, cut = np.zeros((0, 0)), np.zeros(0, dtype=bool)

    sigma_a = np.where(cut, 2.0 * np.abs(F), 0.0)

    # post[p, u]: flow on survivor p after outage u
    post = F[:, None] + lodf * F[None, :]
    excess = np.maximum(np.abs(post) - rating[:, None], 0.0)
    np.fill_diagonal(excess, 0.0)
    sigma_b = np.where(cut, 0.0, excess.sum(axis=0))

    lam0 = case.lambda0[pos]
    post_rates = outage_rates(post, rating[:, None], lam0[:, None], config.lambda_max, config.kappa_trip)
    np.fill_diagonal(post_rates, 0.0)
    total = post_rates.sum(axis=0)
    any_out = -np.expm1(-total * tau_h)
    c_tilde = SECONDARY_LOAD_SHARE * float(state.served(case).sum())
    survivors = n - 1
    rho_g = child_prob * any_out * c_tilde / survivors if survivors > 0 else np.zeros(n)

    rho_a = child_prob * sigma_a
    rho_b = child_prob * sigma_b
    rho = combine_index(rho_a, rho_b, rho_g, config.alpha, config.beta, config.gamma)

    rho0 = config.gamma * no_outage_secondary_risk(rho, p0, n, config.mu)
    z1 = np.zeros(1)
    return CandidateIndices(
        labels=labels, mt_prob=mt_prob,
        rho=np.concatenate([[rho0], rho]),
        rho_alpha=np.concatenate([z1, rho_a]),
        rho_beta=np.concatenate([z1, rho_b]),
        rho_gamma=np.concatenate([[rho0 / config.gamma if config.gamma else 0.0], rho_g]),
        sigma_alpha=np.concatenate([z1, sigma_a]),
        sigma_beta=np.concatenate([z1, sigma_b]),
    )

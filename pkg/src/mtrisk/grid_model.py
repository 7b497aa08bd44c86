"""DC power-flow linear algebra on the susceptance Laplacian.

Everything here works with the Moore-Penrose pseudo-inverse ``Z`` of the
Laplacian ``Y`` instead of a grounded reduced matrix, so islands need no
special casing: ``Z`` is block diagonal over connected components.

Branch sets are passed either as boolean masks over branch positions
(``in_service``) or as iterables of branch ids (``removed``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .case import NetworkCase
from .errors import ContractViolation, InvalidRemovalError, MalformedCaseError, UndefinedPTDFError

CUT_EPS = 1e-10
SINGULAR_TOL = 1e-10
BALANCE_TOL_MW = 1e-6


def _positions(case: NetworkCase, ids: Iterable[int]) -> np.ndarray:
    try:
        return np.array([case.branch_index[int(i)] for i in ids], dtype=np.int64)
    except KeyError as exc:
        raise InvalidRemovalError(f"unknown branch id {exc.args[0]}") from None


def build_admittance(case: NetworkCase, in_service: np.ndarray) -> np.ndarray:
    """Susceptance Laplacian over the in-service branches (per-unit)."""
    n = case.n_bus
    if np.any(case.f_idx >= n) or np.any(case.t_idx >= n):
        raise MalformedCaseError("branches", "endpoint outside bus list")
    on = np.asarray(in_service, dtype=bool)
    f, t, b = case.f_idx[on], case.t_idx[on], case.susceptance[on]
    Y = np.zeros((n, n))
    np.add.at(Y, (f, f), b)
    np.add.at(Y, (t, t), b)
    np.add.at(Y, (f, t), -b)
    np.add.at(Y, (t, f), -b)
    return Y


def _components_of(Y: np.ndarray) -> tuple[int, np.ndarray]:
    scale = np.max(np.abs(Y)) if Y.size else 0.0
    off = np.abs(Y) > 1e-12 * max(scale, 1.0)
    np.fill_diagonal(off, False)
    return connected_components(coo_matrix(off), directed=False)


def pseudo_inverse(Y: np.ndarray) -> np.ndarray:
    """Pseudo-inverse of a Laplacian, computed island by island.

    For a connected Laplacian ``L`` on ``n`` nodes, ``L+ = (L + J/n)^-1 - J/n``
    with ``J`` the all-ones matrix; the full ``Z`` is block diagonal.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or Y.shape[0] != Y.shape[1]:
        raise ContractViolation("Y must be square")
    scale = np.max(np.abs(Y)) if Y.size else 0.0
    if not np.allclose(Y, Y.T, rtol=0.0, atol=1e-12 * max(scale, 1.0)):
        raise ContractViolation("Y must be symmetric")
    n = Y.shape[0]
    Z = np.zeros((n, n))
    if scale == 0.0:
        return Z
    ncomp, labels = _components_of(Y)
    for c in range(ncomp):
        idx = np.flatnonzero(labels == c)
        m = idx.size
        if m == 1:
            continue
        L = Y[np.ix_(idx, idx)]
        J = np.full((m, m), 1.0 / m)
        block = np.linalg.inv(L + J) - J
        Z[np.ix_(idx, idx)] = 0.5 * (block + block.T)
    return Z


def update_admittance_removal(case: NetworkCase, Y: np.ndarray, in_service: np.ndarray,
                              removed: Iterable[int]) -> np.ndarray:
    """Y' = Y - M diag(y) M^T for the removed branches."""
    pos = _positions(case, removed)
    if np.any(~np.asarray(in_service, dtype=bool)[pos]):
        bad = [int(case.branch_ids[p]) for p in pos if not in_service[p]]
        raise InvalidRemovalError(f"branches not in service: {bad}")
    if len(set(pos.tolist())) != pos.size:
        raise InvalidRemovalError("branch removed twice")
    Y2 = Y.copy()
    f, t, b = case.f_idx[pos], case.t_idx[pos], case.susceptance[pos]
    np.add.at(Y2, (f, f), -b)
    np.add.at(Y2, (t, t), -b)
    np.add.at(Y2, (f, t), b)
    np.add.at(Y2, (t, f), b)
    return Y2


def _incidence(case: NetworkCase, pos: np.ndarray) -> np.ndarray:
    M = np.zeros((case.n_bus, pos.size))
    cols = np.arange(pos.size)
    M[case.f_idx[pos], cols] = 1.0
    M[case.t_idx[pos], cols] = -1.0
    return M


def update_pseudo_inverse(case: NetworkCase, Z: np.ndarray, removed: Iterable[int],
                          tol: float = SINGULAR_TOL) -> np.ndarray | None:
    """Low-rank update of Z after removing branches.

    Returns None when the removed set is a cut set (the small matrix
    ``diag(1/y) - M^T Z M`` is singular); the caller must then recompute.
    """
    if Z.shape != (case.n_bus, case.n_bus):
        raise ContractViolation(f"Z has shape {Z.shape}, expected {(case.n_bus, case.n_bus)}")
    pos = _positions(case, removed)
    if pos.size == 0:
        return Z.copy()
    M = _incidence(case, pos)
    x = 1.0 / case.susceptance[pos]
    ZM = Z @ M
    z = np.diag(x) - M.T @ ZM
    sv = np.linalg.svd(z, compute_uv=False)
    if sv[-1] <= tol * np.max(x):
        return None
    Z2 = Z + ZM @ np.linalg.solve(z, ZM.T)
    return 0.5 * (Z2 + Z2.T)


def cut_residual(case: NetworkCase, Z: np.ndarray, branch: int) -> float:
    """Y_uv^-1 - 2 Z_uv + Z_uu + Z_vv, with Y_uv = -1/x of this branch alone.

    Equals (effective reactance between u and v) - x, which is zero exactly
    when no other path joins u and v.
    """
    k = case.branch_index[int(branch)]
    u, v = case.f_idx[k], case.t_idx[k]
    y_uv = -case.susceptance[k]
    return 1.0 / y_uv - 2.0 * Z[u, v] + Z[u, u] + Z[v, v]


def is_cut_branch(case: NetworkCase, Z: np.ndarray, branch: int, eps: float = CUT_EPS) -> bool:
    return bool(abs(cut_residual(case, Z, branch)) < eps)


def ptdf(case: NetworkCase, Z: np.ndarray, outaged: int, monitored: int,
         eps: float = CUT_EPS) -> float:
    """Share of the outaged branch's pre-outage flow picked up by ``monitored``.

    Both flows are signed in their own from->to orientation.
    """
    if int(outaged) == int(monitored):
        raise ContractViolation("monitored branch must differ from the outaged one")
    if is_cut_branch(case, Z, outaged, eps):
        raise UndefinedPTDFError(f"branch {outaged} is a cut branch")
    k = case.branch_index[int(outaged)]
    m = case.branch_index[int(monitored)]
    u, v = case.f_idx[k], case.t_idx[k]
    p, q = case.f_idx[m], case.t_idx[m]
    y_uv = -case.susceptance[k]
    y_pq = -case.susceptance[m]
    num = Z[u, p] + Z[v, q] - Z[u, q] - Z[v, p]
    den = 1.0 + y_uv * (Z[u, u] + Z[v, v] - 2.0 * Z[u, v])
    return float(-num / den * y_pq)


def outage_sensitivities(case: NetworkCase, Z: np.ndarray, pos: np.ndarray,
                         eps: float = CUT_EPS) -> tuple[np.ndarray, np.ndarray]:
    """All-pairs outage distribution factors over the branches at ``pos``.

    Returns ``(lodf, cut)`` where ``lodf[p, u]`` is the factor of monitored
    branch ``pos[p]`` for the outage of ``pos[u]`` (zero on the diagonal and
    in cut columns) and ``cut[u]`` flags cut branches.
    """
    f, t = case.f_idx[pos], case.t_idx[pos]
    b = case.susceptance[pos]
    Zd = Z[:, f] - Z[:, t]
    A = Zd[f, :] - Zd[t, :]
    reff = np.diag(A).copy()
    cut = np.abs(reff - 1.0 / b) < eps
    den = 1.0 - b * reff
    den = np.where(cut, 1.0, den)
    lodf = b[:, None] * A / den[None, :]
    lodf[:, cut] = 0.0
    np.fill_diagonal(lodf, 0.0)
    return lodf, cut


def island_labels(case: NetworkCase, in_service: np.ndarray) -> tuple[int, np.ndarray]:
    on = np.asarray(in_service, dtype=bool)
    n = case.n_bus
    f, t = case.f_idx[on], case.t_idx[on]
    adj = coo_matrix((np.ones(f.size), (f, t)), shape=(n, n))
    return connected_components(adj, directed=False)


def find_islands(case: NetworkCase, in_service: np.ndarray) -> list[list[int]]:
    """Connected components of the in-service graph, as lists of bus ids."""
    ncomp, labels = island_labels(case, in_service)
    groups = [[] for _ in range(ncomp)]
    for i, lab in enumerate(labels):
        groups[lab].append(case.buses[i])
    return groups


@dataclass(frozen=True)
class FlowSolution:
    flows: np.ndarray          # MW per branch position, 0.0 where out of service
    angles: np.ndarray         # rad per bus
    in_service: np.ndarray
    island_mismatch: np.ndarray  # MW absorbed per island (within tolerance)

    def as_dict(self, case: NetworkCase) -> dict[int, float]:
        return {int(case.branch_ids[k]): float(self.flows[k]) for k in np.flatnonzero(self.in_service)}


def dc_power_flow(case: NetworkCase, in_service: np.ndarray, injections: np.ndarray,
                  Z: np.ndarray | None = None) -> FlowSolution:
    """Solve DC flows for per-bus net injections (MW)."""
    on = np.asarray(in_service, dtype=bool)
    P = np.asarray(injections, dtype=float)
    ncomp, labels = island_labels(case, on)
    mismatch = np.bincount(labels, weights=P, minlength=ncomp)
    if np.any(np.abs(mismatch) > BALANCE_TOL_MW):
        worst = int(np.argmax(np.abs(mismatch)))
        raise ContractViolation(f"island {worst} unbalanced by {mismatch[worst]:.3g} MW")
    if Z is None:
        Z = pseudo_inverse(build_admittance(case, on))
    theta_mw = Z @ P
    flows = case.susceptance * (theta_mw[case.f_idx] - theta_mw[case.t_idx])
    flows = np.where(on, flows, 0.0)
    return FlowSolution(flows=flows, angles=theta_mw / case.base_mva, in_service=on,
                        island_mismatch=mismatch)


@dataclass(frozen=True)
class GridMatrices:
    """Laplacian, its pseudo-inverse and the in-service mask they describe."""

    Y: np.ndarray
    Z: np.ndarray
    in_service: np.ndarray

    @classmethod
    def build(cls, case: NetworkCase, in_service: np.ndarray) -> "GridMatrices":
        on = np.asarray(in_service, dtype=bool).copy()
        Y = build_admittance(case, on)
        return cls(Y=Y, Z=pseudo_inverse(Y), in_service=on)

    def without(self, case: NetworkCase, removed: Iterable[int]) -> "GridMatrices":
        removed = list(removed)
        if not removed:
            return self
        Y2 = update_admittance_removal(case, self.Y, self.in_service, removed)
        Z2 = update_pseudo_inverse(case, self.Z, removed)
        if Z2 is None:
            Z2 = pseudo_inverse(Y2)
        on = self.in_service.copy()
        on[_positions(case, removed)] = False
        return GridMatrices(Y=Y2, Z=Z2, in_service=on)

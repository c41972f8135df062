"""Centralized sum-power minimization.

Pipeline: relax each beamformer outer product to a PSD covariance, solve
the QoS SDP, then either extract rank-one beamformers directly or fall
back to Gaussian randomization with a power-allocation LP per candidate.
"""

import numpy as np

from . import conic
from .conic import ConicProblem, SolveStatus
from .errors import InfeasibleTargetsError, RandomizationFailureError
from .network import BeamformingSolution

RANK_ONE_TOL = 1e-6
DEFAULT_GR_COUNT = 100


def assemble_qos_sdp(channels, topology):
    """QoS power-minimization SDP over all groups.

    One A x A Hermitian PSD variable per group; per-user constraint
    Tr(H_{b,u} W_g) - gamma_u * sum of interfering traces >= gamma_u
    sigma_u^2; objective sum of traces.
    """
    prob = ConicProblem()
    for g in range(topology.G):
        prob.add_psd_var(topology.A, name=f"W{g}")
    prob.set_objective(
        matrix={g: np.eye(topology.A) for g in range(topology.G)})
    for u in range(topology.U):
        g_u = topology.group_of_user[u]
        gamma = topology.gamma[u]
        mats = {}
        for g in range(topology.G):
            H = channels.mat(topology.bs_of_group[g], u)
            mats[g] = H if g == g_u else -gamma * H
        prob.add_constraint(matrix=mats, rel=">=",
                            rhs=gamma * topology.sigma2[u],
                            label=("sinr", u))
    return prob


def extract_rank_one(W, rank_tol=RANK_ONE_TOL):
    """Principal-component beamformer when W is numerically rank one."""
    val, vec = conic.principal_eigenpair(W)
    return np.sqrt(max(val, 0.0)) * vec


def gaussian_candidates(W_star, count, rng):
    """Unit-norm candidate beamformers drawn from CN(0, W*).

    Raw draws are L z with L a PSD square root of W* and z standard
    complex normal, then normalized to unit power.
    """
    if count == 0:
        return []
    L = conic.psd_sqrt(W_star)
    dim = W_star.shape[0]
    out = []
    for _ in range(count):
        z = (rng.standard_normal(dim) + 1j * rng.standard_normal(dim)) \
            / np.sqrt(2.0)
        cand = L @ z
        norm = np.linalg.norm(cand)
        if norm < 1e-30:
            cand = np.zeros(dim)
            cand[0] = 1.0
            norm = 1.0
        out.append(cand / norm)
    return out


def candidate_power_lp(channels, topology, candidates):
    """Power allocation for fixed unit-norm directions (one per group).

    Returns the per-group power dict, or None when the targets cannot be
    met along these directions.
    """
    gains = np.empty((topology.U, topology.G))
    for u in range(topology.U):
        for g in range(topology.G):
            h = channels.vec(topology.bs_of_group[g], u)
            gains[u, g] = abs(np.vdot(h, candidates[g])) ** 2
    prob = ConicProblem()
    pvars = prob.add_scalar_vars(topology.G, name="p")
    prob.set_objective(scalar={j: 1.0 for j in pvars})
    for u in range(topology.U):
        g_u = topology.group_of_user[u]
        gamma = topology.gamma[u]
        coeffs = {}
        for g in range(topology.G):
            coeffs[pvars[g]] = gains[u, g] if g == g_u \
                else -gamma * gains[u, g]
        prob.add_constraint(scalars=coeffs, rel=">=",
                            rhs=gamma * topology.sigma2[u])
    sol = conic.solve(prob)
    if sol.status is not SolveStatus.OPTIMAL:
        return None
    return {g: float(sol.scalar_values[pvars[g]]) for g in range(topology.G)}


def randomize_from_covariances(channels, topology, W_star, count, rng,
                               sdr_objective=None):
    """Gaussian randomization for a full-network covariance set.

    Draws ``count`` candidate direction sets, allocates powers by LP,
    and keeps the feasible set with the lowest sum power (ties broken by
    candidate index).  Infeasible draws count against the budget.
    """
    groups = sorted(W_star.keys())
    draws = {g: gaussian_candidates(W_star[g], count, rng) for g in groups}
    best_power, best = np.inf, None
    for c in range(count):
        cand = {g: draws[g][c] for g in groups}
        powers = candidate_power_lp(channels, topology, cand)
        if powers is None:
            continue
        total = sum(powers.values())
        if total < best_power:
            best_power, best = total, (cand, powers)
    if best is None:
        raise RandomizationFailureError(
            f"all {count} randomization candidates were infeasible",
            sdr_solution=BeamformingSolution(
                W=dict(W_star), objective=sdr_objective))
    cand, powers = best
    solution = BeamformingSolution(objective=best_power,
                                   used_randomization=True)
    for g in groups:
        solution.w[g] = np.sqrt(powers[g]) * cand[g]
        solution.p[g] = powers[g]
        solution.W[g] = np.outer(solution.w[g], solution.w[g].conj())
        solution.rank[g] = 1
    return solution


def solve_centralized(channels, topology, gr_count=DEFAULT_GR_COUNT,
                      rng=None, rank_tol=RANK_ONE_TOL):
    """Full centralized design: SDP relaxation plus rank-one recovery.

    Returns a :class:`BeamformingSolution` whose ``objective`` is the
    achieved sum power (equal to the relaxation optimum when every
    covariance is rank one).  The relaxation optimum itself is attached
    as ``sdr_objective``.
    """
    sdp = assemble_qos_sdp(channels, topology)
    sol = conic.solve(sdp)
    if sol.status is SolveStatus.INFEASIBLE:
        raise InfeasibleTargetsError(
            "SINR targets are infeasible for this channel realization")
    if sol.status is not SolveStatus.OPTIMAL:
        raise InfeasibleTargetsError(
            f"relaxation solve failed with status {sol.status}")
    W_star = {g: sol.matrix_values[g] for g in range(topology.G)}
    ranks = {g: conic.numerical_rank(W_star[g], rank_tol)
             for g in W_star}
    if all(r <= 1 for r in ranks.values()):
        solution = BeamformingSolution(W=W_star, rank=ranks,
                                       objective=sol.objective)
        for g, W in W_star.items():
            vec = extract_rank_one(W, rank_tol)
            solution.w[g] = vec
            solution.p[g] = float(np.linalg.norm(vec) ** 2)
    else:
        if rng is None:
            rng = np.random.default_rng()
        solution = randomize_from_covariances(
            channels, topology, W_star, gr_count, rng,
            sdr_objective=sol.objective)
    solution.sdr_objective = sol.objective
    solution.sdr_rank = ranks
    return solution

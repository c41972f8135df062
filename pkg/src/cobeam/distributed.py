"""Distributed power minimization.

Two coordination schemes over per-BS subproblems:

* primal decomposition: fix inter-cell interference (ICI) caps, solve
  BS-local SDPs, exchange the two dual prices of every directed ICI
  pair, and move the caps by a projected subgradient step; and
* ADMM consensus: give each BS local copies of every ICI value it
  touches, penalize disagreement with the global value, average the two
  copies, and update the pair's duals so they stay exact complements.

Both exchange scalars only through the backhaul bus, so logged counts
are the algorithm's real signaling load.  The special-case designs
(common cap, fixed caps, interference nulling) and the distributed
Gaussian randomization live here too.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from . import conic
from .backhaul import MessageBus
from .conic import ConicProblem, SolveStatus
from .errors import (CobeamError, InfeasibleTargetsError,
                     RandomizationFailureError)
from .network import BeamformingSolution, evaluate_sinr
from .power_min import (RANK_ONE_TOL, extract_rank_one, gaussian_candidates)

THETA_FLOOR = 1e-10
DEFAULT_RHO = 2.0
DEFAULT_STEP = 0.3


class IciIndex:
    """Canonical ordering of directed ICI pairs (interferer BS, user)."""

    def __init__(self, topology):
        self.topology = topology
        self.pairs = topology.ici_pairs()
        self.index = {pair: i for i, pair in enumerate(self.pairs)}

    def __len__(self):
        return len(self.pairs)

    def interferer(self, i):
        return self.pairs[i][0]

    def server(self, i):
        return self.topology.serving_bs(self.pairs[i][1])

    def touching(self, b):
        """Pair indices BS b participates in (either side)."""
        return [i for i in range(len(self.pairs))
                if self.interferer(i) == b or self.server(i) == b]

    def outgoing(self, b):
        return [i for i, (j, _) in enumerate(self.pairs) if j == b]

    def incoming(self, b):
        return [i for i in range(len(self.pairs)) if self.server(i) == b]


@dataclass
class IciState:
    """Coupling variables of the distributed algorithms.

    ``theta`` is the canonical per-pair ICI power; ``theta_local`` holds
    the two owners' copies (row 0 interferer, row 1 serving BS, ADMM
    only); ``lam`` / ``mu`` are the SINR-side and cap-side dual prices;
    ``nu`` the ADMM consensus duals per owner.
    """

    index: IciIndex
    theta: np.ndarray
    theta_local: np.ndarray = None
    lam: np.ndarray = None
    mu: np.ndarray = None
    nu: np.ndarray = None


@dataclass
class ConvergenceTrace:
    """Per-iteration records plus the artifacts of the final iterate."""

    algorithm: str
    rows: list = field(default_factory=list)
    extras: list = field(default_factory=list)
    solution: BeamformingSolution = None
    ici: IciState = None
    log: object = None
    best_power: float = None

    def add(self, iteration, sum_power, residual, scalars, **extra):
        self.rows.append({"iteration": iteration,
                          "sum_power": sum_power,
                          "residual": residual,
                          "scalars_exchanged": scalars})
        self.extras.append(extra)

    @property
    def iterations(self):
        return len(self.rows)

    def final_power(self):
        return self.rows[-1]["sum_power"] if self.rows else None

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=[
                "iteration", "sum_power", "residual", "scalars_exchanged"])
            writer.writeheader()
            writer.writerows(self.rows)


# ---------------------------------------------------------------------------
# subproblem assembly


def assemble_subproblem(b, channels, topology, theta):
    """BS-local power-minimization SDP at fixed ICI values.

    ``theta`` maps directed pairs (j, u) to watts, covering at least the
    pairs that touch cell b.  Incoming values enter the SINR right-hand
    sides, outgoing ones cap this BS's interference.
    """
    groups = topology.groups_of_bs(b)
    prob = ConicProblem()
    slot = {g: prob.add_psd_var(topology.A, name=f"W{g}") for g in groups}
    prob.set_objective(matrix={slot[g]: np.eye(topology.A) for g in groups})
    for u in topology.users_of_bs(b):
        g_u = topology.group_of_user[u]
        gamma = topology.gamma[u]
        incoming = sum(theta[(j, u)] for j in range(topology.B) if j != b)
        mats = {}
        for g in groups:
            H = channels.mat(b, u)
            mats[slot[g]] = H if g == g_u else -gamma * H
        prob.add_constraint(matrix=mats, rel=">=",
                            rhs=gamma * (topology.sigma2[u] + incoming),
                            label=("sinr", u))
    for u in topology.out_of_cell_users(b):
        mats = {slot[g]: channels.mat(b, u) for g in groups}
        prob.add_constraint(matrix=mats, rel="<=", rhs=theta[(b, u)],
                            label=("cap", (b, u)))
    return prob, slot


def extract_subgradient(problem, solution, topology, b):
    """Dual prices this BS contributes to the master subgradient.

    For a pair (j, u): the serving BS supplies lam = gamma_u times the
    dual of user u's SINR constraint (the sensitivity of its local
    optimum to any incoming ICI term), the interfering BS supplies mu,
    the dual of its cap.  s = lam - mu.
    """
    if solution.status is not SolveStatus.OPTIMAL or solution.duals is None:
        raise CobeamError("subgradient extraction needs an optimal solution "
                          "with duals")
    lam = {}
    for u in topology.users_of_bs(b):
        k = problem.constraint_index(("sinr", u))
        lam[u] = float(topology.gamma[u] * solution.duals[k])
    mu = {}
    for u in topology.out_of_cell_users(b):
        k = problem.constraint_index(("cap", (b, u)))
        mu[(b, u)] = float(solution.duals[k])
    return {"lam": lam, "mu": mu}


def master_update(theta, subgrad, iteration, step, floor=THETA_FLOOR):
    """Projected subgradient step on the ICI caps.

    ``step`` is either a fixed size or a callable schedule step(r); the
    projection clamps onto the (numerically) positive orthant at
    ``floor``.  The consensus loops raise the floor well above 1e-10:
    the cap dual grows like 1/sqrt(theta) at the boundary, so iterates
    touching a near-zero cap would pick up enormous subgradients.
    """
    size = step(iteration) if callable(step) else float(step)
    return np.maximum(theta - size * subgrad, floor)


def diminishing_step(initial):
    """Nonsummable diminishing schedule initial / sqrt(r + 1)."""
    return lambda r: initial / np.sqrt(r + 1.0)


# ---------------------------------------------------------------------------
# primal decomposition (projected subgradient master)


def run_primal_decomposition(channels, topology, max_iters=100,
                             step=DEFAULT_STEP, theta0=None, tol=1e-6,
                             gr_count=100, rng=None, rank_tol=RANK_ONE_TOL,
                             common_theta=False, theta_floor=None):
    """Distributed power minimization by primal decomposition.

    Every BS holds a replica of the caps for the pairs it touches; after
    each round of dual exchange both owners apply the same pure update,
    so the replicas never diverge.  The best (lowest master objective)
    iterate is kept and its beamformers extracted at the end.

    ``theta_floor`` defaults to 1% of the mean noise power: caps below
    that are physically irrelevant but sit on the boundary singularity
    of the cap dual, which would destabilize the fixed-step update.
    """
    index = IciIndex(topology)
    npairs = len(index)
    if theta_floor is None:
        theta_floor = 1e-2 * float(np.mean(topology.sigma2))
    theta = np.full(npairs, float(np.mean(topology.sigma2)))
    if theta0 is not None:
        theta = np.broadcast_to(np.asarray(theta0, float), (npairs,)).copy()
    theta = np.maximum(theta, theta_floor)
    if common_theta and npairs:
        theta[:] = theta[0]

    bus = MessageBus(range(topology.B))
    replicas = {b: {i: theta[i] for i in index.touching(b)}
                for b in range(topology.B)}
    trace = ConvergenceTrace(algorithm="primal-decomposition")
    best = {"power": np.inf, "theta": theta.copy(), "W": None}

    for r in range(max_iters):
        solutions = {}
        grads = {}
        total_power = 0.0
        for b in range(topology.B):
            theta_b = {index.pairs[i]: replicas[b][i]
                       for i in index.touching(b)}
            prob, slot = assemble_subproblem(b, channels, topology, theta_b)
            sol = conic.solve(prob)
            if sol.status is not SolveStatus.OPTIMAL:
                if r == 0:
                    raise InfeasibleTargetsError(
                        f"subproblem of BS {b} infeasible at the initial "
                        "ICI caps; retry with a larger theta0")
                raise InfeasibleTargetsError(
                    f"subproblem of BS {b} became infeasible at iteration "
                    f"{r} (status {sol.status})")
            solutions[b] = (prob, sol, slot)
            grads[b] = extract_subgradient(prob, sol, topology, b)
            total_power += sol.objective

        # exchange: lam for served users to every interferer, mu to the
        # serving BS of each out-of-cell user
        for b in range(topology.B):
            lam = grads[b]["lam"]
            users_b = topology.users_of_bs(b)
            for other in range(topology.B):
                if other == b:
                    continue
                bus.post(b, other, "dual-lambda",
                         [lam[u] for u in users_b])
            by_server = {}
            for (j, u), val in grads[b]["mu"].items():
                by_server.setdefault(topology.serving_bs(u), []).append(
                    ((j, u), val))
            for server, items in sorted(by_server.items()):
                bus.post(b, server, "dual-mu", [v for _, v in items])
        inboxes = bus.deliver()
        scalars = bus.log.scalars_in_round(bus.round - 1)

        # each agent rebuilds the two prices of its pairs from its own
        # solve plus the delivered duals, nothing else
        lam_view = {b: dict(grads[b]["lam"]) for b in range(topology.B)}
        mu_view = {b: dict(grads[b]["mu"]) for b in range(topology.B)}
        for b in range(topology.B):
            for sender, tag, values in inboxes[b]:
                if tag == "dual-lambda":
                    for u, val in zip(topology.users_of_bs(sender), values):
                        lam_view[b][u] = val
                elif tag == "dual-mu":
                    pairs = [(sender, u)
                             for u in topology.out_of_cell_users(sender)
                             if topology.serving_bs(u) == b]
                    for pair, val in zip(pairs, values):
                        mu_view[b][pair] = val

        # canonical reference update, then both owners apply the same
        # pure function to their replicas; any divergence is recorded
        lam_all = {u: grads[topology.serving_bs(u)]["lam"][u]
                   for u in range(topology.U)}
        mu_all = {}
        for b in range(topology.B):
            mu_all.update(grads[b]["mu"])
        subgrad = np.array([lam_all[u] - mu_all[(j, u)]
                            for (j, u) in index.pairs])
        if common_theta and npairs:
            subgrad = np.full(npairs, subgrad.sum())
        theta_new = master_update(theta, subgrad, r, step, theta_floor)

        replica_err = 0.0
        for b in range(topology.B):
            local_s = np.array(
                [lam_view[b][u] - mu_view[b][(j, u)]
                 for (j, u) in (index.pairs[i] for i in index.touching(b))])
            if common_theta and local_s.size:
                local_s = np.full(local_s.size, float(subgrad[0]))
            for k, i in enumerate(index.touching(b)):
                local = master_update(
                    np.array([replicas[b][i]]),
                    np.array([local_s[k]]), r, step, theta_floor)[0]
                replicas[b][i] = local
                replica_err = max(replica_err, abs(local - theta_new[i]))

        change = float(np.max(np.abs(theta_new - theta))) if npairs else 0.0
        current_W = {g: solutions[b][1].matrix_values[k]
                     for b in solutions for g, k in solutions[b][2].items()}
        if total_power < best["power"]:
            best = {"power": total_power, "theta": theta.copy(),
                    "W": current_W,
                    "lam": np.array([lam_all[u]
                                     for (_, u) in index.pairs]),
                    "mu": np.array([mu_all[p] for p in index.pairs])}
        trace.add(r, total_power, change, scalars,
                  replica_error=replica_err,
                  best_power=best["power"],
                  min_sinr_margin=_rank_one_margin(
                      channels, topology, current_W, rank_tol))
        theta = theta_new
        if change <= tol:
            break

    trace.best_power = best["power"]
    trace.ici = IciState(index=index, theta=best["theta"],
                         lam=best.get("lam"), mu=best.get("mu"))
    theta_map = {index.pairs[i]: best["theta"][i] for i in range(npairs)}
    trace.solution = _finalize(channels, topology, best["W"], theta_map,
                               bus, gr_count, rng, rank_tol)
    trace.log = bus.log
    return trace


def _rank_one_margin(channels, topology, W_by_group, rank_tol):
    """min_u SINR(u)/gamma_u - 1 for eigen-extracted beams, or None."""
    if W_by_group is None:
        return None
    beams = {}
    for g, W in W_by_group.items():
        if conic.numerical_rank(W, rank_tol) > 1:
            return None
        beams[g] = extract_rank_one(W, rank_tol)
    sol = BeamformingSolution(w=beams)
    margins = [evaluate_sinr(channels, sol, u, topology) / topology.gamma[u]
               - 1.0 for u in range(topology.U)]
    return float(min(margins))


def _finalize(channels, topology, W_by_group, theta_map, bus, gr_count,
              rng, rank_tol):
    """Rank check with one-bit exchange, then extraction or local GR."""
    ranks = {g: conic.numerical_rank(W, rank_tol)
             for g, W in W_by_group.items()}
    for b in range(topology.B):
        all_one = all(ranks[g] == 1 for g in topology.groups_of_bs(b))
        bus.post(b, None, "rank-bit", [1.0 if all_one else 0.0])
    bus.deliver()
    if all(r == 1 for r in ranks.values()):
        solution = BeamformingSolution(W=dict(W_by_group), rank=ranks)
        for g, W in W_by_group.items():
            vec = extract_rank_one(W, rank_tol)
            solution.w[g] = vec
            solution.p[g] = float(np.linalg.norm(vec) ** 2)
        solution.objective = sum(solution.p.values())
    else:
        if rng is None:
            rng = np.random.default_rng()
        solution = distributed_gaussian_randomization(
            channels, topology, W_by_group, theta_map, gr_count, rng,
            bus=bus)
    solution.sdr_rank = ranks
    return solution


# ---------------------------------------------------------------------------
# ADMM consensus


def assemble_admm_local(b, channels, topology, theta_global, nu_b, rho,
                        index=None):
    """BS-local augmented-Lagrangian step.

    Variables: this BS's covariances plus one nonnegative local copy per
    ICI pair touching the cell (both directions).  The disagreement
    penalty contributes rho/2 per squared copy on the quadratic diagonal
    and nu - rho * theta_global on the linear part.
    """
    if index is None:
        index = IciIndex(topology)
    groups = topology.groups_of_bs(b)
    pairs_b = index.touching(b)
    prob = ConicProblem()
    slot = {g: prob.add_psd_var(topology.A, name=f"W{g}") for g in groups}
    copy_slot = {i: prob.add_scalar_var(name=f"theta~{index.pairs[i]}")
                 for i in pairs_b}
    lin = {}
    quad = {}
    for i in pairs_b:
        lin[copy_slot[i]] = float(nu_b[i] - rho * theta_global[i])
        quad[copy_slot[i]] = rho / 2.0
    prob.set_objective(
        matrix={slot[g]: np.eye(topology.A) for g in groups},
        scalar=lin, scalar_quad=quad)
    for u in topology.users_of_bs(b):
        g_u = topology.group_of_user[u]
        gamma = topology.gamma[u]
        mats = {}
        for g in groups:
            H = channels.mat(b, u)
            mats[slot[g]] = H if g == g_u else -gamma * H
        scalars = {copy_slot[index.index[(j, u)]]: -gamma
                   for j in range(topology.B) if j != b}
        prob.add_constraint(matrix=mats, scalars=scalars, rel=">=",
                            rhs=gamma * topology.sigma2[u],
                            label=("sinr", u))
    for u in topology.out_of_cell_users(b):
        mats = {slot[g]: channels.mat(b, u) for g in groups}
        prob.add_constraint(matrix=mats,
                            scalars={copy_slot[index.index[(b, u)]]: -1.0},
                            rel="<=", rhs=0.0, label=("cap", (b, u)))
    return prob, slot, copy_slot


def admm_global_update(theta_local_pair):
    """Consensus value: arithmetic mean of the two owners' copies.

    The dual terms cancel exactly because paired duals are complements,
    leaving theta = (copy_interferer + copy_server) / 2.
    """
    pair = np.asarray(theta_local_pair, dtype=float)
    return 0.5 * (pair[0] + pair[1])


def admm_dual_update(nu, theta_local, theta, rho):
    """Plain dual ascent nu + rho (theta_local - theta), elementwise.

    The consensus loop uses the algebraically equal pair form
    nu +/- rho/2 (copy_self - copy_other), which keeps the two owners'
    duals summing to exactly zero in floating point.
    """
    return np.asarray(nu, float) + rho * (np.asarray(theta_local, float)
                                          - np.asarray(theta, float))


def admm_pair_dual_update(nu_pair, copies_pair, rho):
    """Both owners' dual updates at once; pair sums stay exactly zero."""
    nu_pair = np.asarray(nu_pair, dtype=float)
    copies = np.asarray(copies_pair, dtype=float)
    delta = 0.5 * rho * (copies[0] - copies[1])
    return np.array([nu_pair[0] + delta, nu_pair[1] - delta])


def run_admm(channels, topology, max_iters=100, rho=DEFAULT_RHO, tol=1e-6,
             gr_count=100, rng=None, rank_tol=RANK_ONE_TOL,
             theta_floor=None):
    """Distributed power minimization by ADMM consensus.

    Per iteration: local solves (in parallel), one exchange of local
    copies, the global average, and the exactly-complementary dual
    update.  Stops when both the consensus residual and the dual
    residual rho * |theta change| fall below ``tol``; the consensus
    residual alone can be small long before the caps stop moving.  The
    returned solution is restored at the final global ICI values so it
    is feasible for the true coupled problem.
    """
    index = IciIndex(topology)
    npairs = len(index)
    if theta_floor is None:
        theta_floor = 1e-2 * float(np.mean(topology.sigma2))
    theta = np.full(npairs, float(np.mean(topology.sigma2)))
    # owner rows: 0 interferer, 1 serving BS
    nu = np.zeros((2, npairs))
    copies = np.zeros((2, npairs))
    bus = MessageBus(range(topology.B))
    trace = ConvergenceTrace(algorithm="admm")

    last_W = None
    for it in range(max_iters):
        total_power = 0.0
        last_W = {}
        for b in range(topology.B):
            nu_b = {}
            for i in index.touching(b):
                owner = 0 if index.interferer(i) == b else 1
                nu_b[i] = nu[owner, i]
            prob, slot, copy_slot = assemble_admm_local(
                b, channels, topology, theta, nu_b, rho, index=index)
            sol = conic.solve(prob)
            if sol.status is not SolveStatus.OPTIMAL:
                raise InfeasibleTargetsError(
                    f"ADMM local problem of BS {b} failed at iteration "
                    f"{it} (status {sol.status})")
            for g, k in slot.items():
                last_W[g] = sol.matrix_values[k]
                total_power += float(np.real(np.trace(sol.matrix_values[k])))
            for i, j in copy_slot.items():
                owner = 0 if index.interferer(i) == b else 1
                copies[owner, i] = sol.scalar_values[j]

        # exchange local copies with the pair's other owner
        for b in range(topology.B):
            by_peer = {}
            for i in index.touching(b):
                own_side = 0 if index.interferer(i) == b else 1
                peer = index.server(i) if own_side == 0 \
                    else index.interferer(i)
                by_peer.setdefault(peer, []).append(copies[own_side, i])
            for peer, values in sorted(by_peer.items()):
                bus.post(b, peer, "local-copy", values)
        inboxes = bus.deliver()
        scalars = bus.log.scalars_in_round(bus.round - 1)

        # every agent recovers its partners' copies from its inbox and
        # runs the averaging + dual step; both owners produce the same
        # bits, checked below against the canonical arrays
        partner = {b: {} for b in range(topology.B)}
        for b in range(topology.B):
            for sender, tag, values in inboxes[b]:
                shared = [i for i in index.touching(sender)
                          if index.interferer(i) == b
                          or index.server(i) == b]
                for i, val in zip(shared, values):
                    partner[b][i] = val

        theta_new = admm_global_update(copies)
        for i in range(npairs):
            nu[:, i] = admm_pair_dual_update(nu[:, i], copies[:, i], rho)
        replica_err = 0.0
        for b in range(topology.B):
            for i in index.touching(b):
                own_side = 0 if index.interferer(i) == b else 1
                own = copies[own_side, i]
                agent_theta = admm_global_update(
                    [own, partner[b][i]] if own_side == 0
                    else [partner[b][i], own])
                replica_err = max(replica_err,
                                  abs(agent_theta - theta_new[i]))

        residual = float(np.max(np.abs(copies - theta_new[None, :]))) \
            if npairs else 0.0
        dual_residual = rho * float(np.max(np.abs(theta_new - theta))) \
            if npairs else 0.0
        trace.add(it, total_power, residual, scalars,
                  dual_residual=dual_residual,
                  replica_error=replica_err,
                  nu_pair_sum=float(np.max(np.abs(nu.sum(axis=0))))
                  if npairs else 0.0)
        theta = theta_new
        if residual <= tol and dual_residual <= tol:
            break

    # restore a network-feasible solution at the final global values;
    # caps are floored away from the boundary singularity
    restore_map = {index.pairs[i]: max(theta[i], theta_floor)
                   for i in range(npairs)}
    restored = {}
    for b in range(topology.B):
        part = admm_feasibility_restore(b, channels, topology, restore_map)
        restored.update(part.W)
    trace.ici = IciState(index=index, theta=theta.copy(),
                         theta_local=copies.copy(), nu=nu.copy())
    trace.solution = _finalize(channels, topology, restored, restore_map,
                               bus, gr_count, rng, rank_tol)
    trace.log = bus.log
    trace.best_power = trace.solution.objective
    return trace


def admm_feasibility_restore(b, channels, topology, theta_global):
    """Feasible BS-b beamformers at the current global ICI values.

    Pins the local copies to the global values, which reduces the
    augmented local problem to the fixed-cap subproblem.
    """
    prob, slot = assemble_subproblem(b, channels, topology, theta_global)
    sol = conic.solve(prob)
    if sol.status is not SolveStatus.OPTIMAL:
        raise InfeasibleTargetsError(
            f"restoration at BS {b} infeasible for the current global ICI "
            "values")
    out = BeamformingSolution(objective=sol.objective)
    for g, k in slot.items():
        out.W[g] = sol.matrix_values[k]
        out.rank[g] = conic.numerical_rank(sol.matrix_values[k])
    return out


# ---------------------------------------------------------------------------
# distributed Gaussian randomization (fixed ICI values)


def local_randomization_lp(b, channels, topology, candidates_b, theta):
    """Power LP of one BS for one candidate set, ICI values fixed.

    Returns per-group powers or None when this draw cannot meet the
    targets under the caps.
    """
    groups = topology.groups_of_bs(b)
    prob = ConicProblem()
    pvar = {g: prob.add_scalar_var(name=f"p{g}") for g in groups}
    prob.set_objective(scalar={pvar[g]: 1.0 for g in groups})
    for u in topology.users_of_bs(b):
        g_u = topology.group_of_user[u]
        gamma = topology.gamma[u]
        incoming = sum(theta[(j, u)] for j in range(topology.B) if j != b)
        coeffs = {}
        for g in groups:
            gain = abs(np.vdot(channels.vec(b, u), candidates_b[g])) ** 2
            coeffs[pvar[g]] = gain if g == g_u else -gamma * gain
        prob.add_constraint(scalars=coeffs, rel=">=",
                            rhs=gamma * (topology.sigma2[u] + incoming))
    for u in topology.out_of_cell_users(b):
        coeffs = {pvar[g]: abs(np.vdot(channels.vec(b, u),
                                       candidates_b[g])) ** 2
                  for g in groups}
        prob.add_constraint(scalars=coeffs, rel="<=", rhs=theta[(b, u)])
    sol = conic.solve(prob)
    if sol.status is not SolveStatus.OPTIMAL:
        return None
    return {g: float(sol.scalar_values[pvar[g]]) for g in groups}


def distributed_gaussian_randomization(channels, topology, W_star, theta,
                                       count, rng, bus=None):
    """Network-wide randomization with only per-candidate power exchange.

    Each BS draws candidates from its own covariances, runs the local
    power LP per candidate, and broadcasts its per-candidate totals; all
    BSs then pick the same globally cheapest index.
    """
    if bus is None:
        bus = MessageBus(range(topology.B))
    seeds = rng.spawn(topology.B) if hasattr(rng, "spawn") \
        else [np.random.default_rng(rng.integers(2 ** 63))
              for _ in range(topology.B)]
    per_bs = {}
    totals = np.zeros((topology.B, count))
    for b in range(topology.B):
        groups = topology.groups_of_bs(b)
        draws = {g: gaussian_candidates(W_star[g], count, seeds[b])
                 for g in groups}
        rows = []
        for c in range(count):
            cand = {g: draws[g][c] for g in groups}
            powers = local_randomization_lp(b, channels, topology, cand,
                                            theta)
            rows.append((cand, powers))
            totals[b, c] = np.inf if powers is None \
                else sum(powers.values())
        if not any(p is not None for _, p in rows):
            raise RandomizationFailureError(
                f"all {count} candidates infeasible at BS {b}")
        per_bs[b] = rows
        bus.post(b, None, "gr-power",
                 np.where(np.isfinite(totals[b]), totals[b], 1e300))
    bus.deliver()

    network = totals.sum(axis=0)
    if not np.isfinite(network).any():
        raise RandomizationFailureError(
            f"no candidate index feasible at every BS ({count} drawn)")
    pick = int(np.argmin(network))
    solution = BeamformingSolution(objective=float(network[pick]),
                                   used_randomization=True)
    for b in range(topology.B):
        cand, powers = per_bs[b][pick]
        for g in topology.groups_of_bs(b):
            solution.w[g] = np.sqrt(powers[g]) * cand[g]
            solution.p[g] = powers[g]
            solution.W[g] = np.outer(solution.w[g], solution.w[g].conj())
            solution.rank[g] = 1
    solution.gr_totals = network
    return solution


# ---------------------------------------------------------------------------
# special-case designs (fixed caps, nulling)


def solve_fixed_ici(channels, topology, theta_value, gr_count=100, rng=None,
                    rank_tol=RANK_ONE_TOL):
    """One-shot per-cell design with predefined ICI caps, no signaling."""
    index = IciIndex(topology)
    theta = {pair: float(theta_value) for pair in index.pairs}
    combined = {}
    for b in range(topology.B):
        prob, slot = assemble_subproblem(b, channels, topology, theta)
        sol = conic.solve(prob)
        if sol.status is not SolveStatus.OPTIMAL:
            raise InfeasibleTargetsError(
                f"fixed-cap subproblem of BS {b} infeasible at "
                f"theta={theta_value}")
        combined.update({g: sol.matrix_values[k] for g, k in slot.items()})
    ranks = {g: conic.numerical_rank(W, rank_tol)
             for g, W in combined.items()}
    if all(r == 1 for r in ranks.values()):
        solution = BeamformingSolution(W=combined, rank=ranks)
        for g, W in combined.items():
            solution.w[g] = extract_rank_one(W, rank_tol)
            solution.p[g] = float(np.linalg.norm(solution.w[g]) ** 2)
        solution.objective = sum(solution.p.values())
    else:
        if rng is None:
            rng = np.random.default_rng()
        solution = distributed_gaussian_randomization(
            channels, topology, combined, theta, gr_count, rng)
    solution.sdr_rank = ranks
    return solution


def _null_space_basis(channels, topology, b):
    """Orthonormal basis of the directions invisible to other cells.

    Beams w with h^H w = 0 for every out-of-cell channel h, i.e. the
    null space of the stacked conjugated channels.
    """
    rows = [channels.vec(b, u).conj() for u in topology.out_of_cell_users(b)]
    if not rows:
        return np.eye(topology.A, dtype=complex)
    stack = np.array(rows)
    _, s, vh = np.linalg.svd(stack)
    rank = int(np.sum(s > 1e-12 * (s[0] if s.size else 1.0)))
    return vh[rank:].conj().T


def solve_nulling(channels, topology, rank_tol=RANK_ONE_TOL, gr_count=100,
                  rng=None):
    """Zero-forcing toward other cells: beams in the cross-channel null
    space, then a per-cell QoS design in the reduced space.

    Any covariance with exactly zero leakage has its range inside the
    null space, so the reduction is lossless.
    """
    combined = {}
    for b in range(topology.B):
        basis = _null_space_basis(channels, topology, b)
        if basis.shape[1] == 0:
            raise InfeasibleTargetsError(
                f"BS {b} lacks antennas to null all out-of-cell users")
        groups = topology.groups_of_bs(b)
        dim = basis.shape[1]
        prob = ConicProblem()
        slot = {g: prob.add_psd_var(dim, name=f"M{g}") for g in groups}
        prob.set_objective(matrix={slot[g]: np.eye(dim) for g in groups})
        for u in topology.users_of_bs(b):
            g_u = topology.group_of_user[u]
            gamma = topology.gamma[u]
            h_red = basis.conj().T @ channels.vec(b, u)
            H_red = np.outer(h_red, h_red.conj())
            mats = {slot[g]: (H_red if g == g_u else -gamma * H_red)
                    for g in groups}
            prob.add_constraint(matrix=mats, rel=">=",
                                rhs=gamma * topology.sigma2[u],
                                label=("sinr", u))
        sol = conic.solve(prob)
        if sol.status is not SolveStatus.OPTIMAL:
            raise InfeasibleTargetsError(
                f"nulling design infeasible at BS {b}")
        for g, k in slot.items():
            combined[g] = basis @ sol.matrix_values[k] @ basis.conj().T
    ranks = {g: conic.numerical_rank(W, rank_tol)
             for g, W in combined.items()}
    if all(r == 1 for r in ranks.values()):
        solution = BeamformingSolution(W=combined, rank=ranks)
        for g, W in combined.items():
            solution.w[g] = extract_rank_one(W, rank_tol)
            solution.p[g] = float(np.linalg.norm(solution.w[g]) ** 2)
        solution.objective = sum(solution.p.values())
    else:
        if rng is None:
            rng = np.random.default_rng()
        index = IciIndex(topology)
        theta = {pair: 0.0 for pair in index.pairs}
        solution = distributed_gaussian_randomization(
            channels, topology, combined, theta, gr_count, rng)
    solution.sdr_rank = ranks
    return solution

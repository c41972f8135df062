"""Max-min SINR balancing.

The centralized design runs a bisection over the relaxed feasibility
problem (per-BS power budgets, all interference coupled); the
distributed design lets each cell balance its own users against fixed
incoming-interference assumptions and outgoing caps, with no backhaul
exchange at all; the uncoordinated baseline ignores interference
entirely and gets re-evaluated against the truth.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import conic
from .conic import ConicProblem, SolveStatus
from .errors import ConfigurationError, IndeterminateError, StateError
from .network import BeamformingSolution, evaluate_sinr
from .power_min import RANK_ONE_TOL, extract_rank_one, gaussian_candidates

DEFAULT_EPSILON = 1e-3
EXPANSION_LIMIT = 60


@dataclass
class BisectionResult:
    """Outcome of one bisection run.

    ``probes`` records every (t, feasible) pair in order; ``calls`` only
    counts the probes of the halving loop, ``extra_calls`` any bound
    verification or fallback solves around it.
    """

    t: float
    lower: float
    upper: float
    payload: object = None
    calls: int = 0
    extra_calls: int = 0
    probes: list = field(default_factory=list)


def bisect(lower, upper, epsilon, probe):
    """Generic bisection over a monotone feasibility predicate.

    ``probe(t)`` returns (feasible, payload).  The final interval width
    is at most ``epsilon`` and the lower end is feasible (by invariant;
    it is only probed if no interior point ever succeeded).  A probe on
    the numerical knife edge that cannot be decided counts as
    infeasible, which biases the level down by at most the solver's own
    resolution.
    """
    if epsilon <= 0:
        raise ConfigurationError("bisection tolerance must be positive")
    if upper < lower:
        raise ConfigurationError("upper bound below lower bound")
    result = BisectionResult(t=0.5 * (lower + upper), lower=lower,
                             upper=upper)
    payload = None
    while upper - lower > epsilon:
        mid = 0.5 * (lower + upper)
        try:
            feasible, pay = probe(mid)
        except IndeterminateError:
            feasible, pay = False, None
        result.calls += 1
        result.probes.append((mid, feasible))
        if feasible:
            lower, payload = mid, pay
        else:
            upper = mid
    if payload is None:
        feasible, payload = probe(lower)
        result.extra_calls += 1
        result.probes.append((lower, feasible))
        if not feasible:
            raise ConfigurationError(
                f"lower bound {lower} is not feasible; bad bracket")
    result.t = 0.5 * (lower + upper)
    result.lower = lower
    result.upper = upper
    result.payload = payload
    return result


def assemble_feasibility(channels, topology, t):
    """Relaxed balancing feasibility problem at a fixed SINR level."""
    if t < 0:
        raise ConfigurationError("SINR level t must be nonnegative")
    prob = ConicProblem()
    for g in range(topology.G):
        prob.add_psd_var(topology.A, name=f"W{g}")
    for u in range(topology.U):
        g_u = topology.group_of_user[u]
        mats = {}
        for g in range(topology.G):
            H = channels.mat(topology.bs_of_group[g], u)
            mats[g] = H if g == g_u else -t * H
        prob.add_constraint(matrix=mats, rel=">=",
                            rhs=t * topology.sigma2[u], label=("sinr", u))
    for b in range(topology.B):
        mats = {g: np.eye(topology.A) for g in topology.groups_of_bs(b)}
        prob.add_constraint(matrix=mats, rel="<=",
                            rhs=float(topology.p_max[b]),
                            label=("power", b))
    return prob


def single_user_upper_bound(channels, topology, users=None):
    """Interference-free cap max_u P_b(u) ||h_{b(u),u}||^2 / sigma_u^2.

    No user can beat its own matched-filter SINR at full serving-BS
    power, so this always brackets the balanced optimum from above.
    """
    users = range(topology.U) if users is None else users
    bound = 0.0
    for u in users:
        b = topology.serving_bs(u)
        gain = float(np.linalg.norm(channels.vec(b, u)) ** 2)
        bound = max(bound, topology.p_max[b] * gain / topology.sigma2[u])
    return bound


def _verify_or_expand_upper(probe, lower, upper):
    """User-supplied upper bounds must actually be infeasible."""
    extra = 0
    for _ in range(EXPANSION_LIMIT):
        feasible, _ = probe(upper)
        extra += 1
        if not feasible:
            return upper, extra
        upper = lower + 2.0 * (upper - lower)
    raise ConfigurationError(
        "upper bound still feasible after expansion limit; "
        "initial bracket too small")


def bisect_balance(channels, topology, epsilon=DEFAULT_EPSILON, bounds=None,
                   polish=True):
    """Centralized max-min SINR via bisection on the relaxed problem.

    Returns a :class:`BisectionResult` whose payload is the covariance
    dict at the final feasible level.  With default bounds the upper end
    is the provably-unreachable matched-filter cap and is not probed.

    Interior-point feasibility solves return central (high-rank) points,
    so by default one extra power-minimizing solve at the final feasible
    level replaces the payload with an extreme-face solution; that is
    the covariance set whose rank the extraction step then inspects.
    """
    def probe(t):
        feasible, sol = conic.check_feasibility(
            assemble_feasibility(channels, topology, t),
            return_solution=True)
        if not feasible:
            return False, None
        return True, {g: sol.matrix_values[g] for g in range(topology.G)}

    extra = 0
    if bounds is None:
        lower, upper = 0.0, single_user_upper_bound(channels, topology)
    else:
        lower, upper = bounds
        upper, extra = _verify_or_expand_upper(probe, lower, upper)
    result = bisect(lower, upper, epsilon, probe)
    result.extra_calls += extra
    if polish:
        prob = assemble_feasibility(channels, topology, result.lower)
        prob.set_objective(matrix={g: np.eye(topology.A)
                                   for g in range(topology.G)})
        sol = conic.solve(prob)
        result.extra_calls += 1
        if sol.status is SolveStatus.OPTIMAL:
            result.payload = {g: sol.matrix_values[g]
                              for g in range(topology.G)}
    return result


def balance_gaussian_randomization(channels, topology, candidates,
                                   epsilon=DEFAULT_EPSILON):
    """Pick the candidate beamformer set with the best balanced level.

    ``candidates`` is a list of full direction sets (group -> unit
    vector).  Each set is scored by a bisection whose feasibility test
    is a power-allocation LP; the best (t, powers, index) wins.
    """
    best = (0.0, None, -1)
    for idx, cand in enumerate(candidates):
        gains = np.empty((topology.U, topology.G))
        for u in range(topology.U):
            for g in range(topology.G):
                h = channels.vec(topology.bs_of_group[g], u)
                gains[u, g] = abs(np.vdot(h, cand[g])) ** 2

        def probe(t):
            prob = ConicProblem()
            pvars = prob.add_scalar_vars(topology.G, name="p")
            for u in range(topology.U):
                g_u = topology.group_of_user[u]
                coeffs = {}
                for g in range(topology.G):
                    coeffs[pvars[g]] = gains[u, g] if g == g_u \
                        else -t * gains[u, g]
                prob.add_constraint(scalars=coeffs, rel=">=",
                                    rhs=t * topology.sigma2[u])
            for b in range(topology.B):
                prob.add_constraint(
                    scalars={pvars[g]: 1.0
                             for g in topology.groups_of_bs(b)},
                    rel="<=", rhs=float(topology.p_max[b]))
            feasible, sol = conic.check_feasibility(prob,
                                                    return_solution=True)
            if not feasible:
                return False, None
            return True, {g: float(sol.scalar_values[pvars[g]])
                          for g in range(topology.G)}

        upper = single_user_upper_bound(channels, topology)
        res = bisect(0.0, upper, epsilon, probe)
        if res.t > best[0] or best[2] < 0:
            best = (res.t, res.payload, idx)
    if best[0] <= epsilon:
        warnings.warn("every candidate balances essentially to zero; "
                      "returning the least bad one", stacklevel=2)
    return best


def _per_cell_bisect(b, channels, topology, build, epsilon, polish=True):
    """Bisection plus extreme-face polish for one cell's problems."""
    groups = topology.groups_of_bs(b)

    def probe(t):
        prob, slot = build(t)
        feasible, sol = conic.check_feasibility(prob, return_solution=True)
        if not feasible:
            return False, None
        return True, {g: sol.matrix_values[slot[g]] for g in groups}

    upper = single_user_upper_bound(channels, topology,
                                    topology.users_of_bs(b))
    result = bisect(0.0, upper, epsilon, probe)
    if polish:
        prob, slot = build(result.lower)
        prob.set_objective(matrix={slot[g]: np.eye(topology.A)
                                   for g in groups})
        sol = conic.solve(prob)
        result.extra_calls += 1
        if sol.status is SolveStatus.OPTIMAL:
            result.payload = {g: sol.matrix_values[slot[g]]
                              for g in groups}
    return result


def local_balance(b, channels, topology, theta_cap,
                  epsilon=DEFAULT_EPSILON):
    """Per-cell balancing with fixed ICI caps, no backhaul exchange.

    Incoming interference is assumed at the cap value; outgoing
    interference is constrained below it.  ``theta_cap`` is a scalar or
    a dict over directed pairs.
    """
    def cap(pair):
        return theta_cap[pair] if hasattr(theta_cap, "__getitem__") \
            else float(theta_cap)

    groups = topology.groups_of_bs(b)

    def build(t):
        prob = ConicProblem()
        slot = {g: prob.add_psd_var(topology.A, name=f"W{g}")
                for g in groups}
        for u in topology.users_of_bs(b):
            g_u = topology.group_of_user[u]
            incoming = sum(cap((j, u)) for j in range(topology.B)
                           if j != b)
            mats = {}
            for g in groups:
                H = channels.mat(b, u)
                mats[slot[g]] = H if g == g_u else -t * H
            prob.add_constraint(matrix=mats, rel=">=",
                                rhs=t * (topology.sigma2[u] + incoming),
                                label=("sinr", u))
        for u in topology.out_of_cell_users(b):
            mats = {slot[g]: channels.mat(b, u) for g in groups}
            prob.add_constraint(matrix=mats, rel="<=", rhs=cap((b, u)),
                                label=("cap", (b, u)))
        prob.add_constraint(matrix={slot[g]: np.eye(topology.A)
                                    for g in groups},
                            rel="<=", rhs=float(topology.p_max[b]),
                            label=("power", b))
        return prob, slot

    return _per_cell_bisect(b, channels, topology, build, epsilon)


def local_balance_gr(b, channels, topology, candidates_b, theta_cap,
                     epsilon=DEFAULT_EPSILON):
    """Local Gaussian-randomization balancing for one cell.

    ``candidates_b`` is a list of direction sets for this cell's groups;
    scoring mirrors :func:`local_balance` with fixed directions.
    """
    def cap(pair):
        return theta_cap[pair] if hasattr(theta_cap, "__getitem__") \
            else float(theta_cap)

    groups = topology.groups_of_bs(b)
    best = (0.0, None, -1)
    for idx, cand in enumerate(candidates_b):
        own_gain = {(u, g): abs(np.vdot(channels.vec(b, u), cand[g])) ** 2
                    for u in topology.users_of_bs(b) for g in groups}
        out_gain = {(u, g): abs(np.vdot(channels.vec(b, u), cand[g])) ** 2
                    for u in topology.out_of_cell_users(b) for g in groups}

        def probe(t):
            prob = ConicProblem()
            pvar = {g: prob.add_scalar_var(name=f"p{g}") for g in groups}
            for u in topology.users_of_bs(b):
                g_u = topology.group_of_user[u]
                incoming = sum(cap((j, u)) for j in range(topology.B)
                               if j != b)
                coeffs = {}
                for g in groups:
                    coeffs[pvar[g]] = own_gain[(u, g)] if g == g_u \
                        else -t * own_gain[(u, g)]
                prob.add_constraint(scalars=coeffs, rel=">=",
                                    rhs=t * (topology.sigma2[u] + incoming))
            for u in topology.out_of_cell_users(b):
                prob.add_constraint(
                    scalars={pvar[g]: out_gain[(u, g)] for g in groups},
                    rel="<=", rhs=cap((b, u)))
            prob.add_constraint(scalars={pvar[g]: 1.0 for g in groups},
                                rel="<=", rhs=float(topology.p_max[b]))
            feasible, sol = conic.check_feasibility(prob,
                                                    return_solution=True)
            if not feasible:
                return False, None
            return True, {g: float(sol.scalar_values[pvar[g]])
                          for g in groups}

        upper = single_user_upper_bound(channels, topology,
                                        topology.users_of_bs(b))
        res = bisect(0.0, upper, epsilon, probe)
        if res.t > best[0] or best[2] < 0:
            best = (res.t, res.payload, idx)
    return best


def uncoordinated_balance(b, channels, topology, epsilon=DEFAULT_EPSILON):
    """Interference-blind per-cell balancing (the non-coordinating
    baseline); its optimistic level must be re-checked with true ICI."""
    groups = topology.groups_of_bs(b)

    def build(t):
        prob = ConicProblem()
        slot = {g: prob.add_psd_var(topology.A, name=f"W{g}")
                for g in groups}
        for u in topology.users_of_bs(b):
            g_u = topology.group_of_user[u]
            mats = {}
            for g in groups:
                H = channels.mat(b, u)
                mats[slot[g]] = H if g == g_u else -t * H
            prob.add_constraint(matrix=mats, rel=">=",
                                rhs=t * topology.sigma2[u])
        prob.add_constraint(matrix={slot[g]: np.eye(topology.A)
                                    for g in groups},
                            rel="<=", rhs=float(topology.p_max[b]))
        return prob, slot

    return _per_cell_bisect(b, channels, topology, build, epsilon)


def achieved_min_sinr(channels, solution, topology):
    """Network-wide minimum achieved SINR under full cross interference."""
    w_of = solution.w if isinstance(solution, BeamformingSolution) \
        else dict(solution)
    missing = [g for g in range(topology.G) if w_of.get(g) is None]
    if missing:
        raise StateError(f"groups {missing} lack beamformers; balancing "
                         "needs every cell's solution")
    sol = BeamformingSolution(w=w_of)
    return min(evaluate_sinr(channels, sol, u, topology)
               for u in range(topology.U))


# ---------------------------------------------------------------------------
# scheme pipelines (bisection + rank handling + achieved evaluation)


@dataclass
class BalanceOutcome:
    """What an experiment records for one balancing run."""

    t_relaxed: float
    solution: BeamformingSolution
    achieved: float
    bisection: object = None
    per_cell_t: dict = None


def _extract_or_randomize(channels, topology, W_by_group, epsilon, gr_count,
                          rng, rank_tol):
    ranks = {g: conic.numerical_rank(W, rank_tol)
             for g, W in W_by_group.items()}
    if all(r == 1 for r in ranks.values()):
        sol = BeamformingSolution(W=dict(W_by_group), rank=ranks)
        for g, W in W_by_group.items():
            sol.w[g] = extract_rank_one(W, rank_tol)
            sol.p[g] = float(np.linalg.norm(sol.w[g]) ** 2)
    else:
        if rng is None:
            rng = np.random.default_rng()
        draws = {g: gaussian_candidates(W_by_group[g], gr_count, rng)
                 for g in W_by_group}
        sets = [{g: draws[g][c] for g in W_by_group}
                for c in range(gr_count)]
        t_gr, powers, idx = balance_gaussian_randomization(
            channels, topology, sets, epsilon)
        sol = BeamformingSolution(used_randomization=True)
        for g in W_by_group:
            sol.w[g] = np.sqrt(powers[g]) * sets[idx][g]
            sol.p[g] = powers[g]
            sol.W[g] = np.outer(sol.w[g], sol.w[g].conj())
            sol.rank[g] = 1
    sol.sdr_rank = ranks
    return sol


def balance_centralized(channels, topology, epsilon=DEFAULT_EPSILON,
                        gr_count=100, rng=None, rank_tol=RANK_ONE_TOL):
    """Full centralized balancing pipeline."""
    res = bisect_balance(channels, topology, epsilon)
    sol = _extract_or_randomize(channels, topology, res.payload, epsilon,
                                gr_count, rng, rank_tol)
    achieved = achieved_min_sinr(channels, sol, topology)
    return BalanceOutcome(t_relaxed=res.t, solution=sol, achieved=achieved,
                          bisection=res)


def _per_cell_pipeline(channels, topology, solver, epsilon, gr_count, rng,
                       rank_tol, gr_builder):
    """Shared shell of the distributed and uncoordinated baselines."""
    combined = BeamformingSolution()
    per_cell_t = {}
    ranks = {}
    for b in range(topology.B):
        res = solver(b)
        per_cell_t[b] = res.t
        W_b = res.payload
        cell_ranks = {g: conic.numerical_rank(W, rank_tol)
                      for g, W in W_b.items()}
        ranks.update(cell_ranks)
        if all(r == 1 for r in cell_ranks.values()):
            for g, W in W_b.items():
                combined.w[g] = extract_rank_one(W, rank_tol)
                combined.p[g] = float(np.linalg.norm(combined.w[g]) ** 2)
                combined.W[g] = W
                combined.rank[g] = 1
        else:
            local_rng = rng if rng is not None else np.random.default_rng()
            groups = topology.groups_of_bs(b)
            draws = {g: gaussian_candidates(W_b[g], gr_count, local_rng)
                     for g in groups}
            sets = [{g: draws[g][c] for g in groups}
                    for c in range(gr_count)]
            t_b, powers, idx = gr_builder(b, sets)
            combined.used_randomization = True
            per_cell_t[b] = min(per_cell_t[b], t_b)
            for g in groups:
                combined.w[g] = np.sqrt(powers[g]) * sets[idx][g]
                combined.p[g] = powers[g]
                combined.W[g] = np.outer(combined.w[g],
                                         combined.w[g].conj())
                combined.rank[g] = 1
    combined.sdr_rank = ranks
    achieved = achieved_min_sinr(channels, combined, topology)
    return BalanceOutcome(t_relaxed=min(per_cell_t.values()),
                          solution=combined, achieved=achieved,
                          per_cell_t=per_cell_t)


def balance_distributed(channels, topology, theta_cap,
                        epsilon=DEFAULT_EPSILON, gr_count=100, rng=None,
                        rank_tol=RANK_ONE_TOL):
    """Distributed balancing at fixed caps, all cells independent."""
    return _per_cell_pipeline(
        channels, topology,
        lambda b: local_balance(b, channels, topology, theta_cap, epsilon),
        epsilon, gr_count, rng, rank_tol,
        lambda b, sets: local_balance_gr(b, channels, topology, sets,
                                         theta_cap, epsilon))


def balance_uncoordinated(channels, topology, epsilon=DEFAULT_EPSILON,
                          gr_count=100, rng=None, rank_tol=RANK_ONE_TOL):
    """Interference-blind baseline, re-evaluated with true ICI."""
    def blind_caps(b):
        # the cell assumes no incoming interference and caps nothing
        caps = {}
        for u in topology.users_of_bs(b):
            for j in range(topology.B):
                if j != b:
                    caps[(j, u)] = 0.0
        for u in topology.out_of_cell_users(b):
            caps[(b, u)] = 1e9
        return caps

    return _per_cell_pipeline(
        channels, topology,
        lambda b: uncoordinated_balance(b, channels, topology, epsilon),
        epsilon, gr_count, rng, rank_tol,
        lambda b, sets: local_balance_gr(b, channels, topology, sets,
                                         blind_caps(b), epsilon))

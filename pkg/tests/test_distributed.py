"""Distributed algorithms: subgradients, ADMM identities, convergence."""

import numpy as np
import pytest

from cobeam import conic
from cobeam.errors import CobeamError
from cobeam.network import (build_topology, evaluate_sinr, sample_channels)
from cobeam.power_min import solve_centralized
from cobeam.distributed import (IciIndex, admm_feasibility_restore,
                                admm_global_update, admm_dual_update,
                                admm_pair_dual_update, assemble_admm_local,
                                assemble_subproblem, diminishing_step,
                                distributed_gaussian_randomization,
                                extract_subgradient, master_update,
                                run_admm, run_primal_decomposition,
                                solve_fixed_ici, solve_nulling)

GAMMA_1DB = 10 ** 0.1


def small_scenario(seed, **overrides):
    params = dict(B=2, G=2, U=4, A=6, gamma=GAMMA_1DB,
                  cell_separation=GAMMA_1DB)
    params.update(overrides)
    topo = build_topology(**params)
    return topo, sample_channels(topo, seed)


def solve_master(channels, topo, theta_map):
    total = 0.0
    pieces = {}
    for b in range(topo.B):
        prob, _ = assemble_subproblem(b, channels, topo, theta_map)
        sol = conic.solve(prob)
        assert sol.status is conic.SolveStatus.OPTIMAL
        total += sol.objective
        pieces[b] = (prob, sol)
    return total, pieces


class TestSubproblem:
    def test_single_cell_reduces_to_centralized(self):
        topo, chans = small_scenario(0, B=1)
        prob, _ = assemble_subproblem(0, chans, topo, {})
        sol = conic.solve(prob)
        cen = solve_centralized(chans, topo)
        assert sol.objective == pytest.approx(cen.sdr_objective, rel=1e-7)

    def test_huge_caps_relax(self):
        topo, chans = small_scenario(1)
        index = IciIndex(topo)
        tight = {p: 0.4 for p in index.pairs}
        loose = dict(tight)
        for (b, u) in index.pairs:
            if b == 0:
                loose[(b, u)] = 1e6
        p_t, _ = assemble_subproblem(0, chans, topo, tight)
        p_l, _ = assemble_subproblem(0, chans, topo, loose)
        tight_obj = conic.solve(p_t).objective
        loose_obj = conic.solve(p_l).objective
        assert loose_obj <= tight_obj + 1e-8

    def test_zero_caps_mean_nulling_rows(self):
        topo, chans = small_scenario(2)
        index = IciIndex(topo)
        theta = {p: 0.0 for p in index.pairs}
        prob, _ = assemble_subproblem(0, chans, topo, theta)
        caps = [c for c in prob.constraints if c.relation == "<="]
        assert caps and all(c.rhs == 0.0 for c in caps)


class TestSubgradient:
    def test_inactive_cap_gives_nonnegative_pair_price(self):
        topo, chans = small_scenario(3)
        index = IciIndex(topo)
        theta = {p: 50.0 for p in index.pairs}  # caps far from active
        _, pieces = solve_master(chans, topo, theta)
        for b in range(topo.B):
            prob, sol = pieces[b]
            comp = extract_subgradient(prob, sol, topo, b)
            for val in comp["mu"].values():
                assert abs(val) <= 1e-6
            for val in comp["lam"].values():
                assert val >= -1e-9

    def test_single_cell_empty(self):
        topo, chans = small_scenario(4, B=1)
        prob, _ = assemble_subproblem(0, chans, topo, {})
        sol = conic.solve(prob)
        comp = extract_subgradient(prob, sol, topo, 0)
        assert comp["mu"] == {}

    def test_requires_optimal_solution(self):
        topo, chans = small_scenario(5)
        index = IciIndex(topo)
        theta = {p: 1.0 for p in index.pairs}
        prob, _ = assemble_subproblem(0, chans, topo, theta)
        bad = conic.ConicSolution(status=conic.SolveStatus.MAX_ITER)
        with pytest.raises(CobeamError):
            extract_subgradient(prob, bad, topo, 0)

    def test_matches_finite_differences(self):
        topo, chans = small_scenario(6)
        index = IciIndex(topo)
        rng = np.random.default_rng(60)
        for _ in range(2):
            vec = rng.uniform(0.4, 1.4, size=len(index))
            theta = {index.pairs[i]: vec[i] for i in range(len(index))}
            _, pieces = solve_master(chans, topo, theta)
            lam, mu = {}, {}
            for b in range(topo.B):
                comp = extract_subgradient(*pieces[b], topo, b)
                lam.update(comp["lam"])
                mu.update(comp["mu"])
            h = 1e-5
            for i, (b, u) in enumerate(index.pairs):
                s = lam[u] - mu[(b, u)]
                up = vec.copy()
                up[i] += h
                dn = vec.copy()
                dn[i] -= h
                f_up, _ = solve_master(
                    chans, topo,
                    {index.pairs[k]: up[k] for k in range(len(index))})
                f_dn, _ = solve_master(
                    chans, topo,
                    {index.pairs[k]: dn[k] for k in range(len(index))})
                assert s == pytest.approx((f_up - f_dn) / (2 * h), abs=1e-3)


class TestMasterUpdate:
    def test_plain_step(self):
        out = master_update(np.array([1.0]), np.array([2.0]), 0, 0.3)
        assert out[0] == pytest.approx(0.4)

    def test_clamp_to_floor(self):
        out = master_update(np.array([0.1]), np.array([10.0]), 0, 0.3)
        assert out[0] == 1e-10

    def test_zero_subgradient_fixed_point(self):
        theta = np.array([0.7, 0.2])
        out = master_update(theta, np.zeros(2), 3, 0.3)
        assert np.array_equal(out, theta)

    def test_diminishing_schedule(self):
        sched = diminishing_step(0.5)
        assert sched(0) == pytest.approx(0.5)
        assert sched(3) == pytest.approx(0.25)


class TestPrimalDecomposition:
    def test_close_to_centralized(self):
        for seed in (0, 3):
            topo, chans = small_scenario(seed)
            cen = solve_centralized(chans, topo)
            trace = run_primal_decomposition(chans, topo, max_iters=100)
            rel = trace.best_power / cen.sdr_objective - 1.0
            assert 0 <= rel <= 0.02
            for u in range(topo.U):
                assert evaluate_sinr(chans, trace.solution, u, topo) \
                    >= topo.gamma[u] * (1 - 1e-5)

    def test_exchange_count_matches_table(self):
        topo = build_topology(B=2, G=4, U=8, A=12, gamma=GAMMA_1DB,
                              cell_separation=GAMMA_1DB)
        chans = sample_channels(topo, 1)
        trace = run_primal_decomposition(chans, topo, max_iters=2)
        assert all(r["scalars_exchanged"] == 16 for r in trace.rows)

    def test_single_cell_one_iteration(self):
        topo, chans = small_scenario(7, B=1)
        cen = solve_centralized(chans, topo)
        trace = run_primal_decomposition(chans, topo, max_iters=50)
        assert trace.iterations == 1
        assert trace.best_power == pytest.approx(cen.sdr_objective,
                                                 rel=1e-7)

    def test_replicas_never_diverge(self):
        topo, chans = small_scenario(8)
        trace = run_primal_decomposition(chans, topo, max_iters=20)
        assert all(e["replica_error"] == 0.0 for e in trace.extras)

    def test_best_objective_nonincreasing(self):
        topo, chans = small_scenario(9)
        trace = run_primal_decomposition(chans, topo, max_iters=30)
        bests = [e["best_power"] for e in trace.extras]
        assert all(b2 <= b1 + 1e-12 for b1, b2 in zip(bests, bests[1:]))

    def test_ici_state_carries_prices(self):
        topo, chans = small_scenario(9)
        trace = run_primal_decomposition(chans, topo, max_iters=10)
        state = trace.ici
        npairs = len(state.index)
        assert state.theta.shape == (npairs,)
        assert state.lam.shape == (npairs,)
        assert state.mu.shape == (npairs,)
        assert np.all(state.lam >= -1e-9)
        assert np.all(state.mu >= -1e-9)

    def test_iterates_meet_targets(self):
        # fixed caps per iterate guarantee the coupled constraints
        topo, chans = small_scenario(10)
        trace = run_primal_decomposition(chans, topo, max_iters=15)
        margins = [e["min_sinr_margin"] for e in trace.extras
                   if e["min_sinr_margin"] is not None]
        assert margins and all(m >= -1e-5 for m in margins)


class TestAdmmPieces:
    def test_local_copies_track_global_for_huge_rho(self):
        topo, chans = small_scenario(11)
        index = IciIndex(topo)
        theta = np.full(len(index), 0.8)
        nu = {i: 0.0 for i in index.touching(0)}
        prob, _, copy_slot = assemble_admm_local(
            0, chans, topo, theta, nu, rho=1e6, index=index)
        sol = conic.solve(prob)
        assert sol.status is conic.SolveStatus.OPTIMAL
        for i, j in copy_slot.items():
            assert abs(sol.scalar_values[j] - theta[i]) <= 1e-3

    def test_zero_penalty_pull_matches_unconstrained_local(self):
        # nu = 0 and a vanishing penalty: the copies are effectively
        # free, so the power part matches the local design that assumes
        # no incoming interference and has unbounded outgoing caps
        topo, chans = small_scenario(12)
        index = IciIndex(topo)
        nu = {i: 0.0 for i in index.touching(0)}
        prob, slot, _ = assemble_admm_local(
            0, chans, topo, np.full(len(index), 1.0), nu, rho=1e-9,
            index=index)
        sol = conic.solve(prob)
        power = sum(float(np.real(np.trace(sol.matrix_values[k])))
                    for k in slot.values())
        theta_ref = {p: (1e6 if p[0] == 0 else 0.0) for p in index.pairs}
        loose, _ = assemble_subproblem(0, chans, topo, theta_ref)
        ref = conic.solve(loose).objective
        assert power == pytest.approx(ref, rel=1e-4)

    def test_single_cell_has_no_copies(self):
        topo, chans = small_scenario(13, B=1)
        index = IciIndex(topo)
        prob, _, copy_slot = assemble_admm_local(
            0, chans, topo, np.zeros(0), {}, rho=2.0, index=index)
        assert copy_slot == {}
        sol = conic.solve(prob)
        cen = solve_centralized(chans, topo)
        assert sol.objective == pytest.approx(cen.sdr_objective, rel=1e-7)

    def test_global_update_values(self):
        assert admm_global_update([2.0, 4.0]) == pytest.approx(3.0)
        assert admm_global_update([0.37, 0.37]) == 0.37

    def test_global_update_matches_quadratic_oracle(self):
        rng = np.random.default_rng(14)
        rho = 2.0
        for _ in range(5):
            copies = rng.uniform(0.1, 2.0, size=2)
            nu0 = rng.standard_normal()
            nu = np.array([nu0, -nu0])     # complements, as maintained
            grid = np.linspace(-1, 4, 200001)
            val = sum(nu[k] * (copies[k] - grid)
                      + 0.5 * rho * (copies[k] - grid) ** 2
                      for k in range(2))
            oracle = grid[np.argmin(val)]
            assert admm_global_update(copies) == pytest.approx(
                oracle, abs=1e-4)

    def test_dual_update_formula(self):
        assert admm_dual_update(0.0, 1.0, 1.0, 2.0) == 0.0
        assert admm_dual_update(1.0, 1.5, 1.0, 2.0) == pytest.approx(2.0)

    def test_pair_update_sums_exactly_zero(self):
        rng = np.random.default_rng(15)
        for _ in range(200):
            nu0 = rng.standard_normal()
            pair = np.array([nu0, -nu0])
            copies = rng.uniform(0, 3, size=2)
            new = admm_pair_dual_update(pair, copies, rho=2.0)
            assert new[0] + new[1] == 0.0


class TestAdmmRun:
    def test_reaches_centralized_and_consensus(self):
        for seed in (0, 3):
            topo, chans = small_scenario(seed)
            cen = solve_centralized(chans, topo)
            trace = run_admm(chans, topo, max_iters=100)
            assert trace.rows[-1]["residual"] <= 1e-3
            rel = abs(trace.rows[-1]["sum_power"] / cen.sdr_objective - 1.0)
            assert rel <= 0.02
            for u in range(topo.U):
                assert evaluate_sinr(chans, trace.solution, u, topo) \
                    >= topo.gamma[u] * (1 - 1e-5)

    def test_pair_sums_zero_every_iteration(self):
        topo, chans = small_scenario(16)
        trace = run_admm(chans, topo, max_iters=25)
        assert all(e["nu_pair_sum"] == 0.0 for e in trace.extras)

    def test_agent_views_rebuild_global_state_exactly(self):
        topo, chans = small_scenario(16)
        trace = run_admm(chans, topo, max_iters=10)
        assert all(e["replica_error"] == 0.0 for e in trace.extras)

    def test_same_exchange_count_as_primal_decomposition(self):
        topo, chans = small_scenario(17)
        pd = run_primal_decomposition(chans, topo, max_iters=2)
        adm = run_admm(chans, topo, max_iters=2)
        assert pd.rows[0]["scalars_exchanged"] \
            == adm.rows[0]["scalars_exchanged"]

    def test_restore_mid_iteration_feasible(self):
        from cobeam.network import BeamformingSolution
        from cobeam.power_min import extract_rank_one

        topo, chans = small_scenario(18)
        trace = run_admm(chans, topo, max_iters=5)
        index = trace.ici.index
        theta = {index.pairs[i]: max(trace.ici.theta[i], 1e-2)
                 for i in range(len(index))}
        merged = {}
        for b in range(topo.B):
            merged.update(admm_feasibility_restore(
                b, chans, topo, theta).W)
        sol = BeamformingSolution(
            w={g: extract_rank_one(W) for g, W in merged.items()})
        for u in range(topo.U):
            assert evaluate_sinr(chans, sol, u, topo) \
                >= topo.gamma[u] * (1 - 1e-5)

    def test_restore_single_cell_identity(self):
        topo, chans = small_scenario(19, B=1)
        part = admm_feasibility_restore(0, chans, topo, {})
        cen = solve_centralized(chans, topo)
        assert part.objective == pytest.approx(cen.sdr_objective, rel=1e-7)


class TestDistributedRandomization:
    def test_degenerate_rank_one(self):
        topo, chans = small_scenario(20)
        pd = run_primal_decomposition(chans, topo, max_iters=20)
        index = pd.ici.index
        theta = {index.pairs[i]: max(pd.ici.theta[i], 1e-2)
                 for i in range(len(index))}
        exact = {g: np.outer(w, w.conj()) for g, w in pd.solution.w.items()}
        rng = np.random.default_rng(21)
        gr = distributed_gaussian_randomization(chans, topo, exact, theta,
                                                10, rng)
        assert gr.objective == pytest.approx(pd.solution.objective,
                                             rel=1e-6)

    def test_bounded_below_by_relaxation(self):
        topo, chans = small_scenario(22)
        cen = solve_centralized(chans, topo)
        pd = run_primal_decomposition(chans, topo, max_iters=30)
        index = pd.ici.index
        theta = {index.pairs[i]: max(pd.ici.theta[i], 1e-2)
                 for i in range(len(index))}
        W = {g: pd.solution.W[g] for g in pd.solution.W}
        rng = np.random.default_rng(23)
        gr = distributed_gaussian_randomization(chans, topo, W, theta, 30,
                                                rng)
        assert gr.objective >= cen.sdr_objective - 1e-7

    def test_selection_exchange_count(self):
        topo, chans = small_scenario(24)
        pd = run_primal_decomposition(chans, topo, max_iters=10)
        index = pd.ici.index
        theta = {index.pairs[i]: max(pd.ici.theta[i], 1e-2)
                 for i in range(len(index))}
        W = {g: pd.solution.W[g] for g in pd.solution.W}
        from cobeam.backhaul import MessageBus
        bus = MessageBus(range(topo.B))
        rng = np.random.default_rng(25)
        distributed_gaussian_randomization(chans, topo, W, theta, 17, rng,
                                           bus=bus)
        assert bus.log.scalars_in_round(0, tags=("gr-power",)) \
            == 17 * topo.B


class TestSpecialCases:
    def test_nulling_leaks_nothing(self):
        topo, chans = small_scenario(26)
        sol = solve_nulling(chans, topo)
        for g, w in sol.w.items():
            b = topo.bs_of_group[g]
            for u in topo.out_of_cell_users(b):
                assert abs(np.vdot(chans.vec(b, u), w)) ** 2 <= 1e-18
        for u in range(topo.U):
            assert evaluate_sinr(chans, sol, u, topo) \
                >= topo.gamma[u] * (1 - 1e-5)

    def test_fixed_caps_feasible_and_dominated(self):
        topo, chans = small_scenario(27)
        cen = solve_centralized(chans, topo)
        for theta in (0.3, 1.0):
            sol = solve_fixed_ici(chans, topo, theta)
            assert sol.objective >= cen.sdr_objective - 1e-6
            for u in range(topo.U):
                assert evaluate_sinr(chans, sol, u, topo) \
                    >= topo.gamma[u] * (1 - 1e-5)

    def test_common_theta_variant_runs(self):
        topo, chans = small_scenario(28)
        trace = run_primal_decomposition(chans, topo, max_iters=15,
                                         common_theta=True)
        theta = trace.ici.theta
        assert np.allclose(theta, theta[0])

"""Scenario-driven Monte Carlo experiment runner.

Scenarios are JSON files; dB quantities are converted to linear scale
here and nowhere else.  Every (sweep point, trial, scheme) run becomes
one flat record; distributed runs also produce per-iteration trace rows.
Infeasible trials are recorded, never silently dropped.
"""

import csv
import json
import re
import time

import numpy as np

from . import conic
from .balancing import (balance_centralized, balance_distributed,
                        balance_uncoordinated)
from .distributed import (diminishing_step, run_admm,
                          run_primal_decomposition, solve_fixed_ici,
                          solve_nulling)
from .errors import (ConfigurationError, IndeterminateError,
                     InfeasibleTargetsError, RandomizationFailureError)
from .network import (build_topology, orthogonal_equivalent_target,
                      sample_channels)
from .power_min import extract_rank_one, solve_centralized
from .conic import SolveStatus

SCHEMES = (
    "centralized", "primal-decomp", "admm", "nulling", "fixed-theta",
    "common-theta", "orthogonal", "balance-centralized",
    "balance-distributed", "balance-uncoordinated",
)

# unicode spellings map onto the ascii scheme names
_SCHEME_ALIASES = {"fixed-θ": "fixed-theta",
                   "common-θ": "common-theta"}

RECORD_COLUMNS = [
    "trial", "seed", "scheme", "B", "G", "U", "A", "gamma_db", "d_db",
    "sigma2", "p_max", "theta_cap", "objective", "objective_kind",
    "sdr_bound", "feasible", "used_randomization", "all_rank_one",
    "avg_rank", "iterations", "scalars_exchanged", "wall_time_s",
]

TRACE_COLUMNS = ["scheme", "trial", "gamma_db", "d_db", "p_max",
                 "iteration", "sum_power", "residual", "scalars_exchanged"]


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


class ScenarioConfig:
    """Validated experiment description."""

    def __init__(self, B, G, U, A, schemes, gamma_db=1.0, d_db=1.0,
                 sigma2=1.0, p_max=10.0, iters=100, trials=20, seed=1,
                 step_size=0.3, step_schedule="fixed", rho=2.0,
                 epsilon=1e-3, gr_budget=100, theta_grid=(0.01, 0.1, 1.0),
                 theta_fixed=0.1):
        self.B, self.G, self.U, self.A = int(B), int(G), int(U), int(A)
        self.schemes = []
        for name in schemes:
            canon = _SCHEME_ALIASES.get(name, name)
            if canon not in SCHEMES:
                raise ConfigurationError(
                    f"unknown scheme {name!r}; valid: {', '.join(SCHEMES)}")
            self.schemes.append(canon)
        if not self.schemes:
            raise ConfigurationError("schemes list is empty")
        self.gamma_db = expand_sweep(gamma_db, "gamma_db")
        self.d_db = expand_sweep(d_db, "d_db")
        self.p_max = expand_sweep(p_max, "p_max")
        self.sigma2 = float(sigma2)
        self.iters = int(iters)
        self.trials = int(trials)
        self.seed = int(seed)
        self.step_size = float(step_size)
        if step_schedule not in ("fixed", "diminishing"):
            raise ConfigurationError(
                f"step_schedule must be fixed or diminishing, "
                f"got {step_schedule!r}")
        self.step_schedule = step_schedule
        self.rho = float(rho)
        self.epsilon = float(epsilon)
        self.gr_budget = int(gr_budget)
        self.theta_grid = [float(v) for v in theta_grid]
        self.theta_fixed = float(theta_fixed)
        for name, val in (("sigma2", self.sigma2), ("rho", self.rho),
                          ("epsilon", self.epsilon)):
            if val <= 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.trials < 1 or self.iters < 1 or self.gr_budget < 0:
            raise ConfigurationError("trials, iters must be >= 1 and "
                                     "gr_budget >= 0")
        if any(v < 0 for v in self.d_db):
            raise ConfigurationError("d_db must be >= 0 (d >= 1 linear)")

    def step(self):
        if self.step_schedule == "diminishing":
            return diminishing_step(self.step_size)
        return self.step_size


def expand_sweep(value, name):
    """Scalars, lists, or 'start:step:stop' strings (inclusive stop)."""
    if isinstance(value, str):
        match = re.fullmatch(
            r"\s*(-?[\d.]+)\s*:\s*(-?[\d.]+)\s*:\s*(-?[\d.]+)\s*(dB)?\s*",
            value)
        if not match:
            raise ConfigurationError(
                f"{name}: cannot parse sweep {value!r}; expected "
                "'start:step:stop'")
        start, step, stop = (float(match.group(i)) for i in (1, 2, 3))
        if step <= 0 or stop < start:
            raise ConfigurationError(f"{name}: bad sweep range {value!r}")
        out = []
        v = start
        while v <= stop + 1e-9:
            out.append(round(v, 12))
            v += step
        return out
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    return [float(value)]


def parse_scenario(path):
    """Read and validate a scenario file, reporting lines on errors."""
    with open(path) as fh:
        text = fh.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigurationError(
            f"{path}: line {err.lineno}: invalid JSON ({err.msg})") from err

    def line_of(key):
        match = re.search(rf'"{re.escape(key)}"', text)
        if match:
            return text.count("\n", 0, match.start()) + 1
        return None

    topo = raw.get("topology")
    if not isinstance(topo, dict):
        raise ConfigurationError(f"{path}: missing 'topology' object")
    for field in ("B", "G", "U", "A"):
        if field not in topo:
            line = line_of("topology")
            where = f"line {line}: " if line else ""
            raise ConfigurationError(
                f"{path}: {where}topology is missing field {field!r}")
    if "schemes" not in raw:
        raise ConfigurationError(f"{path}: missing 'schemes' list")
    known = {"topology", "schemes", "gamma_db", "d_db", "sigma2", "p_max",
             "iters", "trials", "seed", "step_size", "step_schedule",
             "rho", "epsilon", "gr_budget", "theta_grid", "theta_fixed"}
    for key in raw:
        if key not in known:
            line = line_of(key)
            where = f"line {line}: " if line else ""
            raise ConfigurationError(
                f"{path}: {where}unknown field {key!r}")
    kwargs = {k: v for k, v in raw.items() if k != "topology"}
    try:
        return ScenarioConfig(**topo, **kwargs)
    except ConfigurationError as err:
        raise ConfigurationError(f"{path}: {err}") from err


def _rank_stats(solution, G):
    ranks = solution.sdr_rank or {}
    if not ranks:
        return None, None
    all_one = all(r == 1 for r in ranks.values())
    avg = None if all_one else sum(ranks.values()) / G
    return all_one, avg


def run_sweep(config):
    """Execute the whole scenario; returns (records, trace_rows).

    Channel draws depend only on (master seed, trial), so a given trial
    sees the same fading across all sweep values; randomization streams
    are keyed by (sweep point, trial, scheme) and never collide.
    """
    records = []
    trace_rows = []
    for gi, gamma_db in enumerate(config.gamma_db):
        for di, d_db in enumerate(config.d_db):
            for pi, p_max in enumerate(config.p_max):
                for trial in range(config.trials):
                    point = _SweepPoint(config, gamma_db, d_db, p_max,
                                        trial, point_key=(gi, di, pi))
                    recs, traces = point.run()
                    records.extend(recs)
                    trace_rows.extend(traces)
    records.sort(key=lambda r: (r["gamma_db"], r["d_db"], r["p_max"],
                                r["trial"], r["scheme"],
                                str(r["theta_cap"])))
    return records, trace_rows


class _SweepPoint:
    def __init__(self, config, gamma_db, d_db, p_max, trial, point_key):
        self.config = config
        self.gamma_db = gamma_db
        self.d_db = d_db
        self.p_max = p_max
        self.trial = trial
        self.point_key = point_key
        gamma = float(db_to_linear(gamma_db))
        self.topology = build_topology(
            B=config.B, G=config.G, U=config.U, A=config.A, gamma=gamma,
            sigma2=config.sigma2, p_max=p_max,
            cell_separation=float(db_to_linear(d_db)))
        chan_seq = np.random.SeedSequence(entropy=config.seed,
                                          spawn_key=(trial,))
        self.channels = sample_channels(
            self.topology, np.random.default_rng(chan_seq))

    def _scheme_rng(self, scheme_index):
        seq = np.random.SeedSequence(
            entropy=self.config.seed,
            spawn_key=(*self.point_key, self.trial, 1 + scheme_index))
        return np.random.default_rng(seq)

    def run(self):
        records = []
        traces = []
        for k, scheme in enumerate(self.config.schemes):
            rng = self._scheme_rng(k)
            start = time.perf_counter()
            try:
                for rec, trace in self._run_scheme(scheme, rng):
                    rec["wall_time_s"] = time.perf_counter() - start
                    records.append(self._finish(rec, scheme))
                    if trace is not None:
                        traces.extend(self._trace_rows(scheme, trace))
                    start = time.perf_counter()
            except (InfeasibleTargetsError, RandomizationFailureError,
                    IndeterminateError):
                records.append(self._finish(
                    {"objective": None, "feasible": False,
                     "wall_time_s": time.perf_counter() - start}, scheme))
        return records, traces

    def _finish(self, rec, scheme):
        base = {col: None for col in RECORD_COLUMNS}
        base.update({
            "trial": self.trial, "seed": self.config.seed,
            "scheme": scheme,
            "B": self.topology.B, "G": self.topology.G,
            "U": self.topology.U, "A": self.topology.A,
            "gamma_db": self.gamma_db, "d_db": self.d_db,
            "sigma2": self.config.sigma2, "p_max": self.p_max,
            "feasible": True,
        })
        base.update(rec)
        return base

    def _trace_rows(self, scheme, trace):
        rows = []
        for row in trace.rows:
            out = {"scheme": scheme, "trial": self.trial,
                   "gamma_db": self.gamma_db, "d_db": self.d_db,
                   "p_max": self.p_max}
            out.update(row)
            rows.append(out)
        return rows

    def _run_scheme(self, scheme, rng):
        cfg = self.config
        topo, chans = self.topology, self.channels
        if scheme == "centralized":
            sol = solve_centralized(chans, topo, gr_count=cfg.gr_budget,
                                    rng=rng)
            yield self._power_record(sol, sol.sdr_objective), None
        elif scheme == "primal-decomp":
            trace = run_primal_decomposition(
                chans, topo, max_iters=cfg.iters, step=cfg.step(),
                gr_count=cfg.gr_budget, rng=rng)
            rec = self._power_record(trace.solution, trace.best_power)
            rec["iterations"] = trace.iterations
            rec["scalars_exchanged"] = trace.log.total_scalars()
            yield rec, trace
        elif scheme == "common-theta":
            trace = run_primal_decomposition(
                chans, topo, max_iters=cfg.iters, step=cfg.step(),
                gr_count=cfg.gr_budget, rng=rng, common_theta=True)
            rec = self._power_record(trace.solution, trace.best_power)
            rec["iterations"] = trace.iterations
            rec["scalars_exchanged"] = trace.log.total_scalars()
            yield rec, trace
        elif scheme == "admm":
            trace = run_admm(chans, topo, max_iters=cfg.iters, rho=cfg.rho,
                             gr_count=cfg.gr_budget, rng=rng)
            rec = self._power_record(trace.solution, trace.best_power)
            rec["iterations"] = trace.iterations
            rec["scalars_exchanged"] = trace.log.total_scalars()
            yield rec, trace
        elif scheme == "nulling":
            sol = solve_nulling(chans, topo, gr_count=cfg.gr_budget,
                                rng=rng)
            yield self._power_record(sol, None), None
        elif scheme == "fixed-theta":
            sol = solve_fixed_ici(chans, topo, cfg.theta_fixed,
                                  gr_count=cfg.gr_budget, rng=rng)
            rec = self._power_record(sol, None)
            rec["theta_cap"] = cfg.theta_fixed
            yield rec, None
        elif scheme == "orthogonal":
            sol = solve_orthogonal(chans, topo, gr_count=cfg.gr_budget,
                                   rng=rng)
            yield self._power_record(sol, None), None
        elif scheme == "balance-centralized":
            out = balance_centralized(chans, topo, epsilon=cfg.epsilon,
                                      gr_count=cfg.gr_budget, rng=rng)
            yield self._balance_record(out, None), None
        elif scheme == "balance-distributed":
            for cap in cfg.theta_grid:
                out = balance_distributed(chans, topo, cap,
                                          epsilon=cfg.epsilon,
                                          gr_count=cfg.gr_budget, rng=rng)
                yield self._balance_record(out, cap), None
        elif scheme == "balance-uncoordinated":
            out = balance_uncoordinated(chans, topo, epsilon=cfg.epsilon,
                                        gr_count=cfg.gr_budget, rng=rng)
            yield self._balance_record(out, None), None
        else:  # pragma: no cover - guarded by config validation
            raise ConfigurationError(f"unhandled scheme {scheme}")

    def _power_record(self, solution, sdr_bound):
        all_one, avg = _rank_stats(solution, self.topology.G)
        return {"objective": solution.objective,
                "objective_kind": "sum_power_w",
                "sdr_bound": sdr_bound,
                "used_randomization": solution.used_randomization,
                "all_rank_one": all_one, "avg_rank": avg}

    def _balance_record(self, outcome, cap):
        all_one, avg = _rank_stats(outcome.solution, self.topology.G)
        return {"objective": outcome.achieved,
                "objective_kind": "min_sinr_linear",
                "sdr_bound": outcome.t_relaxed,
                "theta_cap": cap,
                "used_randomization": outcome.solution.used_randomization,
                "all_rank_one": all_one, "avg_rank": avg}


def solve_orthogonal(channels, topology, gr_count=100, rng=None):
    """Per-cell design with orthogonal (time/frequency) access.

    Each cell optimizes alone with no inter-cell interference, but the
    SINR targets rise to (1 + gamma)^B - 1 to deliver the same rates in
    a 1/B share of the resources.  The reported objective is the sum of
    the per-slot transmit powers.
    """
    from .distributed import assemble_subproblem
    from .network import BeamformingSolution

    gamma_orth = orthogonal_equivalent_target(topology.gamma, topology.B)
    topo_orth = build_topology(
        B=topology.B, G=topology.G, U=topology.U, A=topology.A,
        gamma=gamma_orth, sigma2=topology.sigma2, p_max=topology.p_max,
        cell_separation=topology.cell_separation)
    combined = {}
    for b in range(topology.B):
        theta = {}
        for u in topo_orth.users_of_bs(b):
            for j in range(topo_orth.B):
                if j != b:
                    theta[(j, u)] = 0.0
        for u in topo_orth.out_of_cell_users(b):
            theta[(b, u)] = 1e9
        prob, slot = assemble_subproblem(b, channels, topo_orth, theta)
        sol = conic.solve(prob)
        if sol.status is not SolveStatus.OPTIMAL:
            raise InfeasibleTargetsError(
                f"orthogonal-access design infeasible at BS {b} "
                f"(raised target {float(np.max(gamma_orth)):.3g})")
        combined.update({g: sol.matrix_values[k] for g, k in slot.items()})
    ranks = {g: conic.numerical_rank(W) for g, W in combined.items()}
    solution = BeamformingSolution(W=combined, rank=ranks)
    if all(r == 1 for r in ranks.values()):
        for g, W in combined.items():
            solution.w[g] = extract_rank_one(W)
            solution.p[g] = float(np.linalg.norm(solution.w[g]) ** 2)
        solution.objective = sum(solution.p.values())
    else:
        from .distributed import distributed_gaussian_randomization, IciIndex
        if rng is None:
            rng = np.random.default_rng()
        index = IciIndex(topo_orth)
        theta = {p: 1e9 for p in index.pairs}
        solution = distributed_gaussian_randomization(
            channels, topo_orth, combined, theta, gr_count, rng)
    solution.sdr_rank = ranks
    return solution


def emit_results(records, path, format="csv", columns=None):
    """Write records with a stable column order.

    CSV prints floats at 9 significant digits with blanks for missing
    values; JSON keeps native types so a load round-trips exactly.
    """
    if columns is None:
        columns = RECORD_COLUMNS if records and "objective_kind" \
            in records[0] else (list(records[0].keys()) if records
                                else RECORD_COLUMNS)
    if format == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(columns)
            for rec in records:
                writer.writerow([_fmt(rec.get(col)) for col in columns])
    elif format == "json":
        with open(path, "w") as fh:
            json.dump([{col: rec.get(col) for col in columns}
                       for rec in records], fh, indent=1)
            fh.write("\n")
    else:
        raise ConfigurationError(f"unknown output format {format!r}")
    return path


def load_results(path):
    with open(path) as fh:
        return json.load(fh)


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:.9g}"
    return value


def emit_traces(trace_rows, path):
    return emit_results(trace_rows, path, format="csv",
                        columns=TRACE_COLUMNS)


def summarize(records):
    """Per (scheme, sweep point) means with explicit exclusion counts."""
    groups = {}
    for rec in records:
        key = (rec["scheme"], rec["gamma_db"], rec["d_db"], rec["p_max"],
               rec["theta_cap"])
        groups.setdefault(key, []).append(rec)
    rows = []
    for key in sorted(groups, key=str):
        recs = groups[key]
        values = [r["objective"] for r in recs if r["feasible"]]
        rows.append({
            "scheme": key[0], "gamma_db": key[1], "d_db": key[2],
            "p_max": key[3], "theta_cap": key[4],
            "mean_objective": float(np.mean(values)) if values else None,
            "trials": len(recs),
            "infeasible_excluded": sum(1 for r in recs
                                       if not r["feasible"]),
        })
    return rows

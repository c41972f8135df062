"""Problem container for small dense conic programs.

A :class:`ConicProblem` has Hermitian PSD matrix variables, nonnegative
scalar variables, a linear objective over trace terms and scalars with
optional nonnegative diagonal quadratic terms on the scalars, and linear
trace-form constraints with relation <=, >= or ==.

Complex Hermitian data is lowered to real symmetric form through the
standard 2d x 2d embedding ``[[Re, -Im], [Im, Re]]``; coefficient
matrices are halved so objective and constraint values are preserved
exactly (:func:`embed_hermitian`).
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .cones import ConeLayout, svec

HERMITIAN_TOL = 1e-10


class SolveStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    MAX_ITER = "max_iter"


def _as_hermitian(mat, dim, what):
    mat = np.asarray(mat)
    if mat.shape != (dim, dim):
        raise ValueError(
            f"{what}: expected shape {(dim, dim)}, got {mat.shape}")
    scale = max(1.0, float(np.abs(mat).max()))
    if np.abs(mat - mat.conj().T).max() > HERMITIAN_TOL * scale:
        raise ValueError(f"{what}: matrix is not Hermitian")
    return 0.5 * (mat + mat.conj().T)


def embed_matrix(mat):
    """Real symmetric 2d x 2d embedding of a Hermitian matrix."""
    re, im = np.real(mat), np.imag(mat)
    return np.block([[re, -im], [im, re]])


def unembed_matrix(emb):
    """Recover the Hermitian matrix from (a perturbation of) its embedding.

    The returned matrix is the structured projection, so PSD-ness and all
    trace terms against Hermitian coefficient data are preserved.
    """
    d = emb.shape[0] // 2
    re = 0.5 * (emb[:d, :d] + emb[d:, d:])
    im = 0.5 * (emb[d:, :d] - emb[:d, d:])
    return re + 1j * im


@dataclass
class MatrixVar:
    dim: int
    complex: bool = True
    name: str = ""


@dataclass
class Constraint:
    matrix_coeffs: dict
    scalar_coeffs: dict
    relation: str          # one of "<=", ">=", "=="
    rhs: float
    label: object = None


@dataclass
class ConicProblem:
    """Builder for one conic program instance."""

    matrix_vars: list = field(default_factory=list)
    num_scalars: int = 0
    scalar_names: list = field(default_factory=list)
    obj_matrix: dict = field(default_factory=dict)
    obj_scalar: dict = field(default_factory=dict)
    obj_scalar_quad: dict = field(default_factory=dict)
    constraints: list = field(default_factory=list)

    def add_psd_var(self, dim, complex=True, name=""):
        if dim < 1:
            raise ValueError("PSD variable dimension must be >= 1")
        self.matrix_vars.append(MatrixVar(int(dim), bool(complex), name))
        return len(self.matrix_vars) - 1

    def add_scalar_var(self, name=""):
        self.num_scalars += 1
        self.scalar_names.append(name)
        return self.num_scalars - 1

    def add_scalar_vars(self, count, name=""):
        return [self.add_scalar_var(f"{name}[{i}]" if name else "")
                for i in range(count)]

    def _coeff(self, i, mat, what):
        var = self.matrix_vars[i]
        herm = _as_hermitian(mat, var.dim, what)
        if not var.complex and np.abs(np.imag(herm)).max() > 0:
            raise ValueError(f"{what}: complex coefficient for a real "
                             "matrix variable")
        return np.real(herm) if not var.complex else herm

    def set_objective(self, matrix=None, scalar=None, scalar_quad=None):
        """Minimize sum_i Tr(C_i X_i) + sum_j (c_j y_j + q_j y_j^2)."""
        if matrix:
            for i, C in matrix.items():
                self.obj_matrix[i] = self._coeff(i, C, f"objective[{i}]")
        if scalar:
            for j, v in scalar.items():
                self._check_scalar(j)
                self.obj_scalar[j] = float(v)
        if scalar_quad:
            for j, v in scalar_quad.items():
                self._check_scalar(j)
                if v < 0:
                    raise ValueError("quadratic coefficients must be >= 0")
                self.obj_scalar_quad[j] = float(v)

    def add_constraint(self, matrix=None, scalars=None, rel=">=", rhs=0.0,
                       label=None):
        if rel not in ("<=", ">=", "=="):
            raise ValueError(f"unknown relation {rel!r}")
        mcoef = {}
        if matrix:
            for i, F in matrix.items():
                if not 0 <= i < len(self.matrix_vars):
                    raise ValueError(f"no matrix variable {i}")
                mcoef[i] = self._coeff(i, F, f"constraint coeff[{i}]")
        scoef = {}
        if scalars:
            for j, a in scalars.items():
                self._check_scalar(j)
                scoef[j] = float(a)
        self.constraints.append(
            Constraint(mcoef, scoef, rel, float(rhs), label))
        return len(self.constraints) - 1

    def _check_scalar(self, j):
        if not 0 <= j < self.num_scalars:
            raise ValueError(f"no scalar variable {j}")

    def constraint_index(self, label):
        for k, con in enumerate(self.constraints):
            if con.label == label:
                return k
        raise KeyError(f"no constraint labeled {label!r}")

    def has_quadratic(self):
        return any(v > 0 for v in self.obj_scalar_quad.values())

    def num_vars(self):
        return len(self.matrix_vars) + self.num_scalars

    def evaluate_constraint(self, k, matrix_values, scalar_values):
        """Left-hand-side value of constraint k at the given point."""
        con = self.constraints[k]
        val = 0.0
        for i, F in con.matrix_coeffs.items():
            val += float(np.real(np.trace(F @ matrix_values[i])))
        for j, a in con.scalar_coeffs.items():
            val += a * float(scalar_values[j])
        return val

    def evaluate_objective(self, matrix_values, scalar_values):
        val = 0.0
        for i, C in self.obj_matrix.items():
            val += float(np.real(np.trace(C @ matrix_values[i])))
        for j, c in self.obj_scalar.items():
            val += c * float(scalar_values[j])
        for j, q in self.obj_scalar_quad.items():
            val += q * float(scalar_values[j]) ** 2
        return val


@dataclass
class ConicSolution:
    status: SolveStatus
    matrix_values: list = None
    scalar_values: np.ndarray = None
    duals: np.ndarray = None
    objective: float = None
    kkt: dict = field(default_factory=dict)
    certificate: dict = None
    iterations: int = 0
    trace: list = field(default_factory=list)

    @property
    def optimal(self):
        return self.status is SolveStatus.OPTIMAL


def embed_hermitian(problem):
    """Rewrite complex-Hermitian matrix variables as real 2d x 2d blocks.

    Every Hermitian coefficient H becomes embed(H)/2, which keeps all
    trace products (hence objective and constraint values) identical.
    Real problems pass through block-duplicated but otherwise unchanged.
    """
    out = ConicProblem()
    for var in problem.matrix_vars:
        if var.complex:
            out.add_psd_var(2 * var.dim, complex=False, name=var.name)
        else:
            out.add_psd_var(var.dim, complex=False, name=var.name)
    out.num_scalars = problem.num_scalars
    out.scalar_names = list(problem.scalar_names)

    def lower(i, H):
        if problem.matrix_vars[i].complex:
            return 0.5 * embed_matrix(H)
        return np.real(H)

    out.obj_matrix = {i: lower(i, C) for i, C in problem.obj_matrix.items()}
    out.obj_scalar = dict(problem.obj_scalar)
    out.obj_scalar_quad = dict(problem.obj_scalar_quad)
    for con in problem.constraints:
        out.constraints.append(Constraint(
            {i: lower(i, F) for i, F in con.matrix_coeffs.items()},
            dict(con.scalar_coeffs), con.relation, con.rhs, con.label))
    return out


class CompiledProblem:
    """Standard form min c'x + x'Qx/2 s.t. Ax = b, x in K (real data).

    Inequalities get one orthant slack each; rows are scaled by the
    inverse max-abs coefficient.  ``row_scale`` maps internal equality
    multipliers back to user-space duals.
    """

    def __init__(self, problem):
        real = embed_hermitian(problem) if any(
            v.complex for v in problem.matrix_vars) else problem
        self.source = problem
        self.real = real

        dims = [v.dim for v in real.matrix_vars]
        n_con = len(real.constraints)
        self.n_slack = sum(1 for c in real.constraints if c.relation != "==")
        self.layout = ConeLayout(dims, real.num_scalars + self.n_slack)
        lay = self.layout
        self.scalar_off = lay.nn_offset
        self.slack_off = lay.nn_offset + real.num_scalars

        n = lay.size
        self.c = np.zeros(n)
        for i, C in real.obj_matrix.items():
            off = lay.psd_offsets[i]
            self.c[off:off + len(svec(C))] = svec(C)
        for j, v in real.obj_scalar.items():
            self.c[self.scalar_off + j] = v
        self.qdiag = np.zeros(real.num_scalars + self.n_slack)
        for j, q in real.obj_scalar_quad.items():
            self.qdiag[j] = 2.0 * q  # objective carries q*y^2 = (1/2) x'Qx

        self.A = np.zeros((n_con, n))
        self.b = np.zeros(n_con)
        self.row_scale = np.ones(n_con)
        self.slack_col = [-1] * n_con
        slack = self.slack_off
        for k, con in enumerate(real.constraints):
            row = self.A[k]
            for i, F in con.matrix_coeffs.items():
                off = lay.psd_offsets[i]
                sv = svec(F)
                row[off:off + len(sv)] = sv
            for j, a in con.scalar_coeffs.items():
                row[self.scalar_off + j] = a
            norm = max(np.abs(row).max(), abs(con.rhs))
            s = 1.0 / norm if norm > 1.0 else 1.0
            row *= s
            self.b[k] = con.rhs * s
            self.row_scale[k] = s
            if con.relation != "==":
                row[slack] = -1.0 if con.relation == ">=" else 1.0
                self.slack_col[k] = slack
                slack += 1

    def user_duals(self, y_internal):
        """Map internal equality multipliers to per-constraint duals.

        Convention: >= and == rows report d(optimum)/d(rhs); <= rows
        report the nonnegative multiplier whose sensitivity is
        -d(optimum)/d(rhs).
        """
        duals = np.empty(len(self.real.constraints))
        for k, con in enumerate(self.real.constraints):
            v = y_internal[k] * self.row_scale[k]
            duals[k] = -v if con.relation == "<=" else v
        return duals

    def user_duals_signed(self, y_internal):
        """Raw signed multipliers (no <= flip), for Farkas combinations."""
        return y_internal * self.row_scale

    def extract_point(self, x):
        """Split an internal point into user matrix/scalar values."""
        lay = self.layout
        mats = []
        for i, var in enumerate(self.source.matrix_vars):
            block = lay.psd_block(x, i)
            mats.append(unembed_matrix(block) if var.complex else block)
        scalars = x[self.scalar_off:self.scalar_off +
                    self.source.num_scalars].copy()
        return mats, scalars


def dump_problem(problem):
    """Self-describing text dump for offline cross-checking."""
    lines = ["conic-problem"]
    for i, var in enumerate(problem.matrix_vars):
        kind = "hermitian" if var.complex else "symmetric"
        lines.append(f"psd-var {i} dim {var.dim} {kind} {var.name}")
    lines.append(f"scalar-vars {problem.num_scalars}")

    def mat_entries(tag, i, M):
        out = []
        for r in range(M.shape[0]):
            for ccol in range(r, M.shape[1]):
                v = M[r, ccol]
                if v != 0:
                    out.append(f"  {tag} {i} [{r},{ccol}] "
                               f"{np.real(v):.17g} {np.imag(v):.17g}")
        return out

    lines.append("objective minimize")
    for i, C in sorted(problem.obj_matrix.items()):
        lines.extend(mat_entries("trace", i, C))
    for j, v in sorted(problem.obj_scalar.items()):
        lines.append(f"  scalar {j} {v:.17g}")
    for j, v in sorted(problem.obj_scalar_quad.items()):
        lines.append(f"  scalar-quad {j} {v:.17g}")
    for k, con in enumerate(problem.constraints):
        lines.append(f"constraint {k} rel {con.relation} "
                     f"rhs {con.rhs:.17g} label {con.label!r}")
        for i, F in sorted(con.matrix_coeffs.items()):
            lines.extend(mat_entries("trace", i, F))
        for j, a in sorted(con.scalar_coeffs.items()):
            lines.append(f"  scalar {j} {a:.17g}")
    return "\n".join(lines) + "\n"

"""Symmetric-cone kernel shared by the interior-point solvers.

A point of the cone ``S+^{d_1} x ... x S+^{d_k} x R+^n`` is stored as one
flat vector: each PSD block is packed with :func:`svec` (scaled upper
triangle, so that the packed inner product equals the trace inner
product) followed by the entries of the nonnegative block.
"""

import numpy as np
import scipy.linalg as sla

_SQRT2 = float(np.sqrt(2.0))

# cached (rows, cols, pack-scale, unpack-scale) per dimension
_SVEC_CACHE = {}


def _svec_index(dim):
    try:
        return _SVEC_CACHE[dim]
    except KeyError:
        rows, cols = np.triu_indices(dim)
        pack = np.where(rows == cols, 1.0, _SQRT2)
        _SVEC_CACHE[dim] = (rows, cols, pack)
        return _SVEC_CACHE[dim]


def svec_len(dim):
    return dim * (dim + 1) // 2


def svec(mat):
    """Pack a symmetric matrix so that svec(A) @ svec(B) == Tr(A B)."""
    dim = mat.shape[0]
    rows, cols, pack = _svec_index(dim)
    return mat[rows, cols] * pack


def smat(vec, dim):
    """Inverse of :func:`svec`."""
    rows, cols, pack = _svec_index(dim)
    out = np.zeros((dim, dim))
    out[rows, cols] = vec / pack
    out.T[rows, cols] = out[rows, cols]
    return out


class ConeLayout:
    """Block structure of the cone: PSD dimensions then a nonnegative tail."""

    def __init__(self, psd_dims, nonneg):
        self.psd_dims = tuple(int(d) for d in psd_dims)
        self.nonneg = int(nonneg)
        self.svec_lens = [svec_len(d) for d in self.psd_dims]
        offs = np.cumsum([0] + self.svec_lens)
        self.psd_offsets = offs[:-1]
        self.nn_offset = int(offs[-1])
        self.size = self.nn_offset + self.nonneg
        # barrier degree: d per PSD block, 1 per orthant entry
        self.degree = sum(self.psd_dims) + self.nonneg

    def identity(self):
        e = np.zeros(self.size)
        for dim, off in zip(self.psd_dims, self.psd_offsets):
            e[off:off + svec_len(dim)] = svec(np.eye(dim))
        e[self.nn_offset:] = 1.0
        return e

    def psd_block(self, vec, i):
        dim = self.psd_dims[i]
        off = self.psd_offsets[i]
        return smat(vec[off:off + svec_len(dim)], dim)

    def nn_block(self, vec):
        return vec[self.nn_offset:]

    def pack(self, mats, nn):
        out = np.empty(self.size)
        for i, (dim, off) in enumerate(zip(self.psd_dims, self.psd_offsets)):
            out[off:off + svec_len(dim)] = svec(mats[i])
        out[self.nn_offset:] = nn
        return out

    def min_eigs(self, vec):
        """Smallest eigenvalue per PSD block and smallest orthant entry."""
        vals = [sla.eigvalsh(self.psd_block(vec, i))[0]
                for i in range(len(self.psd_dims))]
        if self.nonneg:
            vals.append(float(self.nn_block(vec).min()))
        return vals


class NTScaling:
    """Nesterov-Todd scaling of a strictly feasible primal/dual pair.

    For each PSD block the factor R satisfies ``X = R L R^T`` and
    ``Z = R^{-T} L R^{-1}`` with a common diagonal scaled point L; for
    the orthant ``w = sqrt(x/z)`` and ``lam = sqrt(x z)``.
    """

    def __init__(self, layout, x, z):
        self.layout = layout
        self.R = []
        self.Rinv = []
        self.lam_psd = []
        for i, dim in enumerate(layout.psd_dims):
            X = layout.psd_block(x, i)
            Z = layout.psd_block(z, i)
            Lx = _chol(X)
            Lz = _chol(Z)
            U, s, Vt = sla.svd(Lz.T @ Lx)
            s = np.maximum(s, 1e-300)
            sq = np.sqrt(s)
            self.R.append(Lx @ (Vt.T / sq))
            self.Rinv.append((U / sq).T @ Lz.T)
            self.lam_psd.append(s)
        xn = layout.nn_block(x)
        zn = layout.nn_block(z)
        self.w_nn = np.sqrt(xn / zn) if layout.nonneg else np.zeros(0)
        self.lam_nn = np.sqrt(xn * zn) if layout.nonneg else np.zeros(0)

    # -- maps between original and scaled coordinates (flat in, flat out) --

    def scale_primal(self, dx):
        """W^{-1} dx: primal direction into scaled space."""
        lay = self.layout
        mats = [self.Rinv[i] @ lay.psd_block(dx, i) @ self.Rinv[i].T
                for i in range(len(lay.psd_dims))]
        return lay.pack(mats, lay.nn_block(dx) / self.w_nn) \
            if lay.nonneg else lay.pack(mats, np.zeros(0))

    def scale_dual(self, dz):
        """W^T dz: dual direction into scaled space."""
        lay = self.layout
        mats = [self.R[i].T @ lay.psd_block(dz, i) @ self.R[i]
                for i in range(len(lay.psd_dims))]
        return lay.pack(mats, lay.nn_block(dz) * self.w_nn) \
            if lay.nonneg else lay.pack(mats, np.zeros(0))

    def unscale_dual(self, g):
        """W^{-T} g: scaled-space vector back to a dual-space vector."""
        lay = self.layout
        mats = [self.Rinv[i].T @ lay.psd_block(g, i) @ self.Rinv[i]
                for i in range(len(lay.psd_dims))]
        return lay.pack(mats, lay.nn_block(g) / self.w_nn) \
            if lay.nonneg else lay.pack(mats, np.zeros(0))

    def unscale_primal(self, u):
        """W u: scaled-space vector back to a primal-space vector."""
        lay = self.layout
        mats = [self.R[i] @ lay.psd_block(u, i) @ self.R[i].T
                for i in range(len(lay.psd_dims))]
        return lay.pack(mats, lay.nn_block(u) * self.w_nn) \
            if lay.nonneg else lay.pack(mats, np.zeros(0))

    # -- Jordan algebra on scaled-space vectors --

    def lam_vec(self):
        """The scaled point itself (diagonal per PSD block)."""
        lay = self.layout
        mats = [np.diag(s) for s in self.lam_psd]
        return lay.pack(mats, self.lam_nn)

    def lambda_sq(self):
        lay = self.layout
        mats = [np.diag(s * s) for s in self.lam_psd]
        return lay.pack(mats, self.lam_nn * self.lam_nn)

    def jordan_div(self, rhs):
        """Solve lam o g = rhs for g (lam is the scaled point)."""
        lay = self.layout
        mats = []
        for i, s in enumerate(self.lam_psd):
            denom = 0.5 * (s[:, None] + s[None, :])
            mats.append(lay.psd_block(rhs, i) / denom)
        nn = lay.nn_block(rhs) / self.lam_nn if lay.nonneg else np.zeros(0)
        return lay.pack(mats, nn)

    def jordan_prod(self, u, v):
        """u o v = (UV + VU)/2 per PSD block, elementwise on the orthant."""
        lay = self.layout
        mats = []
        for i in range(len(lay.psd_dims)):
            U = lay.psd_block(u, i)
            V = lay.psd_block(v, i)
            UV = U @ V
            mats.append(0.5 * (UV + UV.T))
        nn = lay.nn_block(u) * lay.nn_block(v) if lay.nonneg else np.zeros(0)
        return lay.pack(mats, nn)

    def max_step(self, du_scaled, dv_scaled):
        """Largest a <= 1e12 keeping lam + a*du and lam + a*dv in the cone."""
        lay = self.layout
        bound = 1e12
        for i, s in enumerate(self.lam_psd):
            sq = np.sqrt(s)
            for d in (du_scaled, dv_scaled):
                D = lay.psd_block(d, i)
                M = D / sq[:, None] / sq[None, :]
                lo = sla.eigvalsh(M)[0]
                if lo < 0:
                    bound = min(bound, -1.0 / lo)
        if lay.nonneg:
            for d in (du_scaled, dv_scaled):
                dn = lay.nn_block(d)
                neg = dn < 0
                if np.any(neg):
                    bound = min(bound, float(
                        np.min(-self.lam_nn[neg] / dn[neg])))
        return bound


def _chol(mat):
    """Cholesky with a graded jitter fallback for nearly singular blocks."""
    scale = max(np.trace(mat) / mat.shape[0], 1e-300)
    jitter = 0.0
    for _ in range(8):
        try:
            return sla.cholesky(mat + jitter * np.eye(mat.shape[0]),
                                lower=True)
        except sla.LinAlgError:
            jitter = max(jitter * 100.0, 1e-14 * scale)
    raise sla.LinAlgError("cone block lost positive definiteness")

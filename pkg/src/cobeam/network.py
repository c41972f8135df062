"""Multi-cell multigroup network model.

Topology indexing: groups are assigned to base stations round-robin
(group g -> BS g mod B) and users to groups round-robin (user u ->
group u mod G), which realizes the equal-split convention used
throughout.  All quantities are linear scale; dB conversion happens at
the CLI boundary only.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, StateError


@dataclass(frozen=True)
class Topology:
    """Immutable index structure plus per-user/per-BS parameters.

    B, A, G, U follow the {B, G, U, A} convention: number of base
    stations, antennas per BS, total groups, total users.  ``gamma`` and
    ``sigma2`` are per-user (linear SINR target, noise watts); ``p_max``
    is per-BS transmit power (only the balancing algorithms use it);
    ``cell_separation`` is the linear path-loss ratio d >= 1 applied to
    cross-cell channels.
    """

    B: int
    A: int
    G: int
    U: int
    group_of_user: tuple
    bs_of_group: tuple
    gamma: np.ndarray
    sigma2: np.ndarray
    p_max: np.ndarray
    cell_separation: float

    def serving_bs(self, u):
        return self.bs_of_group[self.group_of_user[u]]

    def groups_of_bs(self, b):
        return [g for g in range(self.G) if self.bs_of_group[g] == b]

    def users_of_group(self, g):
        return [u for u in range(self.U) if self.group_of_user[u] == g]

    def users_of_bs(self, b):
        return [u for u in range(self.U) if self.serving_bs(u) == b]

    def out_of_cell_users(self, b):
        return [u for u in range(self.U) if self.serving_bs(u) != b]

    def ici_pairs(self):
        """Directed (interfering BS, user) pairs, lexicographic order."""
        return [(b, u) for b in range(self.B)
                for u in range(self.U) if self.serving_bs(u) != b]


def build_topology(B, G, U, A, gamma=1.0, sigma2=1.0, p_max=1.0,
                   cell_separation=1.0):
    """Construct the round-robin equal-split topology.

    ``gamma``, ``sigma2`` broadcast over users and ``p_max`` over BSs
    when given as scalars.  Raises :class:`ConfigurationError` for
    non-divisible counts or out-of-range parameters.
    """
    for name, val in (("B", B), ("G", G), ("U", U), ("A", A)):
        if int(val) != val or val < 1:
            raise ConfigurationError(f"{name} must be a positive integer")
    B, G, U, A = int(B), int(G), int(U), int(A)
    if G % B != 0:
        raise ConfigurationError(
            f"G={G} must be divisible by B={B} for the equal split")
    if U % G != 0:
        raise ConfigurationError(
            f"U={U} must be divisible by G={G} for the equal split")
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), (U,)).copy()
    sigma2 = np.broadcast_to(np.asarray(sigma2, dtype=float), (U,)).copy()
    p_max = np.broadcast_to(np.asarray(p_max, dtype=float), (B,)).copy()
    if np.any(gamma <= 0):
        raise ConfigurationError("gamma must be positive (linear ratio)")
    if np.any(sigma2 <= 0):
        raise ConfigurationError("sigma2 must be positive")
    if np.any(p_max <= 0):
        raise ConfigurationError("p_max must be positive")
    if cell_separation < 1.0:
        raise ConfigurationError("cell separation d must be >= 1 (linear)")
    for arr in (gamma, sigma2, p_max):
        arr.setflags(write=False)
    return Topology(
        B=B, A=A, G=G, U=U,
        group_of_user=tuple(u % G for u in range(U)),
        bs_of_group=tuple(g % B for g in range(G)),
        gamma=gamma, sigma2=sigma2, p_max=p_max,
        cell_separation=float(cell_separation))


@dataclass(frozen=True)
class ChannelSet:
    """Effective channels h[b, u] (cross-cell entries pre-scaled by
    sqrt(1/d)) and their rank-one outer products."""

    h: np.ndarray          # (B, U, A) complex
    outer: np.ndarray      # (B, U, A, A) complex Hermitian

    def vec(self, b, u):
        return self.h[b, u]

    def mat(self, b, u):
        return self.outer[b, u]


def sample_channels(topology, seed):
    """Draw i.i.d. CN(0, 1) channels, attenuating cross-cell links.

    ``seed`` may be an integer or a numpy Generator; a given integer
    seed reproduces the ChannelSet bit for bit.
    """
    rng = seed if isinstance(seed, np.random.Generator) \
        else np.random.default_rng(seed)
    B, U, A = topology.B, topology.U, topology.A
    h = (rng.standard_normal((B, U, A))
         + 1j * rng.standard_normal((B, U, A))) / np.sqrt(2.0)
    atten = np.sqrt(1.0 / topology.cell_separation)
    for b in range(B):
        for u in range(U):
            if topology.serving_bs(u) != b:
                h[b, u] *= atten
    outer = np.einsum("bui,buj->buij", h, h.conj())
    h.setflags(write=False)
    outer.setflags(write=False)
    return ChannelSet(h=h, outer=outer)


@dataclass
class BeamformingSolution:
    """Per-group covariances and (when extracted) rank-one beamformers.

    Partial solutions (one BS's groups only) simply omit the other
    groups from the dictionaries.
    """

    W: dict = field(default_factory=dict)       # group -> (A, A) PSD
    w: dict = field(default_factory=dict)       # group -> (A,) vector
    p: dict = field(default_factory=dict)       # group -> watts
    rank: dict = field(default_factory=dict)    # group -> int
    objective: float = None
    used_randomization: bool = False
    # relaxation-level diagnostics, populated by the solve pipelines
    sdr_objective: float = None
    sdr_rank: dict = None

    def beamformer(self, g):
        vec = self.w.get(g)
        if vec is None:
            raise StateError(f"group {g} has no extracted beamformer")
        return vec

    def groups(self):
        return sorted(self.W.keys() | self.w.keys())


def evaluate_sinr(channels, solution, u, topology):
    """Achieved SINR of user u under extracted beamformers.

    Numerator |h_{b,u}^H w_g|^2 over noise plus every other group's
    beam, intra- and inter-cell alike.
    """
    w_of = solution.w if isinstance(solution, BeamformingSolution) \
        else solution
    g_serv = topology.group_of_user[u]
    b_serv = topology.serving_bs(u)
    desired = None
    interference = 0.0
    for g in range(topology.G):
        w = w_of.get(g) if hasattr(w_of, "get") else w_of[g]
        if w is None:
            raise StateError(f"group {g} has no extracted beamformer")
        b = topology.bs_of_group[g]
        gain = abs(np.vdot(channels.vec(b, u), w)) ** 2
        if g == g_serv:
            desired = gain
        else:
            interference += gain
    if b_serv != topology.bs_of_group[g_serv]:
        raise StateError("inconsistent topology indexing")
    return desired / (topology.sigma2[u] + interference)


def orthogonal_equivalent_target(gamma, B):
    """SINR target matching the same rate when each cell gets a 1/B slot.

    Rate r = log2(1 + gamma) needs B * r in the orthogonal scheme, so
    the equivalent target is (1 + gamma)^B - 1.
    """
    return (1.0 + gamma) ** B - 1.0


def sum_power(solution):
    """Total transmit power: sum of Tr(W_g), or ||w_g||^2 once extracted."""
    total = 0.0
    groups = solution.groups()
    if not groups:
        return 0.0
    for g in groups:
        W = solution.W.get(g)
        if W is not None:
            total += float(np.real(np.trace(W)))
        else:
            total += float(np.linalg.norm(solution.w[g]) ** 2)
    return total

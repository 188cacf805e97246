"""Undirected topologies, doubly stochastic mixing matrices, spectral data.

Agents are numbered 1..m in topologies and edge-list files; matrices are
0-indexed numpy arrays.  All spectral quantities are computed once at
construction and cached on the returned objects.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from sdiging.errors import ConstructionFailure, InvalidArgumentError

# Relative tolerance for classifying an eigenvalue of L as zero.
_ZERO_EIG_RTOL = 1e-9

# Lazy-blend levels tried, in order, when the raw spectrum is not positive.
_LAZINESS_LADDER = (0.1, 0.2, 0.3, 0.4, 0.5)

_GNP_MAX_RETRIES = 1000


@dataclass(frozen=True)
class Topology:
    """A connected undirected graph on agents 1..m (no explicit self-loops)."""

    m: int
    edges: frozenset
    retries: int = 0

    def degrees(self):
        """Degree of each agent as an int array indexed 0..m-1."""
        deg = np.zeros(self.m, dtype=int)
        for i, j in self.edges:
            deg[i - 1] += 1
            deg[j - 1] += 1
        return deg

    def to_edge_list_text(self) -> str:
        """Serialize as: first line ``m``, then one ``i j`` line per edge."""
        lines = [str(self.m)]
        for i, j in sorted(self.edges):
            lines.append(f"{i} {j}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_edge_list_text(text: str) -> "Topology":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise InvalidArgumentError("empty edge-list text")
        m = int(lines[0])
        edges = set()
        for ln in lines[1:]:
            i, j = (int(tok) for tok in ln.split())
            if not (1 <= i <= m and 1 <= j <= m) or i == j:
                raise InvalidArgumentError(f"bad edge line: {ln!r}")
            edges.add((min(i, j), max(i, j)))
        topo = Topology(m=m, edges=frozenset(edges))
        if not _is_connected(m, edges):
            raise InvalidArgumentError("edge list describes a disconnected graph")
        return topo


@dataclass(frozen=True)
class MixingMatrix:
    """Symmetric doubly stochastic weight matrix with positive spectrum."""

    w: np.ndarray
    eig_w: np.ndarray          # sorted ascending
    laziness: float            # blend level actually used
    topology: Topology

    @property
    def m(self) -> int:
        return self.w.shape[0]

    @property
    def rho_min(self) -> float:
        return float(self.eig_w[0])

    def to_csv(self) -> str:
        """Row-major CSV with 17 significant digits."""
        buf = io.StringIO()
        np.savetxt(buf, self.w, fmt="%.17g", delimiter=",")
        return buf.getvalue()


@dataclass(frozen=True)
class LaplacianLike:
    """L = I - W with the spectral gap quantities the rate bounds consume."""

    l: np.ndarray
    eig_l: np.ndarray          # sorted ascending; eig_l[0] ~ 0
    rho2_l: float              # second-smallest eigenvalue of L
    rho2_l2: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "rho2_l2", self.rho2_l ** 2)


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb


def _is_connected(m, edges) -> bool:
    uf = _UnionFind(m)
    for i, j in edges:
        uf.union(i - 1, j - 1)
    root = uf.find(0)
    return all(uf.find(k) == root for k in range(m))


def build_topology(kind: str, m: int, p: float | None = None, seed: int = 0) -> Topology:
    """Build a connected topology.

    Parameters
    ----------
    kind : {"ring", "complete", "random_gnp"}
    m : number of agents, >= 2
    p : edge probability, required for ``random_gnp``
    seed : base seed; ``random_gnp`` derives a fresh stream per retry

    Raises
    ------
    InvalidArgumentError
        If m < 2, p is out of range, or kind is unknown.
    ConstructionFailure
        If 1000 consecutive G(m, p) draws are disconnected.
    """
    if m < 2:
        raise InvalidArgumentError(f"need at least 2 agents, got m={m}")
    if kind == "ring":
        edges = {(i, i + 1) for i in range(1, m)} | {(1, m)} if m > 2 else {(1, 2)}
        return Topology(m=m, edges=frozenset(edges))
    if kind == "complete":
        edges = {(i, j) for i in range(1, m + 1) for j in range(i + 1, m + 1)}
        return Topology(m=m, edges=frozenset(edges))
    if kind == "random_gnp":
        if p is None or not (0.0 < p <= 1.0):
            raise InvalidArgumentError(f"random_gnp needs 0 < p <= 1, got {p}")
        for attempt in range(_GNP_MAX_RETRIES):
            rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, attempt])
            edges = set()
            for i in range(1, m + 1):
                for j in range(i + 1, m + 1):
                    if rng.random() < p:
                        edges.add((i, j))
            if _is_connected(m, edges):
                return Topology(m=m, edges=frozenset(edges), retries=attempt)
        raise ConstructionFailure(
            f"no connected G({m}, {p}) sample in {_GNP_MAX_RETRIES} retries"
        )
    raise InvalidArgumentError(f"unknown topology kind {kind!r}")


def metropolis_weights(t: Topology, laziness: float = 0.1) -> MixingMatrix:
    """Metropolis-Hastings mixing matrix, lazily blended with the identity.

    Edge weights are 1/(1 + max(deg_i, deg_j)); the self-weight absorbs the
    remainder so each row sums to one.  The returned matrix is
    ``laziness * I + (1 - laziness) * W_raw``.  If the blend still has a
    non-positive eigenvalue, laziness is raised through 0.1, 0.2, ..., 0.5
    until the spectrum is strictly positive; the level used is recorded on
    the result.
    """
    if not (0.0 <= laziness < 1.0):
        raise InvalidArgumentError(f"laziness must be in [0, 1), got {laziness}")
    if not _is_connected(t.m, t.edges):
        raise InvalidArgumentError("topology is disconnected")

    m = t.m
    deg = t.degrees()
    w_raw = np.zeros((m, m))
    for i, j in t.edges:
        wij = 1.0 / (1.0 + max(deg[i - 1], deg[j - 1]))
        w_raw[i - 1, j - 1] = wij
        w_raw[j - 1, i - 1] = wij
    np.fill_diagonal(w_raw, 1.0 - w_raw.sum(axis=1))

    candidates = [laziness] + [lz for lz in _LAZINESS_LADDER if lz > laziness]
    for lz in candidates:
        w = lz * np.eye(m) + (1.0 - lz) * w_raw
        eig = np.linalg.eigvalsh(w)
        if eig[0] > 0.0:
            return MixingMatrix(w=w, eig_w=eig, laziness=lz, topology=t)
    raise ConstructionFailure("could not make the spectrum positive by laziness 0.5")


def spectral_quantities(w: MixingMatrix) -> LaplacianLike:
    """L = I - W together with its spectral gap.

    The smallest nonzero eigenvalue of L is classified with a relative
    tolerance of 1e-9 against the spectral radius; a connected graph yields
    exactly one zero eigenvalue.
    """
    m = w.m
    lmat = np.eye(m) - w.w
    eig_l = np.linalg.eigvalsh(lmat)
    radius = max(abs(eig_l[0]), abs(eig_l[-1]), 1.0)
    n_zero = int(np.sum(np.abs(eig_l) <= _ZERO_EIG_RTOL * radius))
    if n_zero != 1:
        raise InvalidArgumentError(
            f"expected exactly one zero eigenvalue of L, found {n_zero}"
        )
    return LaplacianLike(l=lmat, eig_l=eig_l, rho2_l=float(eig_l[1]))

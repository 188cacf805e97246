"""Component-function families and per-agent local objectives.

A local objective is the average of ``q`` component functions.  Every
component exposes ``value``, ``gradient``, a strong-convexity modulus
``mu`` and a gradient-Lipschitz constant ``lip``; the simulation engine
and the rate certification only see this interface.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from sdiging.errors import InvalidArgumentError

# Floor applied to measured signal strengths, as a fraction of the source
# strength; noise can push raw measurements nonpositive.
MEASUREMENT_CLAMP_FRACTION = 1e-6


class Quadratic:
    """f(x) = 0.5 x'Ax + b'x with A symmetric positive definite."""

    def __init__(self, a: np.ndarray, b: np.ndarray):
        self.a = np.asarray(a, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.dim = self.b.shape[0]
        eig = np.linalg.eigvalsh(self.a)
        self.mu = float(eig[0])
        self.lip = float(eig[-1])

    def value(self, x):
        return 0.5 * float(x @ self.a @ x) + float(self.b @ x)

    def gradient(self, x):
        return self.a @ x + self.b


class LogisticSample:
    """Ridge-regularized logistic loss of a single labelled sample.

    f(x) = (lam/2m)||x||^2 + q*log(1 + exp(-l c'x)).  The log term uses the
    overflow-safe branch max(z,0) + log1p(exp(-|z|)).
    """

    def __init__(self, c: np.ndarray, label: int, lam: float, m: int, q: int):
        if lam <= 0:
            raise InvalidArgumentError(f"regularizer must be positive, got {lam}")
        if label not in (-1, 1):
            raise InvalidArgumentError(f"label must be -1 or +1, got {label}")
        self.c = np.asarray(c, dtype=float)
        self.label = int(label)
        self.dim = self.c.shape[0]
        self.lam_m = lam / m
        self.q = int(q)
        self._lc = self.label * self.c          # cached l*c
        self._qlc = self.q * self._lc
        self.mu = self.lam_m
        self.lip = self.lam_m + self.q * float(self.c @ self.c) / 4.0

    def value(self, x):
        z = -float(self._lc @ x)
        # log(1 + exp(z)) = max(z, 0) + log1p(exp(-|z|))
        return 0.5 * self.lam_m * float(x @ x) + self.q * (
            max(z, 0.0) + np.log1p(np.exp(-abs(z)))
        )

    def gradient(self, x):
        z = -float(self._lc @ x)
        return self.lam_m * x - expit(z) * self._qlc


class DiskDistance:
    """Squared distance to the disk of radius sqrt(a/c) around a sensor.

    Convex but not strongly convex (mu = 0); the gradient is 2-Lipschitz.
    Nonpositive measurements are clamped to a small positive floor before
    the radius is formed, and the clamp is recorded on the instance.
    """

    def __init__(self, r: np.ndarray, c_meas: float, a: float):
        if a <= 0:
            raise InvalidArgumentError(f"source strength must be positive, got {a}")
        self.r = np.asarray(r, dtype=float)
        self.dim = self.r.shape[0]
        floor = MEASUREMENT_CLAMP_FRACTION * a
        self.clamped = c_meas < floor
        self.radius = float(np.sqrt(a / max(c_meas, floor)))
        self.mu = 0.0
        self.lip = 2.0

    def project(self, x):
        d = x - self.r
        dist = float(np.linalg.norm(d))
        if dist <= self.radius:
            return x
        return self.r + (self.radius / dist) * d

    def value(self, x):
        resid = x - self.project(x)
        return float(resid @ resid)

    def gradient(self, x):
        return 2.0 * (x - self.project(x))


class KMeansPoint:
    """Distance of one data point to its nearest of K stacked centers.

    The decision variable stacks the centers: x = [m_1; ...; m_K].  Ties in
    the nearest-center assignment break toward the lowest index.  The
    per-block gradient Lipschitz constant 2 is reported even though the
    function is only piecewise smooth across assignment boundaries.
    """

    def __init__(self, p: np.ndarray, k: int):
        if k < 1:
            raise InvalidArgumentError(f"cluster count must be >= 1, got {k}")
        self.p = np.asarray(p, dtype=float)
        self.k = int(k)
        self.point_dim = self.p.shape[0]
        self.dim = self.k * self.point_dim
        self.mu = 0.0
        self.lip = 2.0

    def _nearest(self, x):
        centers = x.reshape(self.k, self.point_dim)
        d2 = np.sum((centers - self.p) ** 2, axis=1)
        l_star = int(np.argmin(d2))          # argmin takes the lowest index on ties
        return l_star, centers, d2

    def value(self, x):
        _, _, d2 = self._nearest(x)
        return float(d2.min())

    def gradient(self, x):
        l_star, centers, _ = self._nearest(x)
        g = np.zeros_like(x)
        lo = l_star * self.point_dim
        g[lo:lo + self.point_dim] = 2.0 * (centers[l_star] - self.p)
        return g


@dataclass
class LocalObjective:
    """Average of q equal-dimension component functions held by one agent."""

    components: list
    batch_gradient: object = None    # optional vectorized full-gradient callable
    batch_value: object = None       # optional vectorized value callable

    def __post_init__(self):
        if not self.components:
            raise InvalidArgumentError("a local objective needs at least one component")
        dims = {c.dim for c in self.components}
        if len(dims) != 1:
            raise InvalidArgumentError(f"components disagree on dimension: {dims}")

    @property
    def q(self) -> int:
        return len(self.components)

    @property
    def dim(self) -> int:
        return self.components[0].dim

    def value(self, x):
        if self.batch_value is not None:
            return self.batch_value(x)
        return sum(c.value(x) for c in self.components) / self.q

    def full_gradient(self, x):
        if self.batch_gradient is not None:
            return self.batch_gradient(x)
        return full_local_gradient(self, x)


@dataclass
class ProblemInstance:
    """One problem shared by m agents, with aggregate constants."""

    locals: list
    known_optimum: np.ndarray | None = None
    q_min: int = field(init=False)
    q_max: int = field(init=False)
    mu: float = field(init=False)
    lip: float = field(init=False)

    def __post_init__(self):
        dims = {lo.dim for lo in self.locals}
        if len(dims) != 1:
            raise InvalidArgumentError(f"agents disagree on dimension: {dims}")
        self.q_min = min(lo.q for lo in self.locals)
        self.q_max = max(lo.q for lo in self.locals)
        self.mu = min(c.mu for lo in self.locals for c in lo.components)
        self.lip = max(c.lip for lo in self.locals for c in lo.components)

    @property
    def m(self) -> int:
        return len(self.locals)

    @property
    def dim(self) -> int:
        return self.locals[0].dim

    def aggregate_value(self, x):
        """Value of the average objective (1/m) sum_i f_i at a single point."""
        return sum(lo.value(x) for lo in self.locals) / self.m

    def aggregate_gradient(self, x):
        g = np.zeros(self.dim)
        for lo in self.locals:
            g += lo.full_gradient(x)
        return g / self.m


def full_local_gradient(lo: LocalObjective, x: np.ndarray) -> np.ndarray:
    """(1/q) sum of component gradients at x."""
    x = np.asarray(x, dtype=float)
    if x.shape != (lo.dim,):
        raise InvalidArgumentError(f"expected shape ({lo.dim},), got {x.shape}")
    g = np.zeros(lo.dim)
    for c in lo.components:
        g += c.gradient(x)
    return g / lo.q


def quadratic_family(m: int, q_i: int, n: int, condition_range, seed: int) -> ProblemInstance:
    """Random quadratic components with spectra inside [mu_target, L_target].

    The exact optimum of the aggregate is solved directly and stored on the
    returned instance.
    """
    mu_t, lip_t = condition_range
    if not (0.0 < mu_t <= lip_t):
        raise InvalidArgumentError(f"need 0 < mu <= L, got [{mu_t}, {lip_t}]")
    rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, 0x51AD])
    locals_ = []
    a_sum = np.zeros((n, n))
    b_sum = np.zeros(n)
    for _ in range(m):
        comps = []
        for _ in range(q_i):
            qmat, _ = np.linalg.qr(rng.standard_normal((n, n)))
            eigs = rng.uniform(mu_t, lip_t, size=n)
            a = qmat @ np.diag(eigs) @ qmat.T
            a = 0.5 * (a + a.T)
            b = rng.standard_normal(n)
            comps.append(Quadratic(a, b))
            a_sum += a / q_i
            b_sum += b / q_i
        locals_.append(LocalObjective(comps))
    x_star = np.linalg.solve(a_sum, -b_sum)
    return ProblemInstance(locals=locals_, known_optimum=x_star)


def logistic_instantaneous(c, label, lam: float, m: int, q: int) -> LogisticSample:
    """One regularized logistic component scaled for a q-sample agent."""
    return LogisticSample(c=c, label=label, lam=lam, m=m, q=q)


def localization_instantaneous(r, c_meas: float, a: float) -> DiskDistance:
    """One squared-distance-to-disk component of the source localizer."""
    return DiskDistance(r=r, c_meas=c_meas, a=a)


def kmeans_instantaneous(p, k: int) -> KMeansPoint:
    """One clustering-error component over stacked centers."""
    return KMeansPoint(p=p, k=k)


def make_logistic_local(features, labels, lam: float, m: int) -> LocalObjective:
    """Agent-local logistic objective with a vectorized full gradient."""
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=int)
    q = features.shape[0]
    comps = [logistic_instantaneous(features[h], int(labels[h]), lam, m, q)
             for h in range(q)]
    lam_m = lam / m
    lc = labels[:, None] * features         # q x n

    def batch_gradient(x):
        # mean over components of lam_m*x - q*sigmoid(-lc.x)*lc equals
        # lam_m*x - sum_h sigmoid(-lc_h.x)*lc_h
        z = -(lc @ x)
        return lam_m * x - expit(z) @ lc

    def batch_value(x):
        z = -(lc @ x)
        soft = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))
        return 0.5 * lam_m * float(x @ x) + float(soft.sum())

    return LocalObjective(components=comps, batch_gradient=batch_gradient,
                          batch_value=batch_value)


def load_logistic_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read ``label,feat1,...,featn`` rows; returns (labels, features)."""
    raw = np.loadtxt(path, delimiter=",", ndmin=2)
    labels = raw[:, 0].astype(int)
    if not set(np.unique(labels)) <= {-1, 1}:
        raise InvalidArgumentError("labels must be -1 or +1")
    return labels, raw[:, 1:]


def load_points_csv(path) -> np.ndarray:
    """Read ``x,y`` rows of 2-D points."""
    pts = np.loadtxt(path, delimiter=",", ndmin=2)
    if pts.shape[1] != 2:
        raise InvalidArgumentError(f"expected 2 columns, got {pts.shape[1]}")
    return pts

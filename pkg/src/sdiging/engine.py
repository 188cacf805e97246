"""Synchronous-round execution and linear-rate certification.

Three interchangeable update rules operate on stacked per-agent iterates
(one row per agent): deterministic gradient tracking, its stochastic
variant driven by per-agent gradient tables, and the equivalent
primal-dual iteration used for cross-checking.  Certification evaluates
the explicit parameter intervals and the rate constant for strongly
convex problems.
"""

from __future__ import annotations

import io
import math
import time
from dataclasses import dataclass, field

import numpy as np

from sdiging.errors import (
    CertificationRefused,
    ConfigError,
    DivergenceError,
    InvalidArgumentError,
)
from sdiging.graph import MixingMatrix, spectral_quantities
from sdiging.objectives import ProblemInstance
from sdiging.saga import GradientTable, init_table, stochastic_avg_gradient

ALGORITHMS = ("diging", "sdiging", "primal_dual")

# Abort threshold for runaway iterates (step-sizes beyond the certified
# bound can blow up; the guard preserves the partial trace).
DIVERGENCE_NORM = 1e12

# Underflow floor for the log10 residual.
RESIDUAL_FLOOR = -16.0


@dataclass
class NetworkState:
    """Stacked per-agent state at one synchronous round.

    ``x`` is m x n.  Gradient-tracking states carry ``y`` and, for the
    stochastic variant, the last gradient estimates ``g_prev``; the
    primal-dual state carries ``lam`` instead of ``y``.
    """

    x: np.ndarray
    y: np.ndarray | None = None
    lam: np.ndarray | None = None
    g_prev: np.ndarray | None = None
    k: int = 0


def _stack_full_gradients(problem: ProblemInstance, x: np.ndarray) -> np.ndarray:
    return np.stack([lo.full_gradient(x[i]) for i, lo in enumerate(problem.locals)])


def init_diging_state(problem: ProblemInstance) -> NetworkState:
    """x_0 = 0 and the tracker seeded with the full local gradients."""
    x0 = np.zeros((problem.m, problem.dim))
    g0 = _stack_full_gradients(problem, x0)
    return NetworkState(x=x0, y=g0.copy(), g_prev=g0)


def make_tables(problem: ProblemInstance, seed: int) -> list[GradientTable]:
    """One gradient table per agent, streams keyed by (seed, agent index)."""
    x0 = np.zeros(problem.dim)
    return [init_table(lo, x0, seed=seed, agent_id=i)
            for i, lo in enumerate(problem.locals)]


def init_sdiging_state(problem: ProblemInstance,
                       tables: list[GradientTable]) -> NetworkState:
    x0 = np.zeros((problem.m, problem.dim))
    g0 = np.stack([t.full_gradient_estimate() for t in tables])
    return NetworkState(x=x0, y=g0.copy(), g_prev=g0)


def init_primal_dual_state(problem: ProblemInstance,
                           tables: list[GradientTable]) -> NetworkState:
    x0 = np.zeros((problem.m, problem.dim))
    g0 = np.stack([t.full_gradient_estimate() for t in tables])
    return NetworkState(x=x0, lam=np.zeros_like(x0), g_prev=g0)


def diging_step(s: NetworkState, w: MixingMatrix, problem: ProblemInstance,
                alpha: float) -> NetworkState:
    """One deterministic gradient-tracking round (full local gradients)."""
    if s.y is None or s.g_prev is None:
        raise InvalidArgumentError("state does not carry a tracking variable")
    if s.x.shape != (w.m, problem.dim):
        raise InvalidArgumentError("state/matrix/problem dimensions disagree")
    x_new = w.w @ s.x - alpha * s.y
    g_new = _stack_full_gradients(problem, x_new)
    y_new = w.w @ s.y + g_new - s.g_prev
    return NetworkState(x=x_new, y=y_new, g_prev=g_new, k=s.k + 1)


def sdiging_step(s: NetworkState, w: MixingMatrix, tables: list[GradientTable],
                 problem: ProblemInstance, alpha: float,
                 check_tracking: bool = False) -> NetworkState:
    """One stochastic gradient-tracking round (one fresh gradient per agent)."""
    if s.y is None or s.g_prev is None:
        raise InvalidArgumentError("state does not carry a tracking variable")
    if len(tables) != problem.m or s.x.shape != (w.m, problem.dim):
        raise InvalidArgumentError("state/tables/problem dimensions disagree")
    x_new = w.w @ s.x - alpha * s.y
    g_new = np.empty_like(s.g_prev)
    for i, (t, lo) in enumerate(zip(tables, problem.locals)):
        idx = t.draw_index()
        g_new[i] = stochastic_avg_gradient(t, lo, x_new[i], idx)
    y_new = w.w @ s.y + g_new - s.g_prev
    out = NetworkState(x=x_new, y=y_new, g_prev=g_new, k=s.k + 1)
    if check_tracking:
        assert_tracking_identity(out, tol=1e-10 * w.m)
    return out


def primal_dual_step(s: NetworkState, w: MixingMatrix, tables: list[GradientTable],
                     problem: ProblemInstance, alpha: float) -> NetworkState:
    """One primal-dual round sharing the stochastic-gradient mechanism.

    Fed the same index streams and zero initialization, the x-trajectory
    coincides with the stochastic gradient-tracking iteration.
    """
    if s.lam is None or s.g_prev is None:
        raise InvalidArgumentError("state does not carry a dual variable")
    if len(tables) != problem.m or s.x.shape != (w.m, problem.dim):
        raise InvalidArgumentError("state/tables/problem dimensions disagree")
    w2 = w.w @ w.w
    lmat = np.eye(w.m) - w.w
    x_new = w2 @ s.x - alpha * s.g_prev - lmat @ s.lam
    lam_new = s.lam + lmat @ x_new
    g_new = np.empty_like(s.g_prev)
    for i, (t, lo) in enumerate(zip(tables, problem.locals)):
        idx = t.draw_index()
        g_new[i] = stochastic_avg_gradient(t, lo, x_new[i], idx)
    return NetworkState(x=x_new, lam=lam_new, g_prev=g_new, k=s.k + 1)


def assert_tracking_identity(s: NetworkState, tol: float):
    """Column sums of the tracker must equal those of the last gradients."""
    gap = np.abs(s.y.sum(axis=0) - s.g_prev.sum(axis=0)).max()
    if gap > tol:
        raise AssertionError(f"tracking identity violated: {gap:.3e} > {tol:.3e}")


# ---------------------------------------------------------------------------
# Rate certification
# ---------------------------------------------------------------------------

@dataclass
class RateCertificate:
    """Parameter bundle certifying a linear rate, or the reason it fails."""

    alpha: float
    phi: float
    gamma: float
    eta: float
    c: float
    d: float
    e: float
    alpha_max: float
    theta: float
    delta: float
    valid: bool
    reason: str = "ok"
    mu: float = 0.0
    lip: float = 0.0
    q_min: int = 1
    q_max: int = 1

    def to_text(self) -> str:
        pairs = [
            ("valid", self.valid), ("reason", self.reason),
            ("alpha", self.alpha), ("alpha_max", self.alpha_max),
            ("phi", self.phi), ("gamma", self.gamma), ("eta", self.eta),
            ("c", self.c), ("d", self.d), ("e", self.e),
            ("theta", self.theta), ("delta", self.delta),
            ("mu", self.mu), ("lip", self.lip),
            ("q_min", self.q_min), ("q_max", self.q_max),
        ]
        return "\n".join(f"{k} = {v}" for k, v in pairs) + "\n"


def step_size_interval(w: MixingMatrix, mu: float, lip: float,
                       phi: float, eta: float) -> float:
    """Right endpoint of the admissible step-size interval (0, alpha_max)."""
    if mu <= 0:
        raise CertificationRefused("objective is not strongly convex (mu <= 0)")
    if not (0.0 < phi < 2.0 * mu):
        raise InvalidArgumentError(f"phi must lie in (0, {2 * mu}), got {phi}")
    if eta <= 0:
        raise InvalidArgumentError(f"eta must be positive, got {eta}")
    return w.rho_min ** 2 / (eta + lip ** 2 / phi)


def rate_certificate(w: MixingMatrix, mu: float, lip: float,
                     q_min: int, q_max: int, phi: float | None = None,
                     gamma: float = 0.5, d: float = 2.0, e: float = 2.0,
                     alpha: float | None = None) -> RateCertificate:
    """Evaluate the admissible parameter intervals and the rate constant.

    Free parameters left open by the theory are pinned deterministically:
    phi defaults to mu, eta sits 5% above its lower endpoint, c is the
    geometric mean of its interval endpoints, and alpha (when not given)
    is half of alpha_max.  An empty interval or an out-of-range alpha
    yields an invalid certificate with a reason, never an exception.
    """
    if mu <= 0:
        raise CertificationRefused("objective is not strongly convex (mu <= 0)")
    if phi is None:
        phi = mu
    if not (0.0 < phi < 2.0 * mu):
        raise InvalidArgumentError(f"phi must lie in (0, {2 * mu}), got {phi}")
    if not (0.0 < gamma < 1.0):
        raise InvalidArgumentError(f"gamma must lie in (0, 1), got {gamma}")
    if d <= 1.0 or e <= 1.0:
        raise InvalidArgumentError("d and e must exceed 1")

    eta_lo = (2.0 * (lip / q_min) * q_max * lip + (2.0 * lip - mu) * lip) \
        / (gamma * (2.0 * mu - phi))
    eta = 1.05 * eta_lo
    alpha_max = step_size_interval(w, mu, lip, phi, eta)
    if alpha is None:
        alpha = 0.5 * alpha_max

    def invalid(reason):
        return RateCertificate(alpha=alpha, phi=phi, gamma=gamma, eta=eta,
                               c=float("nan"), d=d, e=e, alpha_max=alpha_max,
                               theta=0.0, delta=0.0, valid=False, reason=reason,
                               mu=mu, lip=lip, q_min=q_min, q_max=q_max)

    if not (0.0 < alpha < alpha_max):
        return invalid("step-size outside the certified interval")

    c_lo = 4.0 * alpha * q_max * lip / eta
    c_hi = 2.0 * q_min * (gamma * alpha * (2.0 * mu - phi)
                          - alpha * (2.0 * lip - mu) * lip / eta) / lip
    if not (c_lo < c_hi):
        return invalid("empty interval for parameter c")
    c = math.sqrt(c_lo * c_hi)

    spec = spectral_quantities(w)
    rho2_l2 = spec.rho2_l2
    eig = w.eig_w
    rho_max_q = float(np.max((1.0 + 3.0 * eig) * (1.0 - eig))) \
        + alpha * (2.0 * mu - phi)
    ww1_max = float(np.max(eig * (eig - 1.0)))

    t1 = (w.rho_min ** 2 - alpha * (eta + lip ** 2 / phi)) \
        / ((1.0 / rho2_l2) * (d / (d - 1.0)) * e)
    t2 = ((1.0 - gamma) * alpha * (2.0 * mu - phi)) \
        / (1.0 + gamma * rho_max_q + (4.0 / rho2_l2) * d * ww1_max ** 2)
    t3_num = gamma * alpha * (2.0 * mu - phi) \
        - alpha * (2.0 * lip - mu) * lip / eta - c * lip / (2.0 * q_min)
    t3_den = (c / q_min) * (lip / 2.0) \
        + (1.0 / rho2_l2) * (d / (d - 1.0)) * (e / (e - 1.0)) \
        * alpha ** 2 * (2.0 * lip - mu) * lip
    t3 = t3_num / t3_den
    theta = min(t1, t2, t3)
    if theta <= 0.0:
        return invalid("rate constant is not positive")

    return RateCertificate(alpha=alpha, phi=phi, gamma=gamma, eta=eta, c=c,
                           d=d, e=e, alpha_max=alpha_max, theta=theta,
                           delta=0.5 * theta, valid=True,
                           mu=mu, lip=lip, q_min=q_min, q_max=q_max)


def certificate_for_problem(w: MixingMatrix, problem: ProblemInstance,
                            alpha: float | None = None, **choices) -> RateCertificate:
    return rate_certificate(w, mu=problem.mu, lip=problem.lip,
                            q_min=problem.q_min, q_max=problem.q_max,
                            alpha=alpha, **choices)


def iterations_to_accuracy(cert: RateCertificate, kappa: float,
                           epsilon: float) -> int:
    """Rounds guaranteeing the squared error drops from kappa to epsilon."""
    if not cert.valid:
        raise CertificationRefused(f"certificate is invalid: {cert.reason}")
    if epsilon <= 0:
        raise InvalidArgumentError(f"epsilon must be positive, got {epsilon}")
    if kappa <= epsilon:
        return 0
    return math.ceil((1.0 + 1.0 / cert.delta) * math.log(kappa / epsilon))


# ---------------------------------------------------------------------------
# Round execution
# ---------------------------------------------------------------------------

@dataclass
class RunTrace:
    """Per-round diagnostics recorded at a fixed cadence."""

    rounds: list = field(default_factory=list)
    residual_log10: list = field(default_factory=list)
    consensus_gap: list = field(default_factory=list)
    grad_evals: list = field(default_factory=list)
    wall_ms: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("round,residual_log10,consensus_gap,grad_evals,wall_ms\n")
        for row in zip(self.rounds, self.residual_log10, self.consensus_gap,
                       self.grad_evals, self.wall_ms):
            buf.write("%d,%.10g,%.10g,%d,%.6g\n" % row)
        return buf.getvalue()


def residual_log10(x: np.ndarray, x_star: np.ndarray) -> float:
    """log10 of the mean agent distance to the reference, floored at -16."""
    mean_dist = float(np.mean(np.linalg.norm(x - x_star[None, :], axis=1)))
    if mean_dist == 0.0:
        return RESIDUAL_FLOOR
    return max(math.log10(mean_dist), RESIDUAL_FLOOR)


def consensus_gap(x: np.ndarray) -> float:
    """Largest deviation of any agent from the network average."""
    center = x.mean(axis=0)
    return float(np.max(np.linalg.norm(x - center, axis=1)))


def run(algorithm: str, problem: ProblemInstance, w: MixingMatrix, alpha: float,
        rounds: int, seed: int = 0, record_every: int | None = None,
        reference: np.ndarray | None = None, check_tracking: bool = False):
    """Execute synchronous rounds and collect a trace.

    Returns ``(trace, final_state)``.  The residual column is NaN when no
    reference optimum is supplied.  Raises DivergenceError (carrying the
    partial trace) if an iterate norm passes the guard threshold.
    """
    if algorithm not in ALGORITHMS:
        raise InvalidArgumentError(f"unknown algorithm {algorithm!r}")
    if rounds < 1:
        raise InvalidArgumentError(f"need rounds >= 1, got {rounds}")
    if w.m != problem.m:
        raise InvalidArgumentError("mixing matrix and problem disagree on m")
    if record_every is None:
        record_every = max(1, rounds // 2000)

    sum_q = sum(lo.q for lo in problem.locals)
    if algorithm == "diging":
        state = init_diging_state(problem)
        tables = None
        evals = sum_q
        per_round = sum_q
    else:
        tables = make_tables(problem, seed)
        if algorithm == "sdiging":
            state = init_sdiging_state(problem, tables)
        else:
            state = init_primal_dual_state(problem, tables)
        evals = problem.m
        per_round = problem.m

    trace = RunTrace()
    t0 = time.perf_counter()

    def record(st):
        res = residual_log10(st.x, reference) if reference is not None \
            else float("nan")
        trace.rounds.append(st.k)
        trace.residual_log10.append(res)
        trace.consensus_gap.append(consensus_gap(st.x))
        trace.grad_evals.append(evals)
        trace.wall_ms.append((time.perf_counter() - t0) * 1e3)

    record(state)
    for _ in range(rounds):
        if algorithm == "diging":
            state = diging_step(state, w, problem, alpha)
        elif algorithm == "sdiging":
            state = sdiging_step(state, w, tables, problem, alpha,
                                 check_tracking=check_tracking)
        else:
            state = primal_dual_step(state, w, tables, problem, alpha)
        evals += per_round
        if not np.isfinite(state.x).all() or \
                float(np.linalg.norm(state.x)) > DIVERGENCE_NORM:
            record(state)
            raise DivergenceError(
                f"iterate norm passed {DIVERGENCE_NORM:g} at round {state.k}",
                trace=trace)
        if state.k % record_every == 0 or state.k == rounds:
            record(state)
    return trace, state


def require_reference(reference, purpose="residual recording"):
    if reference is None:
        raise ConfigError(f"a reference optimum is required for {purpose}")
    return reference

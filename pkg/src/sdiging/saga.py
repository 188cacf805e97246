"""Per-agent gradient tables for variance-reduced stochastic gradients.

Each agent stores the last gradient it evaluated for every component
function, plus an O(1)-maintained running sum.  A step combines one fresh
component gradient with the stale table entries; the exhaustive average of
the output over all index choices equals the full local gradient, so the
estimator is unbiased conditional on the table state.
"""

from __future__ import annotations

import numpy as np

from sdiging.errors import InvalidArgumentError
from sdiging.objectives import LocalObjective

_DUMP_HEADER = "sdiging-table-v1"


class GradientTable:
    """SAGA memory for one agent.

    Index draws come from a dedicated counter-based stream keyed by
    (seed, agent_id), so runs replay identically regardless of scheduling.
    ``stored_points`` is kept for diagnostics; pass ``lean=True`` to drop it.
    """

    def __init__(self, lo: LocalObjective, x0, seed: int, agent_id: int = 0,
                 lean: bool = False):
        x0 = np.asarray(x0, dtype=float)
        if x0.shape != (lo.dim,):
            raise InvalidArgumentError(f"expected shape ({lo.dim},), got {x0.shape}")
        self.q = lo.q
        self.dim = lo.dim
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.agent_id = int(agent_id)
        self.draw_count = 0
        self._rng = self._make_rng()
        self.stored_grads = np.stack([c.gradient(x0) for c in lo.components])
        self.grad_sum = self.stored_grads.sum(axis=0)
        self.stored_points = None if lean else np.tile(x0, (self.q, 1))

    def _make_rng(self):
        key = np.array([self.seed, self.agent_id], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def draw_index(self) -> int:
        """Uniform index in 1..q; advances the stream by one draw."""
        self.draw_count += 1
        return int(self._rng.integers(1, self.q + 1))

    def full_gradient_estimate(self):
        """Average of the stored gradients (equals g_0 right after init)."""
        return self.grad_sum / self.q

    def check_integrity(self, lo: LocalObjective | None = None):
        """Verify the cached sum (and, if possible, the stored gradients)."""
        direct = self.stored_grads.sum(axis=0)
        scale = 1.0 + float(np.linalg.norm(direct))
        if np.linalg.norm(self.grad_sum - direct) > 1e-12 * scale:
            raise AssertionError("running gradient sum drifted from direct sum")
        if lo is not None and self.stored_points is not None:
            for h, comp in enumerate(lo.components):
                if not np.array_equal(self.stored_grads[h],
                                      comp.gradient(self.stored_points[h])):
                    raise AssertionError(f"stored gradient {h} is stale")


def init_table(lo: LocalObjective, x0, seed: int, agent_id: int = 0,
               lean: bool = False) -> GradientTable:
    """Fresh table with every slot evaluated at x0."""
    return GradientTable(lo, x0, seed=seed, agent_id=agent_id, lean=lean)


def draw_index(t: GradientTable) -> int:
    return t.draw_index()


def stochastic_avg_gradient(t: GradientTable, lo: LocalObjective, x, idx: int):
    """Variance-reduced gradient estimate at x using component ``idx``.

    Returns the estimate computed against the pre-update table, then
    overwrites slot ``idx`` with the fresh gradient and updates the running
    sum by the add-new/subtract-old recursion.
    """
    if not (1 <= idx <= t.q):
        raise InvalidArgumentError(f"index {idx} outside 1..{t.q}")
    x = np.asarray(x, dtype=float)
    if x.shape != (t.dim,):
        raise InvalidArgumentError(f"expected shape ({t.dim},), got {x.shape}")
    h = idx - 1
    fresh = lo.components[h].gradient(x)
    g = fresh - t.stored_grads[h] + t.grad_sum / t.q
    t.grad_sum += fresh - t.stored_grads[h]
    t.stored_grads[h] = fresh
    if t.stored_points is not None:
        t.stored_points[h] = x
    return g


def dump_table(t: GradientTable) -> str:
    """Checkpoint as CSV text with a versioned header.

    Fields: header line; one metadata line ``agent,q,n,seed,draws``; one
    line per stored gradient; one line for the running sum.
    """
    lines = [_DUMP_HEADER,
             f"{t.agent_id},{t.q},{t.dim},{t.seed},{t.draw_count}"]
    for h in range(t.q):
        lines.append(",".join(f"{v:.17g}" for v in t.stored_grads[h]))
    lines.append(",".join(f"{v:.17g}" for v in t.grad_sum))
    return "\n".join(lines) + "\n"


def load_table(text: str, lo: LocalObjective) -> GradientTable:
    """Restore a checkpoint; the index stream is replayed to its counter.

    Restored tables are lean (stored points are not checkpointed).
    """
    lines = text.splitlines()
    if not lines or lines[0] != _DUMP_HEADER:
        raise InvalidArgumentError("not a gradient-table checkpoint")
    agent_id, q, dim, seed, draws = (int(v) for v in lines[1].split(","))
    if q != lo.q or dim != lo.dim:
        raise InvalidArgumentError("checkpoint does not match the local objective")
    t = GradientTable.__new__(GradientTable)
    t.q, t.dim, t.seed, t.agent_id = q, dim, seed, agent_id
    t.stored_points = None
    t.stored_grads = np.array(
        [[float(v) for v in lines[2 + h].split(",")] for h in range(q)]
    )
    t.grad_sum = np.array([float(v) for v in lines[2 + q].split(",")])
    t.draw_count = 0
    t._rng = t._make_rng()
    for _ in range(draws):
        t.draw_index()
    return t

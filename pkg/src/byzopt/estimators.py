"""Per-agent stochastic gradient estimators.

Four kinds: SAGA (gradient table), LSVRG (probabilistic anchor), plain SGD,
and full batch.  Every estimator's conditional expectation over the sampled
index equals the batch gradient; the tracker quantities below measure how
far the stored reference points sit from the optimum and drive the
variance-decay diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from byzopt import kernels, objective

RESYNC_EVERY = 1000  # exact table-average recomputation interval


@dataclass
class SagaState:
    """Gradient table with an incrementally maintained average.

    ``points`` (the table's reference inputs) are kept only when
    ``track_points`` is requested; they are needed by the tracker, not by the
    update itself.
    """

    table: np.ndarray
    avg: np.ndarray
    points: np.ndarray | None = None
    updates_since_resync: int = 0


@dataclass
class LsvrgState:
    """Anchor point with its cached batch gradient and trigger probability."""

    anchor: np.ndarray
    anchor_full_grad: np.ndarray
    trigger_prob: float


def init_saga(p, agent, x0, track_points=False):
    """Table filled with component gradients at x0; costs q_i evaluations."""
    q = p.q(agent)
    table = np.stack([objective.component_grad(p, agent, l, x0) for l in range(q)])
    points = np.tile(x0, (q, 1)) if track_points else None
    return SagaState(table=table, avg=table.mean(axis=0), points=points), q


def init_lsvrg(p, agent, x0, trigger_prob):
    """Anchor at x0 with its exact batch gradient; costs q_i evaluations."""
    if not 0.0 < trigger_prob <= 1.0:
        raise ValueError(f"trigger probability must be in (0, 1], got {trigger_prob}")
    return LsvrgState(anchor=x0.copy(), anchor_full_grad=objective.full_grad(p, agent, x0),
                      trigger_prob=trigger_prob), p.q(agent)


def saga_estimate(st: SagaState, p, agent, x, s):
    """Variance-corrected gradient at x using the pre-update table; the
    sampled slot is then overwritten with the fresh component gradient.

    Returns (r, evals); charges one component evaluation (the new table
    entry reuses the same evaluation as the first term).
    """
    if not 0 <= s < st.table.shape[0]:
        raise IndexError(f"sample index {s} out of range")
    g_new = objective.component_grad(p, agent, s, x)
    r = kernels.saga_update(st.table, st.avg, g_new, s)
    if st.points is not None:
        st.points[s] = x
    st.updates_since_resync += 1
    if st.updates_since_resync >= RESYNC_EVERY:
        st.avg[:] = st.table.mean(axis=0)
        st.updates_since_resync = 0
    return r, 1


def lsvrg_estimate(st: LsvrgState, p, agent, x, s, trigger_draw):
    """Anchor-corrected gradient at x; the anchor moves to x when the
    uniform draw falls below the trigger probability, recomputing its batch
    gradient exactly.

    Returns (r, evals): 2 component evaluations plus q_i on a trigger.
    """
    if not 0 <= s < p.q(agent):
        raise IndexError(f"sample index {s} out of range")
    r = (objective.component_grad(p, agent, s, x)
         - objective.component_grad(p, agent, s, st.anchor)
         + st.anchor_full_grad)
    evals = 2
    if trigger_draw < st.trigger_prob:
        st.anchor = x.copy()
        st.anchor_full_grad = objective.full_grad(p, agent, x)
        evals += p.q(agent)
    return r, evals


def sgd_estimate(p, agent, x, s):
    """Plain stochastic gradient: the sampled component, no correction."""
    return objective.component_grad(p, agent, s, x), 1


def tracker(kind, st, p, agent, x_star):
    """Bregman-type residual of the estimator's reference points at the
    optimum: mean over stored points (SAGA) or at the anchor (LSVRG).
    Nonnegative by convexity."""
    if kind == "saga":
        if st.points is None:
            raise ValueError("tracker needs a SAGA state built with track_points=True")
        total = 0.0
        q = st.points.shape[0]
        for l in range(q):
            gl = objective.component_grad(p, agent, l, x_star)
            total += (objective.component_value(p, agent, l, st.points[l])
                      - objective.component_value(p, agent, l, x_star)
                      - float(gl @ (st.points[l] - x_star)))
        return total / q
    if kind == "lsvrg":
        q = p.q(agent)
        total = 0.0
        for l in range(q):
            gl = objective.component_grad(p, agent, l, x_star)
            total += (objective.component_value(p, agent, l, st.anchor)
                      - objective.component_value(p, agent, l, x_star)
                      - float(gl @ (st.anchor - x_star)))
        return total / q
    raise ValueError(f"tracker is defined for saga/lsvrg, got {kind!r}")


class AgentEstimator:
    """Engine-facing wrapper: one estimator kind + state + RNG draws for a
    single agent.  ``step`` consumes the agent's sample stream (and trigger
    stream for LSVRG) and returns the stochastic gradient."""

    def __init__(self, kind, p, agent, x0, sample_rng, trigger_rng=None,
                 trigger_prob=None, track_points=False):
        self.kind = kind
        self.p = p
        self.agent = agent
        self.q = p.q(agent)
        self.sample_rng = sample_rng
        self.trigger_rng = trigger_rng
        self.evals = 0
        self.state = None
        if kind == "saga":
            self.state, cost = init_saga(p, agent, x0, track_points=track_points)
            self.evals += cost
        elif kind == "lsvrg":
            self.state, cost = init_lsvrg(p, agent, x0, trigger_prob)
            self.evals += cost
        elif kind not in ("sgd", "full"):
            raise ValueError(f"unknown estimator kind {kind!r}")

    def step(self, x):
        if self.kind == "full":
            self.evals += self.q
            return objective.full_grad(self.p, self.agent, x)
        s = int(self.sample_rng.integers(self.q))
        if self.kind == "saga":
            r, cost = saga_estimate(self.state, self.p, self.agent, x, s)
        elif self.kind == "lsvrg":
            draw = float(self.trigger_rng.random())
            r, cost = lsvrg_estimate(self.state, self.p, self.agent, x, s, draw)
        else:
            r, cost = sgd_estimate(self.p, self.agent, x, s)
        self.evals += cost
        return r

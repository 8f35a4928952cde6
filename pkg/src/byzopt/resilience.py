"""The penalized resilient update: a-norm penalty subgradients over received
messages, the resilient subgradient descent step, and the proximal step.

Each neighbor contributes exactly one norm-subgradient term with dual norm
at most one, so a falsified payload of any magnitude moves the state by at
most alpha * penalty per neighbor: bounded influence without screening or
weighting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from byzopt import kernels, objective


@dataclass(frozen=True)
class PenaltyConfig:
    phi: float
    a_norm: int = 1

    def __post_init__(self):
        if self.phi <= 0:
            raise ValueError("penalty must be positive")
        if self.a_norm not in (1, 2):
            raise ValueError("a_norm must be 1 or 2")

    @property
    def dual_norm(self):
        return np.inf if self.a_norm == 1 else 2


@dataclass(frozen=True)
class InboxMessage:
    sender: int
    payload: np.ndarray


def norm_subgradient(d, a_norm):
    """A subgradient of ||.||_a at d: coordinate signs (a=1) or the unit
    direction (a=2), with 0 chosen at the kink."""
    d = np.asarray(d, dtype=float)
    if a_norm == 1:
        return np.sign(d)
    if a_norm == 2:
        nrm = float(np.linalg.norm(d))
        return d / nrm if nrm > 0 else np.zeros_like(d)
    raise ValueError(f"a_norm must be 1 or 2, got {a_norm}")


def resilient_descent_step(x_i, r_i, inbox, cfg: PenaltyConfig, alpha):
    """x_i - alpha*r_i - alpha*phi * sum_j subgrad ||x_i - payload_j||_a.

    Messages are summed in sender-id order, so permuting the inbox leaves
    the output bit-identical.  No screening, no weighting: reliable and
    Byzantine payloads are indistinguishable to the agent.
    """
    if alpha <= 0:
        raise ValueError("step size must be positive")
    x_i = np.asarray(x_i, dtype=float)
    msgs = sorted(inbox, key=lambda msg: msg.sender)
    for msg in msgs:
        if msg.payload.shape != x_i.shape:
            raise ValueError(f"payload from {msg.sender} has shape {msg.payload.shape}, "
                             f"expected {x_i.shape}")
    if msgs:
        payloads = np.ascontiguousarray(np.stack([m.payload for m in msgs]), dtype=float)
        pen = kernels.penalty_direction_sum(x_i, payloads, cfg.a_norm)
    else:
        pen = np.zeros_like(x_i)
    return x_i - alpha * np.asarray(r_i, dtype=float) - alpha * cfg.phi * pen


def prox_step(x_bar, p, alpha):
    """Proximal step on the shared non-smooth term (blockwise = stacked)."""
    return objective.prox_g(p, alpha, x_bar)

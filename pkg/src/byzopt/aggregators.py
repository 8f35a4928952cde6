"""Baseline update rules: weighted averaging and screening aggregators
(coordinate trimmed mean, coordinate median, Krum, geometric median), each
composed with the same estimator + prox step as the penalty algorithm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from byzopt import objective

KINDS = ("penalty", "average", "trimmed_mean", "coord_median", "krum", "geo_median")

WEISZFELD_TOL = 1e-9
WEISZFELD_MAX_ITER = 200
WEISZFELD_EPS = 1e-12  # distance floor when the iterate sits on a candidate


class AggregatorError(ValueError):
    pass


@dataclass(frozen=True)
class AggregatorKind:
    kind: str
    trim_f: int = 0   # trimmed_mean: drop count per side; krum: assumed Byzantine count
    tol: float = WEISZFELD_TOL
    max_iter: int = WEISZFELD_MAX_ITER

    def __post_init__(self):
        if self.kind not in KINDS:
            raise AggregatorError(f"unknown aggregator {self.kind!r}")
        if self.trim_f < 0:
            raise AggregatorError("trim/assumed-Byzantine count must be >= 0")

    def validate_degree(self, inbox_size):
        """Config-time feasibility for a given inbox size."""
        if self.kind == "trimmed_mean" and 2 * self.trim_f >= inbox_size:
            raise AggregatorError(
                f"trimmed_mean needs 2f < inbox size ({2 * self.trim_f} >= {inbox_size})")
        if self.kind == "krum" and inbox_size < 2 * self.trim_f + 3:
            raise AggregatorError(
                f"krum needs inbox size >= 2f + 3 ({inbox_size} < {2 * self.trim_f + 3})")


def _krum(candidates, senders, f):
    """Candidate minimizing the summed squared distance to its
    (count - f - 2) nearest peers; ties break toward the lowest sender id."""
    count = len(candidates)
    stacked = np.stack(candidates)
    d2 = np.sum((stacked[:, None, :] - stacked[None, :, :]) ** 2, axis=2)
    keep = count - f - 2
    scores = []
    for c in range(count):
        others = np.delete(d2[c], c)
        scores.append(np.sum(np.sort(others)[:keep]))
    order = sorted(range(count), key=lambda c: (scores[c], senders[c]))
    return stacked[order[0]].copy()


def _geo_median(candidates, tol, max_iter):
    """Weiszfeld iteration for the minimizer of the summed distances."""
    stacked = np.stack(candidates)
    y = stacked.mean(axis=0)
    for _ in range(max_iter):
        d = np.linalg.norm(stacked - y, axis=1)
        d = np.maximum(d, WEISZFELD_EPS)
        w = 1.0 / d
        y_new = (w[:, None] * stacked).sum(axis=0) / w.sum()
        if np.linalg.norm(y_new - y) <= tol:
            return y_new
        y = y_new
    return y


def aggregate(kind: AggregatorKind, self_state, inbox, weights=None, self_id=-1,
              self_weight=None):
    """Combine the agent's own state with the received payloads.

    ``inbox`` is a list of (sender, payload); ``weights`` maps senders to
    averaging weights (averaging kind only).  Screening kinds act on the
    candidate set {self} + inbox.
    """
    if not inbox:
        raise AggregatorError("aggregate requires a nonempty inbox")
    senders = [s for s, _ in inbox]
    payloads = [p for _, p in inbox]
    if kind.kind == "average":
        out = self_weight * self_state
        for s, p in inbox:
            out = out + weights[s] * p
        return out
    candidates = [self_state] + payloads
    cand_ids = [self_id] + senders
    if kind.kind == "trimmed_mean":
        kind.validate_degree(len(inbox))
        stacked = np.sort(np.stack(candidates), axis=0)
        f = kind.trim_f
        return stacked[f:len(candidates) - f].mean(axis=0)
    if kind.kind == "coord_median":
        stacked = np.sort(np.stack(candidates), axis=0)
        return stacked[(len(candidates) - 1) // 2]  # lower middle for even counts
    if kind.kind == "krum":
        kind.validate_degree(len(inbox))
        return _krum(candidates, cand_ids, kind.trim_f)
    if kind.kind == "geo_median":
        return _geo_median(candidates, kind.tol, kind.max_iter)
    raise AggregatorError(f"aggregate does not handle kind {kind.kind!r}")


def baseline_step(kind: AggregatorKind, p, self_state, r_i, inbox, alpha,
                  weights=None, self_id=-1, self_weight=None):
    """Aggregate the inbox, then take the local gradient + prox step."""
    y = aggregate(kind, self_state, inbox, weights=weights, self_id=self_id,
                  self_weight=self_weight)
    return objective.prox_g(p, alpha, y - alpha * r_i)

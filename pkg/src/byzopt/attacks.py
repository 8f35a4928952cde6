"""Falsified-message generators for Byzantine senders.

Attackers are omniscient: each payload may read the full iteration-k state
snapshot.  Payloads are pure functions of (spec, sender, receiver,
iteration, snapshot); the Gaussian attack uses counter-based draws keyed on
the whole tuple so any execution order reproduces the same run.

Kinds:
- zero_sum:   colluding payload that cancels the receiver's weighted
              reliable-neighbor sum under averaging aggregation;
- gaussian:   weighted reliable-neighbor mean plus iid noise;
- same_value: a constant all-ones vector scaled by a fixed magnitude;
- sign_flip:  negatively scaled neighborhood average (receiver included);
- none:       crash-silent, no payload is delivered at all.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from byzopt import rngstream
from byzopt.topology import Topology

KINDS = ("zero_sum", "gaussian", "same_value", "sign_flip", "none")
PAYLOAD_CLAMP = 1e30  # keeps arithmetic finite; immaterial under bounded influence


class AttackError(ValueError):
    pass


@dataclass(frozen=True)
class AttackSpec:
    kind: str = "none"
    gaussian_std: float = 30.0
    same_value_magnitude: float = 1000.0
    sign_flip_scale: float = 1.5
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise AttackError(f"unknown attack kind {self.kind!r}")
        if self.gaussian_std <= 0 or self.sign_flip_scale <= 0:
            raise AttackError("attack scale parameters must be positive")


def validate(spec: AttackSpec, t: Topology):
    """Config-time checks; zero_sum needs positive weights toward every
    targeted receiver (automatic for Metropolis weights on edges)."""
    if spec.kind != "zero_sum":
        return
    for b in sorted(t.byzantine):
        for i in t.reliable_neighbors(b):
            if t.weights[b, i] <= 0:
                raise AttackError(f"zero_sum undefined: weight ({b},{i}) is zero")


def forge(spec: AttackSpec, sender, receiver, k, snapshot, t: Topology):
    """Payload from Byzantine ``sender`` to reliable ``receiver`` at
    iteration k.  ``snapshot`` is the (m, n) state matrix of all agents."""
    if sender not in t.byzantine:
        raise AttackError(f"sender {sender} is not Byzantine")
    n = snapshot.shape[1]
    rel_nb = t.reliable_neighbors(receiver)
    if spec.kind == "none":
        raise AttackError("kind 'none' delivers no payloads")
    if spec.kind == "same_value":
        z = np.full(n, spec.same_value_magnitude)
    elif spec.kind == "zero_sum":
        byz_nb = t.byzantine_neighbors(receiver)
        if not byz_nb or t.weights[sender, receiver] <= 0:
            raise AttackError(f"zero_sum undefined for receiver {receiver}")
        weighted = np.zeros(n)
        for j in rel_nb:
            weighted += t.weights[receiver, j] * snapshot[j]
        z = -weighted / len(byz_nb) / t.weights[sender, receiver]
    elif spec.kind == "gaussian":
        wsum = sum(t.weights[receiver, j] for j in rel_nb)
        mean = np.zeros(n)
        if wsum > 0:
            for j in rel_nb:
                mean += t.weights[receiver, j] * snapshot[j]
            mean /= wsum
        z = mean + rngstream.keyed_normal(spec.seed, sender, receiver, k, n,
                                          scale=spec.gaussian_std)
    elif spec.kind == "sign_flip":
        total = snapshot[receiver].copy()
        for j in rel_nb:
            total += snapshot[j]
        z = -spec.sign_flip_scale * total / (len(rel_nb) + 1)
    else:  # pragma: no cover - guarded by AttackSpec validation
        raise AttackError(spec.kind)
    return np.clip(z, -PAYLOAD_CLAMP, PAYLOAD_CLAMP)


def verify_zero_sum_intent(t: Topology, snapshot, spec: AttackSpec) -> float:
    """Max over targeted receivers of the weighted inbox sum's infinity norm.

    Under averaging aggregation the zero_sum payloads cancel the reliable
    weighted sum exactly, so the residual is ~0 by construction.  Receivers
    without a Byzantine neighbor are not targeted and are skipped.
    """
    if spec.kind != "zero_sum":
        raise AttackError("verify_zero_sum_intent applies to zero_sum specs")
    worst = None
    for i in sorted(t.reliable):
        byz_nb = t.byzantine_neighbors(i)
        if not byz_nb:
            continue
        acc = np.zeros(snapshot.shape[1])
        for j in t.reliable_neighbors(i):
            acc += t.weights[i, j] * snapshot[j]
        for b in byz_nb:
            acc += t.weights[i, b] * forge(spec, b, i, 0, snapshot, t)
        resid = float(np.max(np.abs(acc))) if acc.size else 0.0
        worst = resid if worst is None else max(worst, resid)
    if worst is None:
        raise AttackError("no reliable receiver has a Byzantine neighbor")
    return worst

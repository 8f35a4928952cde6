"""Composite problem instances: smooth per-sample components plus a shared
l1 term, their gradients, proximal operator, Bregman divergence, and the
centralized oracle solver used for gap metrics and penalty calibration.

Two instance kinds:

- ``synthetic_lasso``: per-sample components 1/2 (a' x - y)^2 with an
  optional ridge folded into every component; exact curvature constants.
- ``softmax_regression``: multi-class cross-entropy over (feature, label)
  shards with blockwise parameters, ridge folded into every component.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from byzopt import kernels, rngstream


class ObjectiveError(ValueError):
    pass


@dataclass(frozen=True)
class SampleBatch:
    """Feature matrix with integer class labels."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if self.features.shape[0] != self.labels.shape[0]:
            raise ObjectiveError("label count must equal feature row count")


@dataclass(frozen=True)
class ProblemInstance:
    """Per-agent sample shards plus the shared non-smooth term beta2*||.||_1.

    The l2 regularizer beta1 is folded into every per-sample component so
    each component is beta1-strongly convex and their average equals the
    agent objective.  ``mu_i``/``L_i`` are exact per-agent curvature
    constants (component-max smoothness, so smoothness holds for every
    single component, not just their average).
    """

    kind: str
    n: int
    shards: tuple
    beta1: float
    beta2: float
    mu_i: np.ndarray = field(repr=False)
    L_i: np.ndarray = field(repr=False)
    n_classes: int = 0
    feat_dim: int = 0

    @property
    def m(self):
        return len(self.shards)

    def q(self, agent):
        return self.shards[agent][1].shape[0] if self.kind == "softmax_regression" \
            else self.shards[agent][0].shape[0]

    def constants(self, agents):
        """(mu, L) restricted to the given agent set: min mu_i, max L_i."""
        ids = sorted(agents)
        return float(np.min(self.mu_i[ids])), float(np.max(self.L_i[ids]))

    @property
    def mu(self):
        return float(np.min(self.mu_i))

    @property
    def L(self):
        return float(np.max(self.L_i))


def make_synthetic_lasso(m, n, q, seed, beta1=0.0, beta2=0.1, noise_std=0.1,
                         row_scale=1.0, x_true_scale=1.0) -> ProblemInstance:
    """Seeded lasso instance; shard i depends only on (seed, i) so a run on
    an induced reliable subnetwork sees identical shards.  ``q`` is either a
    common sample count or one count per agent."""
    x_true = x_true_scale * rngstream.stream(seed, 999983, 12).standard_normal(n)
    qs = [q] * m if np.isscalar(q) else list(q)
    shards, mu_i, L_i = [], [], []
    for i, q in zip(range(m), qs):
        a = row_scale * rngstream.stream(seed, i, 10).standard_normal((q, n))
        noise = noise_std * rngstream.stream(seed, i, 11).standard_normal(q)
        y = a @ x_true + noise
        shards.append((a, y))
        h = a.T @ a / q
        mu_i.append(float(np.linalg.eigvalsh(h)[0]) + beta1)
        L_i.append(float(np.max(np.einsum("ij,ij->i", a, a))) + beta1)
    return ProblemInstance(kind="synthetic_lasso", n=n, shards=tuple(shards),
                           beta1=beta1, beta2=beta2,
                           mu_i=np.array(mu_i), L_i=np.array(L_i))


def make_softmax(shards, n_classes, feat_dim, beta1, beta2) -> ProblemInstance:
    """Softmax instance from per-agent (features, labels) shards."""
    if beta1 <= 0:
        raise ObjectiveError("softmax needs beta1 > 0 for strong convexity")
    L_i = []
    for feats, labels in shards:
        if np.any(labels < 0) or np.any(labels >= n_classes):
            raise ObjectiveError("label out of class range")
        L_i.append(beta1 + 0.25 * float(np.max(np.einsum("ij,ij->i", feats, feats))))
    return ProblemInstance(kind="softmax_regression", n=n_classes * feat_dim,
                           shards=tuple((f, l) for f, l in shards),
                           beta1=beta1, beta2=beta2,
                           mu_i=np.full(len(shards), beta1), L_i=np.array(L_i),
                           n_classes=n_classes, feat_dim=feat_dim)


def _softmax_probs(x_blocks, feat):
    scores = x_blocks @ feat
    scores -= scores.max()
    e = np.exp(scores)
    return e / e.sum()


def component_grad(p: ProblemInstance, agent, l, x):
    """Gradient of the l-th per-sample component (ridge term included)."""
    if not 0 <= l < p.q(agent):
        raise IndexError(f"sample index {l} out of range for agent {agent}")
    if p.kind == "synthetic_lasso":
        a, y = p.shards[agent]
        return kernels.lasso_component_grad(a[l], y[l], p.beta1, x)
    feats, labels = p.shards[agent]
    blocks = x.reshape(p.n_classes, p.feat_dim)
    probs = _softmax_probs(blocks, feats[l])
    probs[labels[l]] -= 1.0
    return (np.outer(probs, feats[l]) + p.beta1 * blocks).ravel()


def component_value(p: ProblemInstance, agent, l, x):
    """Value of the l-th per-sample component (ridge term included)."""
    ridge = 0.5 * p.beta1 * float(x @ x)
    if p.kind == "synthetic_lasso":
        a, y = p.shards[agent]
        return 0.5 * (a[l] @ x - y[l]) ** 2 + ridge
    feats, labels = p.shards[agent]
    blocks = x.reshape(p.n_classes, p.feat_dim)
    scores = blocks @ feats[l]
    return float(np.log(np.sum(np.exp(scores - scores.max()))) + scores.max()
                 - scores[labels[l]]) + ridge


def full_grad(p: ProblemInstance, agent, x):
    """Batch gradient: average of component gradients."""
    if p.kind == "synthetic_lasso":
        a, y = p.shards[agent]
        return a.T @ (a @ x - y) / a.shape[0] + p.beta1 * x
    feats, labels = p.shards[agent]
    blocks = x.reshape(p.n_classes, p.feat_dim)
    scores = feats @ blocks.T
    scores -= scores.max(axis=1, keepdims=True)
    probs = np.exp(scores)
    probs /= probs.sum(axis=1, keepdims=True)
    probs[np.arange(len(labels)), labels] -= 1.0
    return (probs.T @ feats / len(labels) + p.beta1 * blocks).ravel()


def f_value(p: ProblemInstance, agent, x):
    """Agent objective value: average component value."""
    if p.kind == "synthetic_lasso":
        a, y = p.shards[agent]
        resid = a @ x - y
        return 0.5 * float(resid @ resid) / a.shape[0] + 0.5 * p.beta1 * float(x @ x)
    feats, labels = p.shards[agent]
    blocks = x.reshape(p.n_classes, p.feat_dim)
    scores = feats @ blocks.T
    mx = scores.max(axis=1)
    lse = np.log(np.exp(scores - mx[:, None]).sum(axis=1)) + mx
    picked = scores[np.arange(len(labels)), labels]
    return float(np.mean(lse - picked)) + 0.5 * p.beta1 * float(x @ x)


def g_value(p: ProblemInstance, x):
    return p.beta2 * float(np.sum(np.abs(x)))


def prox_g(p: ProblemInstance, alpha, v):
    """Proximal step for the shared l1 term: coordinate soft-threshold."""
    if alpha <= 0:
        raise ObjectiveError("prox step size must be positive")
    return kernels.soft_threshold(np.asarray(v, dtype=float), alpha * p.beta2)


def bregman(p: ProblemInstance, x_stack, x_star, agents):
    """Sum over the given agents of the smooth-part Bregman divergence
    f_i(x_i) - f_i(x*) - grad f_i(x*)' (x_i - x*)."""
    total = 0.0
    for row, i in enumerate(sorted(agents)):
        xi = x_stack[row]
        gstar = full_grad(p, i, x_star)
        total += f_value(p, i, xi) - f_value(p, i, x_star) - float(gstar @ (xi - x_star))
    return total


def solve_centralized(p: ProblemInstance, reliable, tol=1e-10, max_iter=100_000,
                      x0=None):
    """Accelerated proximal-gradient oracle for the consensus optimum.

    Minimizes mean_{i in R} f_i(x) + g(x) (the per-agent composite average,
    whose minimizer is the consensus target).  Terminates when the
    prox-gradient fixed-point residual ||x - prox(x - grad/L)|| falls below
    tol; raises on non-convergence with the final residual.
    """
    rel = sorted(reliable)
    if p.mu_i[rel].min() <= 0:
        raise ObjectiveError("oracle requires strong convexity (mu > 0)")
    step_l = float(np.mean(p.L_i[rel]))

    def grad(x):
        g = np.zeros(p.n)
        for i in rel:
            g += full_grad(p, i, x)
        return g / len(rel)

    def value(x):
        return sum(f_value(p, i, x) for i in rel) / len(rel) + g_value(p, x)

    x = np.zeros(p.n) if x0 is None else np.asarray(x0, dtype=float).copy()
    z = x.copy()
    t = 1.0
    prev_val = value(x)
    residual = np.inf
    for _ in range(max_iter):
        x_new = prox_g(p, 1.0 / step_l, z - grad(z) / step_l)
        residual = float(np.linalg.norm(
            x_new - prox_g(p, 1.0 / step_l, x_new - grad(x_new) / step_l)))
        if residual <= tol:
            return x_new
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        z = x_new + (t - 1.0) / t_new * (x_new - x)
        val = value(x_new)
        if val > prev_val:  # function-value restart keeps FISTA monotone enough
            z = x_new.copy()
            t_new = 1.0
        prev_val = val
        x, t = x_new, t_new
    raise ObjectiveError(f"oracle did not converge: residual {residual:.3e} > tol {tol:.3e}")


def test_accuracy(p: ProblemInstance, x, test: SampleBatch) -> float:
    """Fraction of test samples whose argmax class score matches the label;
    argmax breaks ties toward the lowest class id."""
    if p.kind != "softmax_regression":
        raise ObjectiveError("test accuracy is defined for softmax instances only")
    blocks = x.reshape(p.n_classes, p.feat_dim)
    pred = np.argmax(test.features @ blocks.T, axis=1)
    return float(np.mean(pred == test.labels))

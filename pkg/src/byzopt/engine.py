"""Synchronous-round simulation: exchange -> estimate -> update for all
agents, step-size schedules, convergence-bound calculators, and metrics.

Round semantics: every iteration snapshots all states, builds each reliable
agent's inbox from that snapshot (true payloads from reliable neighbors,
forged payloads from Byzantine neighbors), lets every agent compute its
next state, then commits simultaneously.  Byzantine agents evolve their own
states honestly from true neighbor states; their forged messages are
generated separately, so the crash-silent attack kind degenerates to the
Byzantine-free algorithm on the reliable subgraph.

Determinism contract: per-agent RNG streams, counter-based attack draws,
and sender-sorted reductions make a run a pure function of its config.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from byzopt import attacks, estimators, kernels, objective, rngstream
from byzopt.aggregators import AggregatorKind, aggregate
from byzopt.attacks import AttackSpec
from byzopt.objective import ProblemInstance
from byzopt.topology import Topology, reliable_connected


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Schedule:
    """Step-size rule: constant / decaying alpha_k = theta/(k + xi), or the
    auto variants that derive the value from the curvature constants."""

    kind: str
    alpha: float | None = None
    theta: float | None = None
    xi: float | None = None

    def __post_init__(self):
        if self.kind not in ("constant", "decaying", "auto_constant", "auto_decaying"):
            raise ConfigError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "constant" and (self.alpha is None or self.alpha <= 0):
            raise ConfigError("constant schedule needs alpha > 0")
        if self.kind == "decaying":
            if self.theta is None or self.theta <= 0 or self.xi is None or self.xi <= 0:
                raise ConfigError("decaying schedule needs theta > 0 and xi > 0")


@dataclass(frozen=True)
class TheoryBounds:
    """Derived convergence constants for a (topology, problem, penalty) triple."""

    gamma: float
    kappa_f: float
    kappa_q: float
    q_min: int
    q_max: int
    mu: float
    L: float
    P1_c: float
    P2: float
    E: float
    P1_d: float
    alpha_max_linear: float
    theta_min: float
    xi: float
    linear_radius: float
    sublinear_radius: float


def max_constant_step(kappa_q, kappa_f, q_min, mu):
    """Largest constant step size with a guaranteed linear rate."""
    return 1.0 / (kappa_q * (32.0 * (1.0 + kappa_f) ** 2 + q_min) * mu)


def decaying_xi(kappa_q, kappa_f, q_min, mu, theta):
    """Offset of the guaranteed-sublinear schedule theta/(k + xi)."""
    return kappa_q * (64.0 * (1.0 + kappa_f) ** 2 + q_min) * mu * theta


def compute_bounds(t: Topology, p: ProblemInstance, phi, alpha=None, theta=None) -> TheoryBounds:
    """All derived constants; alpha/theta default to the guaranteed values."""
    rel = sorted(t.reliable)
    mu, L = p.constants(rel)
    if mu <= 0:
        raise ConfigError("bounds require strong convexity (mu > 0)")
    gamma = mu * L / (mu + L)
    kappa_f = L / mu
    qs = [p.q(i) for i in rel]
    q_min, q_max = min(qs), max(qs)
    kappa_q = q_max / q_min
    n = p.n
    sum_rel_sq = sum(len(t.reliable_neighbors(i)) ** 2 for i in rel)
    sum_byz_sq = sum(len(t.byzantine_neighbors(i)) ** 2 for i in rel)
    p1_c = 16.0 * n * phi ** 2 * sum_rel_sq + 4.0 * n * phi ** 2 * sum_byz_sq
    p2 = n * phi ** 2 * sum_byz_sq / gamma
    e_ball = 4.0 * p2 / gamma
    g_hat = n * p.beta2 ** 2  # bound on the squared l1-subgradient norm
    p1_d = 16.0 * len(rel) * g_hat + 16.0 * n * phi ** 2 * sum_rel_sq \
        + 4.0 * n * phi ** 2 * sum_byz_sq
    alpha_max = max_constant_step(kappa_q, kappa_f, q_min, mu)
    theta_min = 4.0 / gamma
    theta = 2.0 * theta_min if theta is None else theta
    alpha = alpha_max if alpha is None else alpha
    return TheoryBounds(
        gamma=gamma, kappa_f=kappa_f, kappa_q=kappa_q, q_min=q_min, q_max=q_max,
        mu=mu, L=L, P1_c=p1_c, P2=p2, E=e_ball, P1_d=p1_d,
        alpha_max_linear=alpha_max, theta_min=theta_min,
        xi=decaying_xi(kappa_q, kappa_f, q_min, mu, theta),
        linear_radius=4.0 * (p1_c * alpha / gamma + e_ball),
        sublinear_radius=e_ball)


def stepsize_constant_max(b: TheoryBounds) -> float:
    return max_constant_step(b.kappa_q, b.kappa_f, b.q_min, b.mu)


def schedule_decaying(b: TheoryBounds, theta, k) -> float:
    """Guaranteed-sublinear step at iteration k; theta must exceed 4/gamma."""
    if theta <= b.theta_min:
        raise ConfigError(f"theta must exceed {b.theta_min:.6g}, got {theta}")
    xi = decaying_xi(b.kappa_q, b.kappa_f, b.q_min, b.mu, theta)
    return theta / (k + xi)


def error_radii(b: TheoryBounds, alpha):
    """(linear, sublinear) error-ball radii for a constant step alpha."""
    return 4.0 * (b.P1_c * alpha / b.gamma + b.E), b.E


def radius_at_byzantine_ratio(n, alpha, gamma, phi, n_reliable, r_a):
    """Error-ball radius when the Byzantine count is r_a times the reliable
    count: 4n(4a(4 + r_a^2)/gamma + (r_a/gamma)^2) phi^2 |R|^3."""
    return 4.0 * n * (4.0 * alpha * (4.0 + r_a ** 2) / gamma
                      + (r_a / gamma) ** 2) * phi ** 2 * n_reliable ** 3


@dataclass
class MetricsRow:
    epoch: float
    iteration: int
    optimal_gap: float
    consensus_error: float
    test_accuracy: float | None
    wall_time: float

    def as_csv(self):
        acc = "" if self.test_accuracy is None else repr(self.test_accuracy)
        return (f"{self.epoch!r},{self.iteration},{self.optimal_gap!r},"
                f"{self.consensus_error!r},{acc},{self.wall_time!r}")


CSV_HEADER = "epoch,iteration,optimal_gap,consensus_error,test_accuracy,wall_time"


@dataclass
class RunConfig:
    topology: Topology
    problem: ProblemInstance
    estimator: str = "saga"               # saga | lsvrg | sgd | full
    aggregator: AggregatorKind = field(default_factory=lambda: AggregatorKind("penalty"))
    attack: AttackSpec = field(default_factory=AttackSpec)
    schedule: Schedule = field(default_factory=lambda: Schedule("auto_constant"))
    phi: float = 1.0
    a_norm: int = 1
    iterations: int | None = None
    epochs: float | None = None
    record_every: int = 1
    master_seed: int = 0
    init_seed: int | None = None          # defaults to master_seed
    init: str = "normal"                  # normal | zeros
    init_scale: float = 1.0
    lsvrg_prob_range: tuple | None = None  # defaults to [m/Q/2, m/Q]
    oracle_tol: float = 1e-10
    x_star: np.ndarray | None = None
    test_batch: objective.SampleBatch | None = None
    keep_trajectory: bool = False
    check_influence_cap: bool = False


@dataclass
class RunResult:
    rows: list
    x0: np.ndarray
    final_states: np.ndarray
    x_star: np.ndarray
    bounds: TheoryBounds | None
    diverged: bool = False
    diverged_at: int | None = None
    evals: int = 0
    epochs: float = 0.0
    dist_sq: list = field(default_factory=list)   # sum_i ||x_i - x*||^2 per recorded row
    trajectory: list = field(default_factory=list)
    influence_gap: float = -np.inf
    warnings: list = field(default_factory=list)
    alpha0: float = 0.0
    resolved_schedule: dict = field(default_factory=dict)


def validate_config(cfg: RunConfig):
    t = cfg.topology
    if not reliable_connected(t):
        raise ConfigError("reliable subgraph must be bidirectionally connected "
                          "(every run requires a connected reliable network)")
    if len(t.reliable) < 2 and t.m != 1:
        raise ConfigError("at least two reliable agents are required "
                          "(single-agent networks are the only exception)")
    if t.m != cfg.problem.m:
        raise ConfigError(f"topology has {t.m} agents but problem has {cfg.problem.m} shards")
    if cfg.estimator not in ("saga", "lsvrg", "sgd", "full"):
        raise ConfigError(f"unknown estimator {cfg.estimator!r}")
    if cfg.iterations is None and cfg.epochs is None:
        raise ConfigError("either iterations or epochs must be set")
    if cfg.iterations is not None and cfg.iterations < 1:
        raise ConfigError("iterations must be >= 1")
    if cfg.epochs is not None and cfg.epochs < 1:
        raise ConfigError("epochs must be >= 1")
    if cfg.record_every < 1:
        raise ConfigError("record_every must be >= 1")
    if cfg.aggregator.kind == "penalty":
        if cfg.phi is None or cfg.phi <= 0:
            raise ConfigError("penalty algorithm needs phi > 0")
        if cfg.a_norm not in (1, 2):
            raise ConfigError("a_norm must be 1 or 2")
    else:
        for i in sorted(t.reliable):
            cfg.aggregator.validate_degree(t.degree(i))
    if cfg.attack.kind == "zero_sum":
        attacks.validate(cfg.attack, t)


def initial_states(cfg: RunConfig):
    """Per-agent starting points, derived from (init_seed, agent, INIT)."""
    seed = cfg.master_seed if cfg.init_seed is None else cfg.init_seed
    n = cfg.problem.n
    x0 = np.zeros((cfg.topology.m, n))
    if cfg.init == "normal":
        for i in range(cfg.topology.m):
            x0[i] = cfg.init_scale * rngstream.stream(seed, i, rngstream.INIT).standard_normal(n)
    elif cfg.init != "zeros":
        raise ConfigError(f"unknown init kind {cfg.init!r}")
    return x0


def lsvrg_probs(cfg: RunConfig):
    """Heterogeneous trigger probabilities, one uniform draw per agent from
    [m/Q/2, m/Q] (or the configured range)."""
    p = cfg.problem
    q_total = sum(p.q(i) for i in range(p.m))
    lo, hi = cfg.lsvrg_prob_range or (p.m / q_total / 2.0, p.m / q_total)
    probs = {}
    for i in range(p.m):
        u = float(rngstream.stream(cfg.master_seed, i, rngstream.TRIGGER).random())
        probs[i] = min(lo + u * (hi - lo), 1.0)
    return probs


def metrics(states, p: ProblemInstance, x_star, reliable, test=None,
            iteration=0, epoch=0.0, wall_time=0.0, star_values=None) -> MetricsRow:
    """Per-epoch record: averaged composite optimal gap over reliable
    agents, mean squared deviation from the reliable average, and test
    accuracy of the averaged model (softmax only)."""
    rel = sorted(reliable)
    if star_values is None:
        star_values = {i: objective.f_value(p, i, x_star) + objective.g_value(p, x_star)
                       for i in rel}
    gap = 0.0
    for i in rel:
        gap += objective.f_value(p, i, states[i]) + objective.g_value(p, states[i]) \
            - star_values[i]
    gap /= len(rel)
    xbar = states[rel].mean(axis=0)
    consensus = float(np.mean([np.sum((states[i] - xbar) ** 2) for i in rel]))
    acc = None
    if test is not None and p.kind == "softmax_regression":
        acc = objective.test_accuracy(p, xbar, test)
    return MetricsRow(epoch=epoch, iteration=iteration, optimal_gap=float(gap),
                      consensus_error=consensus, test_accuracy=acc, wall_time=wall_time)


def _resolve_alpha(cfg: RunConfig, bounds: TheoryBounds | None, warnings_out):
    """Returns alpha_of(k) plus a description of the resolved schedule."""
    sch = cfg.schedule
    if sch.kind == "constant":
        a = sch.alpha
        return (lambda k: a), {"kind": "constant", "alpha": a}
    if sch.kind == "decaying":
        th, xi = sch.theta, sch.xi
        return (lambda k: th / (k + xi)), {"kind": "decaying", "theta": th, "xi": xi}
    if bounds is None:
        raise ConfigError("auto schedules need computable curvature bounds")
    if sch.kind == "auto_constant":
        a = bounds.alpha_max_linear
        if sch.alpha is not None:
            if sch.alpha > a:
                warnings_out.append(
                    f"requested alpha {sch.alpha:.6g} exceeds the guaranteed-linear "
                    f"bound {a:.6g}; proceeding with the bound value")
            else:
                a = sch.alpha
        return (lambda k: a), {"kind": "auto_constant", "alpha": a}
    theta = sch.theta if sch.theta is not None else 2.0 * bounds.theta_min
    if theta <= bounds.theta_min:
        raise ConfigError(f"auto_decaying theta must exceed {bounds.theta_min:.6g}")
    xi = decaying_xi(bounds.kappa_q, bounds.kappa_f, bounds.q_min, bounds.mu, theta)
    return (lambda k: theta / (k + xi)), {"kind": "auto_decaying", "theta": theta, "xi": xi}


def run(cfg: RunConfig) -> RunResult:
    """Execute the configured simulation; see the module docstring for the
    round semantics and determinism contract."""
    validate_config(cfg)
    t = cfg.topology
    p = cfg.problem
    rel = sorted(t.reliable)
    rel_set = t.reliable
    m, n = t.m, p.n
    start = time.perf_counter()

    x_star = cfg.x_star
    if x_star is None:
        x_star = objective.solve_centralized(p, rel, tol=cfg.oracle_tol)
    star_values = {i: objective.f_value(p, i, x_star) + objective.g_value(p, x_star)
                   for i in rel}
    star_stack = np.tile(x_star, (len(rel), 1))

    bounds = None
    warnings_out = []
    if cfg.phi is not None and cfg.phi > 0:
        theta_hint = cfg.schedule.theta if cfg.schedule.kind in ("decaying", "auto_decaying") else None
        try:
            bounds = compute_bounds(t, p, cfg.phi, theta=theta_hint)
        except ConfigError:
            bounds = None
    alpha_of, resolved_schedule = _resolve_alpha(cfg, bounds, warnings_out)

    x0 = initial_states(cfg)
    X = x0.copy()

    probs = lsvrg_probs(cfg) if cfg.estimator == "lsvrg" else {}
    ests = {}
    for i in range(m):
        ests[i] = estimators.AgentEstimator(
            cfg.estimator, p, i, X[i],
            sample_rng=rngstream.stream(cfg.master_seed, i, rngstream.SAMPLE),
            trigger_rng=rngstream.stream(cfg.master_seed, i, rngstream.TRIGGER),
            trigger_prob=probs.get(i))

    # neighbor/inbox structure, fixed for the whole run
    silent = cfg.attack.kind == "none"
    senders = {}
    for i in range(m):
        nbs = t.neighbors(i)
        if i in rel_set and silent:
            nbs = [j for j in nbs if j in rel_set]
        senders[i] = nbs
    bufs = {i: np.empty((len(senders[i]), n)) for i in range(m)}
    byz_slots = {i: [(idx, j) for idx, j in enumerate(senders[i]) if j in t.byzantine]
                 for i in rel}

    # Byzantine agents evolve honestly as bookkeeping; if a screening rule is
    # infeasible at their degree their state simply freezes (it is never
    # observed by metrics or attacks).
    frozen = set()
    if cfg.aggregator.kind not in ("penalty", "average"):
        for i in t.byzantine:
            try:
                cfg.aggregator.validate_degree(len(senders[i]))
            except Exception:
                frozen.add(i)

    q_rel = sum(p.q(i) for i in rel)

    def rel_evals():
        return sum(ests[i].evals for i in rel)

    def current_epoch():
        return rel_evals() / q_rel

    penalty_mode = cfg.aggregator.kind == "penalty"
    rows, dist_sq, trajectory = [], [], []
    influence_gap = -np.inf
    diverged = False
    diverged_at = None

    def record(k):
        row = metrics(X, p, x_star, rel_set, test=cfg.test_batch, iteration=k,
                      epoch=current_epoch(), wall_time=time.perf_counter() - start,
                      star_values=star_values)
        rows.append(row)
        dist_sq.append(float(np.sum((X[rel] - star_stack) ** 2)))

    record(0)
    if cfg.keep_trajectory:
        trajectory.append(X.copy())

    k = 0
    X_next = np.empty_like(X)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        while True:
            if cfg.iterations is not None and k >= cfg.iterations:
                break
            if cfg.iterations is None and current_epoch() >= cfg.epochs:
                break
            alpha = alpha_of(k)
            snap = X  # states are committed simultaneously below, so X is the k-snapshot
            for i in range(m):
                if i in frozen:
                    X_next[i] = snap[i]
                    continue
                buf = bufs[i]
                if len(senders[i]):
                    np.take(snap, senders[i], axis=0, out=buf)
                if i in rel_set and not silent:
                    for idx, b in byz_slots[i]:
                        buf[idx] = attacks.forge(cfg.attack, b, i, k, snap, t)
                r = ests[i].step(snap[i])
                if penalty_mode:
                    pen = kernels.penalty_direction_sum(snap[i], buf, cfg.a_norm)
                    if cfg.check_influence_cap and i in rel_set and cfg.a_norm == 1:
                        cap = alpha * cfg.phi * len(senders[i])
                        influence_gap = max(influence_gap,
                                            float(np.max(np.abs(alpha * cfg.phi * pen))) - cap
                                            if len(senders[i]) else -np.inf)
                    x_bar = snap[i] - alpha * r - alpha * cfg.phi * pen
                else:
                    inbox = list(zip(senders[i], buf))
                    if inbox:
                        y = aggregate(cfg.aggregator, snap[i], inbox,
                                      weights=t.weights[i], self_id=i,
                                      self_weight=t.weights[i, i])
                    else:
                        y = snap[i]
                    x_bar = y - alpha * r
                X_next[i] = kernels.soft_threshold(x_bar, alpha * p.beta2)
            X, X_next = X_next, X
            k += 1
            if not np.isfinite(X[rel]).all():
                diverged = True
                diverged_at = k
                break
            if cfg.keep_trajectory:
                trajectory.append(X.copy())
            if k % cfg.record_every == 0:
                record(k)

    if not rows or rows[-1].iteration != k:
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            record(k)  # on divergence this row carries the non-finite gap

    return RunResult(rows=rows, x0=x0, final_states=X.copy(), x_star=x_star,
                     bounds=bounds, diverged=diverged, diverged_at=diverged_at,
                     evals=rel_evals(), epochs=current_epoch(), dist_sq=dist_sq,
                     trajectory=trajectory, influence_gap=influence_gap,
                     warnings=warnings_out, alpha0=alpha_of(0),
                     resolved_schedule=resolved_schedule)

"""Strict flat key/value run configuration.

INI sections with typed keys; unknown sections or keys are rejected so a
typo cannot silently fall back to a default.  ``resolve`` fills defaults
and returns a plain dict (what meta.json records); ``build`` turns a
resolved dict into live engine objects.
"""

from __future__ import annotations

import configparser
from pathlib import Path

from byzopt import mnist, objective, topology
from byzopt.aggregators import AggregatorKind
from byzopt.attacks import AttackSpec
from byzopt.engine import ConfigError, RunConfig, Schedule

_REQUIRED = object()

# section -> key -> (type, default); _REQUIRED keys must appear in the file
SCHEMA = {
    "topology": {
        "file": (str, ""),
        "m": (int, 0),
        "edge_prob": (float, 0.5),
        "byz_count": (int, 0),
        "seed": (int, 0),
    },
    "problem": {
        "kind": (str, "synthetic_lasso"),
        "n": (int, 10),
        "q": (int, 20),
        "seed": (int, 0),
        "beta1": (float, 0.5),
        "beta2": (float, 0.02),
        "noise_std": (float, 0.1),
        "row_scale": (float, 0.5),
        "x_true_scale": (float, 1.0),
        "data_dir": (str, ""),
    },
    "algorithm": {
        "aggregator": (str, "penalty"),
        "estimator": (str, "saga"),
        "trim_f": (int, 0),
        "phi": (float, 1.0),
        "a_norm": (int, 1),
        "lsvrg_prob_min": (float, 0.0),
        "lsvrg_prob_max": (float, 0.0),
    },
    "run": {
        "schedule": (str, "auto_constant"),
        "alpha": (float, 0.0),
        "theta": (float, 0.0),
        "xi": (float, 0.0),
        "iterations": (int, 0),
        "epochs": (float, 0.0),
        "record_every": (int, 1),
        "master_seed": (int, 0),
        "init": (str, "normal"),
        "init_scale": (float, 1.0),
        "init_seed": (int, -1),
        "oracle_tol": (float, 1e-10),
    },
    "attack": {
        "kind": (str, "none"),
        "gaussian_std": (float, 30.0),
        "same_value_magnitude": (float, 1000.0),
        "sign_flip_scale": (float, 1.5),
        "seed": (int, 0),
    },
}


def _convert(section, key, raw):
    typ, _ = SCHEMA[section][key]
    try:
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        return str(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {section}.{key}: {raw!r}") from exc


def resolve(path=None, overrides=(), text=None) -> dict:
    """Parse + validate a config file into a fully defaulted dict.

    ``overrides`` are "section.key=value" strings applied after the file.
    """
    parser = configparser.ConfigParser()
    try:
        if text is not None:
            parser.read_string(text)
        else:
            read = parser.read(path)
            if not read:
                raise ConfigError(f"config file not found: {path}")
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    cfg = {sec: {k: d for k, (_, d) in keys.items()} for sec, keys in SCHEMA.items()}
    for sec in parser.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown config section [{sec}]")
        for key, raw in parser.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown config key {sec}.{key}")
            cfg[sec][key] = _convert(sec, key, raw)
    for ov in overrides:
        if "=" not in ov or "." not in ov.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, got {ov!r}")
        dotted, raw = ov.split("=", 1)
        sec, key = dotted.strip().split(".", 1)
        if sec not in SCHEMA or key not in SCHEMA[sec]:
            raise ConfigError(f"unknown config key {sec}.{key}")
        cfg[sec][key] = _convert(sec, key, raw.strip())
    _validate(cfg)
    return cfg


def _validate(cfg):
    topo = cfg["topology"]
    if not topo["file"] and topo["m"] < 1:
        raise ConfigError("topology needs either file or m >= 1")
    if cfg["run"]["iterations"] <= 0 and cfg["run"]["epochs"] <= 0:
        raise ConfigError("run needs iterations or epochs > 0")
    if cfg["problem"]["kind"] not in ("synthetic_lasso", "mnist_softmax"):
        raise ConfigError(f"unknown problem kind {cfg['problem']['kind']!r}")


def build(cfg: dict):
    """Live objects from a resolved dict: (RunConfig, test_batch or None)."""
    tsec = cfg["topology"]
    if tsec["file"]:
        topo = topology.load_topology(tsec["file"])
    else:
        topo = topology.gen_erdos_renyi(tsec["m"], tsec["edge_prob"],
                                        tsec["byz_count"], tsec["seed"])
    psec = cfg["problem"]
    test = None
    if psec["kind"] == "synthetic_lasso":
        problem = objective.make_synthetic_lasso(
            topo.m, psec["n"], psec["q"], psec["seed"], beta1=psec["beta1"],
            beta2=psec["beta2"], noise_std=psec["noise_std"],
            row_scale=psec["row_scale"], x_true_scale=psec["x_true_scale"])
    else:
        problem, test = mnist.load_problem(
            topo.m, beta1=psec["beta1"] or None, beta2=psec["beta2"] or None,
            dir_override=psec["data_dir"] or None)
    asec = cfg["algorithm"]
    agg = AggregatorKind(asec["aggregator"], trim_f=asec["trim_f"])
    rsec = cfg["run"]
    schedule = Schedule(rsec["schedule"],
                        alpha=rsec["alpha"] or None,
                        theta=rsec["theta"] or None,
                        xi=rsec["xi"] or None)
    atk = cfg["attack"]
    attack = AttackSpec(kind=atk["kind"], gaussian_std=atk["gaussian_std"],
                        same_value_magnitude=atk["same_value_magnitude"],
                        sign_flip_scale=atk["sign_flip_scale"], seed=atk["seed"])
    prob_range = None
    if asec["lsvrg_prob_min"] > 0 and asec["lsvrg_prob_max"] > 0:
        prob_range = (asec["lsvrg_prob_min"], asec["lsvrg_prob_max"])
    run_cfg = RunConfig(
        topology=topo, problem=problem, estimator=asec["estimator"], aggregator=agg,
        attack=attack, schedule=schedule, phi=asec["phi"], a_norm=asec["a_norm"],
        iterations=rsec["iterations"] or None, epochs=rsec["epochs"] or None,
        record_every=rsec["record_every"], master_seed=rsec["master_seed"],
        init_seed=None if rsec["init_seed"] < 0 else rsec["init_seed"],
        init=rsec["init"], init_scale=rsec["init_scale"],
        lsvrg_prob_range=prob_range, oracle_tol=rsec["oracle_tol"],
        test_batch=test)
    return run_cfg


def load(path=None, overrides=(), text=None):
    cfg = resolve(path=path, overrides=overrides, text=text)
    return build(cfg), cfg

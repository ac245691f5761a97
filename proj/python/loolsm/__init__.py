"""Bermudan option pricing by least-squares Monte Carlo with leave-one-out regression."""

import csv
import io

from ._loolsm import *  # noqa: F401,F403
from ._loolsm import (
    Experiment,
    ExperimentConfig,
    Mode,
    european_mc_price,
    apply_control_variate,
    basis_family,
    generate_paths,
    parse_payoff_kind,
    policy_seed as _policy_seed,
    price_backward,
    price_two_pass,
    reference_values,
)

__all__ = [name for name in dir() if not name.startswith("_")]


def price(case="put", mode="LOOLSM", key=100.0, paths=40000, basis_m=None, seed=20240601,
          control_variate=False, threads=1):
    """Price one of the shipped cases with its default model parameters.

    `key` is the strike for put and basket and the common initial spot for bestof.
    """
    kind = parse_payoff_kind(case)
    mode = getattr(Mode, mode.upper().replace("-", "")) if isinstance(mode, str) else mode
    cfg = ExperimentConfig.defaults(kind, Experiment.comparison)
    cfg.keys = [float(key)]
    cfg.paths = paths
    if basis_m is not None:
        cfg.basis_m = [basis_m]
    cfg.validate(Experiment.comparison)
    model = cfg.model_for(key)
    payoff = cfg.payoff_for(key)
    schedule = cfg.schedule()
    basis = basis_family(kind, cfg.basis_m[0])
    valuation = generate_paths(model, schedule, paths, seed, True, threads)
    if mode == Mode.EUROPEAN:
        result = european_mc_price(valuation, payoff, cfg.rate)
    elif mode == Mode.LSM2:
        policy = generate_paths(model, schedule, paths, _policy_seed(seed, kind, 0), True, threads)
        result = price_two_pass(policy, valuation, payoff, basis, cfg.rate)
    else:
        result = price_backward(valuation, payoff, basis, cfg.rate, mode, threads)[0]
    if control_variate:
        _, euro_exact = reference_values(cfg, key)
        result = apply_control_variate(result, euro_exact,
                                       european_mc_price(valuation, payoff, cfg.rate))
    return result


def report_rows(report):
    """Rows of an ExperimentReport as dicts; empty fields become None."""
    rows = []
    for rec in csv.DictReader(io.StringIO(report.to_csv())):
        row = {}
        for k, v in rec.items():
            if k in ("case", "estimator"):
                row[k] = v
            elif v == "":
                row[k] = None
            elif k in ("M", "N", "n_mc", "flips_total", "min_rank"):
                row[k] = int(v)
            else:
                row[k] = float(v)
        rows.append(row)
    return rows

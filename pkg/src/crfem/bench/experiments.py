"""Drivers for the convergence tables and the adaptive-refinement figure."""

import numpy as np

from ..afem import AfemConfig, run_afem, run_uniform
from ..nfun import PDelta
from ..solver import NewtonConfig
from .cases import make_case
from .eoc import eoc, loglog_slope

TABLE_COLUMNS = ("k", "p", "e_F", "eoc_F", "e_Fstar", "eoc_Fstar")


def run_table_experiment(p_list, levels=7, delta=1e-4, case="square_alpha", newton=None,
                         keep_fields=False, log=None):
    """Uniform refinement for every ``p``; returns ``{p: [AfemRecord, ...]}``.

    ``levels`` counts meshes, so ``levels=7`` gives ``k = 0..6``.
    """
    if levels < 2:
        raise ValueError("need at least two levels for an EOC")
    out = {}
    for p in p_list:
        params = PDelta(float(p), delta)
        cfg = AfemConfig(params, make_case(case, params), newton=newton or NewtonConfig(),
                         keep_fields=keep_fields)
        out[float(p)] = run_uniform(cfg, levels=levels)
        if log:
            log(f"p={p}: {levels} uniform levels done")
    return out


def table_rows(results):
    """Long-format rows ``k, p, e_F, eoc_F, e_Fstar, eoc_Fstar``."""
    rows = []
    for p, recs in results.items():
        h = [r.h for r in recs]
        eF = [r.e_F for r in recs]
        eS = [r.e_Fstar for r in recs]
        oF = np.concatenate([[np.nan], eoc(eF, h)])
        oS = np.concatenate([[np.nan], eoc(eS, h)])
        for k, r in enumerate(recs):
            rows.append({"k": k, "p": p, "e_F": eF[k], "eoc_F": float(oF[k]),
                         "e_Fstar": eS[k], "eoc_Fstar": float(oS[k])})
    return rows


def run_figure_experiment(p_list, delta=1e-5, theta=0.5, levels=20, uniform_levels=5,
                          case="lshape_sigma", newton=None, keep_fields=False, log=None):
    """Adaptive and uniform runs; returns ``{p: {"adaptive": [...], "uniform": [...]}}``."""
    out = {}
    for p in p_list:
        params = PDelta(float(p), delta)
        cfg = AfemConfig(params, make_case(case, params), theta=theta, max_levels=levels,
                         newton=newton or NewtonConfig(), keep_fields=keep_fields)
        out[float(p)] = {"adaptive": run_afem(cfg),
                         "uniform": run_uniform(cfg, levels=uniform_levels) if uniform_levels else []}
        if log:
            log(f"p={p}: adaptive and uniform runs done")
    return out


def figure_slopes(runs, last=8):
    """Fitted slopes: adaptive ``eta^2`` over the last ``last`` levels, uniform
    ``rho^2`` and ``eta^2`` over levels ``1..``."""
    ad, un = runs["adaptive"], runs["uniform"]
    tail = ad[-last:]
    res = {"adaptive_eta2": loglog_slope([r.n_dofs for r in tail], [r.eta2 for r in tail]),
           "adaptive_rho2": loglog_slope([r.n_dofs for r in tail], [r.rho2 for r in tail])}
    if len(un) >= 3:
        res["uniform_rho2"] = loglog_slope([r.n_dofs for r in un[1:]], [r.rho2 for r in un[1:]])
        res["uniform_eta2"] = loglog_slope([r.n_dofs for r in un[1:]], [r.eta2 for r in un[1:]])
    return res

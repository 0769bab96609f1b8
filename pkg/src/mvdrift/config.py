"""YAML configuration schema and constructors.

A config file holds up to four blocks; every CLI subcommand reads the ones
it needs (see the README for the full reference):

    model:      j1, j, a, theta, beta {family, params}, lambda (optional)
    sim:        n, t, dt, mu0 {family, variance}, seed, stream
    grid:       half_width (optional), n_points
    estimator:  mode (oracle|manual), m, epsilon, n_eff, weight,
                symmetric_window, and for manual mode h0 h1 delta u omega z_max;
                optional plugin block for the plug-in threshold rule
    plan:       n_list, t_list, dt, replications, base_seed
"""

from __future__ import annotations

import yaml

from .grids import GridFunction
from .invariant import InvariantSolution, default_half_width, solve_invariant_full
from .kde import EstimatorConfig, default_bandwidths, default_delta, effective_sample_size
from .model import AlphaCoefficients, BetaSpec, DriftSpec
from .pipeline import default_omega, default_window, oracle_estimator_config
from .simulator import Mu0, SimConfig
from .harness import ExperimentPlan

__all__ = [
    "load_config",
    "beta_from_config",
    "drift_spec_from_config",
    "sim_config_from_config",
    "grid_shape_from_config",
    "estimator_from_config",
    "plugin_delta_from_config",
    "plan_from_config",
]


def load_config(path) -> dict:
    with open(path) as fh:
        cfg = yaml.safe_load(fh)
    if not isinstance(cfg, dict):
        raise ValueError(f"{path}: config must be a mapping")
    return cfg


def beta_from_config(block) -> BetaSpec:
    if block is None:
        return BetaSpec.zero()
    family = block.get("family", "zero")
    params = block.get("params") or {}
    if family == "zero":
        return BetaSpec.zero()
    if family == "cos-bump":
        return BetaSpec.cos_bump(float(params["b"]))
    if family == "sinc-power":
        return BetaSpec.sinc_power(int(params["k"]))
    if family == "tabulated":
        if "file" in params:
            table = GridFunction.load(params["file"])
            return BetaSpec.tabulated(table.half_width, table.values)
        return BetaSpec.tabulated(float(params["half_width"]),
                                  [float(v) for v in params["values"]])
    raise ValueError(f"unknown beta family {family!r}")


def drift_spec_from_config(cfg: dict) -> DriftSpec:
    block = cfg.get("model")
    if block is None:
        raise ValueError("config is missing the model block")
    return DriftSpec(
        j1=int(block["j1"]),
        j=int(block["j"]),
        a=[float(v) for v in block["a"]],
        theta=[float(v) for v in block.get("theta") or []],
        beta=beta_from_config(block.get("beta")),
        lam=float(block["lambda"]) if block.get("lambda") is not None else None,
    )


def sim_config_from_config(cfg: dict, **overrides) -> SimConfig:
    block = dict(cfg.get("sim") or {})
    block.update({k: v for k, v in overrides.items() if v is not None})
    mu0_block = block.get("mu0")
    if isinstance(mu0_block, dict):
        mu0 = Mu0(family=mu0_block.get("family", "gaussian"),
                  variance=float(mu0_block.get("variance", 1.0)))
    else:
        mu0 = Mu0()
    return SimConfig(n=int(block["n"]), t=float(block["t"]),
                     dt=float(block.get("dt", 0.01)), mu0=mu0,
                     seed=int(block.get("seed", 0)),
                     stream=int(block.get("stream", 0)))


def grid_shape_from_config(cfg: dict, spec: DriftSpec | None = None):
    block = cfg.get("grid") or {}
    half_width = block.get("half_width")
    if half_width is None and spec is not None:
        half_width = default_half_width(spec)
    n_points = int(block.get("n_points", 4097))
    return (float(half_width) if half_width is not None else None, n_points)


def plugin_delta_from_config(cfg: dict, u: float) -> float:
    """Threshold from user-supplied plug-in values of alpha, Z and sup|beta|."""
    est = cfg.get("estimator") or {}
    plug = est.get("plugin")
    if plug is None:
        raise ValueError("estimator.plugin block is required for plug-in thresholds")
    alpha = AlphaCoefficients(j1=int(plug["j1"]),
                              alpha=[float(v) for v in plug["alpha"]],
                              alpha0=float(plug["alpha0"]))
    return default_delta(alpha, float(plug["z"]), float(plug["beta_sup"]), u)


def estimator_from_config(cfg: dict, spec: DriftSpec,
                          n_samples: int | None = None,
                          solution: InvariantSolution | None = None) -> EstimatorConfig:
    """Build an EstimatorConfig from a config mapping.

    Oracle mode solves the invariant density (unless one is supplied) and
    derives every threshold from it; manual mode reads them verbatim.
    """
    est = dict(cfg.get("estimator") or {})
    mode = est.get("mode", "oracle")
    m = int(est.get("m", 2))
    epsilon = float(est.get("epsilon", 0.25))
    common = {
        "weight_kind": est.get("weight", "indicator"),
        "symmetric_window": bool(est.get("symmetric_window", False)),
    }
    half_width, n_points = grid_shape_from_config(cfg, spec)
    if mode == "oracle":
        if solution is None:
            solution = solve_invariant_full(spec, half_width=half_width,
                                            n_points=n_points)
        n_eff = est.get("n_eff")
        if n_eff is None:
            if n_samples is None:
                raise ValueError("oracle mode needs estimator.n_eff or a sample count")
            n_eff = float(n_samples)
        return oracle_estimator_config(spec, solution, float(n_eff), m=m,
                                       epsilon=epsilon, **common)
    if mode == "manual":
        n_eff = est.get("n_eff")
        return EstimatorConfig(
            m=m,
            h0=float(est["h0"]), h1=float(est["h1"]),
            delta=float(est["delta"]), u=float(est["u"]),
            epsilon=epsilon, omega=float(est["omega"]),
            z_max=float(est["z_max"]),
            half_width=half_width, n_points=n_points,
            n_eff=float(n_eff) if n_eff is not None else None,
            **common)
    raise ValueError(f"unknown estimator mode {mode!r}")


def plan_from_config(cfg: dict) -> ExperimentPlan:
    block = cfg.get("plan")
    if block is None:
        raise ValueError("config is missing the plan block")
    spec = drift_spec_from_config(cfg)
    half_width, n_points = grid_shape_from_config(cfg, spec)
    estimator = None
    if (cfg.get("estimator") or {}).get("mode", "oracle") == "manual":
        estimator = estimator_from_config(cfg, spec, n_samples=1)
    mu0 = None
    mu0_block = block.get("mu0")
    if isinstance(mu0_block, dict):
        mu0 = Mu0(family=mu0_block.get("family", "gaussian"),
                  variance=float(mu0_block.get("variance", 1.0)))
    return ExperimentPlan(
        spec=spec,
        n_list=[int(v) for v in block["n_list"]],
        t_list=[float(v) for v in block["t_list"]],
        dt=float(block.get("dt", 0.01)),
        replications=int(block.get("replications", 1)),
        estimator=estimator,
        base_seed=int(block.get("base_seed", 0)),
        grid_n_points=n_points,
        grid_half_width=half_width,
        mu0=mu0,
    )

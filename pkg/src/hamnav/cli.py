"""Command-line surface: dataset generation, training, simulation, plots, batch eval.

Configuration comes from an optional YAML file validated against a fixed
schema (unknown keys are rejected); command-line flags override file values.
Exit codes: 0 success, 2 configuration error, 3 training divergence,
4 unsafe or timed-out run. The output directory can be forced with the
HAMNAV_OUTPUT_DIR environment variable.
"""

from __future__ import annotations

import argparse
import copy
import os
import sys
from pathlib import Path as FilePath

import numpy as np
import yaml

from .control import Gains, default_gains
from .learning import (
    TrainConfig,
    TrainingDiverged,
    LearnedModelView,
    generate_dataset,
    load_dataset,
    load_model,
    save_dataset,
    save_model,
    train,
)
from .navigator import (
    Scenario,
    ScenarioError,
    load_telemetry,
    run_scenario,
    save_telemetry,
    save_verdict,
    telemetry_column,
)
from .rigid_body import AnalyticModel, hexarotor_params
from .scenarios import SCENARIOS
from .svgplot import Axes, data_limits
from .world import Box, Sphere, load_world

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_UNSAFE = 4

OUTPUT_DIR_ENV = "HAMNAV_OUTPUT_DIR"

DEFAULT_CONFIG = {
    "output_dir": ".",
    "dataset": {
        "trajectories": 432,
        "horizon": 5,
        "seed": 0,
        "sample_dt": 0.05,
    },
    "training": {
        "iterations": 5000,
        "learning_rate": 1e-3,
        "batch_size": None,
        "seed": 0,
        "substeps": 1,
    },
    "scenario": {
        "name": "corridor",
        "world_file": None,
        "start": None,
        "goal": None,
        "grid_lo": None,
        "grid_hi": None,
        "dt": None,
        "duration": None,
        "replan_period": None,
        "governor_gain": None,
        "eps": None,
        "beta": None,
        "goal_tolerance": None,
        "seed": None,
    },
    "gains": {
        "kp": None,
        "kR": None,
        "kv": None,
        "kw": None,
    },
}


class ConfigError(ValueError):
    pass


def _merge(defaults: dict, user: dict, prefix: str = "") -> dict:
    out = copy.deepcopy(defaults)
    for key, value in user.items():
        if key not in defaults:
            raise ConfigError(f"unknown config key: {prefix}{key}")
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config section {prefix}{key} must be a mapping")
            out[key] = _merge(defaults[key], value, prefix=f"{prefix}{key}.")
        else:
            out[key] = value
    return out


def load_config(path: str | None) -> dict:
    if path is None:
        return copy.deepcopy(DEFAULT_CONFIG)
    try:
        with open(path) as fh:
            user = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config file: {exc}") from exc
    if not isinstance(user, dict):
        raise ConfigError("config root must be a mapping")
    return _merge(DEFAULT_CONFIG, user)


def dump_config(cfg: dict, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(cfg, fh, sort_keys=True, default_flow_style=None)


def _output_dir(cfg: dict) -> FilePath:
    out = os.environ.get(OUTPUT_DIR_ENV) or cfg["output_dir"]
    path = FilePath(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _set_if(cfg_section: dict, key: str, value) -> None:
    if value is not None:
        cfg_section[key] = value


def build_gains(cfg: dict) -> Gains:
    params = hexarotor_params()
    gains = default_gains(params)
    g = cfg["gains"]
    kp = g["kp"] if g["kp"] is not None else gains.kp
    kR = g["kR"] if g["kR"] is not None else np.diag(gains.KR)
    kv = g["kv"] if g["kv"] is not None else gains.kv
    kw = g["kw"] if g["kw"] is not None else np.diag(gains.Kw)
    return Gains(kp=kp, kR=kR, kv=kv, kw=kw)


def build_scenario(cfg: dict) -> Scenario:
    sc = cfg["scenario"]
    if sc["world_file"] is not None:
        required = ("start", "goal", "grid_lo", "grid_hi")
        if any(sc[k] is None for k in required):
            raise ConfigError("scenario with world_file needs start, goal, grid_lo, grid_hi")
        scenario = Scenario(
            obstacles=load_world(sc["world_file"]),
            start=np.array(sc["start"], dtype=float),
            goal=np.array(sc["goal"], dtype=float),
            grid_lo=np.array(sc["grid_lo"], dtype=float),
            grid_hi=np.array(sc["grid_hi"], dtype=float),
        )
    else:
        name = sc["name"]
        if name not in SCENARIOS:
            raise ConfigError(f"unknown scenario name: {name!r} (choose from {sorted(SCENARIOS)})")
        scenario = SCENARIOS[name]()
        for key in ("start", "goal", "grid_lo", "grid_hi"):
            if sc[key] is not None:
                setattr(scenario, key, np.array(sc[key], dtype=float))
    for key in ("dt", "duration", "replan_period", "governor_gain", "eps", "beta",
                "goal_tolerance", "seed"):
        if sc[key] is not None:
            setattr(scenario, key, sc[key])
    scenario.gains = build_gains(cfg)
    return scenario


def _load_model_view(spec: str):
    """A model file path, or the literal 'ground-truth' for the analytic model."""
    if spec == "ground-truth":
        return AnalyticModel(hexarotor_params())
    with np.load(spec) as data:
        if "kind" in data and str(data["kind"]) == "analytic":
            return AnalyticModel(hexarotor_params())
    return LearnedModelView(load_model(spec))


def save_analytic_model(path) -> None:
    """Marker file selecting the analytic constants instead of trained networks."""
    np.savez(path, kind="analytic", version=np.array([1]))


# -- subcommands ---------------------------------------------------------------

def cmd_generate_data(args) -> int:
    cfg = load_config(args.config)
    ds = cfg["dataset"]
    _set_if(ds, "trajectories", args.trajectories)
    _set_if(ds, "horizon", args.horizon)
    _set_if(ds, "seed", args.seed)
    if args.dump_config:
        dump_config(cfg, args.dump_config)
    out_dir = _output_dir(cfg)
    out = FilePath(args.out) if args.out else out_dir / "dataset.txt"
    data = generate_dataset(
        hexarotor_params(), n_windows=ds["trajectories"], horizon=ds["horizon"],
        seed=ds["seed"], sample_dt=ds["sample_dt"])
    save_dataset(out, data)
    print(f"wrote {out}: {len(data)} trajectories, horizon {ds['horizon']}, "
          f"spacing {ds['sample_dt']} s, seed {ds['seed']}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    tr = cfg["training"]
    _set_if(tr, "iterations", args.iterations)
    _set_if(tr, "learning_rate", args.lr)
    _set_if(tr, "seed", args.seed)
    if args.dump_config:
        dump_config(cfg, args.dump_config)
    out_dir = _output_dir(cfg)
    model_out = FilePath(args.out) if args.out else out_dir / "model.npz"
    params = hexarotor_params()
    if args.model == "ground-truth":
        save_analytic_model(model_out)
        print(f"wrote {model_out}: analytic ground-truth model (no training)")
        return EXIT_OK
    if args.dataset is None:
        raise ConfigError("train requires --dataset (or --model ground-truth)")
    dataset = load_dataset(args.dataset)
    train_cfg = TrainConfig(iterations=tr["iterations"], learning_rate=tr["learning_rate"],
                            batch_size=tr["batch_size"], seed=tr["seed"],
                            substeps=tr["substeps"])
    try:
        model, history = train(dataset, train_cfg, mass=params.mass, gravity=params.gravity)
    except TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    save_model(model_out, model)
    loss_out = FilePath(args.loss_out) if args.loss_out else out_dir / "loss.txt"
    with open(loss_out, "w") as fh:
        fh.write("# iteration loss\n")
        for i, value in enumerate(history):
            fh.write(f"{i} {value:.17g}\n")
    print(f"wrote {model_out} and {loss_out}: final loss {history[-1]:.6g} "
          f"({history[0] / max(history[-1], 1e-300):.3g}x decrease)")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    sc = cfg["scenario"]
    _set_if(sc, "name", args.scenario)
    _set_if(sc, "world_file", args.world)
    _set_if(sc, "seed", args.seed)
    if args.dump_config:
        dump_config(cfg, args.dump_config)
    out_dir = _output_dir(cfg)
    scenario = build_scenario(cfg)
    view = _load_model_view(args.model)
    try:
        telemetry, verdict = run_scenario(scenario, ctrl_model=view)
    except ScenarioError as exc:
        print(f"error: invalid scenario: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    tel_out = FilePath(args.telemetry_out) if args.telemetry_out else out_dir / "telemetry.txt"
    save_telemetry(tel_out, telemetry)
    verdict_out = FilePath(args.verdict_out) if args.verdict_out else out_dir / "verdict.txt"
    save_verdict(verdict_out, verdict)
    print(verdict.summary(), end="")
    print(f"wrote {tel_out} and {verdict_out}")
    unsafe = verdict.min_obstacle_distance <= 0.0
    return EXIT_OK if verdict.status == "success" and not unsafe else EXIT_UNSAFE


def cmd_plot(args) -> int:
    cfg = load_config(args.config)
    if args.dump_config:
        dump_config(cfg, args.dump_config)
    out_dir = _output_dir(cfg)
    telemetry = load_telemetry(args.telemetry)
    if len(telemetry) == 0:
        raise ConfigError("telemetry file is empty")
    gains = build_gains(cfg)
    t = telemetry[:, telemetry_column("t")]
    dE = telemetry[:, telemetry_column("dE")]
    hd_scaled = (2.0 / gains.kp) * telemetry[:, telemetry_column("Hd")]
    d_p = telemetry[:, telemetry_column("d_p_obs")]
    d_p = np.where(np.isfinite(d_p), d_p, np.nan)

    ax = Axes((t[0], t[-1]), data_limits(dE, hd_scaled), title="Safety margin",
              xlabel="time [s]", ylabel="energy / distance^2")
    ax.line(t, dE, "#1f77b4", label="margin dE")
    ax.line(t, hd_scaled, "#d62728", label="scaled shaped energy")
    k_min = int(np.argmin(dE))
    ax.marker((t[k_min], dE[k_min]), "#1f77b4")
    ax.annotate((t[k_min], dE[k_min]), f"min {dE[k_min]:.3g}")
    margin_path = out_dir / "margin.svg"
    ax.save(margin_path)

    finite = d_p[np.isfinite(d_p)]
    ax = Axes((t[0], t[-1]), data_limits(finite if len(finite) else np.array([0.0, 1.0])),
              title="Obstacle clearance", xlabel="time [s]", ylabel="distance [m]")
    mask = np.isfinite(d_p)
    ax.line(t[mask], d_p[mask], "#2ca02c", label="distance to obstacles")
    clearance_path = out_dir / "clearance.svg"
    ax.save(clearance_path)

    px = telemetry[:, 1]
    py = telemetry[:, 2]
    gx = telemetry[:, telemetry_column("gx")]
    gy = telemetry[:, telemetry_column("gy")]
    ax = Axes(data_limits(px, gx), data_limits(py, gy), title="Top-down trajectory",
              xlabel="x [m]", ylabel="y [m]", equal=True)
    if args.world:
        for prim in load_world(args.world).primitives:
            if isinstance(prim, Sphere):
                ax.circle(prim.center[:2], prim.radius, "#444444", fill="#bbbbbb")
            elif isinstance(prim, Box):
                ax.rect(prim.lo[:2], prim.hi[:2], "#444444", fill="#bbbbbb")
    ax.line(gx, gy, "#1f77b4", label="governor")
    ax.line(px, py, "#d62728", label="robot")
    ax.marker((px[0], py[0]), "#d62728")
    ax.marker((px[-1], py[-1]), "#2ca02c")
    traj_path = out_dir / "trajectory_xy.svg"
    ax.save(traj_path)

    print(f"wrote {margin_path}, {clearance_path}, {traj_path}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = load_config(args.config)
    if args.dump_config:
        dump_config(cfg, args.dump_config)
    out_dir = _output_dir(cfg)
    view = _load_model_view(args.model)
    names = args.scenarios or ["corridor", "forest", "narrow-gap"]
    rows = []
    worst = EXIT_OK
    for name in names:
        if name not in SCENARIOS:
            raise ConfigError(f"unknown scenario name: {name!r}")
        scenario = SCENARIOS[name]()
        scenario.gains = build_gains(cfg)
        telemetry, verdict = run_scenario(scenario, ctrl_model=view)
        save_telemetry(out_dir / f"telemetry_{name}.txt", telemetry)
        save_verdict(out_dir / f"verdict_{name}.txt", verdict)
        rows.append((name, verdict))
        if verdict.status != "success" or verdict.min_obstacle_distance <= 0.0:
            worst = EXIT_UNSAFE
    print(f"{'scenario':<12} {'status':<9} {'t_final':>8} {'min_d':>8} {'min_dE':>11} {'goal_dist':>10}")
    for name, v in rows:
        print(f"{name:<12} {v.status:<9} {v.t_final:>8.2f} {v.min_obstacle_distance:>8.3f} "
              f"{v.min_margin:>11.3e} {v.final_goal_distance:>10.4f}")
    return worst


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hamnav",
        description="Learned rigid-body dynamics with safe reference-governor navigation")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="YAML config file")
        p.add_argument("--dump-config", help="write the effective config to this path")

    p = sub.add_parser("generate-data", help="simulate flights and write the dataset file")
    add_common(p)
    p.add_argument("--out", help="dataset output path")
    p.add_argument("--trajectories", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_generate_data)

    p = sub.add_parser("train", help="fit the dynamics model to a dataset")
    add_common(p)
    p.add_argument("--dataset", help="dataset file from generate-data")
    p.add_argument("--out", help="model output path")
    p.add_argument("--loss-out", help="loss history output path")
    p.add_argument("--iterations", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--model", choices=["learned", "ground-truth"], default="learned",
                   help="'ground-truth' bypasses training and emits the analytic model")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("simulate", help="run one navigation scenario")
    add_common(p)
    p.add_argument("--model", required=True,
                   help="model file or the literal 'ground-truth'")
    p.add_argument("--scenario", help="built-in scenario name")
    p.add_argument("--world", help="world file (with start/goal/grid in the config)")
    p.add_argument("--seed", type=int)
    p.add_argument("--telemetry-out")
    p.add_argument("--verdict-out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("plot", help="emit SVG figures from a telemetry log")
    add_common(p)
    p.add_argument("--telemetry", required=True)
    p.add_argument("--world", help="world file for the top-down panel")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("evaluate", help="run a batch of scenarios and print a table")
    add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--scenarios", nargs="*")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ScenarioError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

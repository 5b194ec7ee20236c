"""Command-line harness: parameter sweeps, impulse simulations, verification.

Subcommands:

``retrofit-ctl sweep --config cfg.json --out dir``
    Designs a controller at every (k_c, model dimension, alpha) grid point
    and writes ``errors.csv`` plus ``performance.csv``.

``retrofit-ctl simulate --config cfg.json --kc 10 --napx 8 --alpha 0.2
--mode retrofit --out dir``
    Impulse response at the first disturbance channel, with the evaluation
    output split into its designer-visible and error-induced components.

``retrofit-ctl verify --config cfg.json [--fuzz-count N] [--seed S]``
    Runs the randomized invariant suite; nonzero exit on any failure.

Configuration is a single versioned JSON document; the ``"paper-benchmark"``
network preset encodes the 36-node oscillator benchmark.  The environment
variable ``RETROFIT_CTL_THREADS`` caps sweep parallelism.  Outputs are
byte-identical across reruns of the same config and seed.
"""

import argparse
import concurrent.futures
import dataclasses
import json
import os
import sys

import numpy as np

from .lti import add, minreal, negate, simulate
from .numerics import NumericsError, hinf_norm
from .oscnet import (
    BENCHMARK_SEED,
    ChannelAssignment,
    NetworkSpec,
    build_network,
    paper_benchmark,
    partition,
)
from .reduction import balanced_truncate
from .retrofit import (
    EnvironmentModel,
    STABILITY_TOL,
    cascade_realization,
    closed_loop_direct,
    compose_retrofit,
    deflated_abscissa,
    direct_controller,
    extended_rectifier,
    new_subsystem,
    performance_bounds,
)
from .synthesis import (
    DEFAULT_NOISE_SCALE,
    ModuleController,
    SynthesisError,
    build_generalized_plant,
    hinf_synthesize,
)
from .verification import run_all_checks, sabotage_rectifier

CONFIG_SCHEMA = 1

DEFAULT_CONFIG = {
    "schema": CONFIG_SCHEMA,
    "seed": BENCHMARK_SEED,
    "network": "paper-benchmark",
    "kc_grid": list(range(11)),
    "napx_grid": [0, 2, 8, 12],
    "alpha_grid": [0.2, 0.01],
    "eps": DEFAULT_NOISE_SCALE,
    "gamma_tol": 1e-3,
    "norm_tol": 1e-8,
    "simulate": {"t_final": 30.0, "dt": 0.02},
}


def load_config(path):
    """Read a JSON config, filling unspecified fields with defaults."""
    cfg = dict(DEFAULT_CONFIG)
    cfg["simulate"] = dict(DEFAULT_CONFIG["simulate"])
    if path is not None:
        with open(path) as fh:
            user = json.load(fh)
        if user.get("schema", CONFIG_SCHEMA) != CONFIG_SCHEMA:
            raise ValueError(f"unsupported config schema {user.get('schema')}")
        sim = user.pop("simulate", {})
        cfg.update(user)
        cfg["simulate"].update(sim)
    if not cfg["kc_grid"] or not cfg["napx_grid"] or not cfg["alpha_grid"]:
        raise ValueError("kc_grid, napx_grid and alpha_grid must be nonempty")
    return cfg


def _network_at(cfg, k_c):
    """Network spec and channel assignment for one coupling value."""
    net = cfg["network"]
    if net == "paper-benchmark":
        return paper_benchmark(k_c, seed=cfg["seed"])
    spec = NetworkSpec(
        node_count=net["node_count"],
        edges=tuple(tuple(e) for e in net["edges"]),
        inertia=tuple(net["inertia"]),
        damping=tuple(net["damping"]),
        subsystem_nodes=tuple(net["subsystem_nodes"]),
        k_c=float(k_c),
    )
    ch = net["channels"]
    assign = ChannelAssignment(
        actuated=tuple(ch["actuated"]),
        disturbed=tuple(ch["disturbed"]),
        measured=tuple(ch["measured"]),
        evaluated=tuple(ch["evaluated"]),
        boundary=tuple(ch["boundary"]),
    )
    return spec, assign


def _thread_count():
    raw = os.environ.get("RETROFIT_CTL_THREADS", "")
    if raw.strip():
        return max(1, int(raw))
    return min(8, os.cpu_count() or 1)


def _fmt(x):
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _environment_setup(cfg, k_c):
    """Partitioned plant, minimal true environment, per-dimension models."""
    spec, assign = _network_at(cfg, k_c)
    G, env = partition(build_network(spec), spec, assign)
    env_min = EnvironmentModel(minreal(env.sys))
    return G, env_min


def _apx_for(env_min, napx):
    nv, nw = env_min.sys.n_outputs, env_min.sys.n_inputs
    if napx is None or napx == 0:
        return EnvironmentModel.zero(nv, nw)
    r = min(int(napx), env_min.sys.n_states)
    return EnvironmentModel(balanced_truncate(env_min.sys, r).reduced)


def _modeling_error(env_min, apx):
    diff = minreal(add(env_min.sys, negate(apx.sys)))
    return hinf_norm(diff)


def _deflated_stable(T_zd):
    return bool(deflated_abscissa(T_zd) < STABILITY_TOL)


def _design_module(G, apx, alpha, cfg):
    gplus = new_subsystem(G, apx)
    gp = build_generalized_plant(gplus, alpha, eps=cfg["eps"])
    module, achieved = hinf_synthesize(gp, gamma_tol=cfg["gamma_tol"])
    return module, achieved


def _sweep_point(cfg, G, env_min, apx, merr, k_c, napx, alpha):
    """One performance row; synthesis failures produce a flagged row."""
    try:
        module, _ = _design_module(G, apx, alpha, cfg)
    except (SynthesisError, NumericsError) as exc:
        return (
            [k_c, napx, alpha, merr, np.nan, np.nan, np.nan, False, False, np.nan],
            f"synthesis failed at kc={k_c} napx={napx} alpha={alpha}: {exc}",
        )
    compose_retrofit(module, extended_rectifier(G, apx))
    report = performance_bounds(G, env_min, apx, module, norm_tol=cfg["norm_tol"])
    direct = closed_loop_direct(G, env_min, direct_controller(G, module))
    row = [
        k_c,
        napx,
        alpha,
        merr,
        report.gamma_actual,
        report.gamma_hat,
        report.gamma_check,
        report.stable,
        _deflated_stable(direct),
        report.invariance_residual,
    ]
    return row, None


def cmd_sweep(cfg, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    kc_grid = cfg["kc_grid"]
    napx_grid = [0 if n is None else int(n) for n in cfg["napx_grid"]]
    alpha_grid = cfg["alpha_grid"]

    setups = {k_c: _environment_setup(cfg, k_c) for k_c in kc_grid}
    error_rows = []
    tasks = []
    for k_c in kc_grid:
        G, env_min = setups[k_c]
        for napx in napx_grid:
            apx = _apx_for(env_min, napx)
            merr = _modeling_error(env_min, apx)
            error_rows.append([k_c, napx, merr])
            for alpha in alpha_grid:
                tasks.append((G, env_min, apx, merr, k_c, napx, alpha))

    results = [None] * len(tasks)
    warnings = []
    with concurrent.futures.ThreadPoolExecutor(_thread_count()) as pool:
        futures = {
            pool.submit(_sweep_point, cfg, *task): i for i, task in enumerate(tasks)
        }
        for fut in concurrent.futures.as_completed(futures):
            results[futures[fut]] = fut.result()

    perf_rows = []
    for row, warning in results:
        perf_rows.append(row)
        if warning:
            warnings.append(warning)

    _write_csv(
        os.path.join(out_dir, "errors.csv"),
        ["k_c", "n_apx", "modeling_error"],
        error_rows,
    )
    _write_csv(
        os.path.join(out_dir, "performance.csv"),
        [
            "k_c",
            "n_apx",
            "alpha",
            "modeling_error",
            "gamma_actual",
            "gamma_hat",
            "gamma_check",
            "stable_retrofit",
            "stable_direct",
            "invariance_residual",
        ],
        perf_rows,
    )
    meta = {
        "schema": CONFIG_SCHEMA,
        "config": {k: v for k, v in cfg.items()},
        "rows": len(perf_rows),
        "warnings": warnings,
    }
    with open(os.path.join(out_dir, "sweep_metadata.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for warning in warnings:
        print(f"warning: {warning}", file=sys.stderr)
    print(f"sweep: {len(perf_rows)} rows -> {out_dir} ({len(warnings)} warnings)")
    return 0


def cmd_simulate(cfg, k_c, napx, alpha, mode, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    G, env_min = _environment_setup(cfg, k_c)
    apx = _apx_for(env_min, napx)
    nz = len(G.cmap.outputs["z"])
    ny = len(G.cmap.outputs["y"])
    nw = len(G.cmap.outputs["w"])
    dt = float(cfg["simulate"]["dt"])
    t_final = float(cfg["simulate"]["t_final"])
    n_samples = int(round(t_final / dt)) + 1
    t = np.arange(n_samples) * dt

    meta = {"mode": mode, "k_c": k_c, "n_apx": napx, "alpha": alpha, "dt": dt}
    if mode == "retrofit":
        module, achieved = _design_module(G, apx, alpha, cfg)
        meta["achieved_gamma"] = achieved
    elif mode == "direct":
        module, achieved = _design_module(G, apx, alpha, cfg)
        meta["achieved_gamma"] = achieved
    elif mode == "none":
        module = ModuleController.from_static(
            np.zeros((len(G.cmap.inputs["u"]), ny)),
            np.zeros((len(G.cmap.inputs["u"]), nw)),
        )
    else:
        raise ValueError(f"unknown mode {mode!r}")

    d = np.zeros((n_samples, len(G.cmap.inputs["d"])))
    d[0, 0] = 1.0 / dt  # impulse at the first disturbance channel

    if mode == "direct":
        T_zd = closed_loop_direct(G, env_min, direct_controller(G, module))
        meta["stable"] = _deflated_stable(T_zd)
        z = simulate(T_zd, d, dt)
        header = ["t"] + [f"z_{i + 1}" for i in range(nz)]
        rows = np.column_stack([t, z])
    else:
        casc = cascade_realization(G, env_min, apx, module, check=(mode == "retrofit"))
        meta["stable"] = _deflated_stable(casc.T_zd)
        taps = casc.taps()
        y = simulate(casc.tapped, d, dt)
        z = y[:, taps["z"]]
        z_hat = y[:, taps["z_hat"]]
        z_check = y[:, taps["z_check"]]
        header = (
            ["t"]
            + [f"z_{i + 1}" for i in range(nz)]
            + [f"zhat_{i + 1}" for i in range(nz)]
            + [f"zcheck_{i + 1}" for i in range(nz)]
        )
        rows = np.column_stack([t, z, z_hat, z_check])

    _write_csv(os.path.join(out_dir, "timeseries.csv"), header, rows)
    with open(os.path.join(out_dir, "simulate_metadata.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if not meta["stable"]:
        print("warning: closed loop unstable; divergent series emitted",
              file=sys.stderr)
    print(f"simulate: {n_samples} samples -> {out_dir}")
    return 0


def cmd_verify(cfg, fuzz_count, seed, out_dir, sabotage=None):
    mangle = sabotage_rectifier if sabotage == "rectifier-sign-flip" else None
    results = run_all_checks(
        seed=seed if seed is not None else cfg["seed"],
        fuzz_count=fuzz_count,
        mangle_rectifier=mangle,
    )
    failures = [r for r in results if not r.passed]
    for r in results:
        print(r.line())
    if failures:
        os.makedirs(out_dir, exist_ok=True)
        payload = [dataclasses.asdict(r) for r in failures]
        path = os.path.join(out_dir, "verify_failures.json")
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True, default=float)
            fh.write("\n")
        print(f"{len(failures)} check(s) failed; replay data in {path}",
              file=sys.stderr)
        return 1
    print(f"all {len(results)} checks passed")
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="retrofit-ctl",
        description="Retrofit controller design sweeps, simulations and checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sweep = sub.add_parser("sweep", help="run the (k_c, n_apx, alpha) grid")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out", required=True)

    p_sim = sub.add_parser("simulate", help="impulse response at one grid point")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--kc", type=float, required=True)
    p_sim.add_argument("--napx", type=int, required=True)
    p_sim.add_argument("--alpha", type=float, required=True)
    p_sim.add_argument("--mode", choices=("retrofit", "direct", "none"),
                       default="retrofit")
    p_sim.add_argument("--out", required=True)

    p_ver = sub.add_parser("verify", help="run the invariant suite")
    p_ver.add_argument("--config", default=None)
    p_ver.add_argument("--fuzz-count", type=int, default=None)
    p_ver.add_argument("--seed", type=int, default=None)
    p_ver.add_argument("--out", default=".")
    p_ver.add_argument("--sabotage", default=None, help=argparse.SUPPRESS)
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    if args.command == "sweep":
        cfg = load_config(args.config)
        return cmd_sweep(cfg, args.out)
    if args.command == "simulate":
        cfg = load_config(args.config)
        return cmd_simulate(cfg, args.kc, args.napx, args.alpha, args.mode, args.out)
    cfg = load_config(args.config)
    return cmd_verify(cfg, args.fuzz_count, args.seed, args.out, args.sabotage)


if __name__ == "__main__":
    sys.exit(main())

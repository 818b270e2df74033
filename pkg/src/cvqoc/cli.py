"""Experiment driver: gate dumps, feature evaluation, propagation, training.

Configs are strict JSON: unknown keys are rejected and missing keys are
named in the error.  Exit codes: 0 success (even when training does not
converge), 2 config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import cvqnn, fock, lindblad, optimize, pmp, problems, tfc

PRESET_DIR = os.path.join(os.path.dirname(__file__), "presets")


class ConfigError(Exception):
    pass


# --- strict config parsing ----------------------------------------------

def _check_keys(section: dict, name: str, required, optional=()):
    if not isinstance(section, dict):
        raise ConfigError(f"section {name!r} must be an object")
    unknown = sorted(set(section) - set(required) - set(optional))
    if unknown:
        raise ConfigError(f"unknown key(s) in {name!r}: {', '.join(unknown)}")
    missing = [k for k in required if k not in section]
    if missing:
        raise ConfigError(f"missing key(s) in {name!r}: {', '.join(missing)}")


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: line {exc.lineno}: {exc.msg}")


def preset_path(name: str) -> str:
    path = os.path.join(PRESET_DIR, name + ".json")
    if not os.path.exists(path):
        shipped = sorted(p[:-5] for p in os.listdir(PRESET_DIR) if p.endswith(".json"))
        raise ConfigError(f"unknown preset {name!r}; shipped presets: {', '.join(shipped)}")
    return path


def _build_bank(qnn: dict) -> cvqnn.QnnBank:
    _check_keys(qnn, "qnn", ["n_features", "depth", "cutoff", "seed"],
                ["passive_high", "squeeze_scale", "disp_scale", "kerr_scale"])
    rng = np.random.default_rng(int(qnn["seed"]))
    kwargs = {k: float(qnn[k]) for k in
              ("passive_high", "squeeze_scale", "disp_scale", "kerr_scale")
              if k in qnn}
    return cvqnn.random_bank(int(qnn["n_features"]), int(qnn["depth"]),
                             int(qnn["cutoff"]), rng, **kwargs)


def _build_schedule(train: dict) -> optimize.TrainSchedule:
    _check_keys(train, "train", ["mode"],
                ["tolerance", "gn_max_iter", "gn_damping", "adam_lr",
                 "adam_epochs", "joint_rounds", "joint_gn_steps",
                 "joint_adam_steps", "fd_h"])
    try:
        return optimize.TrainSchedule(**train)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad train section: {exc}")


def build_problem(cfg: dict):
    """Returns (problem, schedule, system_name)."""
    _check_keys(cfg, "<top level>", ["system", "qnn", "tfc", "train"],
                ["system_params", "ocp", "benchmark"])
    system = cfg["system"]
    bank = _build_bank(cfg["qnn"])
    tfc_cfg = cfg["tfc"]

    if system == "linear-ode-benchmark":
        _check_keys(tfc_cfg, "tfc", ["n_nodes", "tau0", "tauf", "t0", "t_final"])
        _check_keys(cfg.get("benchmark", {}), "benchmark", ["rate", "y0"])
        bench = cfg["benchmark"]
        morph = tfc.TimeMorph.from_times(float(tfc_cfg["t0"]), float(tfc_cfg["t_final"]),
                                         float(tfc_cfg["tau0"]), float(tfc_cfg["tauf"]))
        problem = problems.OdeBenchmarkProblem(
            bank, morph, int(tfc_cfg["n_nodes"]),
            rate=float(bench["rate"]), y0=float(bench["y0"]))
    elif system in ("two-level", "three-level"):
        _check_keys(tfc_cfg, "tfc", ["n_nodes", "tau0", "tauf", "t0", "c_map_init"])
        if system == "two-level":
            _check_keys(cfg.get("system_params", {}), "system_params",
                        [], ["gamma_eg", "gamma_ge", "omega_x", "omega_z"])
            model = lindblad.two_level_model(
                lindblad.TwoLevelParams(**cfg.get("system_params", {})))
        else:
            _check_keys(cfg.get("system_params", {}), "system_params",
                        [], ["delta", "delta1"])
            model = lindblad.three_level_model(
                lindblad.ThreeLevelParams(**cfg.get("system_params", {})))
        ocp = dict(cfg.get("ocp", {}))
        _check_keys(ocp, "ocp",
                    ["time_weight", "energy_weight", "reg_weight",
                     "u_min", "u_max", "sat_steepness", "rho_init", "rho_target"],
                    ["costate_terminal_constraint"])
        ocp["rho_init"] = np.asarray(ocp["rho_init"], dtype=float)
        ocp["rho_target"] = np.asarray(ocp["rho_target"], dtype=float)
        if ocp["rho_init"].shape != (model.dim,) or ocp["rho_target"].shape != (model.dim,):
            raise ConfigError(f"ocp boundary states must have length {model.dim}")
        try:
            lindblad.RealDensityVector(ocp["rho_init"])
            lindblad.RealDensityVector(ocp["rho_target"])
            cfg_ocp = pmp.OcpConfig(t0=float(tfc_cfg["t0"]), **ocp)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad ocp section: {exc}")
        morph = tfc.TimeMorph(float(tfc_cfg["t0"]), float(tfc_cfg["tau0"]),
                              float(tfc_cfg["tauf"]), float(tfc_cfg["c_map_init"]))
        problem = problems.QocProblem(bank, cfg_ocp, model, morph,
                                      int(tfc_cfg["n_nodes"]))
    else:
        raise ConfigError(f"unknown system {system!r}; expected two-level, "
                          "three-level, or linear-ode-benchmark")
    return problem, _build_schedule(cfg["train"]), system


# --- CSV helpers --------------------------------------------------------

def write_csv(path: str, header, rows) -> None:
    with open(path, "w") as fh:
        if header:
            fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.12e}" for v in row) + "\n")


def read_csv(path: str):
    """(header list or None, float matrix)."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ConfigError(f"empty CSV file {path}")
    header = None
    start = 0
    try:
        [float(v) for v in lines[0].split(",")]
    except ValueError:
        header = lines[0].split(",")
        start = 1
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[start:]])
    return header, data


# --- subcommands --------------------------------------------------------

GATE_KINDS = {
    "displacement": lambda v: fock.Displacement(complex(v)),
    "rotation": lambda v: fock.Rotation(float(v)),
    "squeeze": lambda v: fock.Squeeze(float(v)),
    "kerr": lambda v: fock.Kerr(float(v)),
    "beamsplitter": lambda v: fock.BeamSplitter(float(v)),
}


def cmd_gates(args) -> int:
    try:
        make = GATE_KINDS[args.kind]
    except KeyError:
        raise ConfigError(f"unknown gate kind {args.kind!r}; "
                          f"expected one of {', '.join(sorted(GATE_KINDS))}")
    try:
        gate = make(args.param)
    except ValueError:
        raise ConfigError(f"cannot parse parameter {args.param!r} for {args.kind}")
    mat = fock.gate_matrix(gate, args.cutoff).entries
    out = sys.stdout if args.output is None else open(args.output, "w")
    try:
        for row in mat:
            cells = []
            for v in row:
                cells.extend((f"{v.real:.12e}", f"{v.imag:.12e}"))
            out.write(",".join(cells) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_qnn_eval(args) -> int:
    cfg = load_config(args.config)
    _check_keys(cfg, "<top level>", ["qnn"])
    bank = _build_bank(cfg["qnn"])
    sigma = cvqnn.forward(bank, args.tau)
    print(",".join(f"{v:.12e}" for v in sigma))
    return 0


def cmd_propagate(args) -> int:
    cfg = load_config(args.config)
    _check_keys(cfg, "<top level>", ["system_params", "propagate"])
    prop = cfg["propagate"]
    _check_keys(prop, "propagate", ["x0", "t0", "tf", "steps"])
    if args.system == "two-level":
        model = lindblad.two_level_model(lindblad.TwoLevelParams(**cfg["system_params"]))
    else:
        model = lindblad.three_level_model(lindblad.ThreeLevelParams(**cfg["system_params"]))
    x0 = np.asarray(prop["x0"], dtype=float)
    if x0.shape != (model.dim,):
        raise ConfigError(f"x0 must have length {model.dim}")
    header, data = read_csv(args.control)
    if data.shape[1] != 1 + model.n_controls:
        raise ConfigError(f"control CSV needs {1 + model.n_controls} columns "
                          f"(t plus {model.n_controls} control(s))")
    t_ctrl = data[:, 0]

    def u_of_t(t):
        return np.array([np.interp(t, t_ctrl, data[:, 1 + c])
                         for c in range(model.n_controls)])

    ts, xs = lindblad.propagate_rk4(model, x0, u_of_t,
                                    float(prop["t0"]), float(prop["tf"]),
                                    int(prop["steps"]))
    n_pop = int(round(np.sqrt(model.dim)))
    head = ["t"] + [f"x{i + 1}" for i in range(model.dim)] + ["trace"]
    rows = (np.concatenate([[t], x, [x[:n_pop].sum()]]) for t, x in zip(ts, xs))
    write_csv(args.output, head, rows)
    print(f"wrote {args.output} ({len(ts)} samples)")
    return 0


def _sample_grid(t0: float, tf: float, n: int = 201) -> np.ndarray:
    return np.linspace(t0, tf, n)


def _solve_artifacts_qoc(problem, report, outdir: str, system: str) -> dict:
    model = problem.model
    grid = _sample_grid(problem.cfg.t0, problem.final_time())
    xs = problem.state_trajectory(grid)
    us = problem.control_trajectory(grid)
    n_pop = int(round(np.sqrt(model.dim)))
    u_names = ["u"] if model.n_controls == 1 else ["u", "u_s"]
    head = (["t"] + [f"x{i + 1}" for i in range(model.dim)]
            + u_names + ["trace"])
    rows = [np.concatenate([[t], x, u, [x[:n_pop].sum()]])
            for t, x, u in zip(grid, xs, us)]
    write_csv(os.path.join(outdir, "trajectory.csv"), head, rows)

    # RK4 verification on the same grid (20 substeps per sample interval)
    sub = 20
    ts, vx = lindblad.propagate_rk4(model, problem.cfg.rho_init,
                                    problem.control_function(),
                                    problem.cfg.t0, problem.final_time(),
                                    sub * (grid.shape[0] - 1))
    vx = vx[::sub]
    rows = [np.concatenate([[t], x, u, [x[:n_pop].sum()]])
            for t, x, u in zip(grid, vx, us)]
    write_csv(os.path.join(outdir, "verify.csv"), head, rows)

    return {
        "system": system,
        "report": report.to_dict(),
        "tf": problem.final_time(),
        "c_map": problem.morph.c_map,
        "terminal_error_trained": problem.terminal_state_error(),
        "terminal_error_rk4": float(np.linalg.norm(vx[-1] - problem.cfg.rho_target)),
        "loss_breakdown": problem.residual_vector(problem.decision.values).breakdown(),
    }


def _solve_artifacts_benchmark(problem, report, outdir: str) -> dict:
    grid = _sample_grid(problem.morph.t0, problem.morph.tf)
    y = problem.solution(grid)
    write_csv(os.path.join(outdir, "trajectory.csv"), ["t", "y"], zip(grid, y))

    class _Scalar:
        dim = 1
        n_controls = 1

        def generator(self, u):
            return np.array([[problem.rate]])

    ts, ys = lindblad.propagate_rk4(_Scalar(), np.array([y[0]]),
                                    lambda t: np.zeros(1),
                                    grid[0], grid[-1], 20 * (grid.shape[0] - 1))
    ys = ys[::20, 0]
    write_csv(os.path.join(outdir, "verify.csv"), ["t", "y"], zip(grid, ys))

    exact = y[0] * np.exp(problem.rate * (grid - grid[0]))
    return {
        "system": "linear-ode-benchmark",
        "report": report.to_dict(),
        "tf": problem.morph.tf,
        "terminal_error_trained": float(abs(y[-1] - exact[-1])),
        "terminal_error_rk4": float(abs(ys[-1] - exact[-1])),
        "max_grid_error": float(np.max(np.abs(y - exact))),
    }


def cmd_solve(args) -> int:
    path = preset_path(args.preset) if args.preset else args.config
    if path is None:
        raise ConfigError("one of --config or --preset is required")
    cfg = load_config(path)
    if args.mode is not None:
        cfg.setdefault("train", {})["mode"] = args.mode
    problem, schedule, system = build_problem(cfg)
    os.makedirs(args.output, exist_ok=True)

    log_path = os.path.join(args.output, "train.jsonl")
    with open(log_path, "w") as log:
        def callback(epoch, values, loss):
            entry = {"epoch": epoch}
            if system == "linear-ode-benchmark":
                entry["L2_total"] = loss
            else:
                rv = problem.residual_vector(values)
                entry.update(rv.breakdown())
                entry["c_map"] = problem.morph.c_map
                entry["tf"] = problem.morph.tf
            log.write(json.dumps(entry) + "\n")

        report = optimize.train(problem, schedule, callback=callback)

    if system == "linear-ode-benchmark":
        summary = _solve_artifacts_benchmark(problem, report, args.output)
    else:
        summary = _solve_artifacts_qoc(problem, report, args.output, system)
    with open(os.path.join(args.output, "report.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"{system}: converged={report.converged} "
          f"final_loss={report.final_loss:.6e} iterations={report.iterations}")
    print(f"artifacts in {args.output}")
    return 0


def cmd_verify(args) -> int:
    head_a, traj = read_csv(args.trajectory)
    head_b, ver = read_csv(args.verify)
    if head_a != head_b:
        raise ConfigError("trajectory and verify headers differ")
    if traj.shape != ver.shape:
        raise ConfigError(f"grid mismatch: {traj.shape} vs {ver.shape}")
    if np.max(np.abs(traj[:, 0] - ver[:, 0])) > 1e-9:
        raise ConfigError("time grids differ")
    names = head_a[1:] if head_a else [f"c{i}" for i in range(1, traj.shape[1])]
    state_cols = [i for i, n in enumerate(names, start=1)
                  if n not in ("trace",) and not n.startswith("u")]
    max_dev = 0.0
    for i in state_cols:
        dev = float(np.max(np.abs(traj[:, i] - ver[:, i])))
        name = names[i - 1] if head_a else f"col{i}"
        print(f"max deviation {name}: {dev:.6e}")
        max_dev = max(max_dev, dev)
    drift = 0.0
    if head_a and "trace" in names:
        tr = ver[:, 1 + names.index("trace")]
        drift = float(np.max(np.abs(tr - 1.0)))
        print(f"trace drift: {drift:.6e}")
    terminal = float(np.linalg.norm(traj[-1, state_cols] - ver[-1, state_cols]))
    print(f"terminal error: {terminal:.6e}")
    ok = max_dev < args.tol and drift < args.tol and terminal < args.tol
    print("PASS" if ok else f"FAIL (tolerance {args.tol:g})")
    return 0


# --- entry point --------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cvqoc",
                                     description="quantum optimal control experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gates", help="dump a gate matrix as CSV (re/im columns)")
    p.add_argument("--kind", required=True)
    p.add_argument("--param", required=True)
    p.add_argument("--cutoff", type=int, required=True)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_gates)

    p = sub.add_parser("qnn-eval", help="print the feature vector sigma(tau)")
    p.add_argument("--config", required=True)
    p.add_argument("--tau", type=float, required=True)
    p.set_defaults(func=cmd_qnn_eval)

    p = sub.add_parser("propagate", help="RK4 propagation under a tabulated control")
    p.add_argument("--system", required=True, choices=["two-level", "three-level"])
    p.add_argument("--config", required=True)
    p.add_argument("--control", required=True, help="CSV with columns t,u[,u_s]")
    p.add_argument("--output", default="propagate.csv")
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("solve", help="train a problem and write artifacts")
    p.add_argument("--config", default=None)
    p.add_argument("--preset", default=None)
    p.add_argument("--mode", default=None, choices=["xi", "theta", "joint"])
    p.add_argument("--output", default="out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="compare a trajectory against its RK4 check")
    p.add_argument("--trajectory", required=True)
    p.add_argument("--verify", required=True)
    p.add_argument("--tol", type=float, required=True)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    threads = os.environ.get("CVQOC_THREADS")
    if threads is not None and (not threads.isdigit() or int(threads) < 1):
        print(f"error: CVQOC_THREADS must be a positive integer, got {threads!r}",
              file=sys.stderr)
        return 2
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FloatingPointError, np.linalg.LinAlgError, OverflowError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

"""Command-line pipeline: data generation, surrogate training, optimization,
RL training/evaluation, the external evaluator server, and result comparison.

Exit codes: 0 success, 1 runtime failure, 2 usage error.  Every artifact is
written atomically, and (with default flags) every command is deterministic
given its seeds: runtimes are printed to stderr, never stored, unless
--record-runtime is passed.  All flags can also be supplied through a single
JSON config file (--config) keyed by subcommand; explicit flags win.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import objective as obj
from . import opt_ga, opt_netinv, opt_rl, oracle, surrogate
from .design_space import DesignSpace, ThicknessVector, default_space
from .fileio import atomic_write_bytes, atomic_write_text

RESULT_FORMAT = "sillopt-result"
RESULT_VERSION = 1

ENDPOINT_ENV_VAR = "SILLOPT_ENDPOINT"


class UsageError(ValueError):
    """Bad flag values; maps to exit code 2."""


@dataclass
class ComparisonRow:
    method: str
    thicknesses: tuple[float, ...]
    total_energy: float
    mass: float
    objective_value: float | None
    duration_s: float | None


# ---------------------------------------------------------------------------
# small artifact helpers
# ---------------------------------------------------------------------------


def _write_json(path, objgraph):
    atomic_write_text(path, json.dumps(objgraph, indent=2) + "\n")


def _write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    atomic_write_text(path, buf.getvalue())


def _save_svg(path, figure):
    import matplotlib

    matplotlib.rcParams["svg.hashsalt"] = "sillopt"
    buf = io.BytesIO()
    figure.savefig(buf, format="svg", metadata={"Date": None})
    atomic_write_bytes(path, buf.getvalue())


def _line_plot_svg(path, xs, series, xlabel, ylabel, title):
    """series: list of (label, values)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, ys in series:
        ax.plot(xs, ys, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    if len(series) > 1:
        ax.legend()
    fig.tight_layout()
    _save_svg(path, fig)
    plt.close(fig)


def _load_space(path) -> DesignSpace:
    return DesignSpace.load(path) if path else default_space()


def _load_oracle(path, space: DesignSpace) -> oracle.OracleConfig:
    if path:
        return oracle.OracleConfig.load(path)
    return oracle.calibrated_config(space)


def _load_model(path):
    model, extras = surrogate.load_model(path)
    if "space" not in extras or "scaling_reference" not in extras:
        raise RuntimeError(
            f"{path}: model file lacks the design space / scaling reference "
            "(train it with the train-surrogate command)"
        )
    space = DesignSpace.from_json_obj(extras["space"])
    ref = obj.ScalingReference.from_json_obj(extras["scaling_reference"])
    return model, space, ref


def _parse_target(text) -> obj.TargetSpec:
    try:
        return obj.TargetSpec.parse(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _result_obj(method, target, space, design, validated, o_value, seed, *,
                surrogate_objectives=None, surrogate_o=None, details=None,
                duration_s=None):
    out = {
        "format": RESULT_FORMAT,
        "version": RESULT_VERSION,
        "method": method,
        "target": target.to_json_obj(),
        "space": space.to_json_obj(),
        "design": list(design.values),
        "validated_objectives": validated.to_json_obj(),
        "objective_value": o_value,
        "surrogate_objectives": surrogate_objectives,
        "surrogate_objective_value": surrogate_o,
        "seed": seed,
        "details": details or {},
    }
    if duration_s is not None:
        out["duration_s"] = duration_s
    return out


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_gen_data(args) -> int:
    if args.n <= 0:
        raise UsageError(f"--n must be positive, got {args.n}")
    space = _load_space(args.space)
    cfg = _load_oracle(args.oracle, space)
    started = time.perf_counter()
    db = ds.generate(space, cfg, args.n, args.seed)
    ds.save_csv(db, args.out)
    elapsed = time.perf_counter() - started
    print(f"wrote {len(db)} records to {args.out} in {elapsed:.2f}s")
    return 0


def cmd_train_surrogate(args) -> int:
    started = time.perf_counter()
    db = ds.load_csv(args.data)
    rng = np.random.default_rng(args.seed)
    split_seed, tune_seed = (int(v) for v in rng.integers(2**31, size=2))
    train_db, test_db = ds.split(db, 0.8, split_seed)
    hp_space = surrogate.HyperparameterSpace(
        max_trials=args.trials, executions_per_trial=args.executions
    )
    model = surrogate.tune(
        train_db, hp_space, seed=tune_seed, epochs=args.epochs, patience=args.patience
    )
    report = surrogate.evaluate(model, test_db)
    ref = obj.fit_scaling_reference(train_db)
    surrogate.save_model(
        model,
        args.out,
        extra={"space": db.space.to_json_obj(), "scaling_reference": ref.to_json_obj()},
    )

    report_obj = {
        "tuning": model.report,
        "test": report.to_json_obj(),
        "train_records": len(train_db),
        "test_records": len(test_db),
    }
    report_path = args.report or str(Path(args.out).with_suffix(".report.json"))
    _write_json(report_path, report_obj)

    residuals_csv = args.residuals_csv or str(Path(args.out).with_suffix(".residuals.csv"))
    residuals_svg = args.residuals_svg or str(Path(args.out).with_suffix(".residuals.svg"))
    names = ["ea_ss", "ea_f", "mass"]
    _write_csv(
        residuals_csv,
        ["output", "residual_pct"],
        [(names[int(i)], repr(float(r))) for i, r in zip(report.residual_outputs, report.residuals)],
    )
    _residual_histogram_svg(residuals_svg, report.residuals)
    elapsed = time.perf_counter() - started
    print(
        f"tuned {args.trials} trials x {args.executions}: test MAE {report.mae:.4f}, "
        f"MSE {report.mse:.5f}; model -> {args.out} ({elapsed:.1f}s)"
    )
    return 0


def _residual_histogram_svg(path, residuals):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.hist(residuals, bins=30)
    ax.set_xlabel("residual (% of true value)")
    ax.set_ylabel("count")
    ax.set_title("Surrogate residual distribution")
    fig.tight_layout()
    _save_svg(path, fig)
    plt.close(fig)


def _run_ga(args, model, space, ref, target):
    config = opt_ga.GaConfig(
        population_size=args.population,
        crossover_prob=args.crossover_prob,
        mutation_prob=args.mutation_prob,
        generations=args.generations,
        tournament_size=args.tournament,
        elitism=args.elitism,
        seed=args.seed,
    )
    res = opt_ga.run(config, space, model.predict, ref, target)
    trace_rows = [(g, repr(b), repr(m)) for g, b, m in res.trace]
    return res.best_design, {"generations": args.generations, "evaluations": res.evaluations}, (
        ["generation", "best_fitness", "mean_fitness"],
        trace_rows,
    )


def _run_netinv(args, model, space, ref, target):
    y = opt_netinv.build_target(target, model.standardizer)
    config = opt_netinv.InversionConfig(
        bounds=space,
        target=y,
        learning_rate=args.lr,
        max_iterations=args.iterations,
        tolerance=args.tolerance,
        seed=args.seed,
        mass_mode=args.mass_mode,
        mass_weight=args.mass_weight,
    )
    res = opt_netinv.multistart_invert(model.network, config, restarts=args.restarts)
    details = {
        "restart_index": res.restart_index,
        "continuous_design": list(res.x_best.values),
        "best_loss": res.best_loss,
        "snapped_loss": res.snapped_loss,
        "iterations": res.iterations,
    }
    trace_rows = [(i, repr(loss)) for i, loss in enumerate(res.trace)]
    return res.snapped, details, (["iteration", "loss"], trace_rows)


def _rl_env(space, evaluator, target, ref, max_steps, t2):
    return opt_rl.ThicknessEnv(
        opt_rl.EnvConfig(
            space, evaluator, target, ref, max_steps=max_steps, t2_threshold=t2
        )
    )


def _a2c_config(args, episodes=None) -> opt_rl.A2cConfig:
    return opt_rl.A2cConfig(
        trunk_sizes=tuple(int(v) for v in args.trunk.split(",")),
        discount=args.discount,
        rollout_length=args.rollout,
        learning_rate=args.lr,
        value_loss_weight=args.value_weight,
        entropy_weight=args.entropy,
        reward_scale=args.reward_scale,
        normalize_advantage=args.normalize_advantage,
        max_episodes=episodes if episodes is not None else args.episodes,
        seed=args.seed,
    )


def _run_rl(args, model, space, ref, target):
    env = _rl_env(space, model.predict, target, ref, args.max_steps, args.t2)
    agent, returns = opt_rl.train_a2c(env, _a2c_config(args))
    traces = opt_rl.evaluate_greedy(env, agent, episodes=args.eval_episodes, seed=args.seed)
    # The agent is an optimizer here: report the best design it visited,
    # judged by the surrogate objective it was driven by.
    best_design, best_o = None, None
    for trace in traces:
        for step in trace.steps:
            o = obj.optimization_value(ref, target, step.objectives)
            if best_o is None or o < best_o:
                best_o, best_design = o, step.t
    details = {
        "episodes_trained": len(returns),
        "final_return": returns[-1] if returns else None,
        "eval_episodes": len(traces),
    }
    trace_rows = _episode_rows(traces[0])
    return best_design, details, (_EPISODE_HEADER, trace_rows)


_EPISODE_HEADER = ["step", "action", "reward", "ea_ss", "ea_f", "mass", "total_energy"]


def _episode_rows(trace: opt_rl.EpisodeTrace):
    rows = [
        (
            0,
            "",
            "",
            repr(trace.initial_objectives.ea_ss),
            repr(trace.initial_objectives.ea_f),
            repr(trace.initial_objectives.mass),
            repr(trace.initial_objectives.total_energy),
        )
    ]
    for i, s in enumerate(trace.steps, start=1):
        rows.append(
            (
                i,
                s.action,
                repr(s.reward),
                repr(s.objectives.ea_ss),
                repr(s.objectives.ea_f),
                repr(s.objectives.mass),
                repr(s.objectives.total_energy),
            )
        )
    return rows


_METHOD_RUNNERS = {"ga": _run_ga, "netinv": _run_netinv, "rl": _run_rl}


def cmd_optimize(args) -> int:
    runner = _METHOD_RUNNERS.get(args.method)
    if runner is None:
        raise UsageError(f"unknown method {args.method!r}; choose from ga, netinv, rl")
    model, space, ref = _load_model(args.model)
    target = _parse_target(args.target)
    oracle_cfg = _load_oracle(args.oracle, space)

    started = time.perf_counter()
    design, details, (trace_header, trace_rows) = runner(args, model, space, ref, target)
    elapsed = time.perf_counter() - started

    validated = oracle.evaluate(oracle_cfg, design)
    o_value = obj.optimization_value(ref, target, validated)
    surrogate_triple = model.predict(design)
    result = _result_obj(
        args.method,
        target,
        space,
        design,
        validated,
        o_value,
        args.seed,
        surrogate_objectives=surrogate_triple.to_json_obj(),
        surrogate_o=obj.optimization_value(ref, target, surrogate_triple),
        details=details,
        duration_s=elapsed if args.record_runtime else None,
    )
    _write_json(args.out, result)
    trace_path = args.trace or str(Path(args.out).with_suffix(".trace.csv"))
    _write_csv(trace_path, trace_header, trace_rows)
    print(
        f"{args.method}: design {_fmt_design(design)} validated total "
        f"{validated.total_energy:.2f} J, mass {validated.mass:.3f} kg "
        f"(O={o_value:.3f}, {elapsed:.1f}s)",
        file=sys.stderr,
    )
    return 0


def cmd_rl_train(args) -> int:
    model, space, ref = _load_model(args.model)
    target = _parse_target(args.target)
    env = _rl_env(space, model.predict, target, ref, args.max_steps, args.t2)
    started = time.perf_counter()
    agent, returns = opt_rl.train_a2c(env, _a2c_config(args))
    elapsed = time.perf_counter() - started
    opt_rl.save_agent(agent, args.agent)
    trace_path = args.trace or str(Path(args.agent).with_suffix(".returns.csv"))
    _write_csv(trace_path, ["episode", "return"], [(i, repr(r)) for i, r in enumerate(returns)])
    plot_path = args.plot or str(Path(args.agent).with_suffix(".returns.svg"))
    _line_plot_svg(
        plot_path,
        list(range(len(returns))),
        [("episodic return", returns)],
        "episode",
        "return",
        "Actor-critic training returns",
    )
    print(
        f"trained {len(returns)} episodes in {elapsed:.1f}s; agent -> {args.agent}",
        file=sys.stderr,
    )
    return 0


def cmd_rl_eval(args) -> int:
    model, space, ref = _load_model(args.model)
    target = _parse_target(args.target)
    agent = opt_rl.load_agent(args.agent)

    client = None
    if args.coupled:
        endpoint = args.endpoint or os.environ.get(ENDPOINT_ENV_VAR)
        if not endpoint:
            raise UsageError(
                f"--coupled needs --endpoint or the {ENDPOINT_ENV_VAR} environment variable"
            )
        client = oracle.OracleClient(endpoint, timeout=args.timeout)
        evaluator = client.query
        method = "rl-coupled"
        max_steps = args.max_steps if args.max_steps is not None else 20
    else:
        evaluator = model.predict
        method = "rl-greedy"
        max_steps = args.max_steps if args.max_steps is not None else 500

    env = _rl_env(space, evaluator, target, ref, max_steps, args.t2)
    started = time.perf_counter()
    try:
        traces = opt_rl.evaluate_greedy(env, agent, episodes=args.episodes, seed=args.seed)
    finally:
        if client is not None:
            client.close()
    elapsed = time.perf_counter() - started

    trace = traces[0]
    # Mirror the coupled protocol: the episode's final design is the result.
    design = trace.final_design
    if args.coupled:
        validated = trace.final_objectives  # already ground truth
    else:
        validated = oracle.evaluate(_load_oracle(args.oracle, space), design)
    o_value = obj.optimization_value(ref, target, validated)
    best_step = min(
        trace.steps,
        key=lambda s: obj.optimization_value(ref, target, s.objectives),
        default=None,
    )
    details = {
        "episode_length": len(trace.steps),
        "termination": trace.termination,
        "episode_return": trace.episode_return,
        "initial_objectives": trace.initial_objectives.to_json_obj(),
        "best_visited_design": list(best_step.t.values) if best_step else None,
        "best_visited_objectives": best_step.objectives.to_json_obj() if best_step else None,
    }
    result = _result_obj(
        method,
        target,
        space,
        design,
        validated,
        o_value,
        args.seed,
        details=details,
        duration_s=elapsed if args.record_runtime else None,
    )
    _write_json(args.out, result)
    trace_path = args.trace or str(Path(args.out).with_suffix(".trace.csv"))
    _write_csv(trace_path, _EPISODE_HEADER, _episode_rows(trace))
    plot_path = args.plot or str(Path(args.out).with_suffix(".trace.svg"))
    steps = list(range(len(trace.steps) + 1))
    energies = [trace.initial_objectives.total_energy] + [
        s.objectives.total_energy for s in trace.steps
    ]
    masses = [trace.initial_objectives.mass] + [s.objectives.mass for s in trace.steps]
    _line_plot_svg(
        plot_path,
        steps,
        [("total energy [J]", energies), ("mass x100 [kg]", [m * 100 for m in masses])],
        "step",
        "value",
        f"Greedy episode ({method})",
    )
    print(
        f"{method}: {len(trace.steps)} steps ({trace.termination}), final total "
        f"{trace.final_objectives.total_energy:.2f} J, mass "
        f"{trace.final_objectives.mass:.3f} kg ({elapsed:.1f}s)",
        file=sys.stderr,
    )
    return 0


def _fmt_design(design: ThicknessVector) -> str:
    return "-".join(f"{v:g}" for v in design.values)


def load_result(path) -> dict:
    with open(path, encoding="utf-8") as f:
        objgraph = json.load(f)
    if objgraph.get("format") != RESULT_FORMAT or objgraph.get("version") != RESULT_VERSION:
        raise RuntimeError(f"{path}: not a {RESULT_FORMAT} v{RESULT_VERSION} file")
    return objgraph


def comparison_rows(result_objs) -> list[ComparisonRow]:
    """Collate result objects; totals are recomputed from the stored triples."""
    rows = []
    for r in result_objs:
        tri = oracle.ObjectiveTriple.from_json_obj(r["validated_objectives"])
        rows.append(
            ComparisonRow(
                method=r["method"],
                thicknesses=tuple(r["design"]),
                total_energy=tri.ea_ss + tri.ea_f,
                mass=tri.mass,
                objective_value=r.get("objective_value"),
                duration_s=r.get("duration_s"),
            )
        )
    return rows


def cmd_compare(args) -> int:
    results = [load_result(p) for p in args.results]
    spaces = [json.dumps(r["space"], sort_keys=True) for r in results]
    if len(set(spaces)) > 1:
        raise RuntimeError("results use different design spaces; refusing to compare")
    rows = comparison_rows(results)

    lines = [
        "| Optimisation method | Thickness values (t1-tN) [mm] | Total energy absorbed [J] | Mass [kg] |",
        "| --- | --- | --- | --- |",
    ]
    for row in rows:
        thick = "-".join(f"{v:g}" for v in row.thicknesses)
        lines.append(
            f"| {row.method} | {thick} | {row.total_energy:.2f} | {row.mass:.2f} |"
        )
    atomic_write_text(args.out, "\n".join(lines) + "\n")

    if args.plot:
        _bar_plot_svg(args.plot, rows)
        _write_csv(
            str(Path(args.plot).with_suffix(".csv")),
            ["method", "total_energy", "mass"],
            [(r.method, repr(r.total_energy), repr(r.mass)) for r in rows],
        )
    print(f"compared {len(rows)} results -> {args.out}")
    return 0


def _bar_plot_svg(path, rows):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    xs = np.arange(len(rows))
    ax.bar(xs, [r.total_energy for r in rows])
    ax.set_xticks(xs, [r.method for r in rows], rotation=20, ha="right")
    ax.set_ylabel("total energy absorbed [J]")
    ax.set_title("Validated energy absorption by method")
    fig.tight_layout()
    _save_svg(path, fig)
    plt.close(fig)


def cmd_serve_oracle(args) -> int:
    space = _load_space(args.space)
    cfg = _load_oracle(args.oracle, space)
    if args.stdio:
        oracle.serve_stdio(cfg)
        return 0
    endpoint = f"{args.host}:{args.port}"
    print(f"serving evaluator on {endpoint}", file=sys.stderr)
    oracle.serve_external(cfg, endpoint)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_rl_flags(p, episodes_default=200, max_steps_default=500):
    p.add_argument("--episodes", type=int, default=episodes_default)
    p.add_argument("--max-steps", type=int, default=max_steps_default)
    p.add_argument("--t2", type=float, default=None, help="proximity threshold override")
    p.add_argument("--trunk", default="64,64")
    p.add_argument("--discount", type=float, default=0.99)
    p.add_argument("--rollout", type=int, default=5)
    p.add_argument("--lr", type=float, default=7e-4)
    p.add_argument("--value-weight", type=float, default=0.5)
    p.add_argument("--entropy", type=float, default=0.0)
    p.add_argument("--reward-scale", type=float, default=0.02)
    p.add_argument("--normalize-advantage", action="store_true")


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(
        prog="sillopt",
        description="Inverse multi-objective wall-thickness optimization pipeline",
    )
    parser.add_argument("--config", help="JSON file with per-command flag defaults")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {}

    p = sub.add_parser("gen-data", help="evaluate random designs into a CSV database")
    p.add_argument("--n", type=int, default=310)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--space", help="design space JSON (default: built-in seven-wall space)")
    p.add_argument("--oracle", help="evaluator config JSON (default: calibrated model)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)
    commands["gen-data"] = p

    p = sub.add_parser("train-surrogate", help="tune and train the regression surrogate")
    p.add_argument("--data", required=True)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--executions", type=int, default=2)
    p.add_argument("--epochs", type=int, default=1500)
    p.add_argument("--patience", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--report", help="training report JSON path")
    p.add_argument("--residuals-csv")
    p.add_argument("--residuals-svg")
    p.set_defaults(func=cmd_train_surrogate)
    commands["train-surrogate"] = p

    p = sub.add_parser("optimize", help="run one optimizer against the surrogate")
    p.add_argument("--method", required=True, choices=sorted(_METHOD_RUNNERS))
    p.add_argument("--model", required=True)
    p.add_argument("--target", default="800,600,13")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--oracle", help="validation evaluator config JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--trace", help="trace CSV path")
    p.add_argument("--record-runtime", action="store_true",
                   help="embed wall-clock duration in the result JSON (breaks byte reproducibility)")
    # GA flags
    p.add_argument("--population", type=int, default=50)
    p.add_argument("--generations", type=int, default=100)
    p.add_argument("--crossover-prob", type=float, default=0.8)
    p.add_argument("--mutation-prob", type=float, default=0.1)
    p.add_argument("--tournament", type=int, default=3)
    p.add_argument("--elitism", type=int, default=1)
    # network inversion flags
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--iterations", type=int, default=2000)
    p.add_argument("--tolerance", type=float, default=1e-3)
    p.add_argument("--mass-mode", choices=opt_netinv.MASS_MODES, default="target")
    p.add_argument("--mass-weight", type=float, default=0.1)
    p.add_argument("--eval-episodes", type=int, default=1)
    _add_rl_flags(p)
    p.set_defaults(func=cmd_optimize)
    commands["optimize"] = p

    p = sub.add_parser("rl-train", help="train the actor-critic agent on the surrogate")
    p.add_argument("--model", required=True)
    p.add_argument("--target", default="800,600,13")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--agent", required=True, help="agent JSON output path")
    p.add_argument("--trace", help="per-episode return CSV")
    p.add_argument("--plot", help="per-episode return SVG")
    _add_rl_flags(p)
    p.set_defaults(func=cmd_rl_train)
    commands["rl-train"] = p

    p = sub.add_parser("rl-eval", help="run one greedy episode with a saved agent")
    p.add_argument("--agent", required=True)
    p.add_argument("--model", required=True,
                   help="surrogate model JSON (provides space, scaling and the surrogate backend)")
    p.add_argument("--target", default="825,625,14")
    p.add_argument("--coupled", action="store_true", help="evaluate against an external evaluator")
    p.add_argument("--endpoint", help=f"host:port (default: ${ENDPOINT_ENV_VAR})")
    p.add_argument("--timeout", type=float, default=30.0)
    p.add_argument("--max-steps", type=int, default=None,
                   help="step cap (default 20 coupled, 500 otherwise)")
    p.add_argument("--t2", type=float, default=None)
    p.add_argument("--episodes", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--oracle", help="validation evaluator config (non-coupled mode)")
    p.add_argument("--out", required=True)
    p.add_argument("--trace")
    p.add_argument("--plot")
    p.add_argument("--record-runtime", action="store_true")
    p.set_defaults(func=cmd_rl_eval)
    commands["rl-eval"] = p

    p = sub.add_parser("compare", help="collate result JSONs into a table and plot")
    p.add_argument("--results", nargs="+", required=True)
    p.add_argument("--out", required=True, help="markdown table path")
    p.add_argument("--plot", help="grouped bar SVG path")
    p.set_defaults(func=cmd_compare)
    commands["compare"] = p

    p = sub.add_parser("serve-oracle", help="run the reference external evaluator")
    p.add_argument("--space")
    p.add_argument("--oracle")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=7707)
    p.add_argument("--stdio", action="store_true", help="serve on stdin/stdout instead of TCP")
    p.set_defaults(func=cmd_serve_oracle)
    commands["serve-oracle"] = p

    return parser, commands


def _apply_config_defaults(argv, commands):
    """Pre-scan for --config and install its values as per-command defaults."""
    path = None
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif tok.startswith("--config="):
            path = tok.split("=", 1)[1]
    if path is None:
        return
    with open(path, encoding="utf-8") as f:
        config = json.load(f)
    for command, values in config.items():
        if command in commands and isinstance(values, dict):
            commands[command].set_defaults(
                **{k.replace("-", "_"): v for k, v in values.items()}
            )


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, commands = build_parser()
    try:
        _apply_config_defaults(argv, commands)
        args = parser.parse_args(argv)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 1
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

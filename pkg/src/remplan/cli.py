"""Command-line front end: ingest sensor data, estimate kernels, build
ambiguity sets, solve, evaluate, and run the experiment harnesses.

Every run writes its artifacts into --out plus a manifest.json recording the
command, seed, inputs, outputs, package version, wall-clock duration, and any
warnings raised along the way.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time
import warnings
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .ambiguity import (IntervalAmbiguity, KLAmbiguity, check_bound_conditions,
                        interval_from_bootstrap, kl_radius_from_counts)
from .estimate import bootstrap_kernels, count_transitions, degrade_kernel, mle_kernel
from .experiments import (ExperimentConfig, ViolationRanges, impact_experiment,
                          select_psi_reliability, select_psi_validation,
                          violation_study)
from .ingest import TrajectorySet, discretize, extract_health_indicator, load_sensor_table
from .inner import interval_inner_dual, interval_inner_greedy, kl_inner
from .model import ModelSpec, check_assumptions
from .plots import line_chart
from .serialize import (load_ambiguity, load_kernel, load_model,
                        load_policy_csv, read_json, save_ambiguity,
                        save_bootstrap, save_kernel, save_kernel_csv,
                        save_policy_csv, save_solution, write_json)
from .solver import (check_theorem2_condition, evaluate_policy,
                     extract_control_limits, robust_value_iteration)


class CliError(Exception):
    pass


@dataclass
class RunManifest:
    """One per artifact directory; enough to reproduce the run."""

    command: str
    config: str = None
    seed: int = None
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    version: str = ""
    duration_seconds: float = 0.0
    warnings: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def write(self, out_dir: Path) -> Path:
        path = out_dir / "manifest.json"
        write_json(asdict(self), path)
        return path


def _version() -> str:
    here = Path(__file__).resolve()
    for parent in here.parents:
        if (parent / ".git").exists():
            try:
                got = subprocess.run(
                    ["git", "-C", str(parent), "describe", "--tags",
                     "--always", "--dirty"],
                    capture_output=True, text=True, timeout=5)
                if got.returncode == 0 and got.stdout.strip():
                    return got.stdout.strip()
            except OSError:
                pass
            break
    try:
        from importlib.metadata import version
        return "remplan-" + version("remplan")
    except Exception:
        return "remplan-unversioned"


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _say(args, msg: str) -> None:
    if not args.quiet:
        print(msg)


def cmd_ingest(args, ctx) -> None:
    out = _out_dir(args)
    seed = args.seed if args.seed is not None else 42
    table = load_sensor_table(args.csv, num_op_settings=args.op_settings)
    indicator = extract_health_indicator(table)
    traj = discretize(indicator, num_states=args.states, seed=seed)
    dest = out / "trajectories.csv"
    traj.save_csv(dest)
    back = 0
    total = 0
    for seq in traj.states:
        d = np.diff(seq)
        back += int((d < 0).sum())
        total += d.size
    frac = back / total if total else 0.0
    note = (f"{back}/{total} transitions ({frac:.1%}) move to a better state "
            "and will be discarded by estimation")
    ctx["seed"] = seed
    ctx["inputs"].append(str(args.csv))
    ctx["outputs"].append(str(dest))
    ctx["notes"].append(note)
    _say(args, f"wrote {dest} ({len(traj)} units); {note}")


def cmd_estimate(args, ctx) -> None:
    out = _out_dir(args)
    seed = args.seed if args.seed is not None else 0
    traj = TrajectorySet.load_csv(args.trajectories)
    counts = count_transitions(traj)
    base = mle_kernel(counts)
    kern = degrade_kernel(base, rho=args.rho, k_max=args.k_max)
    save_kernel(kern, out / "kernel.json")
    save_kernel_csv(kern, out / "kernel.csv")
    ctx["seed"] = seed
    ctx["inputs"].append(str(args.trajectories))
    ctx["outputs"] += [str(out / "kernel.json"), str(out / "kernel.csv")]
    ctx["notes"].append(
        f"discarded {counts.discarded_backward} backward transitions")
    if args.bootstrap_samples:
        boots = bootstrap_kernels(traj, args.bootstrap_samples, seed)
        save_bootstrap(boots, seed, out / "bootstrap.json")
        ctx["outputs"].append(str(out / "bootstrap.json"))
    _say(args, f"wrote {out / 'kernel.json'} "
               f"(discarded {counts.discarded_backward} backward transitions)")


def cmd_ambiguity(args, ctx) -> None:
    out = _out_dir(args)
    seed = args.seed if args.seed is not None else 0
    if args.kind == "kl":
        if args.kernel is None:
            raise CliError("--kind kl requires --kernel")
        kern = load_kernel(args.kernel)
        ctx["inputs"].append(str(args.kernel))
        if args.theta is not None:
            amb = KLAmbiguity(kern, args.theta)
        elif args.alpha is not None:
            if args.trajectories is None:
                raise CliError("--alpha radius needs --trajectories for counts")
            traj = TrajectorySet.load_csv(args.trajectories)
            ctx["inputs"].append(str(args.trajectories))
            radii = kl_radius_from_counts(count_transitions(traj), args.alpha)
            theta = np.tile(radii[:, None], (1, kern.k_max + 1))
            amb = KLAmbiguity(kern, theta)
        else:
            raise CliError("--kind kl requires --theta or --alpha")
    else:
        if args.trajectories is None or args.alpha is None:
            raise CliError("--kind interval requires --trajectories and --alpha")
        traj = TrajectorySet.load_csv(args.trajectories)
        ctx["inputs"].append(str(args.trajectories))
        boots = bootstrap_kernels(traj, args.bootstrap_samples or 30, seed)
        amb = interval_from_bootstrap(
            boots, alpha=args.alpha, k_max=args.k_max, rho=args.rho,
            ensure_feasible=args.ensure_feasible, source_seed=seed)
    dest = out / "ambiguity.json"
    save_ambiguity(amb, dest)
    ctx["seed"] = seed
    ctx["outputs"].append(str(dest))
    _say(args, f"wrote {dest}")


def cmd_solve(args, ctx) -> None:
    out = _out_dir(args)
    model = load_model(args.model)
    amb = load_ambiguity(args.ambiguity)
    ctx["inputs"] += [str(args.model), str(args.ambiguity)]
    worst_s = model.num_conditions - 1
    lhs = model.reward[worst_s, 0] / (1.0 - model.beta)
    if lhs >= model.c_s:
        raise CliError(
            f"assumption violation: r(S,0)/(1-beta) = {lhs:.6g} must be "
            f"< c_s = {model.c_s:.6g}; operating forever in the worst state "
            "may not beat salvaging")
    sol = robust_value_iteration(model, amb, epsilon=args.epsilon)
    cl = extract_control_limits(sol)
    save_solution(sol, out / "solution.json")
    save_policy_csv(sol, out / "policy.csv")
    cl.to_csv(out / "control_limits.csv")
    cond = check_theorem2_condition(model)
    checks = {
        "salvage_condition": {"lhs": lhs, "c_s": model.c_s, "holds": True},
        "theorem2_condition": {
            "holds_everywhere": bool(cond.all()),
            "fraction_holding": float(cond.mean()),
        },
        "control_limits": {
            "k_star": cl.k_star,
            "is_control_limit": cl.is_control_limit,
            "is_monotone_in_k": cl.is_monotone_in_k,
            "zeta_rm": cl.zeta_rm,
            "zeta_scrap": cl.zeta_scrap,
        },
        "iterations": sol.iterations,
        "residual": sol.residual,
    }
    if isinstance(amb, KLAmbiguity):
        rep = check_assumptions(model, amb.nominal)
        checks["nominal_structure"] = {
            "is_ifr_per_k": rep.is_ifr_per_k,
            "dominance_in_k": rep.dominance_in_k,
            "reward_monotone": rep.reward_monotone,
            "salvage_condition": rep.salvage_condition,
            "all_pass": rep.all_pass,
            "num_violations": len(rep.violations),
        }
    else:
        bc = check_bound_conditions(amb)
        checks["bound_conditions"] = {
            "lower_heads_in_s": bc.lower_heads_in_s,
            "upper_tails_in_s": bc.upper_tails_in_s,
            "lower_heads_in_k": bc.lower_heads_in_k,
            "upper_tails_in_k": bc.upper_tails_in_k,
            "all_pass": bc.all_pass,
            "num_violations": len(bc.violations),
        }
    write_json(checks, out / "checks.json")
    ctx["outputs"] += [str(out / n) for n in
                       ("solution.json", "policy.csv", "control_limits.csv",
                        "checks.json")]
    _say(args, f"solved in {sol.iterations} sweeps "
               f"(residual {sol.residual:.3e}); k* = {cl.k_star}")


def cmd_evaluate(args, ctx) -> None:
    out = _out_dir(args)
    _, policy = load_policy_csv(args.policy)
    kern = load_kernel(args.kernel)
    model = load_model(args.model)
    ctx["inputs"] += [str(args.policy), str(args.kernel), str(args.model)]
    vals = evaluate_policy(policy, kern, model, epsilon=args.epsilon)
    dest = out / "evaluation.json"
    write_json({"values": vals.tolist(),
                "value_at_origin": float(vals[0, 0])}, dest)
    ctx["outputs"].append(str(dest))
    _say(args, f"V(0,0) = {vals[0, 0]:.6g}")


def _experiment_config(doc: dict, args) -> ExperimentConfig:
    fields = dict(doc.get("config", {}))
    if "psi_grid" in fields:
        fields["psi_grid"] = tuple(fields["psi_grid"])
    if args.seed is not None:
        fields["seed"] = args.seed
    if args.threads is not None:
        fields["threads"] = args.threads
    elif "threads" not in fields:
        fields["threads"] = os.cpu_count() or 1
    try:
        return ExperimentConfig(**fields)
    except TypeError as exc:
        raise CliError(f"bad experiment config: {exc}")


def _experiment_model(doc: dict) -> ModelSpec:
    spec = doc.get("model")
    if spec is None:
        raise CliError("experiment config needs a 'model' entry")
    if isinstance(spec, str):
        return load_model(spec)
    return ModelSpec.from_dict(spec)


def _experiment_data(doc: dict):
    true_kernel = None
    trajectories = None
    if "true_kernel" in doc:
        spec = doc["true_kernel"]
        if isinstance(spec, str):
            true_kernel = load_kernel(spec).slice(0)
        else:
            true_kernel = np.asarray(spec, dtype=float)
    if "trajectories" in doc:
        trajectories = TrajectorySet.load_csv(doc["trajectories"])
    return true_kernel, trajectories


def _solution_artifacts(sol, out: Path, ctx) -> None:
    save_solution(sol, out / "solution.json")
    save_policy_csv(sol, out / "policy.csv")
    extract_control_limits(sol).to_csv(out / "control_limits.csv")
    ctx["outputs"] += [str(out / n) for n in
                       ("solution.json", "policy.csv", "control_limits.csv")]


def cmd_experiment(args, ctx) -> None:
    out = _out_dir(args)
    doc = read_json(args.config)
    ctx["config"] = str(args.config)
    ctx["inputs"].append(str(args.config))
    name = doc.get("experiment")
    if name == "impact":
        cfg = _experiment_config(doc, args)
        model = _experiment_model(doc)
        true_kernel, trajectories = _experiment_data(doc)
        rep = impact_experiment(model, cfg, true_kernel=true_kernel,
                                trajectories=trajectories)
        write_json(rep.to_dict(), out / "report.json")
        rep.to_csv(out / "report.csv")
        ctx["seed"] = cfg.seed
        ctx["outputs"] += [str(out / "report.json"), str(out / "report.csv")]
        if args.emit_plots:
            grid = list(cfg.psi_grid)
            nu = [rep.mean_out_of_sample(p) for p in grid]
            vin = [rep.mean_in_sample(p) for p in grid]
            rel = [rep.reliability(p) for p in grid]
            line_chart([("out-of-sample", grid, nu), ("in-sample", grid, vin)],
                       out / "out_of_sample.svg", title="Mean value vs psi",
                       x_label="psi", y_label="value")
            line_chart([("reliability", grid, rel)], out / "reliability.svg",
                       title="Reliability vs psi", x_label="psi",
                       y_label="fraction")
            ctx["outputs"] += [str(out / "out_of_sample.svg"),
                               str(out / "reliability.svg")]
        _say(args, f"wrote {out / 'report.csv'} "
                   f"({len(rep.records)} records)")
    elif name == "select-validation":
        cfg = _experiment_config(doc, args)
        model = _experiment_model(doc)
        _, trajectories = _experiment_data(doc)
        if trajectories is None:
            raise CliError("select-validation needs 'trajectories'")
        psi, sol = select_psi_validation(trajectories, model, cfg)
        write_json({"psi_star": psi, "procedure": "split-then-select"},
                   out / "selection.json")
        ctx["seed"] = cfg.seed
        ctx["outputs"].append(str(out / "selection.json"))
        _solution_artifacts(sol, out, ctx)
        _say(args, f"selected psi = {psi}")
    elif name == "select-reliability":
        cfg = _experiment_config(doc, args)
        model = _experiment_model(doc)
        _, trajectories = _experiment_data(doc)
        if trajectories is None:
            raise CliError("select-reliability needs 'trajectories'")
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            psi, sol = select_psi_reliability(trajectories, model, cfg)
        fallback = any("falling back" in str(w.message) for w in caught)
        for w in caught:
            warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
        write_json({"psi_gamma": psi, "procedure": "bootstrap-then-split",
                    "fallback": fallback}, out / "selection.json")
        ctx["seed"] = cfg.seed
        ctx["outputs"].append(str(out / "selection.json"))
        _solution_artifacts(sol, out, ctx)
        _say(args, f"selected psi = {psi}" + (" (fallback)" if fallback else ""))
    elif name == "violation-study":
        seed = args.seed if args.seed is not None else doc.get("seed", 0)
        threads = args.threads or doc.get("threads") or os.cpu_count() or 1
        kwargs = {}
        if "ranges" in doc:
            kwargs["ranges"] = ViolationRanges(
                **{k: tuple(v) for k, v in doc["ranges"].items()})
        summary = violation_study(
            num_instances=doc.get("num_instances", 5000), seed=seed,
            threads=threads, **kwargs)
        write_json({
            "num_instances": summary.num_instances,
            "condition_violated": summary.condition_violated,
            "structure_broken_given_violated":
                summary.structure_broken_given_violated,
            "structure_broken_total": summary.structure_broken_total,
            "break_fraction_given_violated":
                summary.break_fraction_given_violated,
            "resampled": summary.resampled,
        }, out / "violation_summary.json")
        ctx["seed"] = seed
        ctx["outputs"].append(str(out / "violation_summary.json"))
        _say(args, f"{summary.structure_broken_given_violated}"
                   f"/{summary.condition_violated} condition-violating "
                   "instances broke threshold structure")
    else:
        raise CliError(f"unknown experiment {name!r}")


def cmd_inner_debug(args, ctx) -> None:
    out = _out_dir(args)
    doc = read_json(args.input)
    ctx["inputs"].append(str(args.input))
    kind = doc.get("kind")
    if kind == "kl":
        res = kl_inner(doc["nominal"], doc["values"], doc["theta"])
    elif kind == "interval":
        solver = (interval_inner_greedy if doc.get("method") == "greedy"
                  else interval_inner_dual)
        res = solver(doc["lower"], doc["upper"], doc["values"])
    else:
        raise CliError("inner-debug input needs kind 'kl' or 'interval'")
    payload = {"value": res.value, "worst_row": res.worst_row.tolist(),
               "dual": res.dual}
    dest = out / "inner_debug.json"
    write_json(payload, dest)
    ctx["outputs"].append(str(dest))
    if not args.quiet:
        print(json.dumps(payload))


def _add_common(sp) -> None:
    sp.add_argument("--seed", type=int, default=None,
                    help="seed (defaults: 42 for ingest, else 0)")
    sp.add_argument("--threads", type=int, default=None,
                    help="parallel workers for experiments")
    sp.add_argument("--out", default=".", help="artifact directory")
    sp.add_argument("--quiet", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="remplan",
        description="Robust remanufacturing planning from degradation data.")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("ingest", help="sensor CSV -> discretized trajectories")
    sp.add_argument("csv")
    sp.add_argument("--states", type=int, default=7)
    sp.add_argument("--op-settings", type=int, default=3)
    _add_common(sp)
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("estimate", help="trajectories -> degradation kernel")
    sp.add_argument("trajectories")
    sp.add_argument("--k-max", type=int, default=10)
    sp.add_argument("--rho", type=float, default=0.07)
    sp.add_argument("--bootstrap-samples", type=int, default=0)
    _add_common(sp)
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("ambiguity", help="build a KL or interval ambiguity set")
    sp.add_argument("--kind", choices=("kl", "interval"), required=True)
    sp.add_argument("--kernel", help="kernel JSON (kl)")
    sp.add_argument("--theta", type=float, help="KL radius")
    sp.add_argument("--alpha", type=float,
                    help="radius confidence (kl) or quantile level (interval)")
    sp.add_argument("--trajectories")
    sp.add_argument("--bootstrap-samples", type=int, default=30)
    sp.add_argument("--k-max", type=int, default=10)
    sp.add_argument("--rho", type=float, default=0.07)
    sp.add_argument("--ensure-feasible", action="store_true")
    _add_common(sp)
    sp.set_defaults(func=cmd_ambiguity)

    sp = sub.add_parser("solve", help="robust value iteration")
    sp.add_argument("model")
    sp.add_argument("ambiguity")
    sp.add_argument("--epsilon", type=float, default=1e-6)
    _add_common(sp)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("evaluate", help="fixed-policy value under a kernel")
    sp.add_argument("policy")
    sp.add_argument("kernel")
    sp.add_argument("model")
    sp.add_argument("--epsilon", type=float, default=1e-10)
    _add_common(sp)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("experiment", help="run an experiment config")
    sp.add_argument("config")
    sp.add_argument("--emit-plots", action="store_true")
    _add_common(sp)
    sp.set_defaults(func=cmd_experiment)

    sp = sub.add_parser("inner-debug", help="single-row inner solve, JSON in/out")
    sp.add_argument("input")
    _add_common(sp)
    sp.set_defaults(func=cmd_inner_debug)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    ctx = {"inputs": [], "outputs": [], "notes": [], "config": None,
           "seed": args.seed}
    start = time.time()
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            args.func(args, ctx)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    messages = [str(w.message) for w in caught]
    for msg in messages:
        if not args.quiet:
            print(f"warning: {msg}", file=sys.stderr)
    manifest = RunManifest(
        command=" ".join(argv if argv is not None else sys.argv[1:]),
        config=ctx["config"],
        seed=ctx["seed"],
        inputs=ctx["inputs"],
        outputs=ctx["outputs"],
        version=_version(),
        duration_seconds=round(time.time() - start, 6),
        warnings=messages,
        notes=ctx["notes"],
    )
    manifest.write(_out_dir(args))
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command line front end.

Every command reads one JSON run configuration (``--config``), validates it
completely before computing, and writes its outputs under ``--out``.  Exit
codes: 0 success, 1 a verification or invariant check failed, 2 numerical
failure, 3 invalid configuration.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .basin import (BisectionParams, BracketError, ExtractionError, NewtonError, assess_state,
                    find_bracket, refinement_ladder, richardson, solve_ray, verify_solution)
from .bounds import in_group_interval, ks_sequence, pair_bounds
from .flow import FlowParams, StepUnderflow, calibrate_rho
from .grid import RadialDomain, RadialGrid, build_grid, graded_nodes
from .nodal import DEFAULT_THRESHOLD
from .oracle import ShootingError, shoot_scalar
from .seed import SeedParams, build_seed, inspect_seed, subdivide
from .suites import (dissipation_suite, equivariance_suite, bump_identity_suite,
                     monotonicity_suite, small_bump_suite)
from .system import ProblemSpec

EXIT_OK, EXIT_VERIFY, EXIT_NUMERIC, EXIT_CONFIG = 0, 1, 2, 3
SWEEP_AXES = ("beta", "amplitude", "K", "grid")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class InvariantSettings:
    dissipation_trials: int = 100
    monotonicity_trials: int = 50
    identity_trials: int = 20
    small_bump_trials: int = 20
    equivariance_trials: int = 20
    max_steps: int = 300
    t_max: float = 5.0

    def __post_init__(self):
        for k in self.__dataclass_fields__:
            if not getattr(self, k) > 0:
                raise ValueError(f"invariants.{k} must be positive")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class RunConfig:
    spec: ProblemSpec
    m: int = 256
    grading: float = 0.0
    flow: FlowParams = field(default_factory=FlowParams)
    seed: SeedParams | None = None
    bisection: BisectionParams = field(default_factory=BisectionParams)
    auto_bracket: bool = True
    threshold: float = DEFAULT_THRESHOLD
    newton_tol: float = 1e-10
    solution_index: int = 1
    richardson_levels: int = 0
    out: str = "runs"
    random_seed: int = 0
    invariants: InvariantSettings = field(default_factory=InvariantSettings)
    sweep_axis: str | None = None
    sweep_values: list = field(default_factory=list)

    def __post_init__(self):
        if self.seed is None:
            self.seed = SeedParams.uniform(self.spec)

    def grid(self) -> RadialGrid:
        nodes = graded_nodes(self.spec.domain, self.m, self.grading) if self.grading else None
        return build_grid(self.spec.domain, self.m, nodes)

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "grid": {"m": self.m, "grading": self.grading},
            "flow": self.flow.to_dict(),
            "seed": self.seed.to_dict(),
            "bisection": dict(self.bisection.to_dict(), auto_bracket=self.auto_bracket),
            "threshold": self.threshold,
            "newton_tol": self.newton_tol,
            "solution_index": self.solution_index,
            "richardson_levels": self.richardson_levels,
            "out": self.out,
            "random_seed": self.random_seed,
            "invariants": self.invariants.to_dict(),
            "sweep": {"axis": self.sweep_axis, "values": list(self.sweep_values)},
        }

    def __eq__(self, other) -> bool:
        return isinstance(other, RunConfig) and self.to_dict() == other.to_dict()

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        try:
            spec = ProblemSpec.from_dict(_spec_dict(d["spec"]))
            grid = d.get("grid", {})
            seed = d.get("seed")
            if seed is not None and "group_amplitudes" not in seed:
                seed = SeedParams.uniform(spec, int(seed.get("K", 1)), float(seed.get("amplitude", 1.0)),
                                          seed.get("phase"), float(seed.get("sharpness", 5.0)))
            elif seed is not None:
                seed = SeedParams.from_dict(seed)
            bis = dict(d.get("bisection", {}))
            auto = bool(bis.pop("auto_bracket", True))
            sweep = d.get("sweep") or {}
            cfg = cls(spec=spec, m=int(grid.get("m", 256)), grading=float(grid.get("grading", 0.0)),
                      flow=FlowParams.from_dict(d.get("flow", {})), seed=seed,
                      bisection=BisectionParams.from_dict(bis), auto_bracket=auto,
                      threshold=float(d.get("threshold", DEFAULT_THRESHOLD)),
                      newton_tol=float(d.get("newton_tol", 1e-10)),
                      solution_index=int(d.get("solution_index", 1)),
                      richardson_levels=int(d.get("richardson_levels", 0)),
                      out=str(d.get("out", "runs")), random_seed=int(d.get("random_seed", 0)),
                      invariants=InvariantSettings(**d.get("invariants", {})),
                      sweep_axis=sweep.get("axis"), sweep_values=list(sweep.get("values", [])))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{type(exc).__name__}: {exc}") from exc
        return cfg

    def validate(self) -> RadialGrid:
        """Check every cross-module constraint; returns the grid on success."""
        try:
            grid = self.grid()
            if not 0 < self.threshold < 1:
                raise ValueError("threshold must lie in (0, 1)")
            if self.solution_index < 1 or self.richardson_levels < 0:
                raise ValueError("solution_index >= 1 and richardson_levels >= 0 required")
            issues = self.seed.check(self.spec)
            if issues:
                raise ValueError("seed: " + "; ".join(issues))
            subdivide(self.spec.domain, self.spec, self.seed.K, grid)
            if self.sweep_axis is not None and self.sweep_axis not in SWEEP_AXES:
                raise ValueError(f"sweep axis must be one of {SWEEP_AXES}")
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return grid


def _spec_dict(d: dict) -> dict:
    """Fill derivable fields so short specs like ``{"p": 2, "B": 1, "P": [0]}`` load."""
    d = dict(d)
    d.setdefault("domain", RadialDomain.ball().to_dict())
    d.setdefault("beta", -1.0)
    d.setdefault("Q", [])
    d.setdefault("R", len(d["Q"]))
    d.setdefault("P", [])
    d.setdefault("B", len(d["P"]))
    d.setdefault("p", 2)
    d.setdefault("N", d["B"] * d["p"] + d["R"])
    return d


def load_config(path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return RunConfig.from_dict(data)


def save_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2), encoding="utf-8")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, default=_json_default, sort_keys=True)


def fingerprint() -> dict:
    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
            "platform": platform.platform(), "machine": platform.machine()}


def write_manifest(out: Path, command: str, cfg: RunConfig, results: dict, timings: dict) -> dict:
    manifest = {"command": command, "version": __version__, "config": cfg.to_dict(),
                "results": results, "timings": timings, "environment": fingerprint()}
    out.mkdir(parents=True, exist_ok=True)
    text = dumps(manifest)
    (out / "manifest.json").write_text(text + "\n", encoding="utf-8")
    with open(out / "manifests.jsonl", "a", encoding="utf-8") as fh:
        fh.write(text + "\n")
    return manifest


def write_profile(path: Path, grid: RadialGrid, U: np.ndarray) -> None:
    """CSV with header ``r,u_1,...,u_N`` and one row per grid node."""
    header = ",".join(["r"] + [f"u_{j + 1}" for j in range(U.shape[0])])
    np.savetxt(path, np.column_stack([grid.nodes, U.T]), delimiter=",", header=header,
               comments="", fmt="%.17g")


def read_profile(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1:].T


# ---------------------------------------------------------------- ks-table

def ks_table(p: int, B: int, P, s_max: int) -> dict:
    sched = ks_sequence(p, B, P, s_max)
    rows = []
    for s in range(1, s_max):
        for b, Pb in enumerate(sched.P):
            rows.append({"s": s, "group": b + 1, "P_b": Pb,
                         "interval": list(in_group_interval(Pb, sched, s)),
                         "interval_x4": list(in_group_interval(Pb, sched, s, scale=4))})
    return {"ks_table": {"p": p, "B": B, "P": list(sched.P), "s_max": s_max},
            "K": list(sched.K), "intervals": rows}


def cmd_ks_table(args) -> int:
    try:
        if args.config:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
            if "ks_table" in data:
                t = data["ks_table"]
                p, B, P, s_max = int(t["p"]), int(t["B"]), t["P"], int(t["s_max"])
            else:
                spec = _spec_dict(data["spec"])
                p, B, P = int(spec["p"]), int(spec["B"]), spec["P"]
                s_max = args.s_max or int(data.get("solution_index", 1)) + 1
        else:
            if args.p is None or args.P is None:
                raise ValueError("give --config or --p and --P")
            p, P = args.p, args.P
            B = args.B if args.B is not None else len(P)
            s_max = args.s_max or 2
        table = ks_table(p, B, P, s_max)
    except (OSError, KeyError, TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"p={p} B={B} P={list(P)}")
    for s, k in enumerate(table["K"], 1):
        print(f"K_{s} = {k}")
    for row in table["intervals"]:
        print(f"s={row['s']} group {row['group']}: in-group interval {row['interval']} "
              f"(factor-4 variant {row['interval_x4']})")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "ks_table.json").write_text(json.dumps(table, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


# ---------------------------------------------------------------- config loading

def _load(args) -> tuple[RunConfig, RadialGrid]:
    if not args.config:
        raise ConfigError("--config is required")
    cfg = load_config(args.config)
    if getattr(args, "out", None):
        cfg.out = args.out
    if getattr(args, "seed", None) is not None:
        cfg.random_seed = args.seed
    return cfg, cfg.validate()


def _config_error(exc) -> int:
    print(f"config error: {exc}", file=sys.stderr)
    return EXIT_CONFIG


# ---------------------------------------------------------------- seed-preview

def cmd_seed_preview(args) -> int:
    try:
        cfg, grid = _load(args)
    except ConfigError as exc:
        return _config_error(exc)
    part = subdivide(cfg.spec.domain, cfg.spec, cfg.seed.K, grid)
    U = build_seed(cfg.spec, part, cfg.seed, grid)
    ins = inspect_seed(cfg.spec, part, cfg.seed, grid, threshold=cfg.threshold)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_profile(out / "seed.csv", grid, U)
    report = {"partition": part.to_dict(), "inspection": ins.to_dict()}
    (out / "seed_report.json").write_text(dumps(report) + "\n", encoding="utf-8")
    print(f"targets {ins.targets}  grid counts {ins.grid_counts}  dense counts {ins.dense_counts}")
    for (i, j), v in ins.differences.items():
        print(f"n(u{i + 1}-u{j + 1}) = {v['grid']} (dense {v['dense']}, bound {v['bound']})")
    for v in ins.violations:
        print("VIOLATION", v)
    return EXIT_OK if ins.ok else EXIT_VERIFY


# ---------------------------------------------------------------- solve

def _oracle_report(cfg: RunConfig, result, extrapolated) -> dict | None:
    spec = cfg.spec
    if spec.N != 1:
        return None
    sol = shoot_scalar(spec.domain, spec.targets()[0])
    ref = sol.on_grid(result.grid)
    rep = {"amplitude": sol.amplitude, "zero_count": sol.zero_count,
           "sup_error": float(np.max(np.abs(result.U[0] - ref)))}
    if extrapolated is not None:
        rep["sup_error_extrapolated"] = float(np.max(np.abs(extrapolated[0] - ref)))
    return rep


def run_solve(cfg: RunConfig, grid: RadialGrid, out: Path) -> tuple[int, dict]:
    """The full pipeline; returns the exit code and the manifest."""
    spec = cfg.spec
    timings, results = {}, {}
    t = time.perf_counter()
    part = subdivide(spec.domain, spec, cfg.seed.K, grid)
    direction = build_seed(spec, part, cfg.seed, grid)
    rho = calibrate_rho(grid)
    timings["seed"] = time.perf_counter() - t
    results["rho"] = rho
    code = EXIT_OK
    try:
        t = time.perf_counter()
        bis = cfg.bisection
        if cfg.auto_bracket:
            lo, hi = find_bracket(spec, grid, cfg.flow, direction, threshold=cfg.threshold)
            bis = replace(bis, lambda_lo=lo, lambda_hi=hi)
        results["bracket"] = [bis.lambda_lo, bis.lambda_hi]
        timings["bracket"] = time.perf_counter() - t
        t = time.perf_counter()
        res = solve_ray(spec, grid, cfg.flow, direction, bis, exit_rho=rho,
                        threshold=cfg.threshold, newton_tol=cfg.newton_tol)
        timings["solve"] = time.perf_counter() - t
        timings["solve_pipeline"] = res.provenance.pop("seconds", None)
        t = time.perf_counter()
        schedule = (ks_sequence(spec.p, spec.B, spec.P, cfg.solution_index + 1) if spec.B else None)
        report = verify_solution(spec, res, schedule, s=cfg.solution_index,
                                 residual_tol=cfg.newton_tol)
        res.checks = report.to_dict()
        timings["verify"] = time.perf_counter() - t
        extrapolated = None
        if cfg.richardson_levels:
            t = time.perf_counter()
            ladder = refinement_ladder(res, cfg.richardson_levels, tol=cfg.newton_tol,
                                       threshold=cfg.threshold)
            extrapolated = richardson(ladder)
            results["refinement"] = [{"m": r.grid.m, "node_counts": r.nodal.counts,
                                      "residual_norm": r.residual_norm} for r in ladder]
            timings["refine"] = time.perf_counter() - t
        t = time.perf_counter()
        oracle = _oracle_report(cfg, res, extrapolated)
        if oracle is not None:
            results["oracle"] = oracle
            timings["oracle"] = time.perf_counter() - t
        results["solution"] = res.summary()
        results["verification_passed"] = report.passed
        out.mkdir(parents=True, exist_ok=True)
        write_profile(out / "profile.csv", grid, res.U)
        if extrapolated is not None:
            write_profile(out / "profile_extrapolated.csv", grid, extrapolated)
        if not res.converged:
            code = EXIT_NUMERIC
        elif not report.passed:
            code = EXIT_VERIFY
    except (BracketError, ExtractionError, NewtonError, StepUnderflow, ShootingError,
            np.linalg.LinAlgError) as exc:
        results["error"] = f"{type(exc).__name__}: {exc}"
        code = EXIT_NUMERIC
    results["exit_code"] = code
    manifest = write_manifest(out, "solve", cfg, results, timings)
    return code, manifest


def cmd_solve(args) -> int:
    try:
        cfg, grid = _load(args)
    except ConfigError as exc:
        return _config_error(exc)
    code, manifest = run_solve(cfg, grid, Path(cfg.out))
    res = manifest["results"]
    if "solution" in res:
        sol = res["solution"]
        print(f"node counts {sol['node_counts']}  residual {sol['residual_norm']:.3e}  "
              f"energy {sol['energy']:.6g}")
        print("comparison matrix", sol["comparison_matrix"])
        for c in res["solution"]["checks"]["checks"]:
            if not c["passed"]:
                print(("FAIL " if c["hard"] else "soft ") + f"{c['name']}: {c['value']} vs {c['bound']}")
        if "oracle" in res:
            print("oracle", res["oracle"])
    else:
        print(res.get("error", "no solution"), file=sys.stderr)
    print(f"exit {code}; outputs in {cfg.out}")
    return code


# ---------------------------------------------------------------- verify

def cmd_verify(args) -> int:
    try:
        cfg, grid = _load(args)
        if not args.profile:
            raise ConfigError("--profile is required")
        r, U = read_profile(args.profile)
        if r.size != grid.nodes.size or not np.allclose(r, grid.nodes, rtol=0, atol=1e-12):
            raise ConfigError("profile radii do not match the configured grid")
        if U.shape[0] != cfg.spec.N:
            raise ConfigError(f"profile has {U.shape[0]} components, spec has {cfg.spec.N}")
    except (ConfigError, OSError, ValueError) as exc:
        return _config_error(exc)
    res = assess_state(cfg.spec, grid, U, tol=cfg.newton_tol, threshold=cfg.threshold)
    spec = cfg.spec
    schedule = ks_sequence(spec.p, spec.B, spec.P, cfg.solution_index + 1) if spec.B else None
    report = verify_solution(spec, res, schedule, s=cfg.solution_index, residual_tol=cfg.newton_tol)
    res.checks = report.to_dict()
    out = Path(cfg.out)
    write_manifest(out, "verify", cfg, {"profile": str(args.profile), "solution": res.summary(),
                                        "verification_passed": report.passed}, {})
    for c in report.checks:
        print(("PASS " if c.passed else ("FAIL " if c.hard else "soft ")) + f"{c.name}: {c.value}")
    return EXIT_OK if report.passed else EXIT_VERIFY


# ---------------------------------------------------------------- invariants

def run_invariants(cfg: RunConfig, grid: RadialGrid) -> dict:
    inv = cfg.invariants
    spec = cfg.spec
    params = replace(cfg.flow, t_max=inv.t_max)
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.random_seed).spawn(5)]
    suites = [
        dissipation_suite(spec, grid, params, rngs[0], inv.dissipation_trials, inv.max_steps),
        monotonicity_suite(spec, grid, params, rngs[1], inv.monotonicity_trials, inv.max_steps,
                           cfg.threshold),
        bump_identity_suite(spec, grid, rngs[2], inv.identity_trials),
    ]
    skipped = {}
    rho = calibrate_rho(grid)
    if max(spec.targets()) >= 1:
        suites.append(small_bump_suite(spec, grid, params, rho, rngs[3], inv.small_bump_trials))
    else:
        skipped["small_bump"] = "no component with a node"
    if spec.B >= 1:
        suites.append(equivariance_suite(spec, grid, params, rngs[4], inv.equivariance_trials))
    else:
        skipped["equivariance"] = "no symmetric group"
    return {"rho": rho, "suites": suites, "skipped": skipped}


def cmd_invariants(args) -> int:
    try:
        cfg, grid = _load(args)
    except ConfigError as exc:
        return _config_error(exc)
    t = time.perf_counter()
    run = run_invariants(cfg, grid)
    elapsed = time.perf_counter() - t
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    for s in run["suites"]:
        for k, f in enumerate(s.failures):
            np.save(out / f"counterexample_{s.name}_{k}.npy", f["U0"])
        print(("PASS " if s.passed else "FAIL ") + f"{s.name} ({s.trials} trials) {dumps(s.metrics)}")
        for f in s.failures[:3]:
            print("  counterexample", dumps({k: v for k, v in f.items() if k != "U0"}))
    for name, why in run["skipped"].items():
        print(f"SKIP {name}: {why}")
    results = {"rho": run["rho"], "suites": [s.to_dict() for s in run["suites"]],
               "skipped": run["skipped"], "passed": all(s.passed for s in run["suites"])}
    (out / "invariants_report.json").write_text(dumps(results) + "\n", encoding="utf-8")
    write_manifest(out, "invariants", cfg, results, {"total": elapsed})
    return EXIT_OK if results["passed"] else EXIT_VERIFY


# ---------------------------------------------------------------- sweep

def sweep_config(cfg: RunConfig, axis: str, value) -> RunConfig:
    """Copy of ``cfg`` with one parameter replaced."""
    d = cfg.to_dict()
    if axis == "beta":
        d["spec"]["beta"] = float(value)
    elif axis == "grid":
        d["grid"]["m"] = int(value)
    elif axis == "amplitude":
        d["seed"] = SeedParams.from_dict(d["seed"]).scaled(float(value)).to_dict()
    elif axis == "K":
        old = cfg.seed
        amp = float(np.mean(np.concatenate([a.ravel() for a in old.group_amplitudes + old.remainder_amplitudes])))
        phase = float(old.group_phases[0].ravel()[0]) if old.group_phases else None
        d["seed"] = {"K": int(value), "amplitude": amp, "phase": phase, "sharpness": old.sharpness}
    else:
        raise ConfigError(f"unknown sweep axis {axis!r}")
    d["sweep"] = {"axis": None, "values": []}
    d["out"] = str(Path(cfg.out) / f"{axis}={value}")
    return RunConfig.from_dict(d)


def _sweep_worker(cfg_dict: dict) -> tuple[int, dict]:
    cfg = RunConfig.from_dict(cfg_dict)
    try:
        grid = cfg.validate()
    except ConfigError as exc:
        return EXIT_CONFIG, {"results": {"error": str(exc)}}
    return run_solve(cfg, grid, Path(cfg.out))


def cmd_sweep(args) -> int:
    try:
        cfg, _ = _load(args)
        axis = args.axis or cfg.sweep_axis
        values = args.values if args.values is not None else cfg.sweep_values
        if axis not in SWEEP_AXES:
            raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}")
        if not values:
            raise ConfigError("empty sweep axis")
        runs = [sweep_config(cfg, axis, v) for v in values]
        for r in runs:
            r.validate()
    except ConfigError as exc:
        return _config_error(exc)
    threads = max(1, args.threads or 1)
    payload = [r.to_dict() for r in runs]
    if threads == 1:
        outcomes = [_sweep_worker(p) for p in payload]
    else:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            outcomes = list(ex.map(_sweep_worker, payload))
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["value,exit_code,node_counts,min_difference_count,residual_norm,energy,method"]
    for v, (code, man) in zip(values, outcomes):
        sol = man["results"].get("solution")
        if sol is None:
            lines.append(f"{v},{code},,,,,")
            continue
        M = np.array(sol["comparison_matrix"])
        off = M[~np.eye(M.shape[0], dtype=bool)]
        mind = int(off.min()) if off.size else ""
        counts = " ".join(str(c) for c in sol["node_counts"])
        lines.append(f"{v},{code},{counts},{mind},{sol['residual_norm']:.6e},{sol['energy']:.12g},"
                     f"{sol['provenance'].get('method', '')}")
    (out / "sweep_summary.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines))
    return EXIT_OK if all(c == EXIT_OK for c, _ in outcomes) else EXIT_VERIFY


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nodalflow", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--threads", type=int, default=1, help="worker processes for sweeps")
        p.add_argument("--seed", type=int, help="random seed (overrides the config)")
        return p

    ks = common(sub.add_parser("ks-table", help="K_s schedule and interval table"))
    ks.add_argument("--p", type=int)
    ks.add_argument("--B", type=int)
    ks.add_argument("--P", type=int, nargs="+")
    ks.add_argument("--s-max", type=int, dest="s_max")
    ks.set_defaults(func=cmd_ks_table)
    common(sub.add_parser("seed-preview", help="build and inspect the seed")).set_defaults(func=cmd_seed_preview)
    common(sub.add_parser("solve", help="seed, bisect, extract, refine, verify")).set_defaults(func=cmd_solve)
    ver = common(sub.add_parser("verify", help="check a stored profile"))
    ver.add_argument("--profile", help="profile CSV written by solve")
    ver.set_defaults(func=cmd_verify)
    common(sub.add_parser("invariants", help="randomized dynamical invariant suites")).set_defaults(
        func=cmd_invariants)
    sw = common(sub.add_parser("sweep", help="solve across one parameter axis"))
    sw.add_argument("--axis", choices=SWEEP_AXES)
    sw.add_argument("--values", nargs="*", type=float)
    sw.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads and args.threads > 0:
        os.environ.setdefault("OMP_NUM_THREADS", "1")
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())

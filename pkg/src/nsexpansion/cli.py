"""Batch command-line front end.

Every subcommand except ``exponents`` reads one JSON experiment config
(``--config path`` or ``--builtin name``) and writes into ``<out-dir>/<name>/``.
Exit codes: 0 ok, 2 config error, 3 runtime failure, 4 check failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    DEFAULT_RHO,
    analyze_remainder,
    d0,
    estimate_bilinear_constant,
    integral_bound_probe,
    mx2_check,
    smallness_constants,
    step_error_estimate,
)
from .expansion import (
    ForceExpansion,
    SolutionExpansion,
    construct_admissible_force,
    forward_recursion,
    inverse_recursion,
    series_diagnostics,
)
from .exponents import generate_semigroup, parse_exponent, parse_exponents
from .persist import (
    atomic_write_json,
    atomic_write_text,
    expansion_from_dict,
    expansion_to_dict,
    gevrey_to_dict,
    load_expansion,
    load_trajectory,
    read_json,
    save_expansion,
    save_trajectory,
    sha256_file,
)
from .solver import ForceModel, SolverConfig, integrate
from .spectral import GevreyParams, SpectralField, gevrey_norm, power_profile, random_solenoidal_field

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_CHECK = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


class CheckFailed(RuntimeError):
    pass


def builtin_names() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files("nsexpansion.data").iterdir() if p.name.endswith(".json"))


def load_builtin(name: str) -> dict:
    try:
        text = resources.files("nsexpansion.data").joinpath(f"{name}.json").read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"unknown builtin {name!r}; available: {', '.join(builtin_names())}") from None
    return json.loads(text)


# ---------------------------------------------------------------- experiment config


@dataclass
class ExperimentConfig:
    name: str
    raw: dict
    base_dir: Path
    gammas: list[Fraction]
    cutoff_mu: Fraction
    gevrey: GevreyParams
    force: dict
    solver: SolverConfig
    companion: bool
    u0: dict
    N_list: list[int]
    rhos: list[Fraction]
    sigmas: list[float]
    window: tuple[float, float] | None
    seeds: list[int]
    K_hat: float
    probe: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path, seed: int | None = None) -> "ExperimentConfig":
        try:
            name = str(d["name"])
            if not name or "/" in name or name.startswith("."):
                raise ConfigError(f"invalid experiment name {name!r}")
            gammas = parse_exponents(d.get("gammas", ["1"]))
            cutoff_mu = parse_exponent(d.get("cutoff_mu", "1"))
            generate_semigroup(gammas, cutoff_mu)  # validates
            g = d.get("gevrey", {})
            gevrey = GevreyParams(Fraction(str(g.get("alpha", "1/2"))), float(g.get("sigma", 0.0)))
            force = dict(d.get("force", {}))
            sources = [k for k in ("expansion", "zeta_file", "phi", "zeta") if k in force]
            if len(sources) != 1:
                raise ConfigError(f"force needs exactly one of expansion, zeta_file, phi, zeta (got {sources})")
            for key in ("expansion", "zeta_file"):
                if key in force:
                    p = (base_dir / force[key]).resolve()
                    if not p.is_file():
                        raise ConfigError(f"force.{key}: file {p} does not exist")
                    force[key] = str(p)
            s = dict(d.get("solver", {}))
            companion = bool(s.pop("companion", False))
            if "cutoff" not in s:
                raise ConfigError("solver.cutoff is required")
            rec = s.get("record", "geometric")
            solver = SolverConfig(
                cutoff=int(s["cutoff"]),
                dt=float(s.get("dt", 1e-2)),
                t_end=float(s.get("t_end", 1.0)),
                scheme=s.get("scheme", "if_rk4"),
                record=rec if isinstance(rec, str) else tuple(rec),
                per_decade=int(s.get("per_decade", 40)),
                t_start=float(s.get("t_start", 0.0)),
            )
            a = d.get("analysis", {})
            N_list = [int(n) for n in a.get("N", [0, 1])]
            rhos = [Fraction(str(r)) for r in a.get("rho", [str(DEFAULT_RHO)])]
            if any(not 0 < r < 1 for r in rhos):
                raise ConfigError("analysis.rho values must lie in (0, 1)")
            sigmas = [float(x) for x in a.get("sigmas", [gevrey.sigma])]
            win = a.get("window")
            window = None if win is None else (float(win[0]), float(win[1]))
            seeds = [int(x) for x in d.get("seeds", [0])]
            if seed is not None:
                seeds = [seed + i for i in range(len(seeds))]
            K_hat = float(d.get("K_hat", 2.0))
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"{type(exc).__name__}: {exc}") from exc
        return cls(
            name, d, base_dir, gammas, cutoff_mu, gevrey, force, solver, companion,
            dict(d.get("u0", {})), N_list, rhos, sigmas, window, seeds, K_hat, dict(d.get("probe", {})),
        )

    def require_admissible_alpha(self):
        if self.gevrey.alpha < Fraction(1, 2):
            raise ConfigError("alpha must be >= 1/2")

    # inputs --------------------------------------------------------

    def _terms_expansion(self, terms: list, kind: str):
        return expansion_from_dict(
            {"gammas": [str(g) for g in self.gammas], "cutoff_mu": str(self.cutoff_mu), "terms": terms}, kind
        )

    def zetas(self) -> SolutionExpansion | None:
        f = self.force
        if "zeta" in f:
            return self._terms_expansion(f["zeta"], "solution")
        if "zeta_file" in f:
            return load_expansion(f["zeta_file"], "solution")
        return None

    def force_expansion(self, cutoff: int) -> tuple[ForceExpansion, SolutionExpansion, dict | None]:
        """Force expansion and the matching solution expansion, both at ``cutoff``."""
        z = self.zetas()
        if z is not None:
            if not z.seq.is_integer_sequence():
                raise ConfigError("prescribed zeta coefficients require gammas = [1]")
            rep = construct_admissible_force(z, self.gevrey, self.K_hat, cutoff=cutoff)
            return rep.force, rep.zetas, _construct_report(rep)
        if "phi" in self.force:
            fe = self._terms_expansion(self.force["phi"], "force")
        else:
            fe = load_expansion(self.force["expansion"], "force")
        fe = ForceExpansion(fe.seq, tuple(p.with_cutoff(max(cutoff, p.cutoff)) for p in fe.phis))
        return fe, forward_recursion(fe), None

    def force_model(self, fe: ForceExpansion) -> ForceModel:
        return ForceModel(fe, float(self.force.get("T0", 1.0)), self.force.get("mode", "frozen_before"))

    def initial_field(self, seed: int) -> SpectralField:
        amp = float(self.u0.get("amplitude", 1.0))
        slope = float(self.u0.get("slope", -1.0))
        cutoff = int(self.u0.get("cutoff", self.solver.cutoff))
        return random_solenoidal_field(seed, cutoff, power_profile(slope)) * amp


def load_config(args) -> ExperimentConfig:
    if getattr(args, "builtin", None) and getattr(args, "config", None):
        raise ConfigError("pass either --config or --builtin, not both")
    if getattr(args, "builtin", None):
        d, base = load_builtin(args.builtin), Path.cwd()
    elif getattr(args, "config", None):
        p = Path(args.config)
        if not p.is_file():
            raise ConfigError(f"config file {p} does not exist")
        try:
            d = read_json(p)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if isinstance(d, dict) and "extends" in d:
            base_d = load_builtin(d.pop("extends"))
            base_d.update(d)
            d = base_d
        base = p.parent
    else:
        raise ConfigError("--config or --builtin is required")
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    return ExperimentConfig.from_dict(d, base, getattr(args, "seed", None))


# ---------------------------------------------------------------- run directory


class RunDir:
    def __init__(self, root: Path, cfg: ExperimentConfig):
        self.path = Path(root) / cfg.name
        self.path.mkdir(parents=True, exist_ok=True)
        self.cfg = cfg

    def __truediv__(self, name: str) -> Path:
        return self.path / name

    def snapshot(self):
        atomic_write_json(self / "config.json", self.cfg.raw)

    def write_manifest(self):
        files = sorted(p for p in self.path.iterdir() if p.is_file() and p.name != "manifest.json" and not p.name.startswith("."))
        atomic_write_json(self / "manifest.json", {p.name: sha256_file(p) for p in files})


def _construct_report(rep) -> dict:
    return {
        "K_hat": rep.K_hat,
        "gevrey": gevrey_to_dict(rep.params),
        "phi_norms": rep.phi_norms.tolist(),
        "c": rep.cs.tolist(),
        "d": [None if math.isnan(x) else x for x in rep.ds.tolist()],
        "bound": rep.bound.tolist(),
        "bound_holds": [bool(x) for x in rep.bound_holds],
        "nonzero_phi": [i + 1 for i, p in enumerate(rep.force.phis) if not p.is_zero()],
        "roundtrip_error": rep.roundtrip_error,
        "summability": {
            "verdict": rep.summability.verdict,
            "partial_sums": rep.summability.partial_sums.tolist(),
        },
    }


def _summary(lines: list[str]) -> str:
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- subcommands


def cmd_exponents(args) -> int:
    try:
        gammas = parse_exponents(args.gammas)
        seq = generate_semigroup(gammas, args.cutoff)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    out = {"gammas": [str(g) for g in seq.gammas], "cutoff": str(seq.cutoff), "mus": seq.as_dicts()}
    text = json.dumps(out, indent=2) + "\n"
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _coeff_diagnostics(exp, p: GevreyParams) -> dict:
    diag = series_diagnostics(exp, 1.0, p)
    out = {
        "norm": gevrey_to_dict(diag.norm),
        "coef_norms": diag.coef_norms.tolist(),
        "roots": diag.roots.tolist(),
        "growth": [None if math.isnan(x) else x for x in diag.growth.tolist()],
        "T1_estimate": diag.T1,
        "divergent": diag.divergent,
    }
    if exp.seq.is_integer_sequence() and len(exp) and diag.coef_norms[0] > 0:
        out["norm_over_factorial"] = [c / (math.factorial(i) * diag.coef_norms[0]) for i, c in enumerate(diag.coef_norms)]
    return out


def cmd_coeffs(args) -> int:
    cfg = load_config(args)
    run = RunDir(args.out_dir, cfg)
    run.snapshot()
    if args.direction == "forward":
        if cfg.zetas() is not None:
            raise ConfigError("forward coefficients need a force (phi or expansion), not zeta")
        fe, sol, _ = cfg.force_expansion(cfg.solver.cutoff)
        save_expansion(run / "solution_expansion.json", sol)
        report = {"direction": "forward", "diagnostics": _coeff_diagnostics(sol, cfg.gevrey)}
    else:
        src = args.input or cfg.force.get("zeta_file")
        sol = load_expansion(src, "solution") if src else cfg.zetas()
        if sol is None:
            raise ConfigError("inverse coefficients need --input or a zeta force source")
        fe = inverse_recursion(sol)
        save_expansion(run / "force_expansion.json", fe)
        report = {"direction": "inverse", "diagnostics": _coeff_diagnostics(fe, cfg.gevrey)}
    atomic_write_json(run / "coeffs_report.json", report)
    d = report["diagnostics"]
    lines = [f"coeffs ({args.direction}) for {cfg.name}", f"terms: {len(d['coef_norms'])}"]
    if "norm_over_factorial" in d:
        lines.append("|coef_n| / ((n-1)! |coef_1|): " + ", ".join(f"{x:.12g}" for x in d["norm_over_factorial"]))
    lines.append(f"divergent prefix: {d['divergent']}")
    atomic_write_text(run / "summary_coeffs.txt", _summary(lines))
    run.write_manifest()
    return EXIT_OK


def cmd_construct_force(args) -> int:
    cfg = load_config(args)
    cfg.require_admissible_alpha()
    if cfg.zetas() is None:
        raise ConfigError("construct-force needs a zeta or zeta_file force source")
    run = RunDir(args.out_dir, cfg)
    run.snapshot()
    fe, sol, report = cfg.force_expansion(cfg.solver.cutoff)
    save_expansion(run / "force_expansion.json", fe)
    save_expansion(run / "solution_expansion.json", sol)
    atomic_write_json(run / "construct_report.json", report)
    lines = [
        f"construct-force for {cfg.name} (K_hat = {cfg.K_hat})",
        f"nonzero phi_n at n = {report['nonzero_phi']}",
        f"bound chain holds: {all(report['bound_holds'])}",
        f"round-trip relative error: {report['roundtrip_error']:.3e}",
        f"summability verdict: {report['summability']['verdict']}",
    ]
    atomic_write_text(run / "summary_construct.txt", _summary(lines))
    run.write_manifest()
    return EXIT_OK


def _simulate_one(job: tuple) -> list[str]:
    cfg_dict, base_dir, seed_override, out_dir, seed = job
    cfg = ExperimentConfig.from_dict(cfg_dict, Path(base_dir), seed_override)
    fe, _, _ = cfg.force_expansion(cfg.solver.cutoff)
    F = cfg.force_model(fe)
    u0 = cfg.initial_field(seed)
    written = []
    runs = [("", cfg.solver)]
    if cfg.companion:
        runs.append(("_coarse", cfg.solver.with_(dt=min(2 * cfg.solver.dt, 0.5))))
    for suffix, sc in runs:
        traj = integrate(sc, u0, F)
        path = Path(out_dir) / f"traj_seed{seed}{suffix}.csv"
        save_trajectory(path, traj, {"seed": seed, "experiment": cfg.name})
        written.append(path.name)
    return written


def cmd_simulate(args) -> int:
    cfg = load_config(args)
    run = RunDir(args.out_dir, cfg)
    run.snapshot()
    cfg.force_expansion(cfg.solver.cutoff)  # fail fast on bad force input
    jobs = [(cfg.raw, str(cfg.base_dir), args.seed, str(run.path), s) for s in cfg.seeds]
    if args.threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            written = list(pool.map(_simulate_one, jobs))
    else:
        written = [_simulate_one(j) for j in jobs]
    lines = [f"simulate {cfg.name}: seeds {cfg.seeds}, cutoff {cfg.solver.cutoff}, dt {cfg.solver.dt}, t_end {cfg.solver.t_end}"]
    lines += [f"  {', '.join(w)}" for w in written]
    atomic_write_text(run / "summary_simulate.txt", _summary(lines))
    run.write_manifest()
    return EXIT_OK


def _seed_agreement(fits: list[dict]) -> list[dict]:
    out = []
    keys = sorted({(f["N"], f["sigma"], f["rho"]) for f in fits})
    for key in keys:
        group = [f for f in fits if (f["N"], f["sigma"], f["rho"]) == key and f["exponent"] is not None]
        for a, b in zip(group, group[1:]):
            comparable = "floor-limited" not in a["flags"] and "floor-limited" not in b["flags"]
            tol = 3.0 * math.hypot(a["stderr"], b["stderr"]) + 1e-3
            diff = abs(a["exponent"] - b["exponent"])
            out.append({
                "N": key[0], "sigma": key[1], "rho": key[2], "seeds": [a["seed"], b["seed"]],
                "difference": diff, "tolerance": tol,
                "agree": (diff <= tol) if comparable else None,
            })
    return out


def run_analysis(cfg: ExperimentConfig, run: RunDir) -> dict:
    fe, sol, _ = cfg.force_expansion(cfg.solver.cutoff)
    fits = []
    for seed in cfg.seeds:
        path = run / f"traj_seed{seed}.csv"
        if not path.is_file():
            raise ConfigError(f"missing trajectory {path}; run simulate first")
        traj = load_trajectory(path)
        coarse_path = run / f"traj_seed{seed}_coarse.csv"
        coarse = load_trajectory(coarse_path) if coarse_path.is_file() else None
        for sigma in cfg.sigmas:
            p = GevreyParams(cfg.gevrey.alpha, sigma)
            for rho in cfg.rhos:
                step_err = None
                if coarse is not None:
                    keep = traj.times > 0
                    step_err = step_error_estimate(traj, coarse, p.shifted(1 - rho))[keep]
                for N in cfg.N_list:
                    if N > len(sol):
                        raise ConfigError(f"N = {N} exceeds expansion length {len(sol)}")
                    r = analyze_remainder(traj, sol, N, p, rho, cfg.window, step_err)
                    d = r.as_dict()
                    d["seed"] = seed
                    fits.append(d)
    lam = float(sol.seq.mus[0]) if len(sol) else 1.0
    constants = smallness_constants(cfg.gevrey.alpha, lam, cfg.K_hat, cfg.gevrey.sigma).as_dict() if cfg.K_hat > 1 else {"K_hat": cfg.K_hat}
    return {
        "experiment": cfg.name,
        "gevrey": gevrey_to_dict(cfg.gevrey),
        "fits": fits,
        "seed_agreement": _seed_agreement(fits),
        "constants": constants,
    }


def _analysis_summary(report: dict) -> list[str]:
    lines = [f"analysis for {report['experiment']}", "seed  sigma  rho   N  exponent   stderr     predicted  status  flags"]
    for f in report["fits"]:
        e = "n/a" if f["exponent"] is None else f"{f['exponent']:.4f}"
        s = "n/a" if f["stderr"] is None else f"{f['stderr']:.2e}"
        lines.append(
            f"{f['seed']:<5} {f['sigma']:<6g} {f['rho']:<5g} {f['N']:<2} {e:<10} {s:<10} {f['predicted']:<10} {f['status']:<7} {','.join(f['flags'])}"
        )
    for a in report["seed_agreement"]:
        lines.append(f"seeds {a['seeds']} N={a['N']} sigma={a['sigma']:g}: |diff| {a['difference']:.3g} (tol {a['tolerance']:.3g}) agree={a['agree']}")
    return lines


def cmd_analyze(args) -> int:
    cfg = load_config(args)
    cfg.require_admissible_alpha()
    run = RunDir(args.out_dir, cfg)
    report = run_analysis(cfg, run)
    atomic_write_json(run / "analysis.json", report)
    atomic_write_text(run / "summary_analyze.txt", _summary(_analysis_summary(report)))
    run.write_manifest()
    return EXIT_OK


def run_probe(cfg: ExperimentConfig, seed: int) -> dict:
    pr = cfg.probe
    grid = [0.5, 1.0, 2.0]
    d0_rows = [{"a": a, "s": s, "d0": d0(a, s)} for a in grid for s in grid]
    t_grid = [float(t) for t in pr.get("t_grid", [1.0, 10.0, 100.0])]
    integral = []
    for lam in pr.get("lambdas", [1.0, 2.0]):
        for sig in pr.get("sigmas", [0.5, 1.0]):
            ip = integral_bound_probe(float(lam), float(sig), t_grid)
            integral.append({"lambda": lam, "sigma": sig, "t": t_grid, "ratio": ip.ratios.tolist(), "holds": ip.holds})
    xs = np.linspace(0.0, 200.0, 20001)
    mx2 = []
    for a in grid:
        for s in grid:
            ok, m = mx2_check(a, s, xs)
            mx2.append({"a": a, "s": s, "holds": ok, "min_ratio": m})
    samples = int(pr.get("samples", 1000))
    cutoff = int(pr.get("cutoff", cfg.solver.cutoff))
    est = estimate_bilinear_constant(2 * samples, cutoff, cfg.gevrey, seed)
    k1, k2 = float(est.running_sup[samples - 1]), est.K_lower
    return {
        "d0": d0_rows,
        "integral_bound": integral,
        "mx2": mx2,
        "bilinear": {
            "samples": samples,
            "cutoff": cutoff,
            "seed": seed,
            "K_lower": k1,
            "K_lower_doubled": k2,
            "drift": (k2 - k1) / k1 if k1 > 0 else 0.0,
        },
    }


def cmd_probe(args) -> int:
    cfg = load_config(args)
    cfg.require_admissible_alpha()
    run = RunDir(args.out_dir, cfg)
    run.snapshot()
    report = run_probe(cfg, cfg.seeds[0])
    atomic_write_json(run / "probe.json", report)
    b = report["bilinear"]
    lines = [
        f"probe for {cfg.name}",
        f"integral bound holds everywhere: {all(r['holds'] for r in report['integral_bound'])}",
        f"mx2 holds everywhere: {all(r['holds'] for r in report['mx2'])}",
        f"bilinear K_lower {b['K_lower']:.6g} ({b['samples']} pairs), {b['K_lower_doubled']:.6g} (doubled), drift {b['drift']:.3%}",
    ]
    atomic_write_text(run / "summary_probe.txt", _summary(lines))
    run.write_manifest()
    return EXIT_OK


def cmd_pipeline(args) -> int:
    cfg = load_config(args)
    cfg.require_admissible_alpha()
    if cfg.zetas() is not None:
        cmd_construct_force(args)
    else:
        args.direction, args.input = "forward", None
        cmd_coeffs(args)
    cmd_simulate(args)
    cmd_analyze(args)
    if args.check:
        report = read_json(Path(args.out_dir) / cfg.name / "analysis.json")
        bad = [f for f in report["fits"] if f["status"] == "fail"]
        disagree = [a for a in report["seed_agreement"] if a["agree"] is False]
        if bad or disagree:
            raise CheckFailed(f"{len(bad)} failing fits, {len(disagree)} seed disagreements")
    return EXIT_OK


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config (JSON)")
    common.add_argument("--builtin", help=f"builtin experiment config")
    common.add_argument("--out-dir", default="runs", help="parent of run directories (default: runs)")
    common.add_argument("--threads", type=int, default=1, help="worker processes for independent runs")
    common.add_argument("--seed", type=int, default=None, help="override the config's seed list (seed, seed+1, ...)")

    ap = argparse.ArgumentParser(prog="nsexpansion", description="Power-expansion experiments for forced Galerkin Navier-Stokes.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exponents", parents=[common], help="list the exponent semigroup")
    p.add_argument("--gammas", required=True, help="comma-separated exponents, e.g. '1,3/2'")
    p.add_argument("--cutoff", required=True, help="largest exponent to list")
    p.add_argument("--out", help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_exponents)

    p = sub.add_parser("coeffs", parents=[common], help="forward or inverse coefficient recursion")
    p.add_argument("--direction", choices=["forward", "inverse"], default="forward")
    p.add_argument("--input", help="solution expansion file for --direction inverse")
    p.set_defaults(func=cmd_coeffs)

    p = sub.add_parser("construct-force", parents=[common], help="force from prescribed solution coefficients")
    p.set_defaults(func=cmd_construct_force)

    p = sub.add_parser("simulate", parents=[common], help="integrate the Galerkin system for every seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", parents=[common], help="remainder fits on simulated trajectories")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("probe", parents=[common], help="inequality and constant probes")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("pipeline", parents=[common], help="construct/coeffs, simulate and analyze")
    p.add_argument("--check", action="store_true", help="exit 4 when a rate check or seed comparison fails")
    p.set_defaults(func=cmd_pipeline)
    return ap


def _fail(code: int, exc: BaseException) -> int:
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, exc)
    except CheckFailed as exc:
        return _fail(EXIT_CHECK, exc)
    except Exception as exc:  # noqa: BLE001 - every other failure is a runtime failure
        return _fail(EXIT_RUNTIME, exc)


if __name__ == "__main__":
    sys.exit(main())

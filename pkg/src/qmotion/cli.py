"""Command-line front end: scenarios, verification suites, demos, sweeps.

Scenario parameters live in a JSON config document with sections
``potential``, ``physics``, ``quantum``, ``run``, ``integrator``,
``output`` (and ``sweep`` for grid runs); unknown sections or keys are
rejected before any computation starts.  Exit codes: 0 success, 1 a
verification residual exceeded its tolerance, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .kinetic_series import (
    DeterminationError,
    KineticCoefficients,
    LatticeError,
    SingularityError,
    determine_coefficients,
    master_residual,
    sample_jets,
)
from .ode import IntegrationFailure, IntegratorSettings
from .reduced_action import QuantumStateParams, StateParamError, qshje_residual
from .rootfind import BracketError, RootConvergenceError
from .schrodinger import PhysParams, PotentialModel, SchrodingerError, solve_pair
from . import mechanics
from . import trajectory as traj

__all__ = ["ConfigError", "entry", "load_config", "run", "scenario_from_config"]


class ConfigError(ValueError):
    """Bad config document: unknown keys, missing values, wrong types."""


_SCHEMA = {
    "potential": {"kind", "slope", "stiffness", "csv", "xs", "vs"},
    "physics": {"hbar", "mu", "energy"},
    "quantum": {"a", "b", "kappa"},
    "run": {"law", "x_start", "t0", "t1", "samples", "domain", "grid_step"},
    "integrator": {"rel_tol", "abs_tol", "max_step", "max_steps"},
    "output": {"path", "format"},
    "sweep": {"a", "b", "energy"},
}

_DEFAULT_DOC = {
    "potential": {"kind": "free"},
    "physics": {"hbar": 1.0, "mu": 1.0, "energy": 0.5},
    "quantum": {"a": 2.0, "b": 0.0},
    "run": {"law": "velocity", "x_start": 0.0, "t0": 0.0, "t1": 10.0,
            "samples": 256},
}


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    for section, body in doc.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section {section!r}")
        if not isinstance(body, dict):
            raise ConfigError(f"section {section!r} must be an object")
        bad = set(body) - _SCHEMA[section]
        if bad:
            raise ConfigError(
                f"unknown keys in section {section!r}: {sorted(bad)}")
    return doc


def _potential_from(cfg: dict) -> PotentialModel:
    kind = cfg.get("kind", "free")
    if kind == "free":
        return PotentialModel.free()
    if kind == "linear":
        return PotentialModel.linear(float(cfg.get("slope", 1.0)))
    if kind == "harmonic":
        return PotentialModel.harmonic(float(cfg.get("stiffness", 1.0)))
    if kind == "tabulated":
        if "csv" in cfg:
            return PotentialModel.from_csv(cfg["csv"])
        return PotentialModel.tabulated(cfg.get("xs", ()), cfg.get("vs", ()))
    raise ConfigError(f"unknown potential kind {kind!r}")


def scenario_from_config(doc: dict, law: str | None = None) -> traj.ScenarioConfig:
    try:
        potential = _potential_from(doc.get("potential", {}))
        phys = doc.get("physics", {})
        params = PhysParams(hbar=float(phys.get("hbar", 1.0)),
                            mu=float(phys.get("mu", 1.0)),
                            energy=float(phys.get("energy", 0.5)))
        qc = doc.get("quantum", {})
        q = QuantumStateParams(a=float(qc.get("a", 1.0)),
                               b=float(qc.get("b", 0.0)),
                               kappa=float(qc.get("kappa", 0.0)))
        run = doc.get("run", {})
        integ = doc.get("integrator", {})
        settings = IntegratorSettings(
            rel_tol=float(integ.get("rel_tol", 1e-10)),
            abs_tol=float(integ.get("abs_tol", 1e-12)),
            max_step=float(integ.get("max_step", np.inf)),
            max_steps=int(integ.get("max_steps", 1_000_000)))
        domain = run.get("domain")
        out = doc.get("output", {})
        return traj.ScenarioConfig(
            potential=potential, params=params, q=q,
            x_start=float(run.get("x_start", 0.0)),
            t_span=(float(run.get("t0", 0.0)), float(run.get("t1", 10.0))),
            law=law or run.get("law", "velocity"),
            integrator=settings,
            samples=int(run.get("samples", 256)),
            domain=tuple(domain) if domain is not None else None,
            grid_step=float(run.get("grid_step", 1e-3)),
            out_path=out.get("path"))
    except (ValueError, TypeError, KeyError, SchrodingerError,
            StateParamError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad scenario configuration: {exc}") from exc


def _doc_for(args) -> dict:
    if getattr(args, "config", None):
        return load_config(args.config)
    return json.loads(json.dumps(_DEFAULT_DOC))


def _say(args, *parts) -> None:
    if not args.quiet:
        print(*parts)


def _random_state(rng) -> QuantumStateParams:
    a = rng.uniform(0.5, 2.0) * rng.choice([-1.0, 1.0])
    return QuantumStateParams(a=float(a), b=float(rng.uniform(-1.0, 1.0)))


# ---------------------------------------------------------------------------
# subcommands

def _cmd_trajectory(args) -> int:
    doc = _doc_for(args)
    s = scenario_from_config(doc, law=args.law)
    if args.out:
        s.out_path = args.out
    if s.out_path is None:
        raise ConfigError("trajectory needs an output path "
                          "(output.path in the config or --out)")
    if s.law == "velocity":
        result = traj.integrate_velocity_law(s)
    elif s.law == "newton":
        result = traj.integrate_newton_law(s)
    else:
        result, report = traj.integrate_legacy_law(s)
        if report.stalled:
            _say(args, f"legacy law stalled near x = {report.x_stall:.9g} "
                       f"(turning point {report.x_turn})")
    fmt = doc.get("output", {}).get("format", "csv")
    if fmt not in ("csv", "json", "both"):
        raise ConfigError(f"unknown output format {fmt!r}")
    if fmt in ("csv", "both"):
        traj.write_csv(result.samples, s.out_path)
        _say(args, f"wrote {len(result.samples)} samples to {s.out_path}")
    if fmt in ("json", "both"):
        jpath = s.out_path if fmt == "json" else s.out_path + ".json"
        traj.write_summary(result, jpath)
        _say(args, f"wrote summary to {jpath}")
    return 0


def _cmd_verify_qshje(args) -> int:
    rng = np.random.default_rng(args.seed)
    tol_free = 1e-10 * args.tol_scale
    tol_num = 1e-6 * args.tol_scale
    params = PhysParams(hbar=1.0, mu=1.0, energy=0.5)
    ok = True

    pair = solve_pair(PotentialModel.free(), params, (-8.0, 8.0))
    worst = 0.0
    for _ in range(args.samples):
        q = _random_state(rng)
        for x in rng.uniform(-6.0, 6.0, size=25):
            worst = max(worst, qshje_residual(pair, q, float(x)))
    _say(args, f"free pair: max residual {worst:.3e} (tol {tol_free:.1e})")
    ok &= worst <= tol_free

    hpair = solve_pair(PotentialModel.harmonic(1.0), params, (-3.0, 3.0),
                       grid_step=1e-3)
    worst = 0.0
    for _ in range(args.samples):
        q = _random_state(rng)
        for x in rng.uniform(-2.5, 2.5, size=25):
            worst = max(worst, qshje_residual(hpair, q, float(x)))
    _say(args, f"harmonic pair: max residual {worst:.3e} (tol {tol_num:.1e})")
    ok &= worst <= tol_num
    return 0 if ok else 1


_PERTURB_NAMES = ("alpha", "beta")


def _apply_perturbations(c: KineticCoefficients, specs) -> KineticCoefficients:
    for spec in specs or ():
        try:
            name, raw = spec.split("=", 1)
            value = float(raw)
            base = name.rstrip("0123456789")
            digits = name[len(base):]
            if base not in _PERTURB_NAMES or len(digits) != 2:
                raise ValueError
            n, k = int(digits[0]), int(digits[1])
        except ValueError:
            raise ConfigError(
                f"bad --perturb {spec!r}; expected e.g. alpha20=0.7")
        if base == "alpha":
            c = c.with_entry(n, k, alpha=value)
        else:
            c = c.with_entry(n, k, beta=value)
    return c


def _cmd_verify_master(args) -> int:
    rng = np.random.default_rng(args.seed)
    c = _apply_perturbations(KineticCoefficients.canonical(), args.perturb)
    params = PhysParams(hbar=1.0, mu=1.0, energy=0.5)
    tol = 1e-10 * args.tol_scale
    worst = 0.0
    for j in sample_jets(rng, args.samples):
        worst = max(worst, master_residual(c, j, params))
    _say(args, f"master residual over {args.samples} jets: "
               f"max {worst:.3e} (tol {tol:.1e})")
    return 0 if worst <= tol else 1


def _cmd_verify_conservation(args) -> int:
    doc = _doc_for(args)
    rng = np.random.default_rng(args.seed)
    base = scenario_from_config(doc)
    pair = base.build_pair()  # shared: it depends on neither (a, b) nor law
    drift_tol = max(1e-8 * abs(base.params.energy), 1e-10) * args.tol_scale
    bohm_tol = 1e-8 * args.tol_scale
    ok = True
    for idx in range(args.samples):
        q = _random_state(rng)
        for law, runner in (("velocity", traj.integrate_velocity_law),
                            ("newton", traj.integrate_newton_law)):
            s = scenario_from_config(doc, law=law)
            s.q = q
            s.pair = pair
            summary = traj.summarize(runner(s))
            drift = summary["max_energy_drift_abs"]
            bohm = summary["max_bohm_gap_rel"]
            good = drift <= drift_tol and bohm <= bohm_tol
            line = (f"({q.a:+.3f},{q.b:+.3f}) {law:8s} "
                    f"H drift {drift:.2e}  Bohm gap {bohm:.2e}")
            if s.potential.kind == "free":
                pd = summary["max_principal_drift_rel"]
                good &= pd <= bohm_tol
                line += f"  P drift {pd:.2e}"
            _say(args, line + ("" if good else "  <-- FAIL"))
            ok &= good
    return 0 if ok else 1


def _cmd_coefficients(args) -> int:
    c, report = determine_coefficients(levels=args.levels, seed=args.seed)
    if not args.quiet:
        print(report.summary())
        print("determined lattice:")
        for (n, k), (al, be) in sorted(c.entries.items()):
            print(f"  alpha{n}{k} = {al:.12g}   beta{n}{k} = {be:.12g}")
        print(f"unique: {report.unique}")
    return 0


def _cmd_demo_linear_term(args) -> int:
    potential = (PotentialModel.free() if args.potential == "free" else
                 PotentialModel.linear(args.slope) if args.potential == "linear"
                 else PotentialModel.harmonic(args.stiffness))
    fconst = args.f_const
    report = mechanics.linear_term_demo(args.i, lambda x: fconst, potential,
                                        args.lam, seed=args.seed)
    _say(args, report.summary())
    if args.i != 1 and not report.consistent:
        return 1
    return 0


def _cmd_demo_legacy_stall(args) -> int:
    doc = _doc_for(args)
    if "potential" not in doc or doc["potential"].get("kind") == "free":
        doc["potential"] = {"kind": "linear", "slope": 0.5}
        doc.setdefault("run", {})
        doc["run"].setdefault("domain", [-2.0, 6.0])
        doc["run"]["t1"] = max(40.0, float(doc["run"].get("t1", 0.0)))
    s = scenario_from_config(doc, law="legacy")
    result, report = traj.integrate_legacy_law(s)
    _say(args, f"legacy law on {s.potential.kind} potential, "
               f"E = {s.params.energy:g}:")
    _say(args, f"  stalled: {report.stalled}")
    for note in report.notes:
        _say(args, f"  {note}")
    sv = scenario_from_config(doc, law="velocity")
    rv = traj.integrate_velocity_law(sv)
    vmin = min(abs(p.xdot) for p in rv.samples)
    _say(args, f"  first-order action-gradient law over the same span: "
               f"x reaches {rv.samples[-1].x:.6g}, min |xd| = {vmin:.6g}")
    return 0


def _sweep_cell(payload):
    idx, doc, a, b, energy = payload
    doc = json.loads(json.dumps(doc))
    doc.setdefault("quantum", {})["a"] = a
    doc["quantum"]["b"] = b
    doc.setdefault("physics", {})["energy"] = energy
    s = scenario_from_config(doc)
    if s.law == "velocity":
        result = traj.integrate_velocity_law(s)
    elif s.law == "newton":
        result = traj.integrate_newton_law(s)
    else:
        result, _ = traj.integrate_legacy_law(s)
    summary = traj.summarize(result)
    return idx, (a, b, energy, summary["x_last"],
                 summary["max_energy_drift_rel"], summary["max_bohm_gap_rel"],
                 summary["min_abs_xdot"], int(summary["energy_conserved"]))


_SWEEP_HEADER = ("a,b,energy,x_last,max_energy_drift_rel,"
                 "max_bohm_gap_rel,min_abs_xdot,energy_conserved")


def _cmd_sweep(args) -> int:
    doc = _doc_for(args)
    grid = doc.get("sweep")
    if not grid:
        raise ConfigError("sweep needs a 'sweep' section with value lists")
    a_list = [float(v) for v in grid.get("a", [1.0])]
    b_list = [float(v) for v in grid.get("b", [0.0])]
    e_list = [float(v) for v in grid.get("energy",
                                         [doc.get("physics", {}).get("energy", 0.5)])]
    cells = []
    idx = 0
    for a in a_list:
        for b in b_list:
            for energy in e_list:
                cells.append((idx, doc, a, b, energy))
                idx += 1
    rows = [None] * len(cells)
    if args.workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            for i, row in pool.map(_sweep_cell, cells):
                rows[i] = row
    else:
        for cell in cells:
            i, row = _sweep_cell(cell)
            rows[i] = row
    lines = [_SWEEP_HEADER]
    for row in rows:
        lines.append(",".join("%.17g" % v if isinstance(v, float) else str(v)
                              for v in row))
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        _say(args, f"wrote {len(rows)} sweep rows to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# parser plumbing

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=20260823,
                   help="random seed for sampled checks")
    p.add_argument("--tol-scale", type=float, default=1.0, dest="tol_scale",
                   help="multiply verification tolerances by this factor")
    p.add_argument("--quiet", action="store_true",
                   help="suppress informational output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qmotion",
        description="Quantum trajectory laws: runs, verifications, demos.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("trajectory", help="integrate one scenario to CSV/JSON")
    p.add_argument("--config", required=True)
    p.add_argument("--law", choices=("velocity", "newton", "legacy"))
    p.add_argument("--out", help="override output.path")
    _add_common(p)
    p.set_defaults(func=_cmd_trajectory)

    v = sub.add_parser("verify", help="verification suites")
    vsub = v.add_subparsers(dest="suite", required=True)

    p = vsub.add_parser("qshje", help="stationary action equation residuals")
    p.add_argument("--samples", type=int, default=5,
                   help="number of random (a, b) states per potential")
    _add_common(p)
    p.set_defaults(func=_cmd_verify_qshje)

    p = vsub.add_parser("master", help="kinetic-series master identity")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--perturb", action="append", metavar="NAME=VALUE",
                   help="override a lattice entry, e.g. alpha20=0.7")
    _add_common(p)
    p.set_defaults(func=_cmd_verify_master)

    p = vsub.add_parser("conservation", help="energy/Bohm/momentum drift")
    p.add_argument("--config")
    p.add_argument("--samples", type=int, default=3,
                   help="number of random (a, b) states")
    _add_common(p)
    p.set_defaults(func=_cmd_verify_conservation)

    p = sub.add_parser("coefficients", help="determine the kinetic lattice")
    p.add_argument("--levels", type=int, default=2)
    _add_common(p)
    p.set_defaults(func=_cmd_coefficients)

    d = sub.add_parser("demo", help="demonstration reports")
    dsub = d.add_subparsers(dest="which", required=True)

    p = dsub.add_parser("linear-term",
                        help="first-order Lagrangian with a linear velocity term")
    p.add_argument("--i", type=int, default=2, help="velocity exponent")
    p.add_argument("--lam", type=float, default=0.0, help="regulator strength")
    p.add_argument("--potential", choices=("free", "linear", "harmonic"),
                   default="harmonic")
    p.add_argument("--slope", type=float, default=1.0)
    p.add_argument("--stiffness", type=float, default=1.0)
    p.add_argument("--f-const", type=float, default=0.5, dest="f_const",
                   help="constant value of the velocity-term factor f(x)")
    _add_common(p)
    p.set_defaults(func=_cmd_demo_linear_term)

    p = dsub.add_parser("legacy-stall",
                        help="legacy law freezing at a classical turning point")
    p.add_argument("--config")
    _add_common(p)
    p.set_defaults(func=_cmd_demo_legacy_stall)

    p = sub.add_parser("sweep", help="grid over (a, b, E) with one row per cell")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--workers", type=int, default=4)
    _add_common(p)
    p.set_defaults(func=_cmd_sweep)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (IntegrationFailure, traj.VelocityFloorError, DeterminationError,
            SingularityError, LatticeError, BracketError,
            RootConvergenceError, SchrodingerError, ZeroDivisionError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        # precondition violations from scenario plumbing are usage errors
        print(f"config error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(run())


if __name__ == "__main__":
    entry()

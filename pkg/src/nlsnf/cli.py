"""Command-line driver: ``nlsnf {simulate,normal-form,scan,compare,report}``.

Configuration is a JSON document with a top-level ``seed`` and one section per
command (``simulate``, ``normal_form``, ``scan``, ``compare``, ``report``); a
flat document holding only keys of the invoked command is accepted as well.
``--set key=value`` overrides (``key`` or ``section.key``; values parsed as
JSON when possible).  Unknown keys are rejected.

Every run writes into ``--out`` a ``manifest.json`` listing the resolved
configuration, version, timestamps, an input hash and every emitted file with
its SHA-256.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 near-resonance abort.
"""
from __future__ import annotations

import argparse
import copy
import hashlib
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .birkhoff import NearResonanceError, build_normal_form, integrate_truncated, pq_form_check
from .lattice import SpectralField, as_mode, norm2
from .reduction import field_to_vector, pde_to_u, reduce, to_x
from .resonance import DivisorQuery, min_divisor, scan_L
from .simulate import SimConfig, SimulationError, Stepper, initial_datum, run_stability
from .svg import line_chart

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_RESONANCE = 0, 2, 3, 4

DEFAULTS = {
    "simulate": {
        "d": 1, "p": 1, "lam": -1.0, "n_grid": 64, "dt": 1e-3, "t_end": 1.0, "integrator": "strang2",
        "dealias": None, "sample_dt": None, "m": [0], "rho": 0.5, "L": None, "eps": 1e-3, "s": 6.0,
        "k_max": None, "mu_record": None, "svg": True,
    },
    "normal_form": {
        "p": 1, "L": 0.31, "d": 1, "N_trunc": 2, "ell": 1, "degree_cap": None, "floor": 1e-8,
        "exact": False, "radius": None, "s": 6.0,
    },
    "scan": {
        "p": 1, "L0": 0.4, "grid": 1000, "M": 4, "N": 10, "mu_max": 40, "lam": -1.0, "L": None,
        "gammas": None, "fit_Ns": [4, 8, 16, 32], "fail_level": 0.05, "fit": True, "threshold": 1e-6,
        "svg": True,
    },
    "compare": {
        "d": 1, "p": 1, "L": 0.31, "n_grid": 64, "dt": 1e-3, "t_end": 10.0, "integrator": "strang2",
        "eps": 1e-2, "s": 6.0, "N_trunc": 3, "ell": 1, "degree_cap": None, "include_remainder": True,
        "ode_dt": 1e-3, "samples": 100, "svg": True,
    },
    "report": {"runs": []},
}
SECTION = {"simulate": "simulate", "normal-form": "normal_form", "scan": "scan", "compare": "compare",
           "report": "report"}


class ConfigError(ValueError):
    pass


# --- configuration ----------------------------------------------------------------------------

def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def resolve_config(command: str, doc: dict | None, overrides=(), seed: int | None = None) -> dict:
    """Merge defaults, a config document and ``key=value`` overrides; reject unknown keys."""
    section = SECTION[command]
    cfg = {"seed": 0, section: copy.deepcopy(DEFAULTS[section])}
    doc = doc or {}
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    for key, val in doc.items():
        if key == "seed":
            cfg["seed"] = val
        elif key in DEFAULTS:
            if not isinstance(val, dict):
                raise ConfigError(f"section {key!r} must be an object")
            if key != section:
                continue  # sections of other commands are allowed in a shared file
            for k, v in val.items():
                if k not in DEFAULTS[section]:
                    raise ConfigError(f"unknown key {section}.{k}")
                cfg[section][k] = v
        elif key in DEFAULTS[section]:
            cfg[section][key] = val
        else:
            raise ConfigError(f"unknown key {key!r}")
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, text = item.split("=", 1)
        key = key.strip()
        if key == "seed":
            cfg["seed"] = _parse_value(text)
            continue
        if "." in key:
            sec, key = key.split(".", 1)
            if sec != section:
                raise ConfigError(f"override {item!r} targets section {sec!r}, not {section!r}")
        if key not in DEFAULTS[section]:
            raise ConfigError(f"unknown key {key!r}")
        cfg[section][key] = _parse_value(text)
    if seed is not None:
        cfg["seed"] = seed
    if not isinstance(cfg["seed"], int) or isinstance(cfg["seed"], bool):
        raise ConfigError("seed must be an integer")
    return cfg


def _input_hash(command: str, cfg: dict) -> str:
    payload = json.dumps({"command": command, "config": cfg}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


# --- output helpers ---------------------------------------------------------------------------

class RunWriter:
    """Collects emitted files so that the manifest lists every write."""

    def __init__(self, out: Path):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []

    def write_text(self, name: str, text: str) -> Path:
        path = self.out / name
        path.write_text(text)
        self.files.append(name)
        return path

    def write_csv(self, name: str, header: list[str], rows) -> Path:
        lines = [",".join(header)]
        for row in rows:
            lines.append(",".join(_csv_cell(v) for v in row))
        return self.write_text(name, "\n".join(lines) + "\n")

    def write_json(self, name: str, obj) -> Path:
        return self.write_text(name, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")

    def manifest(self, command: str, cfg: dict, started: str, summary: dict, status: str = "ok") -> dict:
        files = []
        for name in self.files:
            data = (self.out / name).read_bytes()
            files.append({"name": name, "bytes": len(data), "sha256": hashlib.sha256(data).hexdigest()})
        man = {
            "schema_version": SCHEMA_VERSION, "tool": "nlsnf", "version": __version__, "command": command,
            "config": cfg, "input_sha256": _input_hash(command, cfg), "started": started,
            "finished": _now(), "status": status, "files": files, "summary": summary,
        }
        (self.out / "manifest.json").write_text(json.dumps(_jsonable(man), indent=2, sort_keys=True) + "\n")
        return man


def _csv_cell(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _record_csv(writer: RunWriter, name: str, record) -> None:
    writer.write_csv(name, record.columns(), record.rows().tolist())


# --- commands ----------------------------------------------------------------------------------

def _sim_config(c: dict) -> SimConfig:
    try:
        return SimConfig(d=int(c["d"]), p=int(c["p"]), lam=float(c["lam"]), n_grid=int(c["n_grid"]),
                         dt=float(c["dt"]), t_end=float(c["t_end"]), integrator=c["integrator"],
                         dealias=c["dealias"], sample_dt=c["sample_dt"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def cmd_simulate(cfg: dict, writer: RunWriter) -> dict:
    c = cfg["simulate"]
    sim = _sim_config(c)
    # the mass L, when given, takes precedence over the amplitude rho
    rho = math.sqrt(float(c["L"])) if c["L"] is not None else float(c["rho"])
    try:
        m = as_mode(c["m"], sim.d)
        sim.check_frequencies(rho ** 2)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    eps = float(c["eps"])
    try:
        rec = run_stability(sim, m, rho, eps, float(c["s"]), seed=cfg["seed"], k_max=c["k_max"],
                            mu_record=c["mu_record"])
    except SimulationError as exc:
        if exc.record is not None:
            _record_csv(writer, "trajectory.csv", exc.record)
        raise
    _record_csv(writer, "trajectory.csv", rec)
    scale = eps if eps > 0 else 1.0
    if c["svg"]:
        series = {"orbital_dist / eps" if eps > 0 else "orbital_dist": (rec.times, rec.orbital_dist / scale)}
        for mu in sorted(rec.super_actions)[:4]:
            series[f"super-action mu={mu} / eps^2"] = (rec.times, rec.super_actions[mu] / scale ** 2)
        writer.write_text("trajectory.svg", line_chart(series, "stability run", "t", "value", logy=True))
    m0, e0 = rec.mass[0], rec.energy[0]
    return {
        "rho": rho, "L": rho ** 2, "max_orbital_dist": float(rec.orbital_dist.max()),
        "max_orbital_dist_over_eps": float(rec.orbital_dist.max() / scale),
        "mass_rel_drift": float(np.max(np.abs(rec.mass - m0)) / abs(m0)),
        "energy_rel_drift": float(np.max(np.abs(rec.energy - e0)) / max(abs(e0), 1e-300)),
        "samples": len(rec.times),
    }


def cmd_normal_form(cfg: dict, writer: RunWriter) -> dict:
    c = cfg["normal_form"]
    try:
        p, L, d, N, ell = int(c["p"]), float(c["L"]), int(c["d"]), int(c["N_trunc"]), int(c["ell"])
        if L <= 0 or N < 1:
            raise ValueError("L must be positive and N_trunc >= 1")
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    res = build_normal_form(p, L, d, N, ell, degree_cap=c["degree_cap"], floor=float(c["floor"]),
                            exact=bool(c["exact"]), radius=c["radius"], s=float(c["s"]))
    writer.write_text("normal_form.txt", res.to_text())
    man = res.manifest()
    writer.write_json("normal_form.json", man)
    census_rows = [(k, v["resonant"], v["nonresonant"]) for k, v in sorted(res.census.items())]
    writer.write_csv("census.csv", ["degree", "resonant", "nonresonant"], census_rows)
    gen_rows = [(k + 3, g) for k, g in enumerate(man["generator_norms"])]
    writer.write_csv("generator_norms.csv", ["degree", "tame_norm"], gen_rows)
    report = pq_form_check(res.resonant_field, res.freq) if d == 1 else None
    return {"resonant_terms": len(res.resonant_field), "remainder_terms": len(res.remainder),
            "census": man["census"], "generator_norms": man["generator_norms"],
            "pq_form_ok": None if report is None else report.ok}


def _lam_code(lam: dict) -> str:
    return ";".join(f"{mu}:{c}" for mu, c in sorted(lam.items()))


def cmd_scan(cfg: dict, writer: RunWriter) -> dict:
    c = cfg["scan"]
    try:
        p, M, N, mu_max = int(c["p"]), int(c["M"]), int(c["N"]), int(c["mu_max"])
        tmpl = DivisorQuery(M, N, p, 1.0, mu_max, float(c["lam"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    header = ["L", "Lp", "min_divisor", "argmin", "N", "M", "rounding_bound"]
    if c["L"] is not None:
        L = float(c["L"])
        try:
            r = min_divisor(DivisorQuery(M, N, p, L, mu_max, float(c["lam"])))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        writer.write_csv("scan.csv", header, [(L, L ** p, r.min_divisor, _lam_code(r.argmin_lambda), N, M,
                                               r.rounding_bound)])
        return {"L": L, "min_divisor": r.min_divisor, "argmin": r.argmin_lambda,
                "enumerated_count": r.enumerated_count, "rounding_bound": r.rounding_bound}
    try:
        est = scan_L(p, float(c["L0"]), int(c["grid"]), tmpl, gammas=c["gammas"], fit_Ns=tuple(c["fit_Ns"]),
                     fail_level=float(c["fail_level"]), fit=bool(c["fit"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rows = [(float(L), float(L) ** p, float(v), _lam_code(w), N, M, "")
            for L, v, w in zip(est.L_grid, est.min_divisors, est.witnesses)]
    writer.write_csv("scan.csv", header, rows)
    thr = float(c["threshold"])
    frac = float(np.mean(est.min_divisors < thr)) if len(est.min_divisors) else 0.0
    fit = {"gamma_fit": est.gamma_fit, "tau_fit": est.tau_fit, "effective_parameter": "L^p",
           "gammas": est.gammas, "bad_fraction": est.bad_fraction, "fit_quantiles": est.fit_table,
           "excluded_L": est.excluded, "threshold": thr, "fraction_below_threshold": frac}
    writer.write_json("fit.json", fit)
    if c["svg"]:
        writer.write_text("scan.svg", line_chart({"min divisor": (est.L_grid, est.min_divisors)},
                                                 f"minimum divisor, p={p}, M={M}, N={N}", "L", "min divisor",
                                                 logy=True))
    return {"grid": len(est.L_grid), "fraction_below_threshold": frac, "gamma_fit": est.gamma_fit,
            "tau_fit": est.tau_fit, "excluded": len(est.excluded)}


def shell_super_actions(y: np.ndarray, modes) -> dict[int, float]:
    out: dict[int, float] = {}
    for m, v in zip(modes, y):
        mu = norm2(m)
        out[mu] = out.get(mu, 0.0) + abs(v) ** 2
    return dict(sorted(out.items()))


def cmd_compare(cfg: dict, writer: RunWriter) -> dict:
    """Full-PDE vs truncated normal-form super-actions from matched initial data."""
    c = cfg["compare"]
    sim = _sim_config({**DEFAULTS["simulate"], **{k: c[k] for k in ("d", "p", "n_grid", "dt", "t_end",
                                                                     "integrator")}})
    p, L, N = int(c["p"]), float(c["L"]), int(c["N_trunc"])
    try:
        sim.check_frequencies(L)
        if N > sim.n_grid // 3:
            raise ValueError("N_trunc must fit inside the dealiased grid")
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    res = build_normal_form(p, L, sim.d, N, int(c["ell"]), degree_cap=c["degree_cap"])
    space = res.space
    rho = math.sqrt(L)
    zero = (0,) * sim.d
    psi0 = initial_datum(sim, zero, rho, float(c["eps"]), float(c["s"]), cfg["seed"], k_max=N)

    def x_vector(psi: SpectralField) -> np.ndarray:
        x = to_x(reduce(pde_to_u(psi)).v, p, L)
        inside = SpectralField(x.d, x.n_lat, {k: v for k, v in x.items() if k in space.index})
        return field_to_vector(inside, space)

    x0 = x_vector(psi0)
    nsteps = int(round(sim.t_end / sim.dt))
    samples = max(1, int(c["samples"]))
    every = max(1, nsteps // samples)
    stepper = Stepper(sim)
    arr = psi0.to_array(sim.n_grid)
    if stepper.mask is not None:
        arr = arr * stepper.mask
    times, pde_sa = [0.0], [shell_super_actions(x0, space.modes)]
    done = 0
    while done < nsteps:
        k = min(every, nsteps - done)
        arr = stepper.advance(arr, k)
        done += k
        if not np.all(np.isfinite(arr)):
            raise SimulationError(f"non-finite PDE state at t={done * sim.dt}")
        psi = SpectralField.from_array(arr, psi0.n_lat)
        times.append(done * sim.dt)
        pde_sa.append(shell_super_actions(x_vector(psi), space.modes))
    ode_dt = float(c["ode_dt"])
    ratio = max(1, int(round(every * sim.dt / ode_dt)))
    rec = integrate_truncated(res, x0, sim.t_end, every * sim.dt / ratio, bool(c["include_remainder"]),
                              s=float(c["s"]), sample_every=ratio)
    shells = sorted(pde_sa[0])
    n = min(len(times), len(rec.times))
    rows, div = [], []
    for i in range(n):
        a = [pde_sa[i][mu] for mu in shells]
        b = [float(rec.super_actions[mu][i]) for mu in shells]
        d = max(abs(u - v) for u, v in zip(a, b))
        div.append(d)
        rows.append([times[i], d] + a + b)
    header = ["time", "divergence"] + [f"pde_sa_mu{mu}" for mu in shells] + [f"model_sa_mu{mu}" for mu in shells]
    writer.write_csv("compare.csv", header, rows)
    if c["svg"]:
        writer.write_text("compare.svg", line_chart({"max shell divergence": (times[:n], div)},
                                                    "PDE vs truncated model", "t", "divergence", logy=True))
    pde_drift = max(abs(pde_sa[i][mu] - pde_sa[0][mu]) for i in range(n) for mu in shells)
    model_drift = max(abs(float(rec.super_actions[mu][i]) - float(rec.super_actions[mu][0]))
                      for i in range(n) for mu in shells)
    return {"max_divergence": max(div), "pde_super_action_drift": pde_drift,
            "model_super_action_drift": model_drift, "shells": shells}


def cmd_report(cfg: dict, writer: RunWriter) -> dict:
    runs = cfg["report"]["runs"]
    if not isinstance(runs, list) or not runs:
        raise ConfigError("report needs a non-empty list of run directories (report.runs or --run)")
    lines = ["# nlsnf run report", "", "| run | command | status | key results |", "|---|---|---|---|"]
    entries = []
    for r in runs:
        path = Path(r) / "manifest.json"
        if not path.exists():
            raise ConfigError(f"no manifest in {r}")
        man = json.loads(path.read_text())
        summ = man.get("summary", {})
        keys = ", ".join(f"{k}={_short(v)}" for k, v in sorted(summ.items()) if not isinstance(v, (dict, list)))
        lines.append(f"| {r} | {man.get('command')} | {man.get('status')} | {keys} |")
        entries.append({"run": str(r), "command": man.get("command"), "status": man.get("status"),
                        "summary": summ})
    writer.write_text("report.md", "\n".join(lines) + "\n")
    writer.write_json("report.json", entries)
    return {"runs": len(entries)}


def _short(v) -> str:
    return f"{v:.4g}" if isinstance(v, float) else str(v)


COMMANDS = {"simulate": cmd_simulate, "normal-form": cmd_normal_form, "scan": cmd_scan,
            "compare": cmd_compare, "report": cmd_report}


# --- entry point ----------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nlsnf", description="Plane-wave stability experiments for NLS on tori.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("config", nargs="?", help="JSON configuration file")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=None)
        if name == "report":
            sp.add_argument("--run", action="append", default=[], help="run directory to summarize")
    return ap


def run(command: str, cfg: dict, out) -> dict:
    """Execute a resolved configuration and write the manifest; returns it."""
    writer = RunWriter(Path(out))
    started = _now()
    summary = COMMANDS[command](cfg, writer)
    return writer.manifest(command, cfg, started, summary)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    started = _now()
    try:
        doc = json.loads(Path(args.config).read_text()) if args.config else None
        overrides = list(args.set)
        if args.command == "report" and args.run:
            overrides.append("runs=" + json.dumps(args.run))
        cfg = resolve_config(args.command, doc, overrides, args.seed)
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    writer = RunWriter(Path(args.out))
    try:
        summary = COMMANDS[args.command](cfg, writer)
    except (ConfigError, ValueError, TypeError, KeyError) as exc:
        # lattice and degree budget overflows are ValueErrors: the request itself is too large
        writer.manifest(args.command, cfg, started, {"error": str(exc)}, status="config-error")
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NearResonanceError as exc:
        writer.manifest(args.command, cfg, started, {"lambda": exc.lambda_vector, "divisor": exc.divisor,
                                                     "L": exc.L, "floor": exc.floor}, status="near-resonance")
        print(f"near resonance: {exc}", file=sys.stderr)
        return EXIT_RESONANCE
    except (SimulationError, FloatingPointError, ArithmeticError, RuntimeError) as exc:
        writer.manifest(args.command, cfg, started, {"error": str(exc)}, status="numerical-failure")
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    man = writer.manifest(args.command, cfg, started, summary)
    print(json.dumps(_jsonable(man["summary"]), sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""Command-line front end: ``delaykit <command> CONFIG [--set key=value ...]``.

Every command reads a flat ``key = value`` configuration (see
:mod:`delaykit.config`) and writes CSV or JSON data for plotting. Exit codes:
0 success, 1 usage or configuration error, 2 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import functools
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Optional, Sequence

import numpy as np

from .analysis import (
    characteristic_roots,
    closed_curve_gap,
    poincare_trace,
    scalar_threshold_characteristic,
    stability_sweep,
    steady_states,
    twostatedep_characteristic,
)
from .config import Lcg64, RunConfig, load_config
from .convergence import convergence_row, fill_slopes, fitted_slope
from .errors import ConfigError, DelayKitError, UnsupportedModel
from .fcrk import BreakpointPolicy, FixedStep, integrate
from .threshold import audit_problem

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2

CHARACTERISTIC_MODELS = ("scalar_threshold", "twostatedep")


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def fmt(x) -> str:
    """Round-trip decimal form of a float (17 significant digits)."""
    return "{:.17g}".format(float(x))


def header_lines(command: str, cfg: RunConfig, extra: Sequence[str] = ()) -> list:
    lines = [
        f"delaykit {command}",
        f"model={cfg.get('model')} method={cfg.method} detection={'on' if cfg.detection else 'off'}",
        f"config_sha256={cfg.sha256()}",
        "units: times and delays in model time units; states in model units",
    ]
    return lines + list(extra)


def write_csv(path: str, header: Sequence[str], columns: Sequence[str], rows) -> None:
    """Write ``#`` header lines, a column line and rows; ``-`` means stdout."""
    buf = io.StringIO()
    for line in header:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(x) if isinstance(x, (float, np.floating)) else x for x in row])
    _emit(path, buf.getvalue())


def write_json(path: str, payload: dict) -> None:
    _emit(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _emit(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _sidecar(cfg: RunConfig, key: str, suffix: str) -> Optional[str]:
    """Explicit path for ``key``, else ``output`` plus ``suffix`` when writing to a file."""
    path = cfg.get(key)
    if path:
        return path
    out = cfg.get("output")
    return None if out == "-" else out + suffix


def _note(text: str) -> None:
    sys.stderr.write(text + "\n")


def _mapper(cfg: RunConfig):
    """``map`` or a process pool's ordered ``map`` depending on ``jobs``."""
    jobs = int(cfg.get("jobs"))
    if jobs <= 1:
        return map, None
    pool = ProcessPoolExecutor(max_workers=jobs)
    return pool.map, pool


def _run_mapped(cfg: RunConfig, func, items) -> list:
    mapper, pool = _mapper(cfg)
    try:
        return list(mapper(func, items))
    finally:
        if pool is not None:
            pool.shutdown()


# ---------------------------------------------------------------------------
# simulate / audit
# ---------------------------------------------------------------------------


def _solve(cfg: RunConfig):
    entry = cfg.entry()
    params = cfg.params()
    h = cfg.get("h")
    if h is None:
        raise ConfigError("missing required key 'h' (fixed step size)")
    problem = entry.factory(params)
    sol = integrate(problem, cfg.method, FixedStep(h), BreakpointPolicy(cfg.detection))
    return problem, sol


def column_names(problem) -> list:
    """``t`` then one name per solution component; threshold slots are labelled."""
    names = [f"u{i + 1}" for i in range(problem.dimension)]
    for k, slot in enumerate(problem.meta.get("thresholds", [])):
        label = slot.spec.name or f"tau{k + 1}"
        names[slot.tau_index] = f"delay_{label}"
        if slot.integral_index is not None:
            names[slot.integral_index] = f"integral_{label}"
    return ["t"] + names


def _audit_rows(reports) -> tuple:
    columns = ["t"]
    for k, _ in enumerate(reports):
        columns += [f"residual_{k + 1}", f"delay_{k + 1}"]
    times = reports[0].times
    rows = []
    for i, t in enumerate(times):
        row = [float(t)]
        for rep in reports:
            row += [float(rep.residuals[i]), float(rep.taus[i])]
        rows.append(row)
    return columns, rows


def cmd_simulate(cfg: RunConfig) -> int:
    problem, sol = _solve(cfg)
    ts = sol.dense_times(int(cfg.get("samples_per_step")))
    values = sol(ts)
    extra = [f"h={fmt(cfg.get('h'))} steps={sol.n_steps} stage_retries={sol.stage_retries}"]
    write_csv(
        cfg.get("output"), header_lines("simulate", cfg, extra), column_names(problem),
        ([float(t)] + [float(x) for x in row] for t, row in zip(ts, values)),
    )
    summary = {
        "model": cfg.get("model"),
        "method": cfg.method,
        "config_sha256": cfg.sha256(),
        "breaking_points": [
            {"xi": b.location, "order": b.order, "tier": b.tier, "delay": b.delay}
            for b in sol.breaking_points
        ],
    }
    reports = audit_problem(sol)
    if reports:
        summary["max_threshold_residual"] = max(r.max_residual for r in reports)
        audit_path = _sidecar(cfg, "audit_output", ".audit.csv")
        if audit_path is not None:
            columns, rows = _audit_rows(reports)
            write_csv(audit_path, header_lines("audit", cfg), columns, rows)
        _note(f"max threshold residual: {fmt(summary['max_threshold_residual'])}")
    bp_path = _sidecar(cfg, "breakpoints_output", ".breakpoints.json")
    if bp_path is not None:
        write_json(bp_path, summary)
    return EXIT_OK


def cmd_audit(cfg: RunConfig) -> int:
    problem, sol = _solve(cfg)
    reports = audit_problem(sol)
    if not reports:
        raise UnsupportedModel(f"model {cfg.get('model')!r} has no threshold delay to audit")
    columns, rows = _audit_rows(reports)
    worst = max(r.max_residual for r in reports)
    write_csv(cfg.get("output"), header_lines("audit", cfg, [f"max_residual={fmt(worst)}"]), columns, rows)
    _note(f"max threshold residual: {fmt(worst)}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# converge
# ---------------------------------------------------------------------------


def _converge_worker(name: str, params: dict, method: str, anchor: float, detection: bool, tracked, per_step: int, job):
    from .models import CATALOG

    n, lam = job
    entry = CATALOG[name]
    exact = entry.exact_solution(params)
    return convergence_row(entry.factory(params), exact, method, n, lam, anchor, detection, tracked, per_step)


def placement_fractions(cfg: RunConfig, count: int) -> list:
    """One ``lambda`` per N: the configured constant or seeded LCG draws."""
    lam = cfg.get("lambda")
    if lam is None:
        raise ConfigError("missing required key 'lambda' (a fraction in [0, 1) or 'random')")
    if lam == "random":
        rng = Lcg64(cfg.get("seed"))
        return [rng.random() for _ in range(count)]
    return [float(lam)] * count


def cmd_converge(cfg: RunConfig) -> int:
    entry = cfg.entry()
    if entry.exact_solution is None:
        raise UnsupportedModel(f"model {entry.name!r} has no exact solution for convergence studies")
    params = cfg.params()
    ns = cfg.get("n")
    if not ns:
        raise ConfigError("missing required key 'n' (list of step counts)")
    points = entry.exact_breakpoints(params) if entry.exact_breakpoints else []
    anchor = cfg.get("anchor")
    if anchor is None:
        if not points:
            raise ConfigError("missing required key 'anchor' (no exact breaking points known)")
        anchor = max(x for x, _ in points)
    tracked = anchor if any(abs(x - anchor) <= 1e-14 * max(1.0, abs(x)) for x, _ in points) else None
    lams = placement_fractions(cfg, len(ns))
    worker = functools.partial(
        _converge_worker, entry.name, params, cfg.method, anchor, cfg.detection, tracked,
        int(cfg.get("samples_per_step")),
    )
    rows = _run_mapped(cfg, worker, list(zip(ns, lams)))
    fill_slopes(rows)
    slope = fitted_slope([r.h for r in rows], [r.err for r in rows])
    xi_slope = fitted_slope([r.h for r in rows], [r.xi_err for r in rows])
    lam_text = f"lambda=random seed={cfg.get('seed')} rng=lcg64" if cfg.get("lambda") == "random" else f"lambda={fmt(lams[0])}"
    extra = [lam_text, f"anchor={fmt(anchor)}", f"fitted_slope={fmt(slope)} fitted_xi_slope={fmt(xi_slope)}"]
    write_csv(
        cfg.get("output"), header_lines("converge", cfg, extra),
        ["N", "lambda", "h", "err", "slope", "xi", "xi_err", "xi_slope", "steps"],
        ([r.n, r.lam, r.h, r.err, r.slope, r.xi, r.xi_err, r.xi_slope, r.steps] for r in rows),
    )
    _note(f"{cfg.method}: fitted slope {slope:.3f}, breaking point slope {xi_slope:.3f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# characteristic roots and steady states
# ---------------------------------------------------------------------------


def _swept_params(params: dict, key: Optional[str], value: Optional[float]) -> dict:
    if key is None:
        return params
    if key not in params:
        raise ConfigError(f"sweep.param {key!r} is not a parameter; known: {sorted(params)}")
    return dict(params, **{key: value})


def characteristic_at(model: str, params: dict, key: Optional[str], differentiated: bool, branch: int, value):
    """Characteristic function of ``model`` at the swept parameter value.

    For several steady states, ``branch`` counts from the smallest; a sweep
    value with fewer states uses the largest one.
    """
    p = _swept_params(params, key, value)
    if model == "twostatedep":
        return twostatedep_characteristic(p)
    states = steady_states(model, p)
    if not states:
        raise DelayKitError(f"no steady state at {key}={value!r}")
    u_star = states[min(branch, len(states) - 1)].u
    return scalar_threshold_characteristic(p, u_star, differentiated)


def _roots_worker(factory, box, value):
    cf = factory(value)
    rep = characteristic_roots(cf, box)
    return rep.roots, rep.residuals, rep.rightmost(exclude=cf.spurious), tuple(cf.spurious)


def _sweep_values(cfg: RunConfig, params: dict) -> tuple:
    key = cfg.get("sweep.param")
    values = cfg.get("sweep.values")
    if key is None:
        return None, [math.nan]
    if not values:
        raise ConfigError("sweep.param needs sweep.values")
    _swept_params(params, key, values[0])
    return key, values


def cmd_char_roots(cfg: RunConfig) -> int:
    model = cfg.require("model")
    cfg.entry()
    if model not in CHARACTERISTIC_MODELS:
        raise UnsupportedModel(f"no characteristic function for {model!r}; supported: {', '.join(CHARACTERISTIC_MODELS)}")
    params = cfg.params()
    key, values = _sweep_values(cfg, params)
    box = tuple(cfg.get("box"))
    factory = functools.partial(
        characteristic_at, model, params, key, bool(cfg.get("differentiated")), int(cfg.get("branch"))
    )
    results = _run_mapped(cfg, functools.partial(_roots_worker, factory, box), values)
    rows = []
    for value, (roots, residuals, _, spurious) in zip(values, results):
        for z, res in zip(roots, residuals):
            flag = int(any(abs(z - s) <= 1e-8 for s in spurious))
            rows.append([value, float(z.real), float(z.imag), float(res), flag])
    crossings = []
    if key is not None and len(values) > 1:
        precomputed = [r[2] for r in results]
        _, crossings = stability_sweep(factory, values, box, mapper=lambda _f, _v: precomputed)
    extra = [f"box={','.join(fmt(b) for b in box)} sweep={key or 'none'}"]
    extra += [f"hopf {key}={fmt(c.parameter)} omega={fmt(c.omega)} direction={c.direction:+d}" for c in crossings]
    write_csv(cfg.get("output"), header_lines("char-roots", cfg, extra), ["parameter", "re", "im", "residual", "spurious"], rows)
    summary_path = _sidecar(cfg, "summary_output", ".summary.json")
    if summary_path is not None:
        write_json(summary_path, {
            "config_sha256": cfg.sha256(),
            "sweep": key,
            "rows": [
                {
                    "parameter": None if math.isnan(v) else v,
                    "rightmost": None if r[2] is None else [float(r[2].real), float(r[2].imag)],
                    "stable": bool(r[2] is None or r[2].real < 0.0),
                }
                for v, r in zip(values, results)
            ],
            "hopf": [{"parameter": c.parameter, "omega": c.omega, "direction": c.direction} for c in crossings],
        })
    for c in crossings:
        _note(f"Hopf crossing at {key}={c.parameter:.10g} (omega={c.omega:.6g})")
    return EXIT_OK


def cmd_steady_states(cfg: RunConfig) -> int:
    model = cfg.require("model")
    cfg.entry()
    params = cfg.params()
    key, values = _sweep_values(cfg, params)
    box = tuple(cfg.get("box"))
    rows = []
    width = 0
    for value in values:
        p = _swept_params(params, key, value)
        try:
            states = steady_states(model, p)
        except ValueError as exc:
            raise UnsupportedModel(str(exc)) from None
        for idx, st in enumerate(states):
            verdict = ["", ""]
            if model in CHARACTERISTIC_MODELS:
                cf = (twostatedep_characteristic(p) if model == "twostatedep"
                      else scalar_threshold_characteristic(p, st.u))
                right = characteristic_roots(cf, box).rightmost(exclude=cf.spurious)
                verdict = [math.nan, "stable"] if right is None else [
                    float(right.real), "stable" if right.real < 0.0 else "unstable"
                ]
            width = max(width, len(st.state))
            rows.append((value, idx, st, verdict))
    dwidth = max([len(r[2].delays) for r in rows] + [0])
    columns = ["parameter", "index"] + [f"u{i + 1}" for i in range(width)]
    columns += [f"delay{i + 1}" for i in range(dwidth)] + ["rightmost_re", "verdict"]
    out = []
    for value, idx, st, verdict in rows:
        out.append([value, idx] + [float(x) for x in st.state] + [float(x) for x in st.delays] + verdict)
    write_csv(cfg.get("output"), header_lines("steady-states", cfg, [f"sweep={key or 'none'}"]), columns, out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# poincare
# ---------------------------------------------------------------------------


def cmd_poincare(cfg: RunConfig) -> int:
    params = cfg.params()
    a1, a2 = cfg.get("a1"), cfg.get("a2")
    if a1 is None or a2 is None:
        if "a1" in params and "a2" in params:
            a1 = float(params["a1"]) if a1 is None else a1
            a2 = float(params["a2"]) if a2 is None else a2
        else:
            raise ConfigError("missing required keys 'a1' and 'a2' (section delays)")
    problem, sol = _solve(cfg)
    trace = poincare_trace(sol, a1, a2, problem.t0 + float(cfg.get("transient")), int(cfg.get("component")))
    pts = trace.points
    extra = [f"a1={fmt(a1)} a2={fmt(a2)} transient={fmt(cfg.get('transient'))} crossings={len(trace)}"]
    write_csv(
        cfg.get("output"), header_lines("poincare", cfg, extra), ["t", "u_delayed_a1", "u_delayed_a2"],
        ([float(t), float(p[0]), float(p[1])] for t, p in zip(trace.times, pts)),
    )
    summary_path = _sidecar(cfg, "summary_output", ".summary.json")
    if summary_path is not None:
        write_json(summary_path, {
            "config_sha256": cfg.sha256(),
            "crossings": len(trace),
            "min_distance_to_origin": float(np.min(np.hypot(pts[:, 0], pts[:, 1]))) if len(trace) else None,
            "max_angular_gap": closed_curve_gap(pts) if len(trace) > 1 else None,
        })
    _note(f"{len(trace)} section crossings")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

HELP = {
    "simulate": "integrate a model and write the dense solution",
    "converge": "step-size study against the exact solution",
    "char-roots": "characteristic roots along a parameter sweep",
    "steady-states": "steady states with a stability verdict",
    "poincare": "section crossings in delayed coordinates",
    "audit": "residual of the threshold integral condition",
}

COMMANDS = {
    "simulate": cmd_simulate,
    "converge": cmd_converge,
    "char-roots": cmd_char_roots,
    "steady-states": cmd_steady_states,
    "poincare": cmd_poincare,
    "audit": cmd_audit,
}


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with the configuration code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="delaykit", description="Delay differential equation experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("config", help="path to a key = value configuration file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a configuration key")
        p.add_argument("--output", "-o", help="shorthand for --set output=PATH")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = list(args.set) + ([f"output={args.output}"] if args.output else [])
    try:
        cfg = load_config(args.config, overrides)
        return COMMANDS[args.command](cfg)
    except BrokenPipeError:
        sys.stdout = None
        return EXIT_OK
    except ConfigError as exc:
        _note(f"configuration error: {exc}")
        return EXIT_CONFIG
    except DelayKitError as exc:
        _note(f"solver error: {exc}")
        return EXIT_SOLVER
    except (KeyError, ValueError) as exc:
        _note(f"configuration error: {exc}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

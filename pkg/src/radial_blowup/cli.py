"""Command-line driver: ``run``, ``sweep`` and ``check``.

Scenarios are INI files.  ``run`` executes one scenario and writes
``trace.csv``, ``blowup_curve.csv`` (when the physical solver is enabled),
``manifest.json`` and two SVG line plots into the run directory.  ``sweep``
runs the cartesian product of the values listed in a ``[sweep]`` section,
concurrently, and writes ``sweep.csv``.  ``check`` recomputes the pass/fail
predicates from the CSV files of a finished run.

Exit codes: 0 all checks pass, 1 a check failed, 2 configuration error.
The worker count for sweeps is read from ``RADIAL_BLOWUP_WORKERS``.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import itertools
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import (
    ShrinkingSetSpec,
    fit_decay,
    observed_envelope,
    parameter_derivative_audit,
    shrinking_set_check,
)
from .errors import ConfigError
from .physical import PhysicalConfig, blowup_curve
from .selfsim import SelfSimConfig, Trace, TraceRecord, evolve, shoot_initial_parameters
from .solitons import SolitonParams, kappa_star

log = logging.getLogger(__name__)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
WORKERS_ENV = "RADIAL_BLOWUP_WORKERS"
TRACE_COLUMNS = ("s", "d", "nu", "q_norm_H", "phi_qq", "h", "orth0", "orth1")
CURVE_COLUMNS = ("r", "T", "fit_quality")

# key -> (type, default); None default means required
SCHEMA = {
    "scenario": {"name": (str, None), "seed": (int, 0), "perturbation": (float, 0.0)},
    "selfsim": {
        "p": (float, 3.0),
        "N": (int, 3),
        "r0": (float, 1.0),
        "s0": (float, 3.0),
        "s_end": (float, 8.0),
        "ds": (float, 1e-3),
        "n": (int, 48),
        "sample_every": (int, 100),
        "d_hat0": (float, 0.0),
        "nu0": (float, 0.0),
        "shoot": (bool, True),
        "eta": (float, math.nan),
        "spectral_filter": (bool, False),
    },
    "diagnostics": {
        "delta": (float, 0.5),
        "A": (float, math.nan),
        "fit_from_peak": (bool, True),
        "min_r2": (float, 0.95),
        "q_floor": (float, 1e-10),
    },
    "checks": {
        "decay": (bool, True),
        "shrinking_set": (bool, True),
        "q_norm_max": (float, math.nan),
        "noncharacteristic": (bool, True),
    },
    "physical": {
        "enabled": (bool, False),
        "eps0_factor": (float, 0.25),
        "dr_factor": (float, 2e-3),
        "offset_factor": (float, 0.05),
        "amp": (float, 0.05),
    },
}
SWEEP_KEYS = {"d_hat0": float, "s0": float, "n": int, "ds": float}


def _parse_value(kind, raw: str, where: str):
    try:
        if kind is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return kind(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {kind.__name__}") from exc


def load_config(path) -> tuple[dict, dict]:
    """Parse and validate a scenario file; return ``(settings, sweep_lists)``."""
    parser = configparser.ConfigParser()
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    unknown = set(parser.sections()) - set(SCHEMA) - {"sweep"}
    if unknown:
        raise ConfigError(f"unknown sections: {sorted(unknown)}")
    settings: dict = {}
    for sec, keys in SCHEMA.items():
        present = parser[sec] if parser.has_section(sec) else {}
        extra = set(present) - set(keys)
        if extra:
            raise ConfigError(f"[{sec}] unknown keys: {sorted(extra)}")
        vals = {}
        for key, (kind, default) in keys.items():
            if key in present:
                vals[key] = _parse_value(kind, present[key], f"[{sec}] {key}")
            elif default is None:
                raise ConfigError(f"[{sec}] missing required key {key!r}")
            else:
                vals[key] = default
        settings[sec] = vals
    sweep = {}
    if parser.has_section("sweep"):
        for key, raw in parser["sweep"].items():
            if key not in SWEEP_KEYS:
                raise ConfigError(f"[sweep] unknown key {key!r}")
            items = [x for x in raw.replace(",", " ").split() if x]
            if not items:
                raise ConfigError(f"[sweep] {key} lists no values")
            sweep[key] = [_parse_value(SWEEP_KEYS[key], x, f"[sweep] {key}") for x in items]
    validate(settings)
    return settings, sweep


def _selfsim_config(settings: dict) -> SelfSimConfig:
    ss = settings["selfsim"]
    return SelfSimConfig(
        p=ss["p"],
        N=ss["N"],
        r0=ss["r0"],
        s0=ss["s0"],
        s_end=ss["s_end"],
        ds=ss["ds"],
        n=ss["n"],
        sample_every=ss["sample_every"],
        d_hat0=ss["d_hat0"],
        eta=None if math.isnan(ss["eta"]) else ss["eta"],
        spectral_filter=ss["spectral_filter"],
    )


def _physical_config(settings: dict, d0: float, nu0: float) -> PhysicalConfig:
    ss, ph = settings["selfsim"], settings["physical"]
    T0 = math.exp(-ss["s0"])
    return PhysicalConfig(
        p=ss["p"],
        N=ss["N"],
        r0=ss["r0"],
        T0=T0,
        eps0=ph["eps0_factor"] * T0,
        d0=d0,
        nu0=nu0,
        dr=ph["dr_factor"] * T0,
        amp=ph["amp"],
    )


def validate(settings: dict) -> None:
    """Construct every config object once so that errors surface before output."""
    ss = settings["selfsim"]
    _selfsim_config(settings)
    if not SolitonParams.is_admissible(ss["d_hat0"], ss["nu0"]):
        raise ConfigError("(d_hat0, nu0) is not an admissible soliton parameter")
    dg = settings["diagnostics"]
    if not 0.0 < dg["delta"] < 1.0:
        raise ConfigError("[diagnostics] delta must lie in (0, 1)")
    if not (math.isnan(dg["A"]) or dg["A"] > 0.0):
        raise ConfigError("[diagnostics] A must be positive")
    if settings["scenario"]["perturbation"] < 0.0:
        raise ConfigError("[scenario] perturbation must be nonnegative")
    if settings["physical"]["enabled"]:
        ph = settings["physical"]
        if not (ph["eps0_factor"] > 0 and ph["dr_factor"] > 0 and ph["offset_factor"] > 0):
            raise ConfigError("[physical] factors must be positive")
        _physical_config(settings, ss["d_hat0"], ss["nu0"])


@dataclass
class RunManifest:
    scenario: str
    config: dict
    version: str
    outputs: list[str] = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(self.checks.values())

    def to_json(self) -> str:
        d = asdict(self)
        d["passed"] = self.passed
        return json.dumps(_jsonable(d), indent=2, sort_keys=True) + "\n"


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _fmt(x: float) -> str:
    return "%.17g" % x


def write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, float) else v for v in row])


def svg_line_plot(x, y, title: str, xlabel: str, ylabel: str, width: int = 640, height: int = 400) -> str:
    """Polyline plot with a framed axis box and min/max tick labels."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = np.isfinite(x) & np.isfinite(y)
    x, y = x[ok], y[ok]
    ml, mr, mt, mb = 70, 20, 40, 50
    pw, ph = width - ml - mr, height - mt - mb
    if len(x) == 0:
        x0 = x1 = y0 = y1 = 0.0
    else:
        x0, x1, y0, y1 = x.min(), x.max(), y.min(), y.max()
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    px = ml + (x - x0) / (x1 - x0) * pw
    py = mt + ph - (y - y0) / (y1 - y0) * ph
    pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
    return "\n".join(
        [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">',
            f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
            f'<text x="{width / 2:.0f}" y="22" text-anchor="middle" font-size="14">{title}</text>',
            f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
            f'<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{pts}"/>',
            f'<text x="{ml}" y="{mt + ph + 16}" text-anchor="middle">{x0:.4g}</text>',
            f'<text x="{ml + pw}" y="{mt + ph + 16}" text-anchor="middle">{x1:.4g}</text>',
            f'<text x="{ml - 6}" y="{mt + ph}" text-anchor="end">{y0:.4g}</text>',
            f'<text x="{ml - 6}" y="{mt + 10}" text-anchor="end">{y1:.4g}</text>',
            f'<text x="{ml + pw / 2:.0f}" y="{height - 12}" text-anchor="middle">{xlabel}</text>',
            f'<text x="16" y="{mt + ph / 2:.0f}" text-anchor="middle" transform="rotate(-90 16 {mt + ph / 2:.0f})">{ylabel}</text>',
            "</svg>",
            "",
        ]
    )


def _initial_state(settings: dict, cfg: SelfSimConfig, params: SolitonParams):
    state = kappa_star(params, cfg.grid())
    amp = settings["scenario"]["perturbation"]
    if amp > 0.0:
        # smooth seeded perturbation: low-degree polynomial in y
        rng = np.random.default_rng(settings["scenario"]["seed"])
        y = cfg.grid().nodes
        c = rng.standard_normal((2, 4)) * amp
        state = state + cfg.grid().pair(np.polyval(c[0], y), np.polyval(c[1], y))
    return state


def evaluate_checks(trace: Trace, settings: dict, curve_rows=None, slope=None, ratio=None) -> tuple[dict, dict]:
    """Pass/fail predicates and the numbers they are based on."""
    ck, dg = settings["checks"], settings["diagnostics"]
    checks: dict = {"trace_complete": trace.ok and len(trace) > 0}
    results: dict = {"failure": trace.failure, "samples": len(trace), "s_bar": trace.s_bar}
    if not len(trace):
        return checks, results
    qmax = float(np.max(trace.q_norm))
    results["q_norm_max"] = qmax
    if not math.isnan(ck["q_norm_max"]):
        checks["q_norm_max"] = qmax <= ck["q_norm_max"]
    if ck["decay"] and qmax <= dg["q_floor"]:
        # the run never leaves the soliton manifold beyond roundoff
        results["decay"] = {"at_floor": True, "q_floor": dg["q_floor"]}
        checks["decay"] = True
    elif ck["decay"]:
        try:
            fit = fit_decay(trace, "q_norm_sq", from_peak=dg["fit_from_peak"])
            results["decay"] = asdict(fit)
            checks["decay"] = fit.delta_est > 0.0 and fit.r2 >= dg["min_r2"]
        except ValueError as exc:
            results["decay"] = str(exc)
            checks["decay"] = False
    if ck["shrinking_set"]:
        A = dg["A"] if not math.isnan(dg["A"]) else max(2.0 * observed_envelope(trace, dg["delta"]), 1e-300)
        res = shrinking_set_check(trace, ShrinkingSetSpec(A, dg["delta"], trace.s0, trace.d_hat0))
        results["shrinking_set"] = {"A": A, "delta": dg["delta"], **asdict(res)}
        checks["shrinking_set"] = res.inside
    if len(trace) >= 3:
        results["parameter_audit_max_ratio"] = parameter_derivative_audit(trace).max_ratio
    if curve_rows is not None and ck["noncharacteristic"]:
        r = np.array([row[0] for row in curve_rows])
        T = np.array([row[1] for row in curve_rows])
        lip = bool(np.all(np.abs(np.diff(T)) <= np.abs(np.diff(r)) + 1e-3))
        results["blowup"] = {"slope_at_r0": slope, "noncharacteristic_ratio": ratio, "lipschitz": lip}
        checks["noncharacteristic"] = bool(np.all(np.isfinite(T)) and abs(slope) < 1.0 and ratio < 1.0 and lip)
    return checks, results


def run_scenario(config_path, out_dir=None, settings: dict | None = None) -> RunManifest:
    """Run one scenario and persist its outputs.

    Configuration problems raise :class:`ConfigError` before anything is
    written; failures of the numerical pipeline are recorded in the manifest.
    """
    if settings is None:
        settings, _ = load_config(config_path)
    name = settings["scenario"]["name"]
    out = Path(out_dir) if out_dir is not None else Path("runs") / name
    cfg = _selfsim_config(settings)
    ss = settings["selfsim"]
    manifest = RunManifest(scenario=name, config=settings, version=__version__)
    out.mkdir(parents=True, exist_ok=True)
    try:
        d0, nu0 = ss["d_hat0"], ss["nu0"]
        if ss["shoot"]:
            sh = shoot_initial_parameters(cfg, ss["d_hat0"])
            manifest.results["shooting"] = asdict(sh)
            d0, nu0 = sh.d0, sh.nu0
        params = SolitonParams(d0, nu0)
        manifest.results["initial_params"] = {"d0": d0, "nu0": nu0}
        trace = evolve(_initial_state(settings, cfg, params), cfg, init_params=params)
        write_csv(out / "trace.csv", TRACE_COLUMNS, ([getattr(r, c) for c in TRACE_COLUMNS] for r in trace.records))
        manifest.outputs.append("trace.csv")
        (out / "q_norm.svg").write_text(
            svg_line_plot(trace.s, np.log10(np.maximum(trace.q_norm, 1e-300)), f"{name}: log10 ||q||_H", "s", "log10 ||q||_H"),
            encoding="utf-8",
        )
        manifest.outputs.append("q_norm.svg")
        curve_rows = slope = ratio = None
        if settings["physical"]["enabled"]:
            pc = _physical_config(settings, d0, nu0)
            h = settings["physical"]["offset_factor"] * pc.T0
            curve = blowup_curve(pc, [pc.r0 - h, pc.r0, pc.r0 + h])
            curve_rows = [(float(a), float(b), float(c)) for a, b, c in zip(curve.r, curve.T, curve.fit_quality)]
            slope, ratio = curve.slope_at_r0, curve.noncharacteristic_ratio
            manifest.results["blowup_T_r0"] = curve.T_r0
            write_csv(out / "blowup_curve.csv", CURVE_COLUMNS, curve_rows)
            manifest.outputs.append("blowup_curve.csv")
            (out / "blowup_curve.svg").write_text(
                svg_line_plot(curve.r, curve.T, f"{name}: blow-up curve", "r", "T(r)"), encoding="utf-8"
            )
            manifest.outputs.append("blowup_curve.svg")
        manifest.checks, res = evaluate_checks(trace, settings, curve_rows, slope, ratio)
        manifest.results.update(res)
    except Exception as exc:  # recorded, reported through the exit status
        log.exception("scenario %s failed", name)
        manifest.error = f"{type(exc).__name__}: {exc}"
    manifest.outputs.append("manifest.json")
    (out / "manifest.json").write_text(manifest.to_json(), encoding="utf-8")
    return manifest


def _trace_from_csv(path: Path, s0: float, d_hat0: float) -> Trace:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    recs = [TraceRecord(**{c: float(row[c]) for c in TRACE_COLUMNS}) for row in rows]
    return Trace(records=recs, s0=s0, d_hat0=d_hat0)


def check_run(run_dir) -> tuple[int, dict]:
    """Recompute the checks of a finished run from its CSV files."""
    run_dir = Path(run_dir)
    try:
        manifest = json.loads((run_dir / "manifest.json").read_text(encoding="utf-8"))
        settings = manifest["config"]
        for sec, keys in SCHEMA.items():
            for key, (kind, default) in keys.items():
                if settings[sec].get(key) is None:
                    settings[sec][key] = default
        trace = _trace_from_csv(run_dir / "trace.csv", settings["selfsim"]["s0"], settings["selfsim"]["d_hat0"])
        curve_rows = slope = ratio = None
        if settings["physical"]["enabled"]:
            with open(run_dir / "blowup_curve.csv", newline="", encoding="utf-8") as fh:
                curve_rows = [tuple(float(row[c]) for c in CURVE_COLUMNS) for row in csv.DictReader(fh)]
            slope = manifest["results"]["blowup"]["slope_at_r0"]
            ratio = manifest["results"]["blowup"]["noncharacteristic_ratio"]
    except (OSError, KeyError, ValueError, TypeError) as exc:
        return EXIT_CONFIG, {"error": f"{type(exc).__name__}: {exc}"}
    checks, _ = evaluate_checks(trace, settings, curve_rows, slope, ratio)
    missing = [f for f in manifest.get("outputs", []) if not (run_dir / f).exists()]
    checks["outputs_present"] = not missing
    return (EXIT_OK if all(checks.values()) else EXIT_FAIL), checks


def _sweep_one(job):
    settings, out_dir = job
    m = run_scenario(None, out_dir, settings=settings)
    decay = m.results.get("decay")
    blow = m.results.get("blowup") or {}
    return {
        "delta_est": decay.get("delta_est", math.nan) if isinstance(decay, dict) else math.nan,
        "exit_status": EXIT_OK if m.passed else EXIT_FAIL,
        "slope_at_r0": blow.get("slope_at_r0", math.nan),
    }


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "")
    if raw:
        try:
            n = int(raw)
        except ValueError as exc:
            raise ConfigError(f"{WORKERS_ENV} must be an integer") from exc
        if n < 1:
            raise ConfigError(f"{WORKERS_ENV} must be positive")
        return n
    return max(1, min(4, os.cpu_count() or 1))


def sweep(config_path, out_dir=None) -> tuple[list[dict], Path]:
    """Run the cartesian product of the ``[sweep]`` lists; one row per run."""
    settings, lists = load_config(config_path)
    keys = list(lists)
    combos = list(itertools.product(*(lists[k] for k in keys))) or [()]
    jobs, rows = [], []
    base = Path(out_dir) if out_dir is not None else Path("runs") / settings["scenario"]["name"]
    for i, combo in enumerate(combos):
        s = json.loads(json.dumps(settings))
        for k, v in zip(keys, combo):
            s["selfsim"][k] = v
        s["scenario"]["name"] = f"{settings['scenario']['name']}_{i:03d}"
        validate(s)
        jobs.append((s, base / f"run_{i:03d}"))
        rows.append({k: v for k, v in zip(keys, combo)})
    workers = worker_count()
    if workers == 1 or len(jobs) == 1:
        results = [_sweep_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_sweep_one, jobs))
    for row, res in zip(rows, results):
        row.update(res)
    base.mkdir(parents=True, exist_ok=True)
    cols = keys + ["delta_est", "exit_status", "slope_at_r0"]
    write_csv(base / "sweep.csv", cols, ([row[c] for c in cols] for row in rows))
    return rows, base


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="radial-blowup", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run one scenario")
    p_run.add_argument("config")
    p_run.add_argument("-o", "--out", help="run directory (default runs/<name>)")
    p_sw = sub.add_parser("sweep", help="run a parameter sweep")
    p_sw.add_argument("config")
    p_sw.add_argument("-o", "--out", help="sweep directory (default runs/<name>)")
    p_ck = sub.add_parser("check", help="re-verify a finished run from its CSV files")
    p_ck.add_argument("run_dir")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            m = run_scenario(args.config, args.out)
            for k, v in m.checks.items():
                print(f"{'PASS' if v else 'FAIL'} {k}")
            if m.error:
                print(f"ERROR {m.error}")
            return EXIT_OK if m.passed else EXIT_FAIL
        if args.command == "sweep":
            rows, base = sweep(args.config, args.out)
            print(f"{len(rows)} runs, summary in {base / 'sweep.csv'}")
            return EXIT_OK if all(r["exit_status"] == EXIT_OK for r in rows) else EXIT_FAIL
        code, checks = check_run(args.run_dir)
        for k, v in checks.items():
            print(f"{'PASS' if v is True else 'FAIL'} {k}" if isinstance(v, bool) else f"{k}: {v}")
        return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

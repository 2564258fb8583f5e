"""Experiment runner.

Parses a JSON run configuration, executes the conformance -> calibration ->
tracking -> diagnostics pipeline, and writes every artifact atomically:
MANIFEST.json, trajectory.jsonl, events.jsonl, functionals.csv, cycles.json,
conformance.json, calibration.json. A config with a "sweep" block runs the
parameter grid instead (one isolated process per row) and aggregates to
sweep.csv. Runs are deterministic given the config and seed; the NCFT_SEED
environment variable overrides the config seed.
"""

from __future__ import annotations

import concurrent.futures
import copy
import csv
import io
import itertools
import json
import os
import tempfile
from typing import Optional

import click
import numpy as np

from ncft import diagnostics as dg
from ncft import kinetics as kin_mod
from ncft import models, tracking
from ncft.kinetics import KineticFunction
from ncft.models import FluxModel

SCHEMA_VERSION = 1

# MANIFEST check keys; each maps onto one acceptance criterion, in order.
CRITERIA = {
    "c01": "critical-maps-closed-forms",
    "c02": "involution-and-companions",
    "c03": "random-riemann-consistency",
    "c04": "nucleation-branch-switch",
    "c05": "strength-additivity",
    "c06": "strength-parameter-bounds",
    "c07": "quadratic-interaction-estimate",
    "c08": "lyapunov-monotone-baseline",
    "c09": "cycle-count-bound",
    "c10": "no-nucleation-contrast",
    "c11": "mass-conservation",
    "c12": "classical-limit-convergence",
    "c13": "elasticity-weak-solver",
}

SWEEP_KEYS = ("h", "theta", "gamma", "eps0")

SWEEP_COLUMNS = (
    "h", "theta", "gamma", "eps0", "status", "n_events", "cycle_records",
    "completed_cycles", "min_cycle_drop", "fitted_c", "max_lyapunov_delta",
    "conservation_raw", "conservation_corrected", "error",
)

_TOP_KEYS = {
    "schema_version", "model", "kinetics", "h", "T", "initial", "weights",
    "seed", "flags", "stability_kappa", "calibration", "snapshot_dt", "sweep",
}
_MODEL_KEYS = {"name", "params"}
_KINETICS_KEYS = {"theta", "gamma"}
_INITIAL_KEYS = {"u_star", "main", "jumps", "scale"}
_WEIGHTS_KEYS = {"mode", "zeta", "K", "values"}
_FLAG_KEYS = {
    "use_nucleation", "q_weak_only", "rarefaction_speed_convention",
    "stability_check",
}
_CALIBRATION_KEYS = {"n", "scales", "zero_fraction", "cross_family"}

_WEIGHT_VALUE_KEYS = {
    "kL", "kM", "kR", "kL_less", "kM_less", "kR_less",
    "kL_grt", "kM_grt", "kR_grt", "K", "zeta",
}


class ConfigError(ValueError):
    """Run configuration failed validation."""


def _check_keys(obj: dict, allowed: set, where: str):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _number(obj: dict, key: str, where: str, positive: bool = False) -> float:
    if key not in obj:
        raise ConfigError(f"{where}.{key} is required")
    v = obj[key]
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ConfigError(f"{where}.{key} must be a number")
    if positive and not v > 0:
        raise ConfigError(f"{where}.{key} must be positive, got {v}")
    return float(v)


def _as_float(value, where: str) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where} must be a number, got {value!r}") from exc
    return out


def _state_delta(raw, where: str) -> list:
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        return [float(raw)]
    if (isinstance(raw, list) and raw and
            all(isinstance(x, (int, float)) and not isinstance(x, bool)
                for x in raw)):
        return [float(x) for x in raw]
    raise ConfigError(f"{where} must be a number or a list of numbers")


def _jump(raw, where: str) -> tuple:
    if not (isinstance(raw, list) and len(raw) == 2):
        raise ConfigError(f"{where} must be a [x, delta] pair")
    x = raw[0]
    if not isinstance(x, (int, float)) or isinstance(x, bool):
        raise ConfigError(f"{where}[0] must be a number")
    return float(x), _state_delta(raw[1], f"{where}[1]")


def load_config(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return raw


def validate_config(raw: dict) -> dict:
    """Normalize a raw config dict; rejects unknown keys at every level.

    Returns a plain dict (JSON-serializable, deep-copied) so sweep workers
    can rebuild everything from it."""
    _check_keys(raw, _TOP_KEYS, "config")
    if raw.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(
            f"schema_version must be {SCHEMA_VERSION}, "
            f"got {raw.get('schema_version')!r}"
        )
    cfg = {"schema_version": SCHEMA_VERSION}

    model_raw = raw.get("model")
    _check_keys(model_raw if model_raw is not None else {}, _MODEL_KEYS,
                "model")
    if not model_raw or not isinstance(model_raw.get("name"), str):
        raise ConfigError("model.name is required")
    params = model_raw.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("model.params must be an object")
    cfg["model"] = {"name": model_raw["name"], "params": dict(params)}
    try:
        models.make_model(cfg["model"]["name"], cfg["model"]["params"])
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"model: {exc}") from exc

    kin_raw = raw.get("kinetics")
    _check_keys(kin_raw if kin_raw is not None else {}, _KINETICS_KEYS,
                "kinetics")
    theta = _number(kin_raw, "theta", "kinetics")
    if not (0.0 <= theta < 1.0):
        raise ConfigError(
            f"kinetics.theta must lie in [0, 1) for the kinetic function "
            f"to satisfy (H1), got {theta}"
        )
    gamma = _number(kin_raw, "gamma", "kinetics")
    if not (0.0 <= gamma <= 1.0):
        raise ConfigError(f"kinetics.gamma must lie in [0, 1], got {gamma}")
    cfg["kinetics"] = {"theta": theta, "gamma": gamma}

    cfg["h"] = _number(raw, "h", "config", positive=True)
    cfg["T"] = _number(raw, "T", "config", positive=True)

    init_raw = raw.get("initial")
    _check_keys(init_raw if init_raw is not None else {}, _INITIAL_KEYS,
                "initial")
    if "u_star" not in init_raw:
        raise ConfigError("initial.u_star is required")
    u_star = _state_delta(init_raw["u_star"], "initial.u_star")
    if "main" not in init_raw:
        raise ConfigError("initial.main ([x, delta]) is required")
    main = _jump(init_raw["main"], "initial.main")
    jumps = [
        _jump(j, f"initial.jumps[{k}]")
        for k, j in enumerate(init_raw.get("jumps", []))
    ]
    scale = _as_float(init_raw.get("scale", 1.0), "initial.scale")
    if scale < 0:
        raise ConfigError("initial.scale must be nonnegative")
    xs = [main[0]] + [x for x, _ in jumps]
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise ConfigError(
            "jump positions must be strictly increasing, main first"
        )
    cfg["initial"] = {
        "u_star": u_star,
        "main": [main[0], main[1]],
        "jumps": [[x, d] for x, d in jumps],
        "scale": scale,
    }

    w_raw = raw.get("weights", {"mode": "lemma"})
    _check_keys(w_raw, _WEIGHTS_KEYS, "weights")
    mode = w_raw.get("mode", "lemma")
    if mode == "lemma":
        cfg["weights"] = {
            "mode": "lemma",
            "zeta": _as_float(w_raw.get("zeta", 0.1), "weights.zeta"),
            "K": _as_float(w_raw.get("K", 1.0), "weights.K"),
        }
    elif mode == "explicit":
        values = w_raw.get("values")
        if not isinstance(values, dict):
            raise ConfigError("weights.values is required in explicit mode")
        _check_keys(values, _WEIGHT_VALUE_KEYS, "weights.values")
        missing = sorted(_WEIGHT_VALUE_KEYS - set(values))
        if missing:
            raise ConfigError(
                f"weights.values missing: {', '.join(missing)}"
            )
        cfg["weights"] = {
            "mode": "explicit",
            "values": {k: _as_float(values[k], f"weights.values.{k}")
                       for k in _WEIGHT_VALUE_KEYS},
        }
    else:
        raise ConfigError(f"weights.mode must be lemma or explicit, got {mode!r}")

    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("seed must be an integer")
    cfg["seed"] = seed

    flags_raw = raw.get("flags", {})
    _check_keys(flags_raw, _FLAG_KEYS, "flags")
    convention = flags_raw.get("rarefaction_speed_convention", "rh")
    if convention not in tracking.SPEED_CONVENTIONS:
        raise ConfigError(
            f"flags.rarefaction_speed_convention must be one of "
            f"{tracking.SPEED_CONVENTIONS}, got {convention!r}"
        )
    cfg["flags"] = {
        "use_nucleation": bool(flags_raw.get("use_nucleation", True)),
        "q_weak_only": bool(flags_raw.get("q_weak_only", False)),
        "rarefaction_speed_convention": convention,
        "stability_check": bool(flags_raw.get("stability_check", True)),
    }

    cfg["stability_kappa"] = _as_float(raw.get("stability_kappa", 0.25),
                                       "stability_kappa")
    if cfg["stability_kappa"] <= 0:
        raise ConfigError("stability_kappa must be positive")

    cal_raw = raw.get("calibration", {})
    _check_keys(cal_raw, _CALIBRATION_KEYS, "calibration")
    cal_n = cal_raw.get("n", 400)
    if not isinstance(cal_n, int) or isinstance(cal_n, bool) or cal_n < 0:
        raise ConfigError("calibration.n must be a nonnegative integer")
    scales = cal_raw.get("scales", [0.05, 0.02, 0.005])
    if not isinstance(scales, list) or not scales:
        raise ConfigError("calibration.scales must be a nonempty list")
    cfg["calibration"] = {
        "n": cal_n,
        "scales": [_as_float(s, "calibration.scales") for s in scales],
        "zero_fraction": _as_float(cal_raw.get("zero_fraction", 0.1),
                                   "calibration.zero_fraction"),
        "cross_family": bool(cal_raw.get("cross_family", True)),
    }

    if raw.get("snapshot_dt") is not None:
        cfg["snapshot_dt"] = _number(raw, "snapshot_dt", "config",
                                     positive=True)
    else:
        cfg["snapshot_dt"] = None

    if "sweep" in raw:
        sweep_raw = raw["sweep"]
        _check_keys(sweep_raw if sweep_raw is not None else {},
                    set(SWEEP_KEYS), "sweep")
        sweep = {}
        for key in SWEEP_KEYS:
            if key in sweep_raw:
                vals = sweep_raw[key]
                if not isinstance(vals, list):
                    raise ConfigError(f"sweep.{key} must be a list")
                sweep[key] = [_as_float(v, f"sweep.{key}") for v in vals]
        cfg["sweep"] = sweep
    return cfg


def _apply_env_seed(cfg: dict, environ=None) -> dict:
    env = os.environ if environ is None else environ
    raw = env.get("NCFT_SEED")
    if raw is None:
        return cfg
    try:
        seed = int(raw)
    except ValueError as exc:
        raise ConfigError(f"NCFT_SEED must be an integer, got {raw!r}") from exc
    out = copy.deepcopy(cfg)
    out["seed"] = seed
    return out


def _build(cfg: dict) -> tuple:
    model = models.make_model(cfg["model"]["name"], cfg["model"]["params"])
    kin = KineticFunction(theta=cfg["kinetics"]["theta"],
                          nucleation_gamma=cfg["kinetics"]["gamma"])
    return model, kin


def initial_profile(cfg: dict) -> tuple:
    """States and jump positions built from u_star, the main jump, and the
    scaled perturbation deltas."""
    scale = cfg["initial"]["scale"]
    states = [np.asarray(cfg["initial"]["u_star"], dtype=float)]
    positions = []
    for k, (x, delta) in enumerate([cfg["initial"]["main"]] +
                                   cfg["initial"]["jumps"]):
        d = np.asarray(delta, dtype=float)
        if k > 0:
            d = scale * d
        states.append(states[-1] + d)
        positions.append(float(x))
    return states, positions


def perturbation_tv(cfg: dict) -> float:
    scale = cfg["initial"]["scale"]
    return scale * sum(
        float(np.sum(np.abs(np.asarray(d, dtype=float))))
        for _, d in cfg["initial"]["jumps"]
    )


def stability_report(model: FluxModel, kin: KineticFunction,
                     cfg: dict) -> dict:
    """Perturbation total variation against the strong-pattern strength
    bound kappa * |sigma(u_star, Phi_sharp(u_star))|."""
    u_star = np.asarray(cfg["initial"]["u_star"], dtype=float)
    companion = kin_mod.phi_sharp(model, kin, u_star)
    sigma = dg.wave_strength(model, u_star, companion, model.cc_index)
    tv = perturbation_tv(cfg)
    bound = cfg["stability_kappa"] * abs(sigma)
    return {
        "enabled": cfg["flags"]["stability_check"],
        "tv": tv,
        "kappa": cfg["stability_kappa"],
        "reference_strength": abs(sigma),
        "bound": bound,
        "within_bound": tv <= bound,
    }


def _weights_for(cfg: dict, cff: float) -> dg.Weights:
    spec = cfg["weights"]
    if spec["mode"] == "explicit":
        return dg.Weights(**spec["values"])
    return dg.lemma_weights(cff, zeta=spec["zeta"], K=spec["K"])


def _manifest_skeleton() -> dict:
    return {
        key: {"name": name, "status": "not_evaluated"}
        for key, name in CRITERIA.items()
    }


def _status(passed: bool) -> str:
    return "pass" if passed else "fail"


def _write_atomic(path: str, text: str):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path: str, obj):
    _write_atomic(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_jsonl(path: str, rows):
    buf = io.StringIO()
    for row in rows:
        buf.write(json.dumps(row, sort_keys=True))
        buf.write("\n")
    _write_atomic(path, buf.getvalue())


def _event_row(model: FluxModel, ev, w: dg.Weights, q_weak_only: bool) -> dict:
    row = dg.event_delta(model, ev, w, q_weak_only=q_weak_only)
    row["position"] = ev.position
    row["incoming"] = [wv.to_json_dict() for wv in ev.incoming]
    row["outgoing"] = [wv.to_json_dict() for wv in ev.outgoing.waves]
    row["incoming_roles"] = {str(k): v for k, v in ev.incoming_roles.items()}
    row["outgoing_roles"] = {str(k): v for k, v in ev.outgoing_roles.items()}
    row["mass_correction"] = [float(c) for c in np.atleast_1d(ev.mass_correction)]
    return row


def run_experiment(cfg: dict, out_dir: str, calibrate_only: bool = False) -> dict:
    """Full pipeline for one validated config; returns the manifest dict."""
    os.makedirs(out_dir, exist_ok=True)
    model, kin = _build(cfg)

    stability = stability_report(model, kin, cfg)
    if not calibrate_only and stability["enabled"] and not stability["within_bound"]:
        raise ConfigError(
            f"perturbation total variation {stability['tv']} exceeds the "
            f"stability bound {stability['bound']} "
            f"(kappa={stability['kappa']}); set flags.stability_check false "
            f"for exploratory runs"
        )

    conformance = kin_mod.check_hypotheses(model, kin)
    _write_json(os.path.join(out_dir, "conformance.json"),
                conformance.to_json_dict())
    cff = conformance.measured_Cff
    kin = KineticFunction(theta=kin.theta, nucleation_gamma=kin.nucleation_gamma,
                          measured_Cff=cff)

    weights = _weights_for(cfg, cff)
    calibration = dg.calibrate(
        model, kin, weights,
        n=cfg["calibration"]["n"],
        scales=tuple(cfg["calibration"]["scales"]),
        seed=cfg["seed"],
        zero_fraction=cfg["calibration"]["zero_fraction"],
        use_nucleation=cfg["flags"]["use_nucleation"],
        cross_family=cfg["calibration"]["cross_family"],
    )
    _write_json(os.path.join(out_dir, "calibration.json"),
                calibration.to_json_dict())

    constraints = dg.validate_constraints(
        weights, cff, measured={"k_floor": calibration.k_floor},
        eps_bound=perturbation_tv(cfg))

    manifest = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg,
        "checks": _manifest_skeleton(),
        "conformance_passed": conformance.passed,
        "measured_cff": cff,
        "weight_constraints": constraints,
        "calibration": {
            "fitted_glimm_C": calibration.fitted_glimm_C,
            "k_floor": calibration.k_floor,
            "K_recommended": calibration.K_recommended,
        },
        "seed": cfg["seed"],
    }
    manifest["stability"] = stability
    if calibrate_only:
        _write_json(os.path.join(out_dir, "MANIFEST.json"), manifest)
        return manifest

    states, positions = initial_profile(cfg)
    fronts0 = tracking.init_fronts(
        model, kin, states, positions, h=cfg["h"],
        use_nucleation=cfg["flags"]["use_nucleation"],
        strong_jumps=[0],
        convention=cfg["flags"]["rarefaction_speed_convention"],
    )
    result = tracking.run(
        model, kin, fronts0, t_end=cfg["T"],
        use_nucleation=cfg["flags"]["use_nucleation"],
        snapshot_dt=cfg["snapshot_dt"],
        convention=cfg["flags"]["rarefaction_speed_convention"],
    )

    q_weak_only = cfg["flags"]["q_weak_only"]
    dg.annotate_events(result.events)
    series = dg.lyapunov_series(model, result.events, result.snapshots,
                                weights, q_weak_only=q_weak_only,
                                calibration=calibration)
    audit = dg.cycle_audit(model, kin, result.events, result.snapshots,
                           weights, q_weak_only=q_weak_only, cff=cff)
    conservation = tracking.conservation_report(model, result)

    _write_jsonl(os.path.join(out_dir, "trajectory.jsonl"),
                 (fs.to_json_dict() for fs in result.snapshots))
    _write_jsonl(os.path.join(out_dir, "events.jsonl"),
                 (_event_row(model, ev, weights, q_weak_only)
                  for ev in result.events))
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(dg.CSV_HEADER)
    for snap in series["series"]:
        writer.writerow(snap.csv_row())
    _write_atomic(os.path.join(out_dir, "functionals.csv"), buf.getvalue())
    _write_json(os.path.join(out_dir, "cycles.json"), audit.to_json_dict())

    initial_l = series["series"][0].lyapunov if series["series"] else 0.0
    final_l = series["series"][-1].lyapunov if series["series"] else 0.0
    checks = manifest["checks"]
    checks["c08"].update({
        "status": _status(series["n_flagged"] == 0 and final_l <= initial_l),
        "max_delta": series["max_delta"],
        "n_flagged": series["n_flagged"],
        "initial": initial_l,
        "final": final_l,
    })
    etas = [r.eta for r in audit.records if not r.open and r.eta is not None]
    checks["c09"].update({
        "status": _status(audit.passed),
        "cycle_records": len(audit.records),
        "completed_cycles": audit.n_completed,
        "fitted_c": audit.fitted_c,
        "etas": etas,
    })
    checks["c11"].update({
        "status": _status(
            conservation["corrected"] <= 1e-8 and
            conservation["raw"] <= conservation["budget"] + 1e-12),
        "raw": conservation["raw"],
        "corrected": conservation["corrected"],
        "budget": conservation["budget"],
    })

    manifest["summary"] = {
        "n_events": len(result.events),
        "n_fronts_final": len(result.final.fronts),
        "t_final": result.final.time,
        "cycle_records": len(audit.records),
        "completed_cycles": audit.n_completed,
        "open_cycles": audit.n_open,
        "etas": etas,
        "fitted_c": audit.fitted_c,
        "max_lyapunov_delta": series["max_delta"],
        "conservation": conservation,
    }
    _write_json(os.path.join(out_dir, "MANIFEST.json"), manifest)
    return manifest


def _grid_rows(sweep: dict) -> list:
    axes = [(key, sweep[key]) for key in SWEEP_KEYS if key in sweep]
    if not axes or any(len(vals) == 0 for _, vals in axes):
        return []
    rows = []
    for combo in itertools.product(*(vals for _, vals in axes)):
        rows.append({key: val for (key, _), val in zip(axes, combo)})
    return rows


def _row_config(cfg: dict, overrides: dict) -> dict:
    out = copy.deepcopy(cfg)
    out.pop("sweep", None)
    if "h" in overrides:
        out["h"] = overrides["h"]
    if "theta" in overrides:
        out["kinetics"]["theta"] = overrides["theta"]
    if "gamma" in overrides:
        out["kinetics"]["gamma"] = overrides["gamma"]
    if "eps0" in overrides:
        out["initial"]["scale"] = overrides["eps0"]
    return out


def sweep_row(payload: tuple) -> dict:
    """One isolated sweep run; returns a flat CSV row dict. Top-level so
    process pools can pickle it."""
    cfg, overrides = payload
    row = {key: overrides.get(key, "") for key in SWEEP_KEYS}
    row.update({col: "" for col in SWEEP_COLUMNS if col not in SWEEP_KEYS})
    try:
        run_cfg = validate_config(_serialize_config(_row_config(cfg, overrides)))
        model, kin = _build(run_cfg)
        conformance = kin_mod.check_hypotheses(model, kin)
        weights = _weights_for(run_cfg, conformance.measured_Cff)
        states, positions = initial_profile(run_cfg)
        fronts0 = tracking.init_fronts(
            model, kin, states, positions, h=run_cfg["h"],
            use_nucleation=run_cfg["flags"]["use_nucleation"],
            strong_jumps=[0],
            convention=run_cfg["flags"]["rarefaction_speed_convention"])
        result = tracking.run(
            model, kin, fronts0, t_end=run_cfg["T"],
            use_nucleation=run_cfg["flags"]["use_nucleation"],
            convention=run_cfg["flags"]["rarefaction_speed_convention"])
        dg.annotate_events(result.events)
        series = dg.lyapunov_series(model, result.events, result.snapshots,
                                    weights,
                                    q_weak_only=run_cfg["flags"]["q_weak_only"])
        audit = dg.cycle_audit(model, kin, result.events, result.snapshots,
                               weights,
                               q_weak_only=run_cfg["flags"]["q_weak_only"],
                               cff=conformance.measured_Cff)
        conservation = tracking.conservation_report(model, result)
        drops = [r.lyapunov_drop for r in audit.records
                 if not r.open and r.lyapunov_drop is not None]
        row.update({
            "status": "ok",
            "n_events": len(result.events),
            "cycle_records": len(audit.records),
            "completed_cycles": audit.n_completed,
            "min_cycle_drop": min(drops) if drops else "",
            "fitted_c": audit.fitted_c if audit.fitted_c is not None else "",
            "max_lyapunov_delta": series["max_delta"],
            "conservation_raw": conservation["raw"],
            "conservation_corrected": conservation["corrected"],
        })
    except Exception as exc:
        row["status"] = "error"
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _serialize_config(cfg: dict) -> dict:
    # round-trip through JSON so worker payloads carry no numpy scalars
    return json.loads(json.dumps(cfg))


def run_sweep(cfg: dict, out_dir: str, workers: int = 1) -> str:
    os.makedirs(out_dir, exist_ok=True)
    rows_spec = _grid_rows(cfg.get("sweep", {}))
    payloads = [(_serialize_config(cfg), overrides) for overrides in rows_spec]
    if not payloads:
        results = []
    elif workers <= 1:
        results = [sweep_row(p) for p in payloads]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(sweep_row, payloads))
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS)
    writer.writeheader()
    for row in results:
        writer.writerow(row)
    path = os.path.join(out_dir, "sweep.csv")
    _write_atomic(path, buf.getvalue())
    return path


def run_check(out_dir: str) -> dict:
    """Run the full acceptance suite and write its MANIFEST."""
    from ncft import acceptance

    os.makedirs(out_dir, exist_ok=True)
    results = acceptance.run_all()
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "checks": {
            key: {
                "name": CRITERIA[key],
                "status": _status(results[key]["passed"]),
                "detail": results[key]["detail"],
            }
            for key in CRITERIA
        },
    }
    _write_json(os.path.join(out_dir, "MANIFEST.json"), manifest)
    return manifest


@click.command(name="ncft")
@click.option("--config", "config_path", type=click.Path(exists=True,
              dir_okay=False), default=None, help="Run configuration JSON.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False),
              default="ncft-out", show_default=True,
              help="Artifact output directory.")
@click.option("--workers", type=int, default=1, show_default=True,
              help="Parallel sweep workers.")
@click.option("--check", is_flag=True, help="Run the acceptance suite.")
@click.option("--calibrate-only", is_flag=True,
              help="Stop after conformance and calibration.")
def main(config_path: Optional[str], out_dir: str, workers: int,
         check: bool, calibrate_only: bool):
    """Front-tracking experiment runner."""
    if check:
        manifest = run_check(out_dir)
        failed = [key for key, entry in manifest["checks"].items()
                  if entry["status"] == "fail"]
        for key, entry in sorted(manifest["checks"].items()):
            click.echo(f"{key} {entry['name']}: {entry['status']}")
        if failed:
            raise click.ClickException(
                f"acceptance checks failed: {', '.join(sorted(failed))}")
        return
    if config_path is None:
        raise click.UsageError("--config is required unless --check is given")
    try:
        cfg = _apply_env_seed(validate_config(load_config(config_path)))
        if "sweep" in cfg and not calibrate_only:
            path = run_sweep(cfg, out_dir, workers=workers)
            click.echo(f"sweep written: {path}")
        else:
            manifest = run_experiment(cfg, out_dir,
                                      calibrate_only=calibrate_only)
            statuses = {key: entry["status"]
                        for key, entry in manifest["checks"].items()
                        if entry["status"] != "not_evaluated"} \
                if "checks" in manifest else {}
            for key in sorted(statuses):
                click.echo(f"{key} {CRITERIA[key]}: {statuses[key]}")
            click.echo(f"artifacts written: {os.path.abspath(out_dir)}")
    except ConfigError as exc:
        raise click.ClickException(str(exc)) from exc


if __name__ == "__main__":
    main()

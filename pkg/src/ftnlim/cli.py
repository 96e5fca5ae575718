"""Configuration-driven experiment runner.

Each experiment expands a JSON config into a deterministic grid of points,
computes them (optionally on a worker pool), and writes a CSV artifact plus
a JSON manifest.  Per-point seeds derive from (master seed, point index),
so results never depend on worker count or completion order; CSV bytes are
identical across reruns of the same config and seed.

Exit codes: 0 success, 1 config error, 2 numeric failure, 3 selftest failure.
"""

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
import traceback
from pathlib import Path

import numpy as np

logger = logging.getLogger("ftnlim.cli")

_CHECKPOINT_SECONDS = 60.0


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# config validation
# ---------------------------------------------------------------------------

def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_field(name, value, kind):
    if kind == "int":
        if not (isinstance(value, int) and not isinstance(value, bool)):
            raise ConfigError("field '%s': expected integer, got %r" % (name, value))
    elif kind == "num":
        if not _is_num(value):
            raise ConfigError("field '%s': expected number, got %r" % (name, value))
    elif kind == "pos":
        if not _is_num(value) or value <= 0:
            raise ConfigError("field '%s': expected positive number, got %r" % (name, value))
    elif kind == "str":
        if not isinstance(value, str):
            raise ConfigError("field '%s': expected string, got %r" % (name, value))
    elif kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError("field '%s': expected boolean, got %r" % (name, value))
    elif kind == "numlist":
        if (not isinstance(value, list) or not value
                or not all(_is_num(v) for v in value)):
            raise ConfigError("field '%s': expected non-empty list of numbers, got %r"
                              % (name, value))
    elif kind == "strlist":
        if (not isinstance(value, list) or not value
                or not all(isinstance(v, str) for v in value)):
            raise ConfigError("field '%s': expected non-empty list of strings, got %r"
                              % (name, value))
    elif kind == "numdict":
        if (not isinstance(value, dict)
                or not all(isinstance(k, str) and _is_num(v) for k, v in value.items())):
            raise ConfigError("field '%s': expected {string: number} map, got %r"
                              % (name, value))
    else:  # pragma: no cover - unknown kind in the field registry
        raise AssertionError(kind)


_COMMON_FIELDS = {
    "experiment": ("str", None),
    "seed": ("int", 0),
    "workers": ("int", 1),
    "out_dir": ("str", "."),
}


def validate_config(raw: dict) -> dict:
    """Fill defaults and type-check; unknown keys are an error."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    exp = raw.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError("field 'experiment': must be one of %s, got %r"
                          % ("|".join(sorted(EXPERIMENTS)), exp))
    fields = dict(_COMMON_FIELDS)
    fields.update(EXPERIMENTS[exp]["fields"])
    unknown = sorted(set(raw) - set(fields))
    if unknown:
        raise ConfigError("unknown field(s): %s (experiment %s accepts: %s)"
                          % (", ".join(unknown), exp, ", ".join(sorted(fields))))
    out = {}
    for name, (kind, default) in fields.items():
        if name in raw:
            _check_field(name, raw[name], kind)
            out[name] = raw[name]
        elif default is None and name != "experiment":
            raise ConfigError("field '%s' is required for experiment %s" % (name, exp))
        else:
            out[name] = raw[name] if name == "experiment" else default
    out["experiment"] = exp
    if out["workers"] < 1:
        raise ConfigError("field 'workers': must be >= 1")
    EXPERIMENTS[exp].get("extra_checks", lambda c: None)(out)
    return out


def _point_seed(master: int, index: int) -> int:
    return int(np.random.SeedSequence([master, index]).generate_state(1)[0])


# ---------------------------------------------------------------------------
# shared per-process caches (pulses, bases, min_c values)
# ---------------------------------------------------------------------------

_cache = {}


def _beta_for_omega(omega: float) -> float:
    if omega <= 50.0:
        return 1.0
    if omega <= 200.0:
        return 0.3
    return 0.1


def _rrc_min_c(beta: float, eps_w: float) -> float:
    from .pulse import min_c
    key = ("min_c", "rrc", beta, eps_w)
    if key not in _cache:
        _cache[key] = min_c("rrc", eps_w, 0.5, beta=beta)
    return _cache[key]


def _rrc_pulse(beta: float, c: float):
    from .pulse import make_rrc
    key = ("rrc", beta, c)
    if key not in _cache:
        _cache[key] = make_rrc(beta, 0.5, c)
    return _cache[key]


def _eta(omega: float, eps_w: float) -> float:
    from .pswf import max_dimensions
    key = ("eta", omega, eps_w)
    if key not in _cache:
        _cache[key] = max_dimensions(omega, eps_w)[1]
    return _cache[key]


def _packed_channel(omega: float, rho: float, eps_w: float):
    """Channel at the window-filling packing ratio under the roll-off
    schedule used for the rate-versus-resource sweeps."""
    from .channel import make_channel
    from .design import tau_star
    beta = _beta_for_omega(omega)
    c = _rrc_min_c(beta, eps_w)
    p = _rrc_pulse(beta, c)
    tau = tau_star(omega, c, _eta(omega, eps_w), beta)
    return p, tau, make_channel(p, omega, rho, tau)


# ---------------------------------------------------------------------------
# experiment point functions (run inside workers; must rebuild from params)
# ---------------------------------------------------------------------------

def _point_fig2(params: dict):
    from .bounds import mc_rate, na_rate, rcu_rate
    from .channel import make_channel
    from .pswf import waterfill_benchmark
    omega = params["omega"]
    rho = 10.0 ** (params["rho_db"] / 10.0)
    pe, eps_w = params["pe"], params["eps_w"]
    p, tau, ch = _packed_channel(omega, rho, eps_w)
    rows = []

    def add(method, rate):
        rows.append({"omega": omega, "rho_db": params["rho_db"],
                     "method": method, "rate": rate})

    add("na", na_rate(ch, pe))
    add("mc", mc_rate(ch, pe).rate_bps_hz)
    add("rcu", rcu_rate(ch, pe, samples=params["rcu_samples"],
                        seed=params["point_seed"]).rate_bps_hz)
    add("na_tau1", na_rate(make_channel(p, omega, rho, 1.0), pe))
    add("pswf", waterfill_benchmark(omega, eps_w, rho, pe))
    return rows


def _point_fig3(params: dict):
    from .design import percent_gain
    beta = params["beta"]
    c = _rrc_min_c(beta, params["eps_w"])
    p = _rrc_pulse(beta, c)
    gain = percent_gain(p, params["omega"], 10.0 ** (params["rho_db"] / 10.0),
                        params["pe"], params["tau"])
    return [{"beta": beta, "tau": params["tau"], "gain_percent": gain}]


def _point_fig4(params: dict):
    from .pulse import make_pswf_principal, oob_energy
    from .design import reference_design
    family = params["family"]
    c = params["c"]
    if family == "rrc":
        p = _rrc_pulse(params["beta"], c)
    elif family == "pswf":
        p = make_pswf_principal(c)
    elif family == "fs":
        p = reference_design(c)
    else:  # pragma: no cover - guarded by config validation
        raise AssertionError(family)
    return [{"family": family, "beta": params.get("beta", ""), "c": c,
             "oob": oob_energy(p, 0.5)}]


def _point_fig5(params: dict):
    from .bounds import mc_rate, na_rate, rcu_rate
    omega = params["omega"]
    rho = 10.0 ** (params["rho_db"] / 10.0)
    _, _, ch = _packed_channel(omega, rho, params["eps_w"])
    pe = params["pe"]
    return [
        {"rho_db": params["rho_db"], "method": "na", "rate": na_rate(ch, pe)},
        {"rho_db": params["rho_db"], "method": "mc", "rate": mc_rate(ch, pe).rate_bps_hz},
        {"rho_db": params["rho_db"], "method": "rcu",
         "rate": rcu_rate(ch, pe, samples=params["rcu_samples"],
                          seed=params["point_seed"]).rate_bps_hz},
    ]


def _point_fig6(params: dict):
    return [{"family": "rrc", "beta": params["beta"], "eps_w": params["eps_w"],
             "min_c": _rrc_min_c(params["beta"], params["eps_w"])}]


def _point_table1(params: dict):
    from .design import FsDesignSpec, optimize_fs_pulse
    c = params["c"]
    # with W = 1/2 the occupancy c = 2 W T_p pins the support directly
    spec = FsDesignSpec(omega=params["omega"], eps_W=params["eps_w"],
                        rho=10.0 ** (params["rho_db"] / 10.0),
                        K_0=params["k_0"], W=0.5, t_p_values=[float(c)],
                        restarts=params["restarts"], seed=params["point_seed"])
    r = optimize_fs_pulse(spec)
    return [{"c": c, "T": r.T, "c0": r.coeffs[0],
             "ck": ";".join(format(v, ".6g") for v in r.coeffs[1:]),
             "c_na": r.c_na}]


def _fig7_link(params: dict):
    from .turbo import CodingConfig, ThreeStageLink
    from .design import tau_star
    key = ("fig7-link", params["omega"], params["beta"], params["eps_w"],
           params["info_bits"], params["equalizer_memory"],
           params["inner_iterations"], params["outer_iterations"],
           params["early_stop"], params["seed"])
    if key not in _cache:
        cfg = CodingConfig(info_bits=params["info_bits"],
                           equalizer_memory=params["equalizer_memory"],
                           inner_iterations=params["inner_iterations"],
                           outer_iterations=params["outer_iterations"],
                           early_stop=params["early_stop"],
                           interleaver_seed=params["seed"])
        beta = params["beta"]
        c = _rrc_min_c(beta, params["eps_w"])
        p = _rrc_pulse(beta, c)
        tau = tau_star(params["omega"], c, _eta(params["omega"], params["eps_w"]), beta)
        _cache[key] = ThreeStageLink(cfg, p, tau, params["omega"])
    return _cache[key]


def _point_fig7(params: dict):
    """One chunk of blocks at one SNR; chunks aggregate downstream."""
    from .turbo import _run_blocks
    link = _fig7_link(params)
    rho = 10.0 ** (params["snr_db"] / 10.0)
    errors, iters_sum = _run_blocks(link, rho, params["seed"],
                                    params["snr_index"], params["block_start"],
                                    params["block_stop"])
    return [{"_chunk": True, "snr_db": params["snr_db"],
             "snr_index": params["snr_index"],
             "blocks": params["block_stop"] - params["block_start"],
             "block_errors": errors, "iters_sum": iters_sum}]


def _point_custom(params: dict):
    from .bounds import capacity_ftn, mc_rate, na_rate, rcu_rate
    from .channel import make_channel
    from .design import tau_star
    omega = params["omega"]
    rho = 10.0 ** (params["rho_db"] / 10.0)
    beta, eps_w, pe = params["beta"], params["eps_w"], params["pe"]
    c = _rrc_min_c(beta, eps_w)
    p = _rrc_pulse(beta, c)
    tau = params["tau"] if params["tau"] > 0 else tau_star(
        omega, c, _eta(omega, eps_w), beta)
    ch = make_channel(p, omega, rho, tau)
    rows = []
    for method in params["methods"]:
        if method == "na":
            value = na_rate(ch, pe)
        elif method == "mc":
            value = mc_rate(ch, pe).rate_bps_hz
        elif method == "rcu":
            value = rcu_rate(ch, pe, samples=params["rcu_samples"],
                             seed=params["point_seed"]).rate_bps_hz
        else:  # capacity
            value = capacity_ftn(p, tau, rho)
        rows.append({"omega": omega, "rho_db": params["rho_db"], "tau": tau,
                     "method": method, "value": value})
    return rows


# ---------------------------------------------------------------------------
# experiment definitions: fields, point expansion, CSV schema, aggregation
# ---------------------------------------------------------------------------

def _expand_fig2(cfg):
    return [{"omega": o, "rho_db": r, "pe": cfg["pe"], "eps_w": cfg["eps_w"],
             "rcu_samples": cfg["rcu_samples"]}
            for o in cfg["omega_grid"] for r in cfg["rho_db_grid"]]


def _expand_fig3(cfg):
    return [{"beta": b, "tau": t, "omega": cfg["omega"], "rho_db": cfg["rho_db"],
             "pe": cfg["pe"], "eps_w": cfg["eps_w"]}
            for b in cfg["betas"] for t in cfg["tau_grid"]]


def _expand_fig4(cfg):
    pts = [{"family": "rrc", "beta": b, "c": c}
           for b in cfg["betas"] for c in cfg["c_grid"]]
    if cfg["include_pswf"]:
        pts += [{"family": "pswf", "c": c} for c in cfg["c_grid"]]
    if cfg["include_fs"]:
        from .design import FS_REFERENCE_DESIGNS
        pts += [{"family": "fs", "c": c} for c in sorted(FS_REFERENCE_DESIGNS)]
    return pts


def _expand_fig5(cfg):
    return [{"omega": cfg["omega"], "rho_db": r, "pe": cfg["pe"],
             "eps_w": cfg["eps_w"], "rcu_samples": cfg["rcu_samples"]}
            for r in cfg["rho_db_grid"]]


def _expand_fig6(cfg):
    return [{"beta": b, "eps_w": cfg["eps_w"]} for b in cfg["betas"]]


def _expand_table1(cfg):
    omega_by_c = cfg["omega_by_c"]
    pts = []
    for c in cfg["c_values"]:
        key = format(c, "g")
        if key not in omega_by_c:
            raise ConfigError("field 'omega_by_c': missing entry for c=%s" % key)
        pts.append({"c": c, "omega": omega_by_c[key], "rho_db": cfg["rho_db"],
                    "eps_w": cfg["eps_w"], "k_0": cfg["k_0"],
                    "restarts": cfg["restarts"]})
    return pts


def _expand_fig7(cfg):
    pts = []
    for i, snr in enumerate(cfg["snr_db_grid"]):
        for start in range(0, cfg["blocks"], cfg["chunk_blocks"]):
            pts.append({"snr_db": snr, "snr_index": i, "block_start": start,
                        "block_stop": min(start + cfg["chunk_blocks"], cfg["blocks"]),
                        "omega": cfg["omega"], "beta": cfg["beta"],
                        "eps_w": cfg["eps_w"], "info_bits": cfg["info_bits"],
                        "equalizer_memory": cfg["equalizer_memory"],
                        "inner_iterations": cfg["inner_iterations"],
                        "outer_iterations": cfg["outer_iterations"],
                        "early_stop": cfg["early_stop"], "seed": cfg["seed"]})
    return pts


def _aggregate_fig7(cfg, rows):
    """Fold block chunks into one record per SNR with Wilson intervals."""
    from .bounds import na_bler
    from .turbo import wilson_interval
    by_snr = {}
    for r in rows:
        key = r["snr_index"]
        agg = by_snr.setdefault(key, {"snr_db": r["snr_db"], "blocks": 0,
                                      "block_errors": 0, "iters_sum": 0})
        agg["blocks"] += r["blocks"]
        agg["block_errors"] += r["block_errors"]
        agg["iters_sum"] += r["iters_sum"]
    out = []
    rate = cfg["info_bits"] / cfg["omega"]
    for key in sorted(by_snr):
        a = by_snr[key]
        lo, hi = wilson_interval(a["block_errors"], a["blocks"])
        _, _, ch = _packed_channel(cfg["omega"], 10.0 ** (a["snr_db"] / 10.0),
                                   cfg["eps_w"])
        out.append({"snr_db": a["snr_db"], "blocks": a["blocks"],
                    "block_errors": a["block_errors"],
                    "bler": a["block_errors"] / a["blocks"],
                    "ci_low": lo, "ci_high": hi,
                    "mean_iterations": a["iters_sum"] / a["blocks"],
                    "na_bler": na_bler(ch, rate)})
    return out


def _expand_custom(cfg):
    return [{"omega": o, "rho_db": r, "tau": cfg["tau"], "beta": cfg["beta"],
             "pe": cfg["pe"], "eps_w": cfg["eps_w"], "methods": cfg["methods"],
             "rcu_samples": cfg["rcu_samples"]}
            for o in cfg["omega_grid"] for r in cfg["rho_db_grid"]]


def _check_custom(cfg):
    bad = set(cfg["methods"]) - {"na", "mc", "rcu", "capacity"}
    if bad:
        raise ConfigError("field 'methods': unknown method(s) %s" % ", ".join(sorted(bad)))
    if cfg["tau"] != -1.0 and not 0.0 < cfg["tau"] <= 1.0:
        raise ConfigError("field 'tau': must lie in (0, 1] or be -1 for the "
                          "window-filling default")


def _check_fig3(cfg):
    for t in cfg["tau_grid"]:
        if not 0.0 < t <= 1.0:
            raise ConfigError("field 'tau_grid': packing ratios must lie in (0, 1], got %r" % t)


EXPERIMENTS = {
    "fig2": {
        "describe": "rate bounds versus time-bandwidth product "
                    "(columns: omega, rho_db, method, rate)",
        "fields": {
            "omega_grid": ("numlist", [10.0, 14.0, 20.0, 28.0, 40.0, 50.0, 70.0,
                                       100.0, 132.0, 180.0, 250.0, 300.0, 400.0, 500.0]),
            "rho_db_grid": ("numlist", [10.0, 30.0]),
            "pe": ("pos", 1e-3),
            "eps_w": ("pos", 1e-4),
            "rcu_samples": ("int", 100_000),
        },
        "expand": _expand_fig2, "point": _point_fig2,
        "columns": ["omega", "rho_db", "method", "rate"],
    },
    "fig3": {
        "describe": "relative rate gain of tighter packing versus tau "
                    "(columns: beta, tau, gain_percent)",
        "fields": {
            "omega": ("pos", 300.0),
            "rho_db": ("num", 30.0),
            "pe": ("pos", 1e-3),
            "eps_w": ("pos", 1e-4),
            "betas": ("numlist", [0.1, 0.5, 1.0]),
            "tau_grid": ("numlist", [round(0.35 + 0.05 * k, 2) for k in range(14)]),
        },
        "expand": _expand_fig3, "point": _point_fig3,
        "columns": ["beta", "tau", "gain_percent"],
        "extra_checks": _check_fig3,
    },
    "fig4-oob": {
        "describe": "out-of-band energy versus pulse occupancy "
                    "(columns: family, beta, c, oob)",
        "fields": {
            "c_grid": ("numlist", [float(c) for c in range(2, 31, 2)]),
            "betas": ("numlist", [0.1, 0.5, 1.0]),
            "include_pswf": ("bool", True),
            "include_fs": ("bool", True),
        },
        "expand": _expand_fig4, "point": _point_fig4,
        "columns": ["family", "beta", "c", "oob"],
    },
    "fig5-snr": {
        "describe": "rate bounds versus SNR at fixed time-bandwidth product "
                    "(columns: rho_db, method, rate)",
        "fields": {
            "omega": ("pos", 132.0),
            "rho_db_grid": ("numlist", [float(r) for r in range(0, 42, 2)]),
            "pe": ("pos", 1e-3),
            "eps_w": ("pos", 1e-4),
            "rcu_samples": ("int", 100_000),
        },
        "expand": _expand_fig5, "point": _point_fig5,
        "columns": ["rho_db", "method", "rate"],
    },
    "fig6-pulses": {
        "describe": "smallest feasible pulse occupancy per roll-off "
                    "(columns: family, beta, eps_w, min_c)",
        "fields": {
            "betas": ("numlist", [round(0.1 * k, 1) for k in range(1, 11)]),
            "eps_w": ("pos", 1e-4),
        },
        "expand": _expand_fig6, "point": _point_fig6,
        "columns": ["family", "beta", "eps_w", "min_c"],
    },
    "table1-opt": {
        "describe": "constrained cosine-series pulse optimization "
                    "(columns: c, T, c0, ck, c_na)",
        "fields": {
            "c_values": ("numlist", [4.0, 6.0]),
            "omega_by_c": ("numdict", {"4": 10.0, "6": 50.0, "10": 132.0}),
            "rho_db": ("num", 20.0),
            "eps_w": ("pos", 1e-4),
            "k_0": ("pos", 0.1),
            "restarts": ("int", 20),
        },
        "expand": _expand_table1, "point": _point_table1,
        "columns": ["c", "T", "c0", "ck", "c_na"],
    },
    "fig7-bler": {
        "describe": "three-stage turbo link block error rate versus SNR "
                    "(columns: snr_db, blocks, block_errors, bler, ci_low, "
                    "ci_high, mean_iterations, na_bler)",
        "fields": {
            "snr_db_grid": ("numlist", [2.5, 3.0, 3.5, 4.0, 4.5, 5.0]),
            "blocks": ("int", 2000),
            "chunk_blocks": ("int", 500),
            "omega": ("pos", 132.0),
            "beta": ("pos", 1.0),
            "eps_w": ("pos", 1e-4),
            "info_bits": ("int", 128),
            "equalizer_memory": ("int", 3),
            "inner_iterations": ("int", 5),
            "outer_iterations": ("int", 30),
            "early_stop": ("bool", True),
        },
        "expand": _expand_fig7, "point": _point_fig7,
        "aggregate": _aggregate_fig7,
        "columns": ["snr_db", "blocks", "block_errors", "bler", "ci_low",
                    "ci_high", "mean_iterations", "na_bler"],
    },
    "custom": {
        "describe": "bounds on an explicit (omega, rho) grid "
                    "(columns: omega, rho_db, tau, method, value)",
        "fields": {
            "omega_grid": ("numlist", None),
            "rho_db_grid": ("numlist", None),
            "tau": ("num", -1.0),
            "beta": ("pos", 1.0),
            "pe": ("pos", 1e-3),
            "eps_w": ("pos", 1e-4),
            "methods": ("strlist", ["na", "mc", "rcu"]),
            "rcu_samples": ("int", 100_000),
        },
        "expand": _expand_custom, "point": _point_custom,
        "columns": ["omega", "rho_db", "tau", "method", "value"],
        "extra_checks": _check_custom,
    },
}


# ---------------------------------------------------------------------------
# execution engine
# ---------------------------------------------------------------------------

def _format_cell(v):
    if isinstance(v, float):
        return format(v, ".10g")
    return str(v)


def _write_csv(path: Path, columns, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_format_cell(row.get(c, "")) for c in columns])


def _config_digest(cfg: dict) -> str:
    return hashlib.sha256(
        json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]


def _run_point(args):
    index, params, point_fn = args
    t0 = time.monotonic()
    rows = point_fn(params)
    return index, rows, time.monotonic() - t0


def run_experiment(cfg: dict, resume: bool = False) -> int:
    """Execute a validated config; returns the process exit code."""
    exp = EXPERIMENTS[cfg["experiment"]]
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / (cfg["experiment"] + ".csv")
    manifest_path = out_dir / (cfg["experiment"] + "_manifest.json")
    ckpt_path = out_dir / (cfg["experiment"] + "_checkpoint.json")
    digest = _config_digest(cfg)

    points = exp["expand"](cfg)
    for i, p in enumerate(points):
        p["point_seed"] = _point_seed(cfg["seed"], i)

    done = {}
    if resume and ckpt_path.exists():
        try:
            saved = json.loads(ckpt_path.read_text())
            if saved.get("digest") == digest:
                done = {int(k): v for k, v in saved["completed"].items()}
                logger.info("resuming: %d/%d points already done", len(done), len(points))
            else:
                logger.warning("checkpoint ignored: config changed")
        except (ValueError, KeyError):
            logger.warning("checkpoint unreadable, starting fresh")

    manifest = {
        "experiment": cfg["experiment"],
        "config": cfg,
        "seed": cfg["seed"],
        "digest": digest,
        "versions": _versions(),
        "status": "running",
        "points_total": len(points),
        "point_diagnostics": [],
    }
    t_start = time.monotonic()
    last_ckpt = t_start
    status = 0
    error_text = None

    todo = [(i, points[i], exp["point"]) for i in range(len(points)) if i not in done]
    try:
        if cfg["workers"] > 1 and len(todo) > 1:
            from concurrent.futures import ProcessPoolExecutor, as_completed
            with ProcessPoolExecutor(max_workers=cfg["workers"]) as pool:
                futures = {pool.submit(_run_point, t): t[0] for t in todo}
                for fut in as_completed(futures):
                    index, rows, seconds = fut.result()
                    done[index] = rows
                    manifest["point_diagnostics"].append(
                        {"index": index, "seconds": round(seconds, 3)})
                    last_ckpt = _maybe_checkpoint(ckpt_path, digest, done, last_ckpt)
        else:
            for t in todo:
                index, rows, seconds = _run_point(t)
                done[index] = rows
                manifest["point_diagnostics"].append(
                    {"index": index, "seconds": round(seconds, 3)})
                last_ckpt = _maybe_checkpoint(ckpt_path, digest, done, last_ckpt)
    except KeyboardInterrupt:  # pragma: no cover - interactive only
        _checkpoint(ckpt_path, digest, done)
        raise
    except Exception as e:  # noqa: BLE001 - single funnel to FAILED manifest
        status = 2
        error_text = "".join(traceback.format_exception_only(type(e), e)).strip()
        logger.error("point execution failed: %s", error_text)
        _checkpoint(ckpt_path, digest, done)

    rows = [r for i in sorted(done) for r in done[i]]
    if "aggregate" in exp and status == 0:
        rows = exp["aggregate"](cfg, rows)
    _write_csv(csv_path, exp["columns"], rows)

    manifest["status"] = "ok" if status == 0 else "FAILED"
    if error_text:
        manifest["error"] = error_text
    manifest["points_done"] = len(done)
    manifest["wall_time_s"] = round(time.monotonic() - t_start, 3)
    manifest["point_diagnostics"].sort(key=lambda d: d["index"])
    manifest["csv"] = csv_path.name
    manifest["csv_sha256"] = hashlib.sha256(csv_path.read_bytes()).hexdigest()
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    if status == 0 and ckpt_path.exists():
        ckpt_path.unlink()
    logger.info("wrote %s (%d rows) and %s", csv_path, len(rows), manifest_path)
    return status


def _maybe_checkpoint(path, digest, done, last):
    now = time.monotonic()
    if now - last >= _CHECKPOINT_SECONDS:
        _checkpoint(path, digest, done)
        return now
    return last


def _checkpoint(path, digest, done):
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps({"digest": digest,
                               "completed": {str(k): v for k, v in done.items()}}))
    tmp.replace(path)


def _versions():
    import scipy
    from . import __version__
    return {"ftnlim": __version__, "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": ".".join(map(str, sys.version_info[:3]))}


# ---------------------------------------------------------------------------
# selftest
# ---------------------------------------------------------------------------

def _selftest_checks(inject_fault=None):
    """Yield (name, callable) pairs; each callable raises on failure."""
    from . import bounds, channel, design, pswf, pulse, turbo

    p = pulse.make_rrc(1.0, 0.5, 8.6)

    def gram_trace():
        H = channel.build_gram(p, 0.5, 24)
        lam, _ = channel.diagonalize(H)
        if inject_fault == "eigenvalue":
            lam = lam.copy()
            lam[0] *= 1.01
        assert abs(lam.sum() - 24.0) < 1e-8 * 24, "Gram trace drifted"

    def eigen_reconstruction():
        H = channel.build_gram(p, 0.5, 24)
        lam, U = channel.diagonalize(H)
        assert np.abs(U @ np.diag(lam) @ U.T - H).max() < 1e-8

    def pswf_trace():
        basis = pswf.solve_basis(20.0)
        assert abs(basis.eigenvalues.sum() - 20.0) < 1e-6 * 20

    def na_round_trip():
        ch = channel.make_channel(p, 40.0, 100.0, 0.6)
        r = bounds.na_rate(ch, 1e-3)
        assert abs(bounds.na_bler(ch, r) - 1e-3) < 1e-12

    def saddlepoint_vs_mc():
        sigma_sq = np.array([0.5, 1.2, 2.0])
        xi = np.array([1.5, 0.7, 0.2])
        a = 2.4
        rng = np.random.default_rng(7)
        draws = 0.5 * rng.noncentral_chisquare(2.0, 2.0 * xi,
                                               size=(200_000, 3))
        mc = np.log(np.mean((draws / sigma_sq).sum(axis=1) <= a))
        sp = bounds.saddlepoint_log_cdf(sigma_sq, xi, a)
        assert abs(sp - mc) < 0.1, "saddlepoint %.4f vs mc %.4f" % (sp, mc)

    def interleaver_property():
        pi = turbo.s_random_interleaver(128, 5)
        s = int(np.floor(np.sqrt(64)))
        assert np.array_equal(np.sort(pi), np.arange(128))
        for i in range(128):
            for j in range(max(0, i - s + 1), i):
                assert abs(int(pi[i]) - int(pi[j])) >= s

    def interleaver_determinism():
        a = turbo.s_random_interleaver(128, 5)
        b = turbo.s_random_interleaver(128, 5)
        assert np.array_equal(a, b)

    def encoder_properties():
        rng = np.random.default_rng(3)
        u = rng.integers(0, 2, 64).astype(np.uint8)
        v = turbo.urc_encode(u)
        back = np.bitwise_xor(v, np.concatenate(([0], v[:-1])).astype(np.uint8))
        assert np.array_equal(back, u), "accumulator must invert"
        c1, c2 = turbo.rsc_encode(u), turbo.rsc_encode(1 - u)
        ones = turbo.rsc_encode(np.ones_like(u))
        assert np.array_equal(np.bitwise_xor(c1, c2), ones), "code must be linear"

    def equalizer_identity():
        rng = np.random.default_rng(4)
        bits = rng.integers(0, 2, 32).astype(np.uint8)
        x = turbo.qpsk_modulate(bits)
        nu = 0.8
        y = x + np.sqrt(nu / 2) * (rng.standard_normal(16)
                                   + 1j * rng.standard_normal(16))
        ext = turbo.map_equalize(y, np.array([1.0]), nu, np.zeros(32))
        ref = np.empty(32)
        ref[0::2] = 2.0 * np.sqrt(2.0) * y.real / nu
        ref[1::2] = 2.0 * np.sqrt(2.0) * y.imag / nu
        assert np.abs(ext - ref).max() < 1e-9

    def rcu_determinism():
        ch = channel.make_channel(p, 20.0, 10.0, 0.6)
        a = bounds.rcu_bler(ch, 0.5, samples=2000, seed=11)
        b = bounds.rcu_bler(ch, 0.5, samples=2000, seed=11)
        assert a.bler == b.bler, "seeded union bound must be reproducible"

    def tau_star_identity():
        assert abs(design.tau_star(50.0, 5.0, 4.0, 0.3) - 1 / 1.3) < 1e-15

    def pulse_unit_energy():
        assert abs(pulse.autocorrelation(p, 1.0, 0) - 1.0) < 1e-12

    return [
        ("gram-trace-identity", gram_trace),
        ("eigen-reconstruction", eigen_reconstruction),
        ("pswf-trace-identity", pswf_trace),
        ("na-round-trip", na_round_trip),
        ("saddlepoint-vs-mc", saddlepoint_vs_mc),
        ("interleaver-s-property", interleaver_property),
        ("interleaver-determinism", interleaver_determinism),
        ("encoder-properties", encoder_properties),
        ("equalizer-awgn-identity", equalizer_identity),
        ("rcu-determinism", rcu_determinism),
        ("tau-star-identity", tau_star_identity),
        ("pulse-unit-energy", pulse_unit_energy),
    ]


def selftest(inject_fault=None, stream=sys.stdout) -> int:
    """Run the fast invariant suite; returns the number of failures."""
    failures = 0
    checks = _selftest_checks(inject_fault)
    for name, fn in checks:
        try:
            fn()
        except Exception as e:  # noqa: BLE001 - report and continue
            failures += 1
            print("FAIL %-28s %s" % (name, e), file=stream)
        else:
            print("ok   %-28s" % name, file=stream)
    print("%d/%d checks passed" % (len(checks) - failures, len(checks)),
          file=stream)
    return failures


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _build_parser():
    epilog_lines = ["experiments:"]
    for name in sorted(EXPERIMENTS):
        epilog_lines.append("  %-12s %s" % (name, EXPERIMENTS[name]["describe"]))
    parser = argparse.ArgumentParser(
        prog="ftnlim",
        description="Finite time-bandwidth rate-limit experiments.",
        epilog="\n".join(epilog_lines),
        formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a JSON experiment config")
    run.add_argument("config", help="path to the JSON config file")
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--workers", type=int, help="override the worker count")
    run.add_argument("--out-dir", help="override the output directory")
    run.add_argument("--resume", action="store_true",
                     help="continue from a checkpoint if one matches")

    st = sub.add_parser("selftest", help="run the fast invariant suite")
    st.add_argument("--inject-fault", choices=["eigenvalue"],
                    help="deliberately corrupt a quantity to prove the "
                         "checks can fail")

    sub.add_parser("list-experiments", help="list experiment ids and schemas")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    args = _build_parser().parse_args(argv)

    if args.command == "list-experiments":
        for name in sorted(EXPERIMENTS):
            exp = EXPERIMENTS[name]
            print(name)
            print("  %s" % exp["describe"])
            fields = dict(_COMMON_FIELDS)
            fields.update(exp["fields"])
            for fname in sorted(fields):
                if fname == "experiment":
                    continue
                kind, default = fields[fname]
                req = "required" if default is None else "default %r" % (default,)
                print("    %-18s %-8s %s" % (fname, kind, req))
        return 0

    if args.command == "selftest":
        failures = selftest(inject_fault=args.inject_fault)
        return 3 if failures else 0

    # run
    try:
        raw = json.loads(Path(args.config).read_text())
    except OSError as e:
        print("config error: %s" % e, file=sys.stderr)
        return 1
    except json.JSONDecodeError as e:
        print("config error: %s: line %d column %d: %s"
              % (args.config, e.lineno, e.colno, e.msg), file=sys.stderr)
        return 1
    for key in ("seed", "workers"):
        value = getattr(args, key)
        if value is not None:
            raw[key] = value
    if args.out_dir is not None:
        raw["out_dir"] = args.out_dir
    try:
        cfg = validate_config(raw)
    except ConfigError as e:
        print("config error: %s" % e, file=sys.stderr)
        return 1
    return run_experiment(cfg, resume=args.resume)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""Command-line surface: analyze, optimize, simulate, detect, calibrate, sweep.

Each command reads a single JSON config document (``--config``); every config
key can be overridden with a flag of the same dotted name, e.g.
``--workload.alpha 0.99``.  Outputs are deterministic given the config
(seeds are always explicit) and embed a metadata block: '#'-prefixed comment
lines before the CSV header, or a ``metadata`` object in JSON.

Exit codes: 0 success, 2 config/validation error, 3 runtime (saturation or
I/O) error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass

from . import __version__, analytic, calibrate, detect, sim
from .errors import SaturationError, ValidationError
from .workload import make_workload


@dataclass(frozen=True)
class Field:
    type: str  # "int" | "float" | "str" | "bool" | "json"
    default: object = None
    help: str = ""


WORKLOAD_KEYS = {
    "workload.alpha": Field("float", help="fraction of short (regular) jobs"),
    "workload.ex_short": Field("float", help="mean short-job service time, ms"),
    "workload.ex_long": Field("float", help="mean long-job service time, ms"),
    "workload.rho": Field("float", help="single-server utilization in (0,1)"),
    "workload.lambda": Field("float", help="total arrival rate, jobs/ms"),
}

STRATEGY_KEYS = {
    "strategies.pb": Field("str", "erlang_c", "waiting probability: erlang_c|simulated"),
    "strategies.pb_seed": Field("int", 0, "seed for the simulated pb strategy"),
    "strategies.pb_n": Field("int", 1_000_000, "jobs per k for the simulated pb strategy"),
    "strategies.variance": Field("str", analytic.HEAVY_TAIL,
                                 "variance approximation: heavy_tail|centered"),
}

def OUTPUT_KEYS(fmt, path):
    return {
        "output.format": Field("str", fmt, "csv|json"),
        "output.path": Field("str", path, "output file path, '-' for stdout"),
    }

SCHEMAS = {
    "analyze": {
        **WORKLOAD_KEYS,
        "k.from": Field("int", 1),
        "k.to": Field("int", 20),
        **STRATEGY_KEYS,
        **OUTPUT_KEYS("csv", "analyze.csv"),
    },
    "optimize": {
        **WORKLOAD_KEYS,
        "k.to": Field("int", 200, "search upper bound (k_max)"),
        **STRATEGY_KEYS,
        **OUTPUT_KEYS("json", "optimize.json"),
    },
    "simulate": {
        **WORKLOAD_KEYS,
        "sim.k": Field("int", 1, "number of servers"),
        "sim.rounds": Field("int", 5),
        "sim.n": Field("int", 1_000_000, "jobs per round"),
        "sim.seed": Field("int", 0),
        "sim.warmup_fraction": Field("float", 0.01),
        "sim.ci_level": Field("float", 0.95),
        "sim.trace_path": Field("str", None,
                                "also export the per-job trace of round 0 "
                                "as CSV"),
        **OUTPUT_KEYS("json", "simulate.json"),
    },
    "detect": {
        **WORKLOAD_KEYS,
        "k.from": Field("int", 1),
        "k.to": Field("int", 100),
        "detect.n_samples": Field("int", 50_000),
        "detect.test_fraction": Field("float", 0.2),
        "detect.trainer": Field("str", "max_margin", "max_margin|gaussian_nb|stump"),
        "detect.feature": Field("str", detect.RESPONSE_TIME, "response|waiting"),
        "detect.scope": Field("str", detect.ALL_JOBS,
                              "all (3-class, 80/20 split) | short_only (binary, "
                              "whole-set threshold training)"),
        "detect.seed": Field("int", 0),
        "detect.warmup_fraction": Field("float", 0.0),
        "detect.p_test": Field("str", "pooled",
                               "t-test for the waiting-time p-value series: "
                               "pooled|welch"),
        **OUTPUT_KEYS("csv", "detect.csv"),
    },
    "sweep": {
        "sweep.ex_short": Field("float", 54.13, "short-job service time anchor, ms"),
        "sweep.grid": Field("json", None,
                            "list of [ratio, alpha, rho] rows; default 27-row grid"),
        "sweep.rows": Field("json", None, "1-based row indices to keep"),
        "sweep.k_max": Field("int", 200),
        "sweep.simulate": Field("bool", False, "add simulated argmin columns"),
        "sweep.sim_k_max": Field("int", 60),
        "sweep.rounds": Field("int", 5),
        "sweep.n": Field("int", 100_000, "jobs per round for simulated columns"),
        "sweep.seed": Field("int", 0),
        "sweep.warmup_fraction": Field("float", 0.01),
        **STRATEGY_KEYS,
        **OUTPUT_KEYS("csv", "sweep.csv"),
    },
}


def _parse_value(field: Field, raw: str):
    if field.type == "int":
        return int(raw)
    if field.type == "float":
        return float(raw)
    if field.type == "bool":
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ValidationError(f"expected true/false, got {raw!r}")
    if field.type == "json":
        return json.loads(raw)
    return raw


def _flatten(doc, prefix=""):
    flat = {}
    for key, value in doc.items():
        dotted = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, dotted + "."))
        else:
            flat[dotted] = value
    return flat


def load_config(schema, config_path, overrides):
    """Defaults <- config file <- command-line overrides; unknown keys rejected."""
    cfg = {key: field.default for key, field in schema.items()}
    if config_path:
        try:
            with open(config_path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{config_path}: invalid JSON: {exc}") from None
        for key, value in _flatten(doc).items():
            if key not in schema:
                raise ValidationError(f"{config_path}: unknown config key {key!r}")
            cfg[key] = value
    for key, value in overrides.items():
        if value is not None:
            cfg[key] = value
    return cfg


def _workload_from(cfg, params_path=None):
    if params_path:
        try:
            with open(params_path, encoding="utf-8") as fh:
                params = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{params_path}: invalid JSON: {exc}") from None
        for src, dst in (("ex_short", "workload.ex_short"),
                         ("ex_long", "workload.ex_long")):
            if cfg.get(dst) is None:
                cfg[dst] = params.get(src)
    missing = [key for key in ("workload.alpha", "workload.ex_short",
                               "workload.ex_long")
               if cfg.get(key) is None]
    if cfg.get("workload.rho") is None and cfg.get("workload.lambda") is None:
        missing.append("workload.rho (or workload.lambda)")
    if missing:
        raise ValidationError(f"missing required config keys: {', '.join(missing)}")
    return make_workload(
        cfg["workload.alpha"],
        cfg["workload.ex_short"],
        cfg["workload.ex_long"],
        rho=cfg.get("workload.rho"),
        lam=cfg.get("workload.lambda"),
    )


def _pb_strategy(cfg):
    name = cfg["strategies.pb"]
    if name == "erlang_c":
        return analytic.ErlangC()
    if name == "simulated":
        return analytic.Simulated(seed=cfg["strategies.pb_seed"],
                                  n=cfg["strategies.pb_n"])
    raise ValidationError(f"strategies.pb must be erlang_c|simulated, got {name!r}")


def _metadata(command, cfg):
    meta = {"tool": "queuesec", "version": __version__, "command": command}
    meta.update({key: cfg[key] for key in sorted(cfg)})
    return meta


def _fmt(value):
    """CSV cell: 6 significant digits for floats, empty for None."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _write_csv(path, meta, header, rows, notes=()):
    lines = [f"# {key} = {_fmt(value)}" for key, value in meta.items()]
    lines += [f"# note: {note}" for note in notes]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(cell) for cell in row))
    text = "\n".join(lines) + "\n"
    _write_text(path, text)


def _write_json(path, doc):
    _write_text(path, json.dumps(doc, indent=2) + "\n")


def _write_text(path, text):
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def cmd_analyze(cfg, params_path=None):
    spec = _workload_from(cfg, params_path)
    if spec.rho >= 0.99:
        print(f"warning: utilization rho={spec.rho} is close to saturation",
              file=sys.stderr)
    k_from, k_to = cfg["k.from"], cfg["k.to"]
    if not 1 <= k_from <= k_to:
        raise ValidationError(f"need 1 <= k.from <= k.to, got {k_from}..{k_to}")
    strategy = _pb_strategy(cfg)
    variant = cfg["strategies.variance"]
    metrics = [analytic.queue_metrics(spec, k, strategy, variant)
               for k in range(k_from, k_to + 1)]
    meta = _metadata("analyze", cfg)
    if cfg["output.format"] == "json":
        doc = {
            "metadata": meta,
            "rows": [
                {"k": m.k, "mean_t": m.mean_t, "sd_t": m.sd_t,
                 "p_block": m.p_block, "cond_wait": m.cond_wait}
                for m in metrics
            ],
        }
        _write_json(cfg["output.path"], doc)
    else:
        rows = [(m.k, m.mean_t, m.sd_t, m.p_block, m.cond_wait) for m in metrics]
        _write_csv(cfg["output.path"], meta,
                   ["k", "mean_t", "sd_t", "p_block", "cond_wait"], rows)


def cmd_optimize(cfg, params_path=None):
    spec = _workload_from(cfg, params_path)
    best = analytic.optimal_servers(spec, cfg["k.to"], _pb_strategy(cfg),
                                    cfg["strategies.variance"])
    meta = _metadata("optimize", cfg)
    doc = {
        "metadata": meta,
        "k_mu": best.k_mu,
        "k_sigma": best.k_sigma,
        "mu_star": best.mu_star,
        "sigma_star": best.sigma_star,
        "per_k": [
            {"k": m.k, "mean_t": m.mean_t, "sd_t": m.sd_t, "p_block": m.p_block}
            for m in best.per_k
        ],
    }
    if cfg["output.format"] == "csv":
        rows = [(m.k, m.mean_t, m.sd_t, m.p_block) for m in best.per_k]
        meta_with_result = dict(meta)
        meta_with_result.update(
            {"k_mu": best.k_mu, "k_sigma": best.k_sigma,
             "mu_star": best.mu_star, "sigma_star": best.sigma_star}
        )
        _write_csv(cfg["output.path"], meta_with_result,
                   ["k", "mean_t", "sd_t", "p_block"], rows)
    else:
        _write_json(cfg["output.path"], doc)


def cmd_simulate(cfg, params_path=None):
    from .stats import RngStream

    spec = _workload_from(cfg, params_path)
    summary = sim.run_rounds(
        spec,
        cfg["sim.k"],
        cfg["sim.rounds"],
        cfg["sim.n"],
        cfg["sim.seed"],
        cfg["sim.warmup_fraction"],
        cfg["sim.ci_level"],
    )
    if cfg["sim.trace_path"]:
        # round 0 runs on the child stream (seed, 0); regenerate and label it
        trace = sim.label_impaired(
            sim.simulate(spec, cfg["sim.k"], cfg["sim.n"],
                         RngStream(cfg["sim.seed"]).split(0),
                         cfg["sim.warmup_fraction"])
        )
        trace.to_csv(cfg["sim.trace_path"])
    doc = {"metadata": _metadata("simulate", cfg)}
    doc.update(
        {
            "k": summary.k,
            "rounds": summary.rounds,
            "n_per_round": summary.n_per_round,
            "n_retained": summary.n,
            "mean_t": summary.mean_t,
            "sd_t": summary.sd_t,
            "mean_w": summary.mean_w,
            "sd_w": summary.sd_w,
            "p_wait": summary.p_wait,
            "impaired_fraction": summary.impaired_fraction,
            "round_mean_t": list(summary.round_mean_t),
            "round_sd_t": list(summary.round_sd_t),
            "ci_halfwidth": summary.ci_halfwidth,
            "sd_ci_halfwidth": summary.sd_ci_halfwidth,
        }
    )
    if summary.k == 1:
        mg1_mean, mg1_var = analytic.mg1_exact(spec)
        mg1_sd = mg1_var**0.5
        doc["mg1"] = {
            "mean_t": mg1_mean,
            "sd_t": mg1_sd,
            "mean_rel_diff": abs(summary.mean_t - mg1_mean) / mg1_mean,
            "sd_rel_diff": abs(summary.sd_t - mg1_sd) / mg1_sd,
        }
    _write_json(cfg["output.path"], doc)


def cmd_detect(cfg, params_path=None):
    spec = _workload_from(cfg, params_path)
    k_from, k_to = cfg["k.from"], cfg["k.to"]
    if not 1 <= k_from <= k_to:
        raise ValidationError(f"need 1 <= k.from <= k.to, got {k_from}..{k_to}")
    reports = detect.accuracy_vs_k(
        spec,
        k_from,
        k_to,
        n_samples=cfg["detect.n_samples"],
        trainer=cfg["detect.trainer"],
        seed=cfg["detect.seed"],
        test_fraction=cfg["detect.test_fraction"],
        feature=cfg["detect.feature"],
        scope=cfg["detect.scope"],
        warmup_fraction=cfg["detect.warmup_fraction"],
        p_test=cfg["detect.p_test"],
    )
    meta = _metadata("detect", cfg)
    if cfg["output.format"] == "json":
        doc = {
            "metadata": meta,
            "reports": [
                {
                    "k": r.k,
                    "accuracy": r.accuracy,
                    "impaired_fraction": r.impaired_fraction,
                    "thresholds": list(r.thresholds),
                    "p_value": r.p_value,
                    "n_train": r.n_train,
                    "n_test": r.n_test,
                    "seed": r.seed,
                    "confusion": [list(row) for row in r.confusion],
                }
                for r in reports
            ],
        }
        _write_json(cfg["output.path"], doc)
    else:
        rows = [
            (
                r.k,
                r.accuracy,
                r.impaired_fraction,
                r.thresholds[0] if r.thresholds else None,
                r.p_value,
                r.n_train,
                r.n_test,
                r.seed,
            )
            for r in reports
        ]
        _write_csv(
            cfg["output.path"],
            meta,
            ["k", "accuracy", "impaired_fraction", "threshold", "p_value",
             "n_train", "n_test", "seed"],
            rows,
        )


def cmd_calibrate(baseline_path, attack_path, out_path, baseline_rho=None):
    baseline = calibrate.load_samples(baseline_path, calibrate.BASELINE)
    attack = calibrate.load_samples(attack_path, calibrate.UNDER_ATTACK)
    params = calibrate.estimate_params(baseline, attack, baseline_rho)
    doc = {
        "metadata": {
            "tool": "queuesec",
            "version": __version__,
            "command": "calibrate",
            "baseline_path": str(baseline_path),
            "attack_path": str(attack_path),
        },
        "ex_short": params.ex_short,
        "ex_long": params.ex_long,
        "sd_short": params.sd_short,
        "sd_long": params.sd_long,
        "ratio": params.ratio,
        "n_baseline": baseline.n,
        "n_attack": attack.n,
    }
    _write_json(out_path, doc)


def cmd_sweep(cfg):
    grid = cfg["sweep.grid"]
    if grid is None:
        grid = [list(row) for row in analytic.DEFAULT_GRID]
    grid = [tuple(float(v) for v in row) for row in grid]
    # paper-style table layout: ratio ascending, then alpha and rho descending
    grid.sort(key=lambda row: (row[0], -row[1], -row[2]))
    if cfg["sweep.rows"] is not None:
        wanted = {int(i) for i in cfg["sweep.rows"]}
        bad = [i for i in wanted if not 1 <= i <= len(grid)]
        if bad:
            raise ValidationError(f"sweep.rows indices out of range: {sorted(bad)}")
        grid = [row for i, row in enumerate(grid, start=1) if i in wanted]
    rows = analytic.sweep(grid, cfg["sweep.ex_short"], cfg["sweep.k_max"],
                          _pb_strategy(cfg), cfg["strategies.variance"])

    header = ["ratio", "alpha", "rho", "k_mu", "k_sigma", "mu_star",
              "sigma_star", "mg1_mean_t", "mg1_sd_t"]
    sim_cols = cfg["sweep.simulate"]
    if sim_cols:
        header += ["k_mu_sim", "k_sigma_sim", "mu_star_sim", "mu_ci",
                   "sigma_star_sim", "sigma_ci"]
    header.append("error")

    out_rows = []
    for row in rows:
        cells = [row.ratio, row.alpha, row.rho, row.k_mu, row.k_sigma,
                 row.mu_star, row.sigma_star, row.mg1_mean_t, row.mg1_sd_t]
        if sim_cols:
            if row.error is None:
                spec = make_workload(row.alpha, cfg["sweep.ex_short"],
                                     cfg["sweep.ex_short"] / row.ratio, row.rho)
                best = sim.sim_optimal_servers(
                    spec,
                    range(1, cfg["sweep.sim_k_max"] + 1),
                    cfg["sweep.rounds"],
                    cfg["sweep.n"],
                    cfg["sweep.seed"],
                    cfg["sweep.warmup_fraction"],
                )
                by_k = {s.k: s for s in best.per_k}
                cells += [
                    best.k_mu,
                    best.k_sigma,
                    best.mu_star,
                    by_k[best.k_mu].ci_halfwidth,
                    best.sigma_star,
                    by_k[best.k_sigma].sd_ci_halfwidth,
                ]
            else:
                cells += [None] * 6
        cells.append(row.error)
        out_rows.append(tuple(cells))

    meta = _metadata("sweep", cfg)
    notes = [analytic.MG1_SD_NOTE]
    if cfg["output.format"] == "json":
        doc = {
            "metadata": meta,
            "notes": notes,
            "rows": [dict(zip(header, cells)) for cells in out_rows],
        }
        _write_json(cfg["output.path"], doc)
    else:
        _write_csv(cfg["output.path"], meta, header, out_rows, notes)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="queuesec",
        description="Capacity planning and response-time anomaly detection "
                    "for central-queue multi-server systems.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for command, schema in SCHEMAS.items():
        cp = sub.add_parser(command, help=f"run the {command} pipeline")
        cp.add_argument("--config", help="JSON config document")
        if command in ("analyze", "optimize", "simulate", "detect"):
            cp.add_argument("--params",
                            help="calibration output file supplying "
                                 "workload.ex_short/ex_long")
        for key, field in schema.items():
            cp.add_argument(f"--{key}", dest=key, metavar=field.type.upper(),
                            help=field.help or key)
    cal = sub.add_parser("calibrate",
                         help="estimate workload parameters from measured "
                              "response-time samples")
    cal.add_argument("baseline", help="CSV of baseline response times (ms)")
    cal.add_argument("attack", help="CSV of under-attack response times (ms)")
    cal.add_argument("out", help="output parameters file (JSON)")
    cal.add_argument("--baseline-rho", type=float, default=None,
                     help="estimated utilization of the baseline run")
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "calibrate":
        cmd_calibrate(args.baseline, args.attack, args.out, args.baseline_rho)
        return 0
    schema = SCHEMAS[args.command]
    overrides = {}
    for key, field in schema.items():
        raw = getattr(args, key)
        if raw is not None:
            overrides[key] = _parse_value(field, raw)
    cfg = load_config(schema, args.config, overrides)
    handler = {
        "analyze": cmd_analyze,
        "optimize": cmd_optimize,
        "simulate": cmd_simulate,
        "detect": cmd_detect,
    }.get(args.command)
    if handler is not None:
        handler(cfg, getattr(args, "params", None))
    else:
        cmd_sweep(cfg)
    return 0


def main(argv=None) -> int:
    try:
        return run(argv)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SaturationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

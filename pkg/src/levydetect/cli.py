"""Config-driven command-line front end.

Every subcommand reads one JSON config, writes its artifacts (report.csv and
summary.json, plus optional path/llr dumps) into the output directory, and
prints a one-screen summary. Exit codes: 0 success, 2 config problems,
3 inadmissible model (the violated condition is named), 4 numerical failure.

The summary embeds the fully resolved config and master seed; re-running with
the summary as config reproduces byte-identical numeric columns, and the
--threads flag never changes results.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

from . import __version__
from .config import ExperimentConfig
from .detector import DetectorConfig
from .errors import (
    InfeasibleTargetError,
    LevyDetectError,
    NumericalError,
    SpecValidationError,
    UnsupportedPairError,
)
from .evaluate import (
    calibrate_barrier,
    compare,
    convergence_study,
    estimate_arl,
    lorden_delay,
    lower_bound_ratio,
)
from .kernels import backend
from .likelihood import llr_path
from .paths import sample_changed_path
from .report import write_csv, write_json
from .rng import RngStream, stream_id

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INADMISSIBLE = 3
EXIT_NUMERICAL = 4

STOP_COLUMNS = ["rule", "h_bar", "delta", "stop_time", "censored",
                "stat_at_stop", "tau_hat", "seed", "stream_id"]


def _summary_payload(cfg: ExperimentConfig, subcommand: str, body: dict) -> dict:
    return {
        "subcommand": subcommand,
        "package_version": __version__,
        "kernel_backend": backend(),
        "resolved_config": cfg.resolved(),
        "results": body,
    }


def _print_block(title: str, lines) -> None:
    print(title)
    for line in lines:
        print(f"  {line}")


def _report_rows(reports) -> list:
    return [r.to_row() for r in reports]


def _stops_rows(cfg: ExperimentConfig, config: DetectorConfig, result) -> list:
    seed = cfg.simulation["master_seed"]
    censored = result.censored
    stop_times = result.stop_times
    tau_hat = result.tau_hat
    rows = []
    for i in range(len(stop_times)):
        rows.append({
            "rule": config.rule,
            "h_bar": config.log_barrier,
            "delta": result.dt,
            "stop_time": float(stop_times[i]),
            "censored": bool(censored[i]),
            "stat_at_stop": float(result.stat[i]),
            "tau_hat": float(tau_hat[i]) if config.rule.startswith("cusum") else math.nan,
            "seed": seed,
            "stream_id": i,
        })
    return rows


# --------------------------------------------------------------------------- #
# subcommands
# --------------------------------------------------------------------------- #

def _cmd_validate(cfg: ExperimentConfig, out: str) -> int:
    model = cfg.change_model()
    body = {
        "admissible": model.admissible,
        "violated_condition": model.violated,
        "message": model.message,
    }
    if model.admissible:
        body.update(alpha=model.alpha, beta_pre=model.beta_pre,
                    beta_post=model.beta_post, comp_rate=model.comp_rate,
                    model_digest=model.digest())
    write_json(os.path.join(out, "summary.json"),
               _summary_payload(cfg, "validate", body))
    if model.admissible:
        _print_block("model admissible", [
            f"alpha     = {model.alpha:.6g}",
            f"beta_pre  = {model.beta_pre:.6g}",
            f"beta_post = {model.beta_post:.6g}",
            f"comp_rate = {model.comp_rate:.6g}",
        ])
        return EXIT_OK
    _print_block("model inadmissible", [
        f"condition = {model.violated}",
        f"reason    = {model.message}",
    ])
    return EXIT_INADMISSIBLE


def _cmd_simulate(cfg: ExperimentConfig, out: str) -> int:
    model = cfg.change_model()
    model.require_admissible()
    sim = cfg.simulation
    tau = cfg.experiment.get("tau", math.inf)
    if tau is None:
        tau = math.inf
    rng = RngStream(sim["master_seed"], stream_id("path", 0))
    path = sample_changed_path(model, tau, sim["horizon"], sim["grid_dt"], rng)
    write_csv(os.path.join(out, "path_dump.csv"),
              [{"t": float(tt), "x": float(xx)}
               for tt, xx in zip(path.times, path.values)],
              columns=["t", "x"])
    write_csv(os.path.join(out, "jump_ledger.csv"),
              [{"t": float(tt), "jump_size": float(ss)}
               for tt, ss in zip(path.jump_times, path.jump_sizes)],
              columns=["t", "jump_size"])
    if cfg.output.get("dump_llr", False):
        llr = llr_path(model, path)
        write_csv(os.path.join(out, "llr_dump.csv"),
                  [{"t": float(tt), "u": float(uu)}
                   for tt, uu in zip(llr.times, llr.u_values)],
                  columns=["t", "u"])
    body = {
        "n_grid_points": len(path.values),
        "n_ledger_jumps": int(len(path.jump_times)),
        "change_point": path.change_point,
        "terminal_value": float(path.values[-1]),
    }
    write_json(os.path.join(out, "summary.json"),
               _summary_payload(cfg, "simulate", body))
    _print_block("simulated one path", [
        f"grid points  = {len(path.values)}",
        f"ledger jumps = {len(path.jump_times)}",
        f"X(horizon)   = {path.values[-1]:.6g}",
    ])
    return EXIT_OK


def _cmd_arl(cfg: ExperimentConfig, out: str) -> int:
    model = cfg.change_model()
    model.require_admissible()
    sim, det, exp = cfg.simulation, cfg.detector, cfg.experiment
    config = cfg.detector_config()
    report, result = estimate_arl(
        model, config, exp["regime"], sim["n_rep"], sim["horizon"],
        sim["master_seed"], threads=sim["threads"], return_raw=True)
    write_csv(os.path.join(out, "report.csv"), _report_rows([report]))
    write_csv(os.path.join(out, "stops.csv"), _stops_rows(cfg, config, result),
              columns=STOP_COLUMNS)
    body = {"report": report.to_dict()}
    write_json(os.path.join(out, "summary.json"),
               _summary_payload(cfg, "arl", body))
    _print_block(f"run length under {exp['regime']}", [
        f"estimate = {report.estimate:.6g} +- {report.std_error:.2g}",
        f"censored = {report.n_censored}/{report.n_rep}",
    ])
    return EXIT_OK


def _cmd_calibrate(cfg: ExperimentConfig, out: str) -> int:
    model = cfg.change_model()
    model.require_admissible()
    sim, det = cfg.simulation, cfg.detector
    gamma = det.get("gamma")
    if gamma is None:
        raise SpecValidationError("calibrate needs detector.gamma")
    cal = calibrate_barrier(model, det["rule"], float(gamma),
                            float(det["rel_tol"]), sim["master_seed"],
                            delta=float(det["delta"]),
                            n_rep=int(cfg.experiment["n_rep_calibrate"]),
                            threads=sim["threads"])
    probe_rows = [{"h_bar": h, "arl": v} for h, v in cal.probes]
    probe_rows.append({"h_bar": cal.h_bar, "arl": cal.report.estimate})
    write_csv(os.path.join(out, "report.csv"), probe_rows,
              columns=["h_bar", "arl"])
    body = {"h_bar": cal.h_bar, "achieved": cal.report.estimate,
            "std_error": cal.report.std_error,
            "report": cal.report.to_dict()}
    write_json(os.path.join(out, "summary.json"),
               _summary_payload(cfg, "calibrate", body))
    _print_block("calibrated barrier", [
        f"h_bar    = {cal.h_bar:.6g}",
        f"achieved = {cal.report.estimate:.6g} (target {gamma})",
    ])
    return EXIT_OK


def _cmd_lorden(cfg: ExperimentConfig, out: str) -> int:
    model = cfg.change_model()
    model.require_admissible()
    sim, exp = cfg.simulation, cfg.experiment
    config = cfg.detector_config()
    res = lorden_delay(model, config, exp["tau_grid"], sim["n_rep"],
                       sim["horizon"], sim["master_seed"],
                       threads=sim["threads"])
    rows = _report_rows(list(res.per_tau) + [res.worst])
    write_csv(os.path.join(out, "report.csv"), rows)
    body = {"worst_delay": res.worst.estimate,
            "worst_se": res.worst.std_error,
            "per_tau": [r.to_dict() for r in res.per_tau]}
    write_json(os.path.join(out, "summary.json"),
               _summary_payload(cfg, "lorden", body))
    _print_block("worst-case delay", [
        f"tau grid = {list(res.tau_grid)}",
        f"worst    = {res.worst.estimate:.6g} +- {res.worst.std_error:.2g}",
    ])
    return EXIT_OK


def _cmd_lowerbound(cfg: ExperimentConfig, out: str) -> int:
    model = cfg.change_model()
    model.require_admissible()
    sim, det, exp = cfg.simulation, cfg.detector, cfg.experiment
    config = cfg.detector_config()
    fixed_steps = exp.get("fixed_steps")
    lb = lower_bound_ratio(model, None if fixed_steps else config,
                           float(det["delta"]), sim["n_rep"], sim["horizon"],
                           sim["master_seed"], threads=sim["threads"],
                           fixed_steps=fixed_steps)
    delay = estimate_arl(model, config, "out_of_control", sim["n_rep"],
                         sim["horizon"], sim["master_seed"],
                         threads=sim["threads"], block=1)
    write_csv(os.path.join(out, "report.csv"), _report_rows([lb, delay]))
    body = {"lower_bound": lb.to_dict(), "delay": delay.to_dict()}
    write_json(os.path.join(out, "summary.json"),
               _summary_payload(cfg, "lowerbound", body))
    _print_block("lower-bound functional", [
        f"d_bar          = {lb.estimate:.6g} +- {lb.std_error:.2g}",
        f"delay estimate = {delay.estimate:.6g} +- {delay.std_error:.2g}",
    ])
    return EXIT_OK


def _cmd_converge(cfg: ExperimentConfig, out: str) -> int:
    model = cfg.change_model()
    model.require_admissible()
    sim, det, exp = cfg.simulation, cfg.detector, cfg.experiment
    base_delta = exp.get("base_delta") or det["delta"]
    res = convergence_study(model, float(det["log_barrier"]),
                            int(exp["dyadic_levels"]), sim["n_rep"],
                            sim["master_seed"], float(base_delta),
                            float(sim["grid_dt"]), float(sim["horizon"]),
                            regime=exp["regime"], threads=sim["threads"])
    rows = [{"delta": lv.delta, "stride": lv.stride, "mean_stop": lv.mean_stop,
             "std_error": lv.std_error, "mean_gap": lv.mean_gap}
            for lv in list(res.levels) + [res.reference]]
    write_csv(os.path.join(out, "report.csv"), rows,
              columns=["delta", "stride", "mean_stop", "std_error", "mean_gap"])
    body = {"monotone_fraction": res.monotone_fraction,
            "convention_agreement": res.convention_agreement,
            "levels": rows}
    write_json(os.path.join(out, "summary.json"),
               _summary_payload(cfg, "converge", body))
    _print_block("discretization convergence", [
        f"levels               = {len(res.levels)} (+ reference)",
        f"monotone fraction    = {res.monotone_fraction:.4f}",
        f"convention agreement = {res.convention_agreement:.4f}",
        f"finest mean stop     = {res.reference.mean_stop:.6g}",
    ])
    return EXIT_OK


def _cmd_compare(cfg: ExperimentConfig, out: str) -> int:
    model = cfg.change_model()
    model.require_admissible()
    sim, det, exp = cfg.simulation, cfg.detector, cfg.experiment
    gamma = det.get("gamma")
    if gamma is None:
        raise SpecValidationError("compare needs detector.gamma")
    rules = [(str(r), float(d)) for r, d in exp["rules"]]
    res = compare(model, float(gamma), rules, sim["n_rep"],
                  sim["master_seed"], rel_tol=float(det["rel_tol"]),
                  tau_grid=exp["tau_grid"], threads=sim["threads"],
                  n_rep_calibrate=int(exp["n_rep_calibrate"]))
    rows = [{"rule": r.rule, "delta": r.delta, "h_bar": r.h_bar,
             "gamma_achieved": r.gamma_achieved, "gamma_se": r.gamma_se,
             "worst_delay": r.worst_delay, "delay_se": r.delay_se,
             "calibrated": r.calibrated} for r in res.rows]
    write_csv(os.path.join(out, "report.csv"), rows,
              columns=["rule", "delta", "h_bar", "gamma_achieved", "gamma_se",
                       "worst_delay", "delay_se", "calibrated"])
    body = {"gamma": res.gamma, "rows": rows,
            "cusum_leads": res.cusum_leads()}
    write_json(os.path.join(out, "summary.json"),
               _summary_payload(cfg, "compare", body))
    lines = [f"{r.rule:<20} delay = {r.worst_delay:.6g} +- {r.delay_se:.2g}"
             for r in res.rows]
    lines.append(f"cusum leads: {res.cusum_leads()}")
    _print_block(f"comparison at gamma = {gamma}", lines)
    return EXIT_OK


_COMMANDS = {
    "validate": _cmd_validate,
    "simulate": _cmd_simulate,
    "arl": _cmd_arl,
    "calibrate": _cmd_calibrate,
    "lorden": _cmd_lorden,
    "lowerbound": _cmd_lowerbound,
    "converge": _cmd_converge,
    "compare": _cmd_compare,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="levydetect",
        description="Sequential change detection for Levy processes")
    parser.add_argument("subcommand", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="JSON experiment config")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the master seed")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads (never changes results)")
    parser.add_argument("--out", default="levydetect_out",
                        help="output directory for artifacts")
    args = parser.parse_args(argv)

    try:
        cfg = ExperimentConfig.load(args.config)
        if args.seed is not None:
            cfg.simulation["master_seed"] = args.seed
        if args.threads is not None:
            cfg.simulation["threads"] = args.threads
        os.makedirs(args.out, exist_ok=True)
        return _COMMANDS[args.subcommand](cfg, args.out)
    except (SpecValidationError, UnsupportedPairError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, InfeasibleTargetError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except LevyDetectError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INADMISSIBLE


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 invalid scenario or input,
3 simulation diverged.  Failures print one JSON object on stderr:
{"error": {"kind": ..., "message": ...}}.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .baselines import VicParams, run_direct_session, run_vic_session
from .core import AanError, ValidationError, config_from_dict, dump_json_line
from .logio import (load_session_jsonl, metrics_csv, metrics_rows,
                    plot_record, write_session_jsonl)
from .policy import run_session
from .scenario import ScenarioError, load_scenario, shipped_scenario_path
from .simdyn import SimulationDiverged
from .skill import fit_skill_records, load_model, run_skill_session, save_model

log = logging.getLogger("aanrehab")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVALID = 2
EXIT_DIVERGED = 3


def _resolve_scenario(arg: str):
    """Accept a file path or the name of a bundled scenario."""
    path = Path(arg)
    if path.exists():
        return load_scenario(path)
    shipped = shipped_scenario_path(arg)
    if shipped.is_file():
        return load_scenario(shipped)
    raise ScenarioError(f"no scenario file or bundled scenario named {arg!r}")


def _apply_overrides(scenario, args):
    cfg = scenario.cfg
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "iterations", None) is not None:
        updates["iterations"] = args.iterations
    if getattr(args, "episodes", None) is not None:
        updates["episodes_per_iteration"] = args.episodes
    if updates:
        cfg = cfg.replaced(**updates)
    return cfg


def _write_session_outputs(outdir: Path, records: list[dict],
                           plots: bool = True) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    write_session_jsonl(outdir / "session.jsonl", records)
    rows = metrics_rows(records)
    (outdir / "metrics.csv").write_text(metrics_csv(rows), encoding="utf-8")
    if plots:
        plotdir = outdir / "plots"
        plotdir.mkdir(exist_ok=True)
        for rec in records:
            if rec.get("type") != "iteration":
                continue
            name = f"iter_{rec['iteration']:02d}.json"
            with open(plotdir / name, "w", encoding="utf-8",
                      newline="\n") as fh:
                fh.write(dump_json_line(plot_record(rec)))


def _print_final_metrics(records: list[dict]) -> None:
    rows = metrics_rows(records)
    if rows:
        print(dump_json_line({"iterations": len(rows) - 1,
                              "final": rows[-1]}), end="\n")


def cmd_run(args) -> int:
    scenario = _resolve_scenario(args.scenario)
    cfg = _apply_overrides(scenario, args)
    session = run_session(cfg, scenario.task, scenario.patient,
                          therapist=scenario.therapist,
                          scenario_name=scenario.name)
    _write_session_outputs(Path(args.out), list(session.records),
                           plots=not args.no_plots)
    _print_final_metrics(list(session.records))
    return EXIT_OK


def cmd_baseline(args) -> int:
    scenario = _resolve_scenario(args.scenario)
    cfg = _apply_overrides(scenario, args)
    if args.method == "vic":
        records = run_vic_session(cfg, scenario.task, scenario.patient,
                                  VicParams(), scenario_name=scenario.name)
    else:
        records = run_direct_session(cfg, scenario.task, scenario.patient,
                                     scenario.therapist,
                                     scenario_name=scenario.name)
    _write_session_outputs(Path(args.out), records, plots=not args.no_plots)
    _print_final_metrics(records)
    return EXIT_OK


def cmd_compare(args) -> int:
    scenario = _resolve_scenario(args.scenario)
    cfg = _apply_overrides(scenario, args)
    outdir = Path(args.out)
    all_rows = []
    runs = {
        "proposed": lambda: list(run_session(
            cfg, scenario.task, scenario.patient,
            therapist=scenario.therapist,
            scenario_name=scenario.name).records),
        "vic": lambda: run_vic_session(cfg, scenario.task, scenario.patient,
                                       VicParams(),
                                       scenario_name=scenario.name),
        "direct": lambda: run_direct_session(cfg, scenario.task,
                                             scenario.patient,
                                             scenario.therapist,
                                             scenario_name=scenario.name),
    }
    for method, runner in runs.items():
        records = runner()
        _write_session_outputs(outdir / method, records, plots=False)
        for row in metrics_rows(records):
            all_rows.append({"method": method, **row})
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "compare.csv").write_text(
        metrics_csv(all_rows, extra_field="method"), encoding="utf-8")
    print(metrics_csv(all_rows, extra_field="method"), end="")
    return EXIT_OK


def cmd_skill_train(args) -> int:
    record_lists = [load_session_jsonl(_session_log_path(arg))
                    for arg in args.sessions]
    model = fit_skill_records(record_lists)
    save_model(Path(args.out), model)
    print(dump_json_line({"model": str(args.out),
                          "sessions": len(record_lists),
                          "latent_count": model.latent_count}))
    return EXIT_OK


def cmd_skill_apply(args) -> int:
    scenario = _resolve_scenario(args.scenario)
    cfg = _apply_overrides(scenario, args)
    model = load_model(Path(args.model))
    session = run_skill_session(cfg, scenario.task, scenario.patient, model,
                                scenario_name=scenario.name)
    _write_session_outputs(Path(args.out), list(session.records),
                           plots=not args.no_plots)
    _print_final_metrics(list(session.records))
    return EXIT_OK


def _session_log_path(arg: str) -> Path:
    path = Path(arg)
    if path.is_dir():
        path = path / "session.jsonl"
    if not path.is_file():
        raise ValidationError(f"no session log at {path}")
    return path


def cmd_metrics(args) -> int:
    path = _session_log_path(args.session)
    records = load_session_jsonl(path)
    text = metrics_csv(metrics_rows(records))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    print(text, end="")
    return EXIT_OK


def _validate_session_log(path: Path) -> dict:
    records = load_session_jsonl(path)
    header = records[0]
    cfg = config_from_dict(header["config"])
    iterations = [r for r in records[1:] if r.get("type") == "iteration"]
    if len(iterations) != len(records) - 1:
        raise ValidationError("log contains records of unknown type")
    for index, rec in enumerate(iterations):
        if rec["iteration"] != index:
            raise ValidationError(
                f"iteration records out of order at index {index}")
        if len(rec["episodes"]) != cfg.episodes_per_iteration:
            raise ValidationError(
                f"iteration {index} holds {len(rec['episodes'])} episodes, "
                f"expected {cfg.episodes_per_iteration}")
        stored = rec["metrics"]
        again = {
            "M1": float(np.mean([e["m1"] for e in rec["episodes"]])),
            "M2": float(np.mean([e["m2"] for e in rec["episodes"]])),
            "track_rms": float(np.mean([e["track_rms"]
                                        for e in rec["episodes"]])),
        }
        for key, value in again.items():
            if abs(stored[key] - value) > 1e-12:
                raise ValidationError(
                    f"stored {key} disagrees with episodes at iteration "
                    f"{index}")
    return {"valid": True, "kind": "session", "iterations": len(iterations)}


def cmd_validate(args) -> int:
    path = Path(args.path)
    if not path.is_file():
        raise ValidationError(f"no such file: {path}")
    if path.suffix == ".jsonl":
        result = _validate_session_log(path)
    else:
        scenario = load_scenario(path)
        result = {"valid": True, "kind": "scenario", "name": scenario.name}
    print(dump_json_line(result))
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    scenario = _resolve_scenario(args.scenario)
    app = create_app(scenario)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def _add_common(sub, out_required: bool = True) -> None:
    sub.add_argument("scenario", help="scenario file or bundled name")
    if out_required:
        sub.add_argument("--out", required=True, help="output directory")
        sub.add_argument("--no-plots", action="store_true",
                         help="skip per-iteration plot data files")
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--iterations", type=int, default=None)
    sub.add_argument("--episodes", type=int, default=None,
                     help="episodes per iteration")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aanrehab",
        description="Shape-adaptive assist-as-needed therapy simulator")
    commands = parser.add_subparsers(dest="command", required=True)

    sub = commands.add_parser("run", help="full scripted therapy session")
    _add_common(sub)
    sub.set_defaults(func=cmd_run)

    sub = commands.add_parser("baseline", help="run a comparison controller")
    sub.add_argument("--method", required=True, choices=["vic", "direct"])
    _add_common(sub)
    sub.set_defaults(func=cmd_baseline)

    sub = commands.add_parser("compare",
                              help="proposed vs. both baselines, one seed")
    _add_common(sub)
    sub.set_defaults(func=cmd_compare)

    sub = commands.add_parser("skill-train",
                              help="fit the therapist-skill regression")
    sub.add_argument("sessions", nargs="+",
                     help="session directories (or session.jsonl files) "
                          "from finished scripted runs")
    sub.add_argument("--out", required=True, help="model file to write")
    sub.set_defaults(func=cmd_skill_train)

    sub = commands.add_parser("skill-apply",
                              help="run a session driven by a stored model")
    _add_common(sub)
    sub.add_argument("--model", required=True, help="model file to load")
    sub.set_defaults(func=cmd_skill_apply)

    sub = commands.add_parser("metrics",
                              help="recompute metrics from a session log")
    sub.add_argument("session", help="session.jsonl file or its directory")
    sub.add_argument("--out", default=None, help="also write CSV here")
    sub.set_defaults(func=cmd_metrics)

    sub = commands.add_parser("validate",
                              help="check a scenario file or session log")
    sub.add_argument("path")
    sub.set_defaults(func=cmd_validate)

    sub = commands.add_parser("serve", help="HTTP session service")
    sub.add_argument("scenario", help="scenario file or bundled name")
    sub.add_argument("--host", default="127.0.0.1")
    sub.add_argument("--port", type=int, default=8000)
    sub.set_defaults(func=cmd_serve)

    return parser


def _emit_error(kind: str, message: str) -> None:
    sys.stderr.write(json.dumps(
        {"error": {"kind": kind, "message": message}}) + "\n")


def main(argv=None) -> int:
    level = os.environ.get("AAN_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except SimulationDiverged as exc:
        _emit_error("simulation_diverged", str(exc))
        return EXIT_DIVERGED
    except ScenarioError as exc:
        _emit_error("invalid_scenario", str(exc))
        return EXIT_INVALID
    except AanError as exc:
        _emit_error(type(exc).__name__, str(exc))
        return EXIT_INVALID
    except OSError as exc:
        _emit_error("io_error", str(exc))
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Three subcommands: `convergence` runs a configured study and writes CSV
tables, `trace` records one sample path of one cell step by step, and
`validate` runs the built-in invariant suites.

Exit codes: 0 success, 1 validation-suite failure, 2 configuration
error, 3 study error (divergence or runaway partition).  A run manifest
and the resolved config are written even when the study fails midway.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import time
from pathlib import Path

from .config import (
    PRESETS,
    RunManifest,
    load_config,
    load_preset,
    parse_delta_token,
    render_config,
)
from .errors import BlowUpError, ConfigError, RunawayPartitionError, StudyError
from .experiments import (
    convergence_study,
    fit_order,
    initial_state,
    make_scheme,
    spatial_study,
    write_errors_csv,
    write_slopes_csv,
    write_spatial_csv,
    write_trace_csv,
)
from .noise import NoiseSpec, NoiseStream
from .stepping import integrate


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="study config file (INI)")
    p.add_argument(
        "--preset",
        metavar="NAME",
        help=f"built-in config, one of: {', '.join(PRESETS)}",
    )
    p.add_argument(
        "--out", metavar="DIR", default="out", help="output directory (default: out)"
    )
    p.add_argument("--seed", type=int, metavar="U64", help="override the config seed")
    p.add_argument(
        "--threads", type=int, metavar="N", help="worker processes (default: config)"
    )
    p.add_argument(
        "--uncapped-fallback",
        action="store_true",
        help="hybrid fallback steps use tau_min verbatim instead of min(tau_min, delta*T)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="allencahn",
        description="Adaptive and tamed exponential integrators for the "
        "stochastic Allen-Cahn equation: convergence studies, traces, "
        "and invariant checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    conv = sub.add_parser(
        "convergence", help="run a temporal or spatial error study and write CSVs"
    )
    _add_common(conv)

    trace = sub.add_parser(
        "trace", help="record one sample path of one (scheme, law, delta) cell"
    )
    _add_common(trace)
    trace.add_argument("--path", type=int, default=0, help="sample-path index")
    trace.add_argument("--scheme", help="scheme kind (default: first in config)")
    trace.add_argument("--law", help="law token (default: first in config)")
    trace.add_argument(
        "--delta", help="delta level, e.g. 2^-4 (default: first in config)"
    )

    sub.add_parser("validate", help="run the built-in invariant suites")
    return parser


def _resolve_config(args):
    if bool(args.config) == bool(args.preset):
        raise ConfigError("give exactly one of --config PATH or --preset NAME")
    if args.config:
        cfg = load_config(args.config)
        source = args.config
    else:
        cfg = load_preset(args.preset)
        source = f"preset:{args.preset}"
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.threads is not None:
        overrides["threads"] = args.threads
    if args.uncapped_fallback:
        overrides["uncapped_fallback"] = True
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    return cfg, source


def _emit(out_dir: Path, name: str, writer) -> str:
    target = out_dir / name
    writer(target)
    return name


def cmd_convergence(args) -> int:
    cfg, source = _resolve_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        command="convergence",
        config_path=source,
        seed=cfg.seed,
        started=time.time(),
    )
    outputs = []
    (out_dir / "config_resolved.ini").write_text(render_config(cfg), encoding="utf-8")
    outputs.append("config_resolved.ini")
    try:
        if cfg.kind == "spatial":
            result = spatial_study(cfg)
            outputs.append(
                _emit(out_dir, "spatial.csv", lambda p: write_spatial_csv(p, result))
            )
            slope_rows = []
            if result.fit is not None:
                slope_rows.append((cfg.schemes[0], cfg.laws[0], result.fit))
            outputs.append(
                _emit(out_dir, "slopes.csv", lambda p: write_slopes_csv(p, slope_rows))
            )
            report = result.stability
        else:
            result = convergence_study(cfg)
            outputs.append(
                _emit(
                    out_dir, "errors.csv", lambda p: write_errors_csv(p, result.cells)
                )
            )
            outputs.append(
                _emit(
                    out_dir,
                    "slopes.csv",
                    lambda p: write_slopes_csv(p, result.slopes),
                )
            )
            # delta-axis cross-check fit: step count scales like 1/delta
            delta_rows = []
            for s in cfg.schemes:
                for l in cfg.laws:
                    series = [result.cell(s, l, d) for d in cfg.deltas]
                    if len(series) >= 3:
                        delta_rows.append(
                            (s, l, fit_order([(1.0 / c.delta, c.rms) for c in series]))
                        )
            outputs.append(
                _emit(
                    out_dir,
                    "slopes_delta.csv",
                    lambda p: write_slopes_csv(p, delta_rows),
                )
            )
            report = result.stability
        manifest.status = "complete"
        if report.exceeded or report.divergent_samples:
            manifest.detail = (
                f"divergent_samples={report.divergent_samples} "
                f"max_sup={report.max_sup!r} ceiling={report.ceiling!r}"
            )
        return 0
    except (StudyError, RunawayPartitionError, BlowUpError) as exc:
        manifest.status = "failed"
        manifest.detail = str(exc)
        print(f"study error: {exc}", file=sys.stderr)
        return 3
    finally:
        manifest.outputs = tuple(outputs)
        manifest.finished = time.time()
        (out_dir / "manifest.txt").write_text(manifest.render(), encoding="utf-8")


def cmd_trace(args) -> int:
    cfg, source = _resolve_config(args)
    scheme_kind = args.scheme or cfg.schemes[0]
    law_token = args.law or cfg.laws[0]
    delta = parse_delta_token(args.delta) if args.delta else cfg.deltas[0]
    if scheme_kind not in ("te", "ae", "ateu", "atea"):
        raise ConfigError(f"unknown scheme {scheme_kind!r}")

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        command="trace", config_path=source, seed=cfg.seed, started=time.time()
    )
    outputs = []
    (out_dir / "config_resolved.ini").write_text(render_config(cfg), encoding="utf-8")
    outputs.append("config_resolved.ini")
    try:
        scheme = make_scheme(cfg, scheme_kind, law_token, delta)
        spec = NoiseSpec(cfg.noise_kind, cfg.n_modes, cfg.noise_scale, cfg.regularity)
        stream = NoiseStream(spec, cfg.seed, args.path)
        result = integrate(
            scheme,
            initial_state(cfg.initial, cfg.n_modes),
            cfg.horizon,
            stream,
            cfg.drift,
            step_ceiling=cfg.step_ceiling,
            collect_records=True,
            projected_drift_norm=cfg.projected_drift_norm,
        )
        outputs.append(
            _emit(
                out_dir,
                "trace.csv",
                lambda p: write_trace_csv(p, result.records, args.path),
            )
        )
        manifest.status = "complete"
        manifest.detail = f"cell=({scheme_kind}, {law_token}, {delta!r}) steps={result.summary.steps}"
        return 0
    except (StudyError, RunawayPartitionError, BlowUpError) as exc:
        manifest.status = "failed"
        manifest.detail = str(exc)
        print(f"study error: {exc}", file=sys.stderr)
        return 3
    finally:
        manifest.outputs = tuple(outputs)
        manifest.finished = time.time()
        (out_dir / "manifest.txt").write_text(manifest.render(), encoding="utf-8")


def cmd_validate(_args) -> int:
    from .validation import run_validation

    ok, results = run_validation()
    for r in results:
        print(r.line)
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "convergence":
            return cmd_convergence(args)
        if args.command == "trace":
            return cmd_trace(args)
        return cmd_validate(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line frontend.

Subcommands: analytic, simulate, fit, trace-tdr, plan. Every command takes
--config (JSON file with the same key names as the flags; explicit flags
win), --out/--format for machine-readable output, and --plot to render a
figure next to the data. Seeded commands are reproducible bit for bit; when
--out is given, a run manifest (command, parameters, seed, version, wall
clock) is written to <out>.manifest.json, keeping timestamps out of the data
files themselves.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .calibration import MeasuredPoint, fit_alpha
from .model import (
    DECODERS,
    MAJORITY,
    ChannelModel,
    NetworkConfig,
    PacketSpec,
    drop_rate_approx,
    drop_rate_exact,
    packet_duration,
    tdr_approx_slot,
    APPROX_VALIDITY_LIMIT,
)
from .planner import (
    DEFAULT_BER_RESOLUTION,
    DEFAULT_LOG_GRID_POINTS,
    DesignRequirement,
    UnresolvableTarget,
    ber_grid,
    recommend,
    sweep,
)
from .simulator import (
    CONTINUOUS_TIMELINE,
    ERASED,
    HARMLESS,
    PER_CYCLE,
    SimOptions,
    estimate_tdr,
)
from .traces import TraceFormatError, parse_trace, window_tdr

__all__ = ["main", "RunManifest"]


@dataclass
class RunManifest:
    """Provenance record accompanying every file output."""

    command: str
    parameters: dict
    seed: int | None
    tool_version: str = __version__
    started_at: str = ""
    finished_at: str = ""


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _json_dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _csv_text(rows: list[dict], fieldnames: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _csv_cell(row.get(k)) for k in fieldnames})
    return buf.getvalue()


def _csv_cell(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return int(value)
    return value


def _emit(args, json_obj, csv_rows: list[dict] | None, csv_fields: list[str] | None) -> None:
    """Write the data payload to --out or stdout in the chosen format."""
    fmt = args.format
    if fmt == "csv" and csv_rows is None:
        raise ValueError("csv output is not available for this command")
    text = _csv_text(csv_rows, csv_fields) if fmt == "csv" else _json_dumps(json_obj)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _write_manifest(args, command: str, started: str) -> None:
    if not args.out:
        return
    params = {
        k: v
        for k, v in vars(args).items()
        if k not in ("func", "config") and not callable(v)
    }
    manifest = RunManifest(
        command=command,
        parameters=params,
        seed=getattr(args, "seed", None),
        started_at=started,
        finished_at=_now(),
    )
    path = Path(str(args.out) + ".manifest.json")
    path.write_text(_json_dumps(asdict(manifest)), encoding="utf-8")


def _apply_config_file(args: argparse.Namespace) -> None:
    """Fill unset flags from the --config JSON file (flags override it)."""
    if not getattr(args, "config", None):
        return
    try:
        values = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"config file {args.config}: invalid JSON ({exc})") from exc
    if not isinstance(values, dict):
        raise ValueError(f"config file {args.config}: expected a JSON object")
    for key, value in values.items():
        dest = key.replace("-", "_")
        if hasattr(args, dest) and getattr(args, dest) is None:
            setattr(args, dest, value)


def _defaults(args: argparse.Namespace, **defaults) -> None:
    for key, value in defaults.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)


def _require(args: argparse.Namespace, *names: str) -> None:
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise ValueError(f"missing required value(s): {flags} (flag or config file)")


def _parse_int_list(text: str) -> list[int]:
    """Accept '1,2,4' or '1:10' (inclusive)."""
    text = str(text)
    if ":" in text:
        lo, hi = text.split(":")
        return list(range(int(lo), int(hi) + 1))
    return [int(v) for v in text.split(",")]


def _parse_sweep_values(var: str, spec: str) -> list[float] | list[int]:
    parts = str(spec).split(":")
    if var in ("l", "k"):
        if len(parts) == 1:
            return [int(parts[0])]
        return list(range(int(parts[0]), int(parts[1]) + 1))
    if len(parts) == 1:
        return [float(parts[0])]
    start, stop = float(parts[0]), float(parts[1])
    count = int(parts[2]) if len(parts) > 2 else 50
    if count < 2:
        return [start]
    step = (stop - start) / (count - 1)
    return [start + i * step for i in range(count)]


# ---------------------------------------------------------------------------
# analytic
# ---------------------------------------------------------------------------


def _analytic_point(k: int, l: int, alpha: float, d_cycle: float) -> dict:
    beta = 1.0 - alpha
    d_slot = k * d_cycle / l
    return {
        "k": k,
        "l": l,
        "alpha": alpha,
        "d_cycle": d_cycle,
        "d_inv": d_cycle / l,
        "d_slot": d_slot,
        "tdr_exact": drop_rate_exact(k, l, d_cycle, alpha),
        "tdr_approx_cycle": drop_rate_approx(l, beta * k * d_cycle),
        "tdr_approx_slot": tdr_approx_slot(l, d_slot, alpha),
        "approx_valid": beta * k * d_cycle < APPROX_VALIDITY_LIMIT,
    }


def _resolve_d_cycle(args, k: int, l: int) -> float:
    if args.d_cycle is not None:
        return float(args.d_cycle)
    if args.d_slot is not None:
        return l * float(args.d_slot) / k
    if args.tr is None or args.rs is None or args.nrep is None:
        raise ValueError(
            "give either --d-cycle/--d-slot or the full packet timing (--tr --rs --nrep)"
        )
    packet = PacketSpec(
        n_rep=int(args.nrep),
        symbol_rate_baud=float(args.rs),
        preamble_symbols=int(args.preamble),
        id_symbols=int(args.id_symbols),
    )
    return packet_duration(packet) * l / float(args.tr)


def cmd_analytic(args) -> int:
    _defaults(args, preamble=40, id_symbols=16, format="json")
    _require(args, "k")
    sweep_var = args.sweep[0] if args.sweep else None
    if args.l is None and sweep_var != "l":
        raise ValueError("--l is required unless sweeping l")
    if args.alpha is None and sweep_var != "alpha":
        raise ValueError("--alpha is required unless sweeping alpha")
    ks = [int(v) for v in str(args.k).split(",")]
    fields = [
        "k", "l", "alpha", "d_cycle", "d_inv", "d_slot",
        "tdr_exact", "tdr_approx_cycle", "tdr_approx_slot", "approx_valid",
    ]
    sweep_field = None
    if args.sweep:
        sweep_field, spec = args.sweep
        if sweep_field not in ("d_slot", "d_cycle", "l", "k", "alpha"):
            raise ValueError(f"cannot sweep {sweep_field!r}")
        values = _parse_sweep_values(sweep_field, spec)
        rows = []
        for v in values:
            for k in ks if sweep_field != "k" else [int(v)]:
                l = int(v) if sweep_field == "l" else int(args.l)
                alpha = float(v) if sweep_field == "alpha" else float(args.alpha)
                if sweep_field == "d_slot":
                    d_cycle = l * float(v) / k
                elif sweep_field == "d_cycle":
                    d_cycle = float(v)
                else:
                    d_cycle = _resolve_d_cycle(args, k, l)
                rows.append(_analytic_point(k, l, alpha, d_cycle))
        payload = {"rows": rows}
    else:
        rows = [
            _analytic_point(k, int(args.l), float(args.alpha), _resolve_d_cycle(args, k, int(args.l)))
            for k in ks
        ]
        payload = {"rows": rows}
    _emit(args, payload, rows, fields)
    if args.plot:
        from .plotting import plot_tdr_series

        plot_tdr_series(rows, sweep_field or "d_slot", args.plot)
    return 0


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    _defaults(
        args,
        preamble=40,
        id_symbols=16,
        ber=0.0,
        trials=1000,
        seed=0,
        scope=PER_CYCLE,
        subthreshold=HARMLESS,
        decoder=MAJORITY,
        workers=1,
        format="json",
    )
    _require(args, "k", "l", "nrep", "rs", "tr", "alpha")
    config = NetworkConfig(
        k_tags=int(args.k),
        cycles=int(args.l),
        inventory_period_s=float(args.tr),
        packet=PacketSpec(
            n_rep=int(args.nrep),
            symbol_rate_baud=float(args.rs),
            preamble_symbols=int(args.preamble),
            id_symbols=int(args.id_symbols),
        ),
    )
    channel = ChannelModel(alpha=float(args.alpha), ber=float(args.ber))
    options = SimOptions(
        trials=int(args.trials),
        seed=int(args.seed),
        collision_scope=args.scope,
        subthreshold_overlap=args.subthreshold,
        decoder=args.decoder,
    )
    estimate = estimate_tdr(config, channel, options, workers=int(args.workers))
    row = asdict(estimate)
    _emit(args, row, [row], list(row.keys()))
    return 0


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

_POINT_FIELDS = ["k", "l", "tr_s", "preamble", "id_symbols", "nrep", "rs_baud", "measured_tdr"]


def _load_points(path: str) -> list[MeasuredPoint]:
    points: list[MeasuredPoint] = []
    problems: list[str] = []
    with open(path, encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = None
        for lineno, fields in enumerate(reader, start=1):
            if not fields or (fields[0].strip().startswith("#")):
                continue
            if header is None:
                header = [f.strip() for f in fields]
                if header[: len(_POINT_FIELDS)] != _POINT_FIELDS:
                    raise ValueError(
                        f"{path}: line {lineno}: expected header "
                        f"{','.join(_POINT_FIELDS)}[,weight]"
                    )
                continue
            try:
                k, l, preamble, idsym, nrep = (
                    int(fields[0]), int(fields[1]), int(fields[3]), int(fields[4]), int(fields[5])
                )
                tr_s, rs, measured = float(fields[2]), float(fields[6]), float(fields[7])
                weight = float(fields[8]) if len(fields) > 8 and fields[8].strip() else 1.0
                config = NetworkConfig(
                    k_tags=k,
                    cycles=l,
                    inventory_period_s=tr_s,
                    packet=PacketSpec(
                        n_rep=nrep,
                        symbol_rate_baud=rs,
                        preamble_symbols=preamble,
                        id_symbols=idsym,
                    ),
                )
                points.append(MeasuredPoint(config=config, measured_tdr=measured, weight=weight))
            except (ValueError, IndexError) as exc:
                problems.append(f"line {lineno}: {exc}")
    if header is None:
        raise ValueError(f"{path}: empty points file")
    if problems:
        raise ValueError(f"{path}: malformed rows: " + "; ".join(problems))
    if not points:
        raise ValueError(f"{path}: no data rows")
    return points


def cmd_fit(args) -> int:
    _defaults(args, grid_step=0.001, format="json")
    _require(args, "points")
    points = _load_points(args.points)
    fit = fit_alpha(points, grid_step=float(args.grid_step))
    if fit.degenerate:
        print(
            "warning: degenerate fit, the RMSE curve is flat and alpha is unidentified",
            file=sys.stderr,
        )
    payload = {
        "alpha_hat": fit.alpha_hat,
        "rmse": fit.rmse,
        "grid_step": fit.grid_step,
        "degenerate": fit.degenerate,
        "n_points": len(points),
        "curve": [{"alpha": a, "rmse": r} for a, r in fit.curve],
    }
    rows = [{"alpha": a, "rmse": r} for a, r in fit.curve]
    _emit(args, payload, rows, ["alpha", "rmse"])
    if args.plot:
        from .plotting import plot_rmse_curve

        plot_rmse_curve(fit.curve, fit.alpha_hat, args.plot)
    return 0


# ---------------------------------------------------------------------------
# trace-tdr
# ---------------------------------------------------------------------------


def cmd_trace_tdr(args) -> int:
    _defaults(args, format="json")
    _require(args, "trace", "tags", "l", "t_cycle")
    with open(args.trace, "rb") as fh:
        records = parse_trace(fh)
    tags = [t for t in str(args.tags).split(",") if t.strip()]
    report = window_tdr(records, tags, int(args.l), float(args.t_cycle))
    payload = {
        "l_cycles": report.l_cycles,
        "t_cycle_s": report.t_cycle_s,
        "window_s": report.window_s,
        "n_windows": report.n_windows,
        "expected_tags": sorted(report.expected_tags),
        "tdr": report.tdr,
        "per_window_missing": report.per_window_missing,
        "resolution_floor": 1.0 / (report.n_windows * len(report.expected_tags)),
    }
    rows = [
        {"window": i, "missing": m} for i, m in enumerate(report.per_window_missing)
    ]
    _emit(args, payload, rows, ["window", "missing"])
    if args.plot:
        from .plotting import plot_window_missing

        plot_window_missing(report.per_window_missing, len(report.expected_tags), args.plot)
    return 0


# ---------------------------------------------------------------------------
# plan
# ---------------------------------------------------------------------------


def cmd_plan(args) -> int:
    _defaults(
        args,
        nrep_set="1:10",
        l_set="1:15",
        trials=2500,
        seed=0,
        ber_resolution=DEFAULT_BER_RESOLUTION,
        ber_grid="linear",
        log_grid_points=DEFAULT_LOG_GRID_POINTS,
        decoder=MAJORITY,
        workers=1,
        format="json",
    )
    _require(args, "k", "delta", "tr", "rs", "alpha")
    if args.bandwidth is None:
        args.bandwidth = 6.0 * float(args.rs)
    req = DesignRequirement(
        k_tags=int(args.k),
        max_tdr=float(args.delta),
        inventory_period_s=float(args.tr),
        max_bandwidth_hz=float(args.bandwidth),
        symbol_rate_baud=float(args.rs),
    )
    options = SimOptions(trials=int(args.trials), seed=int(args.seed), decoder=args.decoder)
    grid = ber_grid(args.ber_grid, float(args.ber_resolution), int(args.log_grid_points))
    candidates = sweep(
        req,
        float(args.alpha),
        n_rep_set=_parse_int_list(args.nrep_set),
        l_set=_parse_int_list(args.l_set),
        options=options,
        grid=grid,
        analytic_only=bool(args.analytic_only),
        workers=int(args.workers),
    )
    try:
        best = recommend(candidates)
    except ValueError:
        best = None
        print("warning: no feasible design at this requirement", file=sys.stderr)
    fields = [
        "l_cycles", "t_cycle_s", "n_rep", "t_p_s",
        "max_tolerable_ber", "achieved_tdr_at_max_ber", "feasible", "recommended",
    ]
    rows = []
    for c in candidates:
        row = asdict(c)
        row["recommended"] = best is not None and c == best
        rows.append(row)
    payload = {
        "requirement": asdict(req),
        "alpha": float(args.alpha),
        "decoder": args.decoder,
        "candidates": rows,
        "recommended": asdict(best) if best else None,
    }
    _emit(args, payload, rows, fields)
    if args.plot:
        from .plotting import plot_design_table

        plot_design_table(candidates, args.plot)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with flag values (flags override)")
    p.add_argument("--out", help="write data output to this path")
    p.add_argument("--format", choices=["csv", "json"], default=None)
    p.add_argument("--plot", help="render a figure to this path (png/pdf)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tagdrop",
        description="Model, simulate, calibrate and plan unslotted backscatter tag networks.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analytic", help="closed-form TDR, occupancies, approximations")
    p.add_argument("--k", help="tag count, or comma list for several series")
    p.add_argument("--l", type=int, help="cycles per inventory period")
    p.add_argument("--alpha", type=float, help="collision zone parameter")
    p.add_argument("--d-slot", dest="d_slot", type=float)
    p.add_argument("--d-cycle", dest="d_cycle", type=float)
    p.add_argument("--tr", type=float, help="inventory period, seconds")
    p.add_argument("--rs", type=float, help="symbol rate, baud")
    p.add_argument("--nrep", type=int, help="tag ID repetitions per packet")
    p.add_argument("--preamble", type=int, default=None)
    p.add_argument("--id-symbols", dest="id_symbols", type=int, default=None)
    p.add_argument("--sweep", nargs=2, metavar=("VAR", "START:STOP[:COUNT]"))
    _add_common(p)
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("simulate", help="Monte Carlo TDR estimate")
    for flag, typ in (("--k", int), ("--l", int), ("--nrep", int)):
        p.add_argument(flag, type=typ)
    p.add_argument("--rs", type=float)
    p.add_argument("--tr", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--ber", type=float, default=None)
    p.add_argument("--preamble", type=int, default=None)
    p.add_argument("--id-symbols", dest="id_symbols", type=int, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--scope", choices=[PER_CYCLE, CONTINUOUS_TIMELINE], default=None)
    p.add_argument("--subthreshold", choices=[HARMLESS, ERASED], default=None)
    p.add_argument("--decoder", choices=list(DECODERS), default=None)
    p.add_argument("--workers", type=int, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="estimate the collision zone parameter from measured TDR")
    p.add_argument("--points", help="measured points CSV")
    p.add_argument("--grid-step", dest="grid_step", type=float, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("trace-tdr", help="measured TDR from a reception trace")
    p.add_argument("--trace", help="trace CSV path")
    p.add_argument("--tags", help="comma list of expected tag IDs")
    p.add_argument("--l", type=int)
    p.add_argument("--t-cycle", dest="t_cycle", type=float)
    _add_common(p)
    p.set_defaults(func=cmd_trace_tdr)

    p = sub.add_parser("plan", help="design sweep and recommendation")
    p.add_argument("--k", type=int)
    p.add_argument("--delta", type=float, help="maximum tolerated TDR")
    p.add_argument("--tr", type=float)
    p.add_argument("--rs", type=float)
    p.add_argument("--bandwidth", type=float, default=None, help="cap in Hz (default 6*rs)")
    p.add_argument("--alpha", type=float)
    p.add_argument("--nrep-set", dest="nrep_set", default=None, help="e.g. 1:10 or 2,4")
    p.add_argument("--l-set", dest="l_set", default=None, help="e.g. 1:15")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--ber-resolution", dest="ber_resolution", type=float, default=None)
    p.add_argument("--ber-grid", dest="ber_grid", choices=["linear", "log"], default=None)
    p.add_argument("--log-grid-points", dest="log_grid_points", type=int, default=None)
    p.add_argument("--decoder", choices=list(DECODERS), default=None)
    p.add_argument("--analytic-only", dest="analytic_only", action="store_true")
    p.add_argument("--workers", type=int, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_plan)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    started = _now()
    try:
        _apply_config_file(args)
        code = args.func(args)
        if code == 0:
            _write_manifest(args, args.command, started)
        return code
    except UnresolvableTarget as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, TraceFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Subcommands: ``sumrate``, ``region``, ``streams order``, ``streams
eliminate``, ``fig-gap``, ``fig-ordering``, ``gdof``, ``channel gen`` and
``channel show``.  Every command is deterministic given its configuration
and seed; trials are distributed over a process pool capped by the
``RSBC_THREADS`` environment variable and gathered in trial order, so
parallelism never changes the output bytes.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import channel as chmod
from . import streams as stmod
from . import sumrate as srmod
from .errors import CapacityError, ChannelParseError, PreconditionError, RsbcError
from .regions import full_mask, max_sum_rate, rs_constraints

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class ConfigError(Exception):
    pass


def db_to_linear(p_db: float) -> float:
    return 10.0 ** (p_db / 10.0)


def _worker_count(n_tasks: int) -> int:
    cap = os.environ.get("RSBC_THREADS", "").strip()
    limit = int(cap) if cap else 1
    if limit < 1:
        raise ConfigError(f"RSBC_THREADS must be >= 1, got {cap!r}")
    return max(1, min(limit, n_tasks, os.cpu_count() or 1))


def _map_trials(fn, tasks: list) -> list:
    workers = _worker_count(len(tasks))
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def _fmt17(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    if isinstance(x, (list, tuple)):
        return ";".join(_fmt17(v) for v in x)
    return str(x)


def _emit(args, payload: dict) -> None:
    if args.format == "json":
        text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    else:
        records = payload["records"]
        cols = sorted({k for r in records for k in r})
        lines = [f"# schema: {SCHEMA_VERSION}", ",".join(cols)]
        for r in records:
            lines.append(",".join(_fmt17(r.get(c, "")) for c in cols))
        text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="ascii") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _payload(args, command: str, records: list, extra: dict | None = None) -> dict:
    config = {
        k: v
        for k, v in vars(args).items()
        if k not in ("func", "out") and v is not None
    }
    out = {
        "schema": SCHEMA_VERSION,
        "command": command,
        "config": config,
        "records": records,
    }
    if extra:
        out.update(extra)
    return out


def _build_channel(args, P: float | None = None, seed: int | None = None) -> chmod.Channel:
    seed = args.seed if seed is None else seed
    kind = args.channel
    if kind == "rayleigh":
        return chmod.rayleigh(args.k, args.m, seed)
    if kind == "onering":
        params = chmod.two_group_defaults()
        rng = np.random.default_rng(seed)
        groups = tuple(int(g) for g in rng.integers(0, params.groups, size=args.k))
        return chmod.one_ring(args.k, args.m, params, groups, seed)
    if kind == "pathological":
        if P is None:
            raise ConfigError("the pathological channel needs --p-db")
        return chmod.pathological_three_user(P, args.alpha)
    if kind == "file":
        if not args.file:
            raise ConfigError("--channel file requires --file PATH")
        return chmod.load_channel(args.file)
    raise ConfigError(f"unknown channel kind {kind!r}")


def _require_p_list(args) -> list[float]:
    if not args.p_db:
        raise ConfigError("at least one --p-db value is required")
    return list(args.p_db)


# ----------------------------------------------------------------- commands


def cmd_channel_gen(args) -> int:
    p0 = db_to_linear(args.p_db[0]) if args.p_db else None
    ch = _build_channel(args, P=p0)
    if args.out:
        chmod.save_channel(ch, args.out)
    else:
        sys.stdout.write(chmod.serialize_channel(ch))
    return EXIT_OK


def cmd_channel_show(args) -> int:
    ch = chmod.load_channel(args.file)
    sys.stdout.write(
        f"K={ch.K} M={ch.M} nr={','.join(str(v) for v in ch.nr)} digest={ch.digest()}\n"
    )
    sys.stdout.write(chmod.serialize_channel(ch))
    return EXIT_OK


def cmd_region(args) -> int:
    p_list = _require_p_list(args)
    records = []
    for p_db in p_list:
        P = db_to_linear(p_db)
        ch = _build_channel(args, P=P)
        for c in rs_constraints(ch, P):
            rec = c.as_json_dict()
            rec["p_db"] = p_db
            records.append(rec)
    _emit(args, _payload(args, "region", records))
    return EXIT_OK


def _sumrate_record(task) -> dict:
    ns, trial, p_db = task
    P = db_to_linear(p_db)
    ch = _build_channel(ns, P=P, seed=ns.seed + trial)
    report = srmod.rs_sum_rate_best_subset(ch, P)
    rec = {
        "trial": trial,
        "p_db": p_db,
        "P": P,
        "rs_best_subset": report.rs_lp_value,
        "active_subset": report.active_users,
        "dpc_sum_capacity": srmod.dpc_sum_capacity(ch, P),
    }
    if ch.K >= 2:
        rec["upper_bound"] = srmod.k_user_upper_bound(ch, P)
    if ch.K == 3:
        rec["closed_form"] = srmod.three_user_closed_form(ch, P)
    return rec


def cmd_sumrate(args) -> int:
    p_list = _require_p_list(args)
    tasks = [(args, t, p) for t in range(args.trials) for p in p_list]
    records = _map_trials(_sumrate_record, tasks)
    _emit(args, _payload(args, "sumrate", records))
    return EXIT_OK


def _gap_cell(task) -> dict:
    ns, model, trial, p_db = task
    P = db_to_linear(p_db)
    seed = ns.seed + trial
    if model == "rayleigh":
        ch = chmod.rayleigh(ns.k, ns.m, seed)
    else:
        params = chmod.two_group_defaults()
        rng = np.random.default_rng(seed)
        groups = tuple(int(g) for g in rng.integers(0, params.groups, size=ns.k))
        ch = chmod.one_ring(ns.k, ns.m, params, groups, seed)
    rs = srmod.rs_sum_rate(ch, P).rs_lp_value
    ub = srmod.k_user_upper_bound(ch, P)
    return {"model": model, "trial": trial, "p_db": p_db, "rs": rs, "ub": ub}


def cmd_fig_gap(args) -> int:
    if args.k not in (4, 5):
        raise ConfigError(f"fig-gap reproduces the K=4 and K=5 sweeps, got --k {args.k}")
    p_list = _require_p_list(args)
    tasks = [
        (args, model, t, p)
        for model in ("rayleigh", "onering")
        for t in range(args.trials)
        for p in p_list
    ]
    cells = _map_trials(_gap_cell, tasks)
    records = []
    for model in ("rayleigh", "onering"):
        for p_db in p_list:
            sel = [c for c in cells if c["model"] == model and c["p_db"] == p_db]
            records.append(
                {
                    "model": model,
                    "p_db": p_db,
                    "P": db_to_linear(p_db),
                    "trials": len(sel),
                    "mean_rs": float(np.mean([c["rs"] for c in sel])),
                    "mean_upper_bound": float(np.mean([c["ub"] for c in sel])),
                }
            )
    _emit(args, _payload(args, "fig-gap", records))
    return EXIT_OK


def _ordering_trial(task) -> list[float]:
    ns, trial = task
    P = db_to_linear(ns.p_db[0])
    params = chmod.two_group_defaults()
    seed = ns.seed + trial
    rng = np.random.default_rng(seed)
    groups = tuple(int(g) for g in rng.integers(0, params.groups, size=ns.k))
    ch = chmod.one_ring(ns.k, ns.m, params, groups, seed)
    ordering = stmod.order_streams(ch, sigma=ns.sigma, seed=seed, tol=ns.tol)
    privates = [1 << i for i in range(ns.k)]
    total = full_mask(ns.k)
    cons = rs_constraints(ch, P)
    values = []
    for n_streams in range(ns.k, total + 1):
        active = sorted(set(privates) | set(ordering.top_streams(n_streams - ns.k)))
        values.append(max_sum_rate(cons, variables=active)[0])
    one_layer = max_sum_rate(cons, variables=sorted(privates) + [total])[0]
    values.append(one_layer)
    return values


def cmd_fig_ordering(args) -> int:
    if not args.p_db:
        args.p_db = [30.0]
    if len(args.p_db) != 1:
        raise ConfigError("fig-ordering runs at a single power point")
    total = full_mask(args.k)
    tasks = [(args, t) for t in range(args.trials)]
    rows = _map_trials(_ordering_trial, tasks)
    data = np.asarray(rows)
    records = []
    for i, n_streams in enumerate(range(args.k, total + 1)):
        records.append(
            {
                "n_streams": n_streams,
                "trials": args.trials,
                "mean_sum_rate": float(data[:, i].mean()),
                "mean_one_layer": float(data[:, -1].mean()),
            }
        )
    _emit(args, _payload(args, "fig-ordering", records))
    return EXIT_OK


def cmd_gdof(args) -> int:
    p_list = _require_p_list(args)
    if len(p_list) < 3:
        raise ConfigError("gdof needs at least three --p-db points")
    records = []
    capacity_pts = []
    scheme_pts = []
    if args.family == "three-user":
        scheme_name = "rs_closed_form"
        for p_db in p_list:
            P = db_to_linear(p_db)
            ch = chmod.pathological_three_user(P, args.alpha)
            cap = srmod.dpc_sum_capacity(ch, P)
            val = srmod.three_user_closed_form(ch, P)
            capacity_pts.append((P, cap))
            scheme_pts.append((P, val))
            records.append(
                {"p_db": p_db, "P": P, "dpc_sum_capacity": cap, scheme_name: val}
            )
    elif args.family == "two-user-triangular":
        scheme_name = "lp_bound"
        for p_db in p_list:
            P = db_to_linear(p_db)
            ch = chmod.triangular_two_user(P**args.alpha_f, P**args.alpha_g)
            cap = srmod.dpc_sum_capacity(ch, P)
            val = srmod.lp_only_sum_rate_bound(ch, P)
            capacity_pts.append((P, cap))
            scheme_pts.append((P, val))
            records.append(
                {"p_db": p_db, "P": P, "dpc_sum_capacity": cap, scheme_name: val}
            )
    else:
        raise ConfigError(f"unknown gdof family {args.family!r}")
    slopes = {
        "dpc_sum_capacity": srmod.gdof_slope(capacity_pts),
        scheme_name: srmod.gdof_slope(scheme_pts),
    }
    for rec in records:
        rec["slope_dpc"] = slopes["dpc_sum_capacity"]
        rec[f"slope_{scheme_name}"] = slopes[scheme_name]
    _emit(args, _payload(args, "gdof", records, extra={"slopes": slopes}))
    return EXIT_OK


def cmd_streams_order(args) -> int:
    ch = _build_channel(args)
    ordering = stmod.order_streams(ch, sigma=args.sigma, seed=args.seed, tol=args.tol)
    _emit(args, _payload(args, "streams order", stmod.ordering_json(ordering)))
    return EXIT_OK


def cmd_streams_eliminate(args) -> int:
    ch = _build_channel(args)
    threshold = args.c if args.c is not None else math.inf
    surviving = stmod.eliminate(ch, threshold, tol=args.tol)
    _emit(
        args,
        _payload(
            args,
            "streams eliminate",
            [stmod.elimination_json(threshold, surviving)],
        ),
    )
    return EXIT_OK


# ------------------------------------------------------------------ parser


def _add_common(p: argparse.ArgumentParser, *, k_default=None, m_default=None):
    p.add_argument("--k", type=int, default=k_default, help="number of users")
    p.add_argument("--m", type=int, default=m_default, help="transmit antennas")
    p.add_argument("--seed", type=int, default=0, help="base RNG seed")
    p.add_argument(
        "--channel",
        choices=["rayleigh", "onering", "pathological", "file"],
        default="rayleigh",
        help="channel source",
    )
    p.add_argument("--file", help="channel CSV path for --channel file")
    p.add_argument("--alpha", type=float, default=0.5, help="pathological exponent")
    p.add_argument("--tol", type=float, default=stmod.DEFAULT_W_TOL,
                   help="splitting verification tolerance")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--out", help="output path (stdout when omitted)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="rsbc",
        description="Rate-splitting sum rates, bounds and stream algorithms "
        "for MIMO broadcast channels",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("channel", help="generate or inspect channel files")
    chsub = p.add_subparsers(dest="subcommand", required=True)
    g = chsub.add_parser("gen", help="generate a channel and write its CSV")
    _add_common(g, k_default=2, m_default=2)
    g.add_argument("--p-db", type=float, action="append",
                   help="power in dB (pathological channel scales with it)")
    g.set_defaults(func=cmd_channel_gen)
    s = chsub.add_parser("show", help="print a channel file")
    s.add_argument("--file", required=True)
    s.set_defaults(func=cmd_channel_show, format="json", out=None)

    p = sub.add_parser("region", help="dump the constant-gap constraint system")
    _add_common(p, k_default=2, m_default=2)
    p.add_argument("--p-db", type=float, action="append", required=True)
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("sumrate", help="sum rates, bounds and closed forms")
    _add_common(p, k_default=3, m_default=3)
    p.add_argument("--p-db", type=float, action="append", required=True)
    p.add_argument("--trials", type=int, default=1)
    p.set_defaults(func=cmd_sumrate)

    p = sub.add_parser("fig-gap", help="upper bound vs exact RS sum rate sweep")
    _add_common(p, k_default=4, m_default=6)
    p.add_argument("--p-db", type=float, action="append",
                   default=None, help="defaults to 0,10,20,30")
    p.add_argument("--trials", type=int, default=100)
    p.set_defaults(func=cmd_fig_gap)

    p = sub.add_parser("fig-ordering", help="sum rate vs number of active streams")
    _add_common(p, k_default=4, m_default=4)
    p.add_argument("--p-db", type=float, action="append", default=None)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--sigma", type=float, default=None,
                   help="tie-breaking noise std deviation")
    p.set_defaults(func=cmd_fig_ordering)

    p = sub.add_parser("gdof", help="high-SNR slope separations")
    _add_common(p)
    p.add_argument("--family", choices=["three-user", "two-user-triangular"],
                   default="three-user")
    p.add_argument("--alpha-f", type=float, default=0.6)
    p.add_argument("--alpha-g", type=float, default=0.35)
    p.add_argument("--p-db", type=float, action="append",
                   default=None, help="defaults to 0,10,...,90")
    p.set_defaults(func=cmd_gdof)

    p = sub.add_parser("streams", help="stream ordering and elimination")
    stsub = p.add_subparsers(dest="subcommand", required=True)
    o = stsub.add_parser("order", help="order common streams by threshold")
    _add_common(o, k_default=4, m_default=4)
    o.add_argument("--sigma", type=float, default=None)
    o.set_defaults(func=cmd_streams_order)
    e = stsub.add_parser("eliminate", help="surviving streams at a threshold")
    _add_common(e, k_default=4, m_default=4)
    e.add_argument("--c", type=float, default=None,
                   help="elimination threshold (default infinity)")
    e.set_defaults(func=cmd_streams_eliminate)

    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "p_db", None) is None and args.command == "fig-gap":
        args.p_db = [0.0, 10.0, 20.0, 30.0]
    if getattr(args, "p_db", None) is None and args.command == "gdof":
        args.p_db = [float(v) for v in range(0, 100, 10)]
    try:
        return args.func(args)
    except (ConfigError, CapacityError, ChannelParseError, PreconditionError) as exc:
        print(f"rsbc: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RsbcError, np.linalg.LinAlgError) as exc:
        print(f"rsbc: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"rsbc: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

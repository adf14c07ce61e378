"""Command-line runner: simulate, seesaw, sweep, witness and vn subcommands.

Exit codes: 0 success, 2 input error, 3 invariant violation, 4 solver failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .policy import DEFAULT_POLICY, InvariantError, NumericPolicy, SolverError
from .protocol import (PreparationFamily, behavior, helstrom_povms, omega_purity, p_suc,
                       pair_settings, v_n, vn_weyl_preparations)
from .records import (behavior_rows, content_hash, dumps, load_json, meta_lines,
                      protocol_from_dict, protocol_to_dict, provenance, render_csv,
                      state_from_dict)
from .sdp import optimize_povm, write_iteration_log
from .seesaw import SeesawConfig, default_restarts, seesaw_psuc, write_trace_csv
from .states import DensityOperator, PureState, isotropic, schmidt_decompose, werner
from .witness import (BRUTEFORCE_MAX_D, BRUTEFORCE_MAX_N, classical_optimum_bruteforce,
                      comparison_constants, psuc_bound, schmidt_number_lower_bound,
                      selftest_check, vn_bound)

log = logging.getLogger("densecoding")

EXIT_OK, EXIT_INPUT, EXIT_INVARIANT, EXIT_SOLVER = 0, 2, 3, 4

FAMILIES = {"isotropic": isotropic, "werner": werner}


class InputError(ValueError):
    """Malformed command-line input or input file."""


# ---------------------------------------------------------------------------
# helpers


def _policy(overrides) -> NumericPolicy:
    fields = [f.name for f in dataclasses.fields(NumericPolicy)]
    values = {}
    for item in overrides or []:
        key, sep, val = item.partition("=")
        if not sep or key not in fields:
            raise InputError(f"bad policy override {item!r}; keys: {', '.join(fields)}")
        try:
            values[key] = int(val) if key == "max_dim" else float(val)
        except ValueError as exc:
            raise InputError(f"bad value in policy override {item!r}") from exc
    return dataclasses.replace(DEFAULT_POLICY, **values)


def _emit(text: str, path: Path | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)


def _out(prefix, suffix: str) -> Path | None:
    return None if prefix is None else Path(f"{prefix}{suffix}")


def _load(path) -> tuple[dict, str]:
    try:
        return load_json(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc


def _load_protocol(path, policy: NumericPolicy):
    data, file_hash = _load(path)
    try:
        family, povms = protocol_from_dict(data, policy)
    except (KeyError, TypeError, AttributeError) as exc:
        raise InputError(f"malformed protocol: {exc}") from exc
    return family, povms, file_hash


def _named_state(family: str, d: int, param: float, policy: NumericPolicy) -> DensityOperator:
    if family not in FAMILIES:
        raise InputError(f"unknown family {family!r}")
    try:
        return FAMILIES[family](d, param, policy)
    except InvariantError as exc:
        raise InputError(str(exc)) from exc


def _schmidt_upper(rho: DensityOperator) -> int:
    """Schmidt number of a pure shared state, else the trivial ``min(d_a, d_b)``."""
    d_a, d_b = rho.dims
    w, v = np.linalg.eigh(rho.matrix)
    if w[-1] > 1 - rho.policy.schmidt_tol:
        return schmidt_decompose(PureState(v[:, -1], d_a, d_b, rho.policy)).rank
    return min(d_a, d_b)


def _verdict(p: float, d_a: int, n: int) -> dict:
    s = schmidt_number_lower_bound(min(max(p, 0.0), 1.0), d_a, n)
    return {"schmidt_lower_bound": s, "entangled": s >= 2}


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    policy = _policy(args.policy)
    family, povms, file_hash = _load_protocol(args.protocol, policy)
    beh = behavior(family, povms)
    n, m, k = beh.shape
    d_a, _ = family.dims
    s = _schmidt_upper(family.shared_state)
    meta = provenance(args.seed, file_hash, policy)
    summary = {"meta": meta, "shape": {"n_preparations": n, "n_settings": m, "n_outcomes": k}}
    if m == 1 and k == n:
        p = p_suc(beh)
        summary.update(p_suc=p, bound=psuc_bound(d_a, s, n), classical_bound=psuc_bound(d_a, 1, n),
                       schmidt_number_used=s, verdict=_verdict(p, d_a, n))
    elif k == 2 and m == len(pair_settings(n)):
        summary.update(v_n=v_n(beh), bound=vn_bound(d_a, s, n), classical_bound=vn_bound(d_a, 1, n),
                       schmidt_number_used=s)
    csv_text = render_csv(["b", "x", "y", "p"], behavior_rows(beh), meta)
    json_text = dumps(summary)
    if args.output is not None:
        _emit(csv_text, _out(args.output, "_behavior.csv"))
        _emit(json_text, _out(args.output, "_summary.json"))
    else:
        _emit(csv_text if args.format == "csv" else json_text, None)
    return EXIT_OK


def _seesaw_inputs(args, policy):
    if args.state is not None:
        data, file_hash = _load(args.state)
        try:
            shared = state_from_dict(data, policy)
        except (KeyError, TypeError, AttributeError) as exc:
            raise InputError(f"malformed state: {exc}") from exc
        source = {"state_file_hash": file_hash}
    else:
        if args.family is None or args.d is None or args.param is None:
            raise InputError("give --state FILE or --family with --d and --chi/--alpha")
        shared = _named_state(args.family, args.d, args.param, policy)
        source = {"family": args.family, "d": args.d, "param": args.param}
    return shared, source


def _config(args, d_a: int) -> SeesawConfig:
    n = args.n if args.n is not None else d_a * d_a
    restarts = args.restarts if args.restarts is not None else default_restarts(d_a)
    try:
        return SeesawConfig(n, restarts, args.seed, args.tol, args.max_rounds,
                            workers=args.workers, structured_start=not args.random_starts_only)
    except InvariantError as exc:
        raise InputError(str(exc)) from exc


def _config_record(cfg: SeesawConfig) -> dict:
    rec = dataclasses.asdict(cfg)
    rec.pop("workers")
    return rec


def cmd_seesaw(args) -> int:
    policy = _policy(args.policy)
    shared, source = _seesaw_inputs(args, policy)
    d_a, _ = shared.dims
    cfg = _config(args, d_a)
    inputs = {"command": "seesaw", **source, "config": _config_record(cfg),
              "state": content_hash(shared.to_dict())}
    meta = provenance(args.seed, content_hash(inputs), policy)
    res = seesaw_psuc(shared, cfg)
    chois, povm = res.best_protocol
    n = cfg.n_preparations
    family = PreparationFamily(shared, tuple(chois), policy)
    result = {
        "meta": meta,
        "inputs": {k: v for k, v in inputs.items() if k != "command"},
        "best_value": res.best_value,
        "rescaled_value": d_a * res.best_value,
        "classical_bound": psuc_bound(d_a, 1, n),
        "verdict": _verdict(res.best_value, d_a, n),
        "rounds_used": res.rounds_used,
        "best_restart": res.best_restart,
        "restarts": [{"restart": t.restart, "rounds": t.rounds, "converged": t.converged,
                      "final_value": t.values[-1] if t.values else None, "error": t.error}
                     for t in res.traces],
    }
    if args.output is not None:
        _emit(dumps(result), _out(args.output, "_result.json"))
        _emit(dumps({"meta": meta, **protocol_to_dict(family, povm)}), _out(args.output, "_protocol.json"))
        write_trace_csv(res, _out(args.output, "_trace.csv"), meta_lines(meta))
        if args.verbose:
            _, _, sol = optimize_povm(family.states, policy=policy, return_solution=True)
            write_iteration_log(sol, _out(args.output, "_sdp_log.csv"))
    elif args.format == "csv":
        rows = [(t.restart, k, v) for t in res.traces for k, v in enumerate(t.values, start=1)]
        _emit(render_csv(["restart", "round", "value"], rows, meta), None)
    else:
        _emit(dumps(result), None)
    return EXIT_OK


def _grid(start: float, stop: float, step: float) -> list[float]:
    if step <= 0 or stop < start:
        raise InputError("need step > 0 and stop >= start")
    k = int(np.floor((stop - start) / step + 1e-9))
    return [round(start + i * step, 10) for i in range(k + 1)]


def _sweep_point(task):
    family, d, param, cfg, policy = task
    try:
        shared = FAMILIES[family](d, param, policy)
        res = seesaw_psuc(shared, cfg)
    except (SolverError, InvariantError) as exc:
        return {"param": param, "status": f"failed: {exc}"}
    return {"param": param, "value": res.best_value, "rounds": res.rounds_used, "status": "ok"}


def cmd_sweep(args) -> int:
    policy = _policy(args.policy)
    if args.family not in FAMILIES:
        raise InputError(f"unknown family {args.family!r}")
    grid = _grid(args.start, args.stop, args.step)
    for p in grid:
        _named_state(args.family, args.d, p, policy)
    cfg = dataclasses.replace(_config(args, args.d), workers=1)
    n = cfg.n_preparations
    tasks = [(args.family, args.d, p, cfg, policy) for p in grid]
    if args.workers > 1:
        with ProcessPoolExecutor(args.workers) as ex:
            points = list(ex.map(_sweep_point, tasks))
    else:
        points = [_sweep_point(t) for t in tasks]
    inputs = {"command": "sweep", "family": args.family, "d": args.d, "grid": grid,
              "config": _config_record(cfg)}
    meta = provenance(args.seed, content_hash(inputs), policy,
                      comparison_constants=comparison_constants(args.d))
    classical = psuc_bound(args.d, 1, n)
    cols = ["param", "p_suc_lower", "rescaled_p_suc", "classical_bound", "schmidt_lower_bound",
            "entangled", "rounds", "status"]
    rows = []
    for pt in points:
        if pt["status"] == "ok":
            v = _verdict(pt["value"], args.d, n)
            rows.append([pt["param"], pt["value"], args.d * pt["value"], classical,
                         v["schmidt_lower_bound"], v["entangled"], pt["rounds"], "ok"])
        else:
            rows.append([pt["param"], "", "", classical, "", "", "", pt["status"]])
    if args.format == "json":
        text = dumps({"meta": meta, "columns": cols, "rows": rows})
    else:
        text = render_csv(cols, rows, meta)
    _emit(text, _out(args.output, ".json" if args.format == "json" else ".csv"))
    failed = sum(r[-1] != "ok" for r in rows)
    if failed:
        log.warning("%d of %d sweep points failed", failed, len(rows))
    return EXIT_SOLVER if failed == len(rows) else EXIT_OK


def _record_output(record: dict, args, meta: dict) -> None:
    if args.format == "csv":
        flat = []
        for key, val in sorted(record.items()):
            if isinstance(val, dict):
                flat += [(f"{key}.{k}", v) for k, v in sorted(val.items())]
            else:
                flat.append((key, val))
        text = render_csv(["key", "value"], flat, meta)
        _emit(text, _out(args.output, ".csv"))
    else:
        _emit(dumps({"meta": meta, **record}), _out(args.output, ".json"))


def cmd_witness(args) -> int:
    policy = _policy(args.policy)
    d = args.d
    s = args.s if args.s is not None else d
    n = args.n if args.n is not None else d * d
    try:
        record = {
            "d": d, "s": s, "n": n,
            "psuc_bound": psuc_bound(d, s, n),
            "classical_bound": psuc_bound(d, 1, n),
            "vn_bound": vn_bound(d, s, n),
            "comparison_constants": comparison_constants(d),
        }
    except InvariantError as exc:
        raise InputError(str(exc)) from exc
    if n <= BRUTEFORCE_MAX_N and d <= BRUTEFORCE_MAX_D:
        record["classical_optimum_bruteforce"] = classical_optimum_bruteforce(n, d)
    hashes = {"parameters": content_hash({"d": d, "s": s, "n": n})}
    if args.p_observed is not None:
        record["observed"] = {"p_suc": args.p_observed, **_verdict(args.p_observed, d, n)}
    if args.protocol is not None:
        family, povms, file_hash = _load_protocol(args.protocol, policy)
        verdict = selftest_check(family, povms[0], tol=args.selftest_tol)
        record["verdict"] = {**verdict.to_dict(), "protocol_hash": file_hash}
        hashes["protocol"] = file_hash
    meta = provenance(args.seed, content_hash(hashes), policy, input_hashes=hashes)
    _record_output(record, args, meta)
    return EXIT_OK


def cmd_vn(args) -> int:
    policy = _policy(args.policy)
    d, n = args.d, args.n
    try:
        family = vn_weyl_preparations(d, n, policy)
    except InvariantError as exc:
        raise InputError(str(exc)) from exc
    beh = behavior(family, helstrom_povms(family))
    c, rem = divmod(n, d * d)
    record = {
        "d": d, "n": n,
        "v_n": v_n(beh),
        "bound": vn_bound(d, d, n),
        "omega_purity": omega_purity(family),
        "omega_purity_expected": (rem * (c + 1) ** 2 + (d * d - rem) * c * c) / (n * n),
    }
    meta = provenance(args.seed, content_hash({"command": "vn", "d": d, "n": n}), policy)
    _record_output(record, args, meta)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser, default_format: str) -> None:
    p.add_argument("--seed", type=int, default=0, help="RNG seed (echoed into every output)")
    p.add_argument("--output", default=None, help="output path prefix; stdout if omitted")
    p.add_argument("--format", choices=["csv", "json"], default=default_format)
    p.add_argument("--verbose", action="store_true", help="debug logging and SDP iteration logs")
    p.add_argument("--policy", action="append", metavar="KEY=VALUE",
                   help="override a numeric tolerance, e.g. psd_tol=1e-8")
    p.add_argument("--config", default=None, help="JSON file with default values for the flags")


def _seesaw_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, default=None, help="number of inputs (default d^2)")
    p.add_argument("--restarts", type=int, default=None,
                   help="random restarts (default 10 for d <= 3, else 20)")
    p.add_argument("--tol", type=float, default=1e-7, help="convergence tolerance per round")
    p.add_argument("--max-rounds", type=int, default=200)
    p.add_argument("--workers", type=int, default=1, help="worker processes")
    p.add_argument("--random-starts-only", action="store_true",
                   help="do not start restart 0 from the maximally entangled basis")


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(prog="densecoding", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = sub.add_parser("simulate", help="behavior and p_suc / V_N of a protocol file")
    p.add_argument("protocol", help="protocol JSON")
    _common(p, "json")
    p.set_defaults(func=cmd_simulate)
    subs["simulate"] = p

    p = sub.add_parser("seesaw", help="see-saw lower bound on p_suc for one state")
    p.add_argument("--state", default=None, help="state JSON ({d_a, d_b, re, im})")
    p.add_argument("--family", choices=sorted(FAMILIES), default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--chi", "--alpha", "--param", dest="param", type=float, default=None,
                   help="family parameter (chi for isotropic, alpha for werner)")
    _common(p, "json")
    _seesaw_opts(p)
    p.set_defaults(func=cmd_seesaw)
    subs["seesaw"] = p

    p = sub.add_parser("sweep", help="see-saw bounds over a parameter grid")
    p.add_argument("--family", choices=sorted(FAMILIES), required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--start", type=float, default=0.0)
    p.add_argument("--stop", type=float, default=1.0)
    p.add_argument("--step", type=float, default=0.05)
    _common(p, "csv")
    _seesaw_opts(p)
    p.set_defaults(func=cmd_sweep)
    subs["sweep"] = p

    p = sub.add_parser("witness", help="bounds, constants and certification verdicts")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--s", type=int, default=None, help="Schmidt number (default d)")
    p.add_argument("--n", type=int, default=None, help="number of inputs (default d^2)")
    p.add_argument("--p-observed", type=float, default=None)
    p.add_argument("--protocol", default=None, help="protocol JSON to self-test")
    p.add_argument("--selftest-tol", type=float, default=1e-6)
    _common(p, "json")
    p.set_defaults(func=cmd_witness)
    subs["witness"] = p

    p = sub.add_parser("vn", help="V_N of the Weyl/Helstrom construction")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    _common(p, "json")
    p.set_defaults(func=cmd_vn)
    subs["vn"] = p
    return parser, subs


def _apply_config_file(argv, subs) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    if known.config is None or known.command not in subs:
        return
    data, _ = _load(known.config)
    if not isinstance(data, dict):
        raise InputError("config file must hold a JSON object")
    p = subs[known.command]
    dests = {a.dest for a in p._actions}
    unknown = set(data) - dests
    if unknown:
        raise InputError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for action in p._actions:
        if action.dest in data:
            action.required = False
    p.set_defaults(**data)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    try:
        _apply_config_file(argv, subs)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InvariantError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

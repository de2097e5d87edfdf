"""Command line entry point: ``cwotce simulate|analyze|sweep|report|validate-measure``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import comparators
from .capacity import (
    build_measure, default_measure, invariant_report, load_measure_spec,
    moebius_from_spec, shapley_values,
)
from .encoding import EncodingConfig, MODES, encode_cohort
from .errors import CwotceError, DimensionError, ZeroAttribution
from .harness import (
    METHODS, SweepConfig, emit_plot_data, read_raw, run_sweep, summarize, write_summary,
)
from .inference import analyze_profiles, shapley_attribution
from .records import read_csv, write_csv
from .simulator import SimConfig, get_scenario, scenario_registry, simulate_trial


def _clean(obj):
    """Make a result JSON-safe: infinities become strings, NaN becomes null."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _dump(obj, out) -> None:
    out.write(json.dumps(_clean(obj), indent=2) + "\n")


def _csv_list(text: str, universe) -> tuple:
    if text == "all":
        return tuple(universe)
    return tuple(x.strip() for x in text.split(",") if x.strip())


# ---------------------------------------------------------------- simulate


def cmd_simulate(args) -> int:
    if args.list_scenarios:
        _dump({sid: s.to_dict() for sid, s in scenario_registry().items()}, sys.stdout)
        return 0
    if not args.scenario:
        raise SystemExit("simulate: --scenario is required unless --list-scenarios is given")
    scenario = get_scenario(args.scenario, args.n_per_arm)
    cohort = simulate_trial(scenario, SimConfig(base_seed=args.seed), args.rep)
    if args.out in (None, "-"):
        write_csv(cohort, sys.stdout)
    else:
        write_csv(cohort, args.out)
    return 0


# ---------------------------------------------------------------- analyze


def _cwot_payload(cohort, args) -> dict:
    if args.measure:
        measure = build_measure(load_measure_spec(args.measure))
    else:
        measure = default_measure(args.mode)
    config = EncodingConfig(mode=args.mode, tau=args.tau)
    if measure.k != config.k:
        raise DimensionError(f"measure has {measure.k} components, mode {args.mode} needs {config.k}")
    profiles = encode_cohort(cohort, config)
    res = analyze_profiles(profiles, cohort.arm, measure, b=args.B, alpha=args.alpha, seed=args.seed)
    try:
        attribution = shapley_attribution(profiles, cohort.arm, measure, config.components).to_dict()
    except ZeroAttribution as exc:
        attribution = exc.result.to_dict()
        attribution["note"] = "no component has a positive drop; percentages undefined"
    payload = {"estimate": res.cbi, "mode": args.mode, **res.to_dict()}
    payload["attribution"] = attribution
    return payload


def _cox_payload(cohort, args) -> dict:
    fit = comparators.cox_ttfe(cohort)
    return {"estimate": fit.hazard_ratio, "beta": fit.beta, "se": fit.se, "z": fit.z,
            "p_value": fit.p_value, "converged": fit.converged, "iterations": fit.iterations}


def _wr_payload(cohort, args) -> dict:
    res = comparators.win_ratio_rec(cohort, b=args.B, seed=args.seed)
    return {"estimate": res.wr, "wins": res.wins, "losses": res.losses, "ties": res.ties,
            "tie_rate": res.tie_rate, "net_benefit": res.net_benefit, "p_value": res.p_value,
            "B": res.b, "undefined": res.undefined}


def _wlw_payload(cohort, args) -> dict:
    res = comparators.wlw(cohort)
    return {"estimate": math.exp(res.beta_combined), "beta_death": res.beta_death,
            "beta_event": res.beta_event, "beta_combined": res.beta_combined,
            "se_combined": res.se_combined, "p_value": res.p_value,
            "robust_cov": res.robust_cov, "global_chi2": res.global_chi2,
            "global_p": res.global_p, "converged": res.converged,
            "dropped_strata": list(res.dropped_strata)}


_PAYLOADS = {"cwot": _cwot_payload, "cox": _cox_payload, "wr": _wr_payload, "wlw": _wlw_payload}


def cmd_analyze(args) -> int:
    if args.method in ("cwot", "wr") and args.seed is None:
        raise SystemExit(f"analyze: --seed is required for --method {args.method}")
    cohort = read_csv(args.patients, time_unit=args.time_unit)
    payload = {"method": args.method, "n": len(cohort), "n_trt": int(cohort.arm.sum()),
               "dataset_hash": cohort.dataset_hash(), "seed": args.seed}
    payload.update(_PAYLOADS[args.method](cohort, args))
    _dump(payload, sys.stdout)
    return 0


# ---------------------------------------------------------------- sweep / report


def _print_tables(summary, out) -> None:
    out.write("| scenario | method | rejection | MCSE | convergence |\n|---|---|---|---|---|\n")
    for r in summary.rows:
        out.write(f"| {r.scenario} | {r.method} | {100 * r.rejection_rate:.1f}% "
                  f"| {100 * r.mcse:.1f}% | {100 * r.convergence_rate:.0f}% |\n")
    if summary.scorecard:
        out.write("\n| cwot_block6 vs | wins | ties | losses | mean diff (pp) |\n|---|---|---|---|---|\n")
        for d in summary.scorecard:
            out.write(f"| {d['comparator']} | {d['wins']} | {d['ties']} | {d['losses']} "
                      f"| {d['mean_diff_pp']:+.1f} |\n")
    if summary.encoding:
        out.write("\n| scenario | block6 | count5 | diff (pp) |\n|---|---|---|---|\n")
        for d in summary.encoding:
            out.write(f"| {d['scenario']} | {100 * d['block6']:.1f}% | {100 * d['count5']:.1f}% "
                      f"| {d['diff_pp']:+.1f} |\n")


def cmd_sweep(args) -> int:
    config = SweepConfig(
        scenarios=_csv_list(args.scenarios, scenario_registry()),
        methods=_csv_list(args.methods, METHODS),
        reps=args.reps, b=args.B, alpha=args.alpha, base_seed=args.seed,
        workers=args.workers, out_dir=args.out, n_per_arm=args.n_per_arm,
        record_runtime=not args.no_runtime,
    )
    _, summary = run_sweep(config)
    _print_tables(summary, sys.stdout)
    return 0


def cmd_report(args) -> int:
    raw_path = Path(args.raw)
    if raw_path.is_dir():
        raw_path = raw_path / "raw.csv"
    raw = read_raw(raw_path)
    n_map = {}
    manifest = raw_path.parent / "run_manifest.json"
    if manifest.exists():
        scen = json.loads(manifest.read_text()).get("scenarios", {})
        n_map = {sid: s["n_per_arm"] for sid, s in scen.items()}
    summary = summarize(raw, args.alpha, n_per_arm=n_map)
    out_dir = Path(args.out) if args.out else raw_path.parent
    write_summary(summary, out_dir)
    emit_plot_data(summary, out_dir / "plots")
    _print_tables(summary, sys.stdout)
    return 0


# ---------------------------------------------------------------- validate-measure


def cmd_validate_measure(args) -> int:
    try:
        spec = load_measure_spec(args.file)
    except (CwotceError, ValueError, OSError) as exc:
        print(f"FAIL  specification: {exc}")
        return 1
    measure = moebius_from_spec(spec)
    weight_sum = math.fsum(spec.weights)
    print("Moebius masses")
    for c, m in enumerate(measure.moebius_singletons, start=1):
        print(f"  m({{{c}}}) = {m:.6f}")
    for (i, j), v in sorted(measure.moebius_pairs.items()):
        print(f"  m({{{i},{j}}}) = {v:+.6f}")
    print("Shapley values")
    for c, phi in enumerate(shapley_values(measure), start=1):
        print(f"  phi_{c} = {phi:.6f}")
    ok = True
    checks = [("weights_sum", abs(weight_sum - 1.0) <= 1e-9, f"sum of weights = {weight_sum:.12g}")]
    checks += invariant_report(measure)
    for name, passed, detail in checks:
        ok &= bool(passed)
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
    return 0 if ok else 1


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cwotce", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress and failures")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate one trial replicate to a patient CSV")
    s.add_argument("--scenario")
    s.add_argument("--rep", type=int, default=0)
    s.add_argument("--seed", type=int, default=SimConfig().base_seed)
    s.add_argument("--n-per-arm", type=int)
    s.add_argument("--out", default="-")
    s.add_argument("--list-scenarios", action="store_true")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("analyze", help="analyze a patient CSV with one method")
    a.add_argument("patients")
    a.add_argument("--method", choices=sorted(_PAYLOADS), default="cwot")
    a.add_argument("--B", type=int, default=999)
    a.add_argument("--alpha", type=float, default=0.05)
    a.add_argument("--seed", type=int)
    a.add_argument("--time-unit", choices=("years", "months"), default="years")
    a.add_argument("--mode", choices=sorted(MODES), default="block6")
    a.add_argument("--measure", help="measure specification JSON (defaults to the built-in weights)")
    a.add_argument("--tau", type=float, default=3.0, help="horizon in years")
    a.set_defaults(func=cmd_analyze)

    w = sub.add_parser("sweep", help="run a scenario x method simulation sweep")
    w.add_argument("--scenarios", default="all")
    w.add_argument("--methods", default="all")
    w.add_argument("--reps", type=int, default=500)
    w.add_argument("--B", type=int, default=199)
    w.add_argument("--alpha", type=float, default=0.05)
    w.add_argument("--seed", type=int, default=20240101)
    w.add_argument("--workers", type=int, default=1)
    w.add_argument("--n-per-arm", type=int)
    w.add_argument("--no-runtime", action="store_true", help="leave runtime_ms empty")
    w.add_argument("--out", required=True)
    w.set_defaults(func=cmd_sweep)

    r = sub.add_parser("report", help="summarize a raw results CSV")
    r.add_argument("raw", help="raw.csv or the sweep output directory")
    r.add_argument("--alpha", type=float, default=0.05)
    r.add_argument("--out")
    r.set_defaults(func=cmd_report)

    v = sub.add_parser("validate-measure", help="check a measure specification file")
    v.add_argument("file")
    v.set_defaults(func=cmd_validate_measure)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CwotceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

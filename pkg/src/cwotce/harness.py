"""Scenario sweeps: simulate, analyze with every method, persist, summarize.

A sweep visits every (scenario, replication) pair once.  Each pair is
simulated from its own derived stream and analyzed by every requested method
on that identical cohort, so method comparisons are paired.  Work fans out
over a process pool and is merged back in (scenario, rep, method) order,
which makes the raw CSV independent of the worker count.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import platform
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import _kernels, comparators, rng
from .capacity import choquet_scores, default_measure
from .encoding import EncodingConfig, encode_cohort
from .errors import CwotceError, SchemaError
from .inference import cbi_test
from .simulator import SimConfig, get_scenario, scenario_registry, simulate_trial

log = logging.getLogger(__name__)

METHODS = ("cwot_block6", "cwot_count5", "cox", "wr", "wlw")
RAW_COLUMNS = ("scenario", "rep", "method", "estimate", "p_value", "rejected",
               "converged", "tie_rate", "runtime_ms", "dataset_hash")
BRADLEY_BAND = (0.025, 0.075)
WIN_MARGIN_PP = 2.0


@dataclass(frozen=True)
class SweepConfig:
    scenarios: tuple = ("NULL-S",)
    methods: tuple = METHODS
    reps: int = 100
    b: int = 199
    alpha: float = 0.05
    base_seed: int = 20240101
    workers: int = 1
    out_dir: Optional[str] = None
    n_per_arm: Optional[int] = None
    # wall-clock timings are the one non-reproducible column; switch them off
    # when byte-level comparison of raw files matters
    record_runtime: bool = True
    sim: SimConfig = field(default_factory=SimConfig)

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown methods: {unknown}")
        registry = scenario_registry()
        missing = [s for s in self.scenarios if s not in registry]
        if missing:
            raise ValueError(f"unknown scenarios: {missing}")
        if self.sim.base_seed != self.base_seed:
            object.__setattr__(self, "sim", replace(self.sim, base_seed=self.base_seed))

    def scenario(self, scenario_id: str):
        return get_scenario(scenario_id, self.n_per_arm)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scenarios"] = list(self.scenarios)
        d["methods"] = list(self.methods)
        return d


@dataclass(frozen=True)
class RawRow:
    scenario: str
    rep: int
    method: str
    estimate: float
    p_value: float
    rejected: bool
    converged: bool
    tie_rate: float
    runtime_ms: float
    dataset_hash: str

    def cells(self) -> list:
        return [self.scenario, str(self.rep), self.method, _fmt(self.estimate),
                _fmt(self.p_value), str(int(self.rejected)), str(int(self.converged)),
                _fmt(self.tie_rate), _fmt(self.runtime_ms), self.dataset_hash]


@dataclass(frozen=True)
class SummaryRow:
    scenario: str
    method: str
    rejection_rate: float
    mcse: float
    mean_estimate: float
    convergence_rate: float
    median_runtime_ms: float
    reps: int
    mean_tie_rate: float = float("nan")


@dataclass
class Summary:
    rows: list
    alpha: float
    scorecard: list
    encoding: list
    n_per_arm: dict

    def rate(self, scenario: str, method: str) -> float:
        for r in self.rows:
            if r.scenario == scenario and r.method == method:
                return r.rejection_rate
        raise KeyError((scenario, method))

    def row(self, scenario: str, method: str) -> SummaryRow:
        for r in self.rows:
            if r.scenario == scenario and r.method == method:
                return r
        raise KeyError((scenario, method))


def _fmt(x) -> str:
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return ""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def mcse(p_hat: float, reps: int) -> float:
    return math.sqrt(p_hat * (1.0 - p_hat) / reps)


# ---------------------------------------------------------------- analysis


def _cwot(cohort, mode, b, alpha, seed):
    profiles = encode_cohort(cohort, EncodingConfig(mode=mode))
    scores = choquet_scores(default_measure(mode), profiles)
    res = cbi_test(scores, cohort.arm, b=b, alpha=alpha, seed=seed)
    return res.cbi, res.p_value, True, float("nan")


def _cox(cohort, b, alpha, seed):
    fit = comparators.cox_ttfe(cohort)
    return fit.hazard_ratio, fit.p_value, fit.converged, float("nan")


def _wr(cohort, b, alpha, seed):
    res = comparators.win_ratio_rec(cohort, b=b, seed=seed)
    return res.wr, res.p_value, True, res.tie_rate


def _wlw(cohort, b, alpha, seed):
    res = comparators.wlw(cohort)
    return math.exp(res.beta_combined), res.p_value, res.converged, float("nan")


_ANALYZERS = {
    "cwot_block6": lambda c, b, a, s: _cwot(c, "block6", b, a, s),
    "cwot_count5": lambda c, b, a, s: _cwot(c, "count5", b, a, s),
    "cox": _cox,
    "wr": _wr,
    "wlw": _wlw,
}


def analyze_method(method: str, cohort, b: int, alpha: float, seed) -> tuple:
    """``(estimate, p_value, converged, tie_rate)`` for one method on one cohort."""
    return _ANALYZERS[method](cohort, b, alpha, seed)


def run_replication(config: SweepConfig, scenario_id: str, rep: int) -> list:
    scenario = config.scenario(scenario_id)
    cohort = simulate_trial(scenario, config.sim, rep)
    digest = cohort.dataset_hash()
    seed = ("sweep", config.base_seed, scenario_id, rep)
    rows = []
    for method in config.methods:
        start = time.perf_counter()
        try:
            est, p, conv, tie = analyze_method(method, cohort, config.b, config.alpha, seed)
        except (CwotceError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            log.warning("%s rep %d method %s failed: %s", scenario_id, rep, method, exc)
            est, p, conv, tie = float("nan"), float("nan"), False, float("nan")
        elapsed = (time.perf_counter() - start) * 1e3 if config.record_runtime else float("nan")
        if not (isinstance(p, float) and math.isfinite(p)):
            conv = False
        rejected = bool(conv and p < config.alpha)
        rows.append(RawRow(scenario_id, rep, method, float(est), float(p), rejected,
                           bool(conv), float(tie), elapsed, digest))
    return rows


def _run_chunk(args) -> list:
    config, scenario_id, reps = args
    out = []
    for rep in reps:
        out.extend(run_replication(config, scenario_id, rep))
    return out


def _chunks(config: SweepConfig) -> list:
    size = max(1, math.ceil(config.reps / (4 * config.workers)))
    tasks = []
    for sid in config.scenarios:
        for start in range(0, config.reps, size):
            tasks.append((config, sid, range(start, min(start + size, config.reps))))
    return tasks


def run_sweep(config: SweepConfig) -> tuple:
    """Run every (scenario, rep, method) and return ``(raw_rows, summary)``.

    When ``config.out_dir`` is set the raw CSV, summary, scorecard, plot data
    and ``run_manifest.json`` are written there.
    """
    tasks = _chunks(config)
    if config.workers == 1:
        parts = [_run_chunk(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            parts = list(pool.map(_run_chunk, tasks))
    order = {sid: i for i, sid in enumerate(config.scenarios)}
    morder = {m: i for i, m in enumerate(config.methods)}
    raw = sorted((r for part in parts for r in part),
                 key=lambda r: (order[r.scenario], r.rep, morder[r.method]))
    n_map = {sid: config.scenario(sid).n_per_arm for sid in config.scenarios}
    summary = summarize(raw, config.alpha, n_per_arm=n_map)
    if config.out_dir is not None:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_raw(raw, out / "raw.csv")
        write_summary(summary, out)
        emit_plot_data(summary, out / "plots")
        write_manifest(config, out / "run_manifest.json")
    return raw, summary


# ---------------------------------------------------------------- raw I/O


def raw_csv_text(rows: Iterable[RawRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RAW_COLUMNS)
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue()


def write_raw(rows: Iterable[RawRow], path) -> None:
    Path(path).write_text(raw_csv_text(rows))


def _parse_float(text: str, where: str) -> float:
    if text == "":
        return float("nan")
    try:
        return float(text)
    except ValueError:
        raise SchemaError(f"{where}: not a number: {text!r}") from None


def _parse_flag(text: str, where: str) -> bool:
    if text not in ("0", "1"):
        raise SchemaError(f"{where}: expected 0 or 1, got {text!r}")
    return text == "1"


def read_raw(source) -> list:
    """Parse a raw results CSV, raising ``SchemaError`` on any malformed row."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="") as fh:
            return read_raw(fh)
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != RAW_COLUMNS:
        raise SchemaError(f"raw header must be {','.join(RAW_COLUMNS)}")
    rows = []
    for lineno, cells in enumerate(reader, start=2):
        if not cells:
            continue
        where = f"line {lineno}"
        if len(cells) != len(RAW_COLUMNS):
            raise SchemaError(f"{where}: expected {len(RAW_COLUMNS)} fields, got {len(cells)}")
        sc, rep, method, est, p, rej, conv, tie, rt, digest = cells
        try:
            rep_i = int(rep)
        except ValueError:
            raise SchemaError(f"{where}: bad rep {rep!r}") from None
        if not sc or not method:
            raise SchemaError(f"{where}: scenario and method are required")
        p_val = _parse_float(p, where)
        if not math.isnan(p_val) and not 0.0 <= p_val <= 1.0:
            raise SchemaError(f"{where}: p-value {p_val} outside [0, 1]")
        rows.append(RawRow(sc, rep_i, method, _parse_float(est, where), p_val,
                           _parse_flag(rej, where), _parse_flag(conv, where),
                           _parse_float(tie, where), _parse_float(rt, where), digest))
    return rows


# ---------------------------------------------------------------- summaries


def _is_null(scenario_id: str) -> bool:
    spec = scenario_registry().get(scenario_id)
    return spec.group == "Null" if spec is not None else False


def _nanmean(values) -> float:
    vals = [v for v in values if math.isfinite(v)]
    return statistics.fmean(vals) if vals else float("nan")


def _nanmedian(values) -> float:
    vals = [v for v in values if math.isfinite(v)]
    return statistics.median(vals) if vals else float("nan")


def summarize(raw: Sequence[RawRow], alpha: Optional[float] = None, n_per_arm=None) -> Summary:
    """Aggregate raw rows into rejection rates, the scorecard and the encoding table.

    With ``alpha`` given, rejection is recomputed as ``converged and p < alpha``;
    otherwise the stored ``rejected`` flags are used.
    """
    groups: dict = {}
    for r in raw:
        groups.setdefault((r.scenario, r.method), []).append(r)
    rows = []
    for (sc, method), rs in groups.items():
        reps = len(rs)
        if alpha is None:
            rej = [r.rejected for r in rs]
        else:
            rej = [r.converged and math.isfinite(r.p_value) and r.p_value < alpha for r in rs]
        p_hat = sum(rej) / reps
        rows.append(SummaryRow(
            scenario=sc, method=method, rejection_rate=p_hat, mcse=mcse(p_hat, reps),
            mean_estimate=_nanmean(r.estimate for r in rs if r.converged),
            convergence_rate=1.0 - sum(not r.converged for r in rs) / reps,
            median_runtime_ms=_nanmedian(r.runtime_ms for r in rs),
            reps=reps, mean_tie_rate=_nanmean(r.tie_rate for r in rs),
        ))
    used_alpha = alpha if alpha is not None else float("nan")
    return Summary(rows=rows, alpha=used_alpha, scorecard=scorecard(rows),
                   encoding=encoding_table(rows), n_per_arm=dict(n_per_arm or {}))


def _rates(rows) -> dict:
    return {(r.scenario, r.method): r.rejection_rate for r in rows}


def _scenario_order(rows) -> list:
    seen = []
    for r in rows:
        if r.scenario not in seen:
            seen.append(r.scenario)
    return seen


def scorecard(rows, reference: str = "cwot_block6", margin_pp: float = WIN_MARGIN_PP) -> list:
    """Win/tie/loss of ``reference`` against each other method on non-null scenarios."""
    rates = _rates(rows)
    scenarios = [s for s in _scenario_order(rows) if not _is_null(s)]
    others = []
    for r in rows:
        if r.method != reference and r.method not in others:
            others.append(r.method)
    out = []
    for other in others:
        diffs = [100.0 * (rates[(s, reference)] - rates[(s, other)])
                 for s in scenarios if (s, reference) in rates and (s, other) in rates]
        if not diffs:
            continue
        out.append({
            "comparator": other,
            "wins": sum(d > margin_pp for d in diffs),
            "ties": sum(-margin_pp <= d <= margin_pp for d in diffs),
            "losses": sum(d < -margin_pp for d in diffs),
            "mean_diff_pp": statistics.fmean(diffs),
            "scenarios": len(diffs),
        })
    return out


def encoding_table(rows) -> list:
    rates = _rates(rows)
    out = []
    for s in _scenario_order(rows):
        if (s, "cwot_block6") in rates and (s, "cwot_count5") in rates:
            b6, c5 = rates[(s, "cwot_block6")], rates[(s, "cwot_count5")]
            out.append({"scenario": s, "block6": b6, "count5": c5, "diff_pp": 100.0 * (b6 - c5)})
    return out


def _write_dicts(path: Path, header: Sequence[str], rows: Iterable) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, float) else v for v in row])


SUMMARY_COLUMNS = tuple(SummaryRow.__dataclass_fields__)


def write_summary(summary: Summary, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_dicts(out / "summary.csv", SUMMARY_COLUMNS,
                 ([getattr(r, c) for c in SUMMARY_COLUMNS] for r in summary.rows))
    sc_cols = ("comparator", "wins", "ties", "losses", "mean_diff_pp", "scenarios")
    _write_dicts(out / "scorecard.csv", sc_cols,
                 ([d[c] for c in sc_cols] for d in summary.scorecard))
    enc_cols = ("scenario", "block6", "count5", "diff_pp")
    _write_dicts(out / "encoding.csv", enc_cols,
                 ([d[c] for c in enc_cols] for d in summary.encoding))


def emit_plot_data(summary: Summary, out_dir) -> dict:
    """Write plot-ready CSVs; returns a map of name to path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rates = _rates(summary.rows)
    scenarios = _scenario_order(summary.rows)
    methods = [m for m in METHODS if any(r.method == m for r in summary.rows)]
    methods += [m for m in dict.fromkeys(r.method for r in summary.rows) if m not in methods]
    paths = {name: out / f"{name}.csv" for name in
             ("heatmap", "advantage_vs_wr", "type1", "encoding", "power_by_n")}

    _write_dicts(paths["heatmap"], ["scenario", *methods],
                 ([s, *[rates.get((s, m), float("nan")) for m in methods]] for s in scenarios))

    adv = []
    for s in scenarios:
        if (s, "cwot_block6") in rates and (s, "wr") in rates:
            tie = summary.row(s, "wr").mean_tie_rate
            adv.append([s, rates[(s, "cwot_block6")], rates[(s, "wr")],
                        100.0 * (rates[(s, "cwot_block6")] - rates[(s, "wr")]), tie])
    _write_dicts(paths["advantage_vs_wr"],
                 ["scenario", "cwot_block6", "wr", "advantage_pp", "wr_tie_rate"], adv)

    lo, hi = BRADLEY_BAND
    type1 = ([r.scenario, r.method, r.rejection_rate, r.mcse, lo, hi,
              int(lo <= r.rejection_rate <= hi)]
             for r in summary.rows if _is_null(r.scenario))
    _write_dicts(paths["type1"], ["scenario", "method", "rejection_rate", "mcse",
                                  "bradley_lo", "bradley_hi", "within_band"], type1)

    _write_dicts(paths["encoding"], ["scenario", "block6", "count5", "diff_pp"],
                 ([d["scenario"], d["block6"], d["count5"], d["diff_pp"]]
                  for d in summary.encoding))

    power = sorted(
        ([summary.n_per_arm[r.scenario], r.scenario, r.method, r.rejection_rate, r.mcse]
         for r in summary.rows if r.scenario in summary.n_per_arm and not _is_null(r.scenario)),
        key=lambda row: (row[0], row[1], methods.index(row[2])),
    )
    _write_dicts(paths["power_by_n"],
                 ["n_per_arm", "scenario", "method", "rejection_rate", "mcse"], power)
    return paths


def write_manifest(config: SweepConfig, path) -> None:
    from . import __version__

    manifest = {
        "config": config.to_dict(),
        "scenarios": {sid: config.scenario(sid).to_dict() for sid in config.scenarios},
        "rng": {"generator": rng.GENERATOR_NAME,
                "trial_stream": "(trial, base_seed, scenario, rep)",
                "permutation_stream": "(permutation, (sweep, base_seed, scenario, rep))"},
        "encoding": {m: asdict(EncodingConfig(mode=m)) for m in ("block6", "count5")},
        "measures": {m: default_measure(m).to_dict() for m in ("block6", "count5")},
        "software": {"cwotce": __version__, "kernel_backend": _kernels.BACKEND,
                     "python": platform.python_version(), "numpy": np.__version__},
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")

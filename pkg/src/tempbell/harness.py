"""Experiment specs, the three run protocols, and report assembly.

A report is always rebuilt from the run records (plus, optionally, the
spec for exact predictions), so ``report`` on persisted records reproduces
what ``simulate`` wrote.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError, InsufficientStatistics
from .geometry import SETTINGS, Config, Setting, reference_config_18
from .inequalities import (
    Z_VIOLATED,
    InequalityReport,
    eval_expect_10,
    exact_reports,
    prob7_margin_from_18,
    quantum_report,
    sampled_reports,
)
from .lhv import RealityDistribution, counting_identity_ratio, lhv_prob_table, sample_lhv_runs
from .quantum import DEFAULT_PREP, StatePrep, quantum_prob_table, sample_quantum_runs
from .records import SERIES_CODE, SERIES_LABELS, CountTable, RunBatch

log = logging.getLogger(__name__)

MODELS = ("lhv", "quantum")
PROTOCOLS = ("free-runs", "two-series", "prepared-runs")
TWO_SERIES_PAIRS = ((Setting.A, Setting.B), (Setting.B, Setting.C), (Setting.A, Setting.C))


def resolve_seed(cli_seed: Optional[int] = None, spec_seed: Optional[int] = None) -> int:
    """Seed precedence: command line, spec file, ``TBS_SEED``, then 0."""
    if cli_seed is not None:
        return int(cli_seed)
    if spec_seed is not None:
        return int(spec_seed)
    env = os.environ.get("TBS_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"TBS_SEED must be an integer, got {env!r}") from None
    return 0


@dataclass
class ExperimentSpec:
    model: str
    protocol: str = "free-runs"
    config: Config = field(default_factory=reference_config_18)
    prep: Optional[StatePrep] = None
    distribution: Optional[RealityDistribution] = None
    n_runs: int = 100_000
    seed: Optional[int] = None
    workers: int = 1
    depolarizing: float = 1.0
    z_threshold: float = Z_VIOLATED

    def __post_init__(self) -> None:
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        if self.protocol != "free-runs" and self.model != "quantum":
            raise ConfigError(f"protocol {self.protocol!r} needs the quantum model")
        if isinstance(self.n_runs, bool) or not isinstance(self.n_runs, int) or self.n_runs < 1:
            raise ConfigError(f"n_runs must be a positive integer, got {self.n_runs!r}")
        if not isinstance(self.workers, int) or self.workers < 1:
            raise ConfigError(f"workers must be a positive integer, got {self.workers!r}")
        if not 0.0 <= self.depolarizing <= 1.0:
            raise ConfigError("depolarizing must lie in [0, 1]")
        if self.model == "lhv":
            if self.distribution is None:
                self.distribution = RealityDistribution.uniform()
        elif self.protocol == "prepared-runs":
            if self.prep is None:
                self.prep = StatePrep.eigenstate(Setting.A, 1)
            if not (self.prep.setting == Setting.A and self.prep.outcome == 1):
                raise ConfigError("prepared-runs prepares the A+ eigenstate; prep must be {'eigenstate': 'A+'}")
        elif self.prep is None:
            self.prep = DEFAULT_PREP

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        if not isinstance(data, dict):
            raise ConfigError("experiment spec must be a JSON object")
        known = {"model", "protocol", "config", "prep", "distribution", "n_runs", "seed",
                 "workers", "depolarizing", "z_threshold"}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown spec fields: {sorted(extra)}")
        model = data.get("model")
        kw: dict = {"model": model}
        for key in ("protocol", "n_runs", "seed", "workers"):
            if key in data:
                kw[key] = data[key]
        for key in ("depolarizing", "z_threshold"):
            if key in data:
                kw[key] = float(data[key])
        try:
            if "config" in data:
                kw["config"] = Config.from_dict(data["config"])
            prep = data.get("prep")
            dist = data.get("distribution")
            if model == "lhv":
                dist = dist if dist is not None else prep
                if dist == "uniform" or dist is None:
                    kw["distribution"] = RealityDistribution.uniform()
                else:
                    kw["distribution"] = RealityDistribution.from_dict(dist.get("weights", dist))
            elif prep is not None:
                kw["prep"] = StatePrep.from_dict(prep)
        except ConfigError:
            raise
        except (TypeError, ValueError, AttributeError) as exc:
            raise ConfigError(f"bad experiment spec: {exc}") from None
        return cls(**kw)

    @classmethod
    def load(cls, path: "str | Path") -> "ExperimentSpec":
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"spec file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        out = {"model": self.model, "protocol": self.protocol, "config": self.config.to_dict(),
               "n_runs": self.n_runs, "seed": self.seed, "workers": self.workers,
               "depolarizing": self.depolarizing, "z_threshold": self.z_threshold}
        if self.model == "lhv":
            out["distribution"] = self.distribution.to_dict()
        else:
            out["prep"] = self.prep.to_dict()
        return out


@dataclass
class ExperimentReport:
    spec: ExperimentSpec
    records: RunBatch
    body: dict
    wall_time: float = 0.0

    def to_json(self) -> str:
        return dumps(self.body)

    @property
    def inequalities(self) -> dict:
        return self.body["inequalities"]


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


# -- estimates ----------------------------------------------------------------

def _counts_dict(table: CountTable) -> dict:
    out = {}
    for s1 in SETTINGS:
        for s2 in SETTINGS:
            out[f"{s1.name}{s2.name}"] = {
                f"{'+' if o1 > 0 else '-'}{'+' if o2 > 0 else '-'}": table.n(s1, o1, s2, o2)
                for o1 in (1, -1) for o2 in (1, -1)
            }
    return out


def _free_estimates(table: CountTable) -> dict:
    p = table.probabilities()
    probs, expect = {}, {}
    for s1 in SETTINGS:
        for s2 in SETTINGS:
            n = p.runs(s1, s2)
            key = f"{s1.name}{s2.name}"
            cells = {}
            for o1 in (1, -1):
                for o2 in (1, -1):
                    q = p.p(s1, o1, s2, o2)
                    se = math.sqrt(q * (1.0 - q) / n) if n else None
                    cells[f"{'+' if o1 > 0 else '-'}{'+' if o2 > 0 else '-'}"] = {"p": q, "std_error": se}
            probs[key] = {"runs": n, "cells": cells}
            e = p.expectation(s1, s2)
            expect[key] = {"value": e, "std_error": math.sqrt(max(0.0, 1.0 - e * e) / n) if n else None}
    return {"probabilities": probs, "expectations": expect}


def _perfect_correlation(runs: RunBatch) -> dict:
    done = runs.o2 != 0
    same = int(np.count_nonzero((runs.first == runs.second) & done))
    return {"same_setting_runs": same, "disagreements": runs.same_setting_disagreements()}


def _counting_identity(runs: RunBatch, table: CountTable) -> Optional[dict]:
    if not np.any(runs.hidden >= 0):
        return None
    tally = runs.hidden_tally()
    out = {}
    for s1, s2 in ((Setting.A, Setting.B), (Setting.A, Setting.C), (Setting.B, Setting.C)):
        key = f"{s1.name}+{s2.name}-"
        try:
            out[key] = counting_identity_ratio(table, tally, (s1, s2), (1, -1))
        except InsufficientStatistics:
            out[key] = None
    return {"hidden_tally": tally.tolist(), "ratios": out}


def _two_series_expectations(runs: RunBatch, z_threshold: float):
    expect = {}
    for s1, s2 in TWO_SERIES_PAIRS:
        key = f"{s1.name}{s2.name}"
        pair = (runs.first == s1) & (runs.second == s2)
        entry = {}
        e_total, var_total, ok = 0.0, 0.0, True
        for label, sign in (("+", 1), ("-", -1)):
            sel = pair & (runs.series == SERIES_CODE[label])
            n = int(np.count_nonzero(sel))
            kept = sel & (runs.o1 == sign)
            n_same = int(np.count_nonzero(kept & (runs.o2 == sign)))
            n_diff = int(np.count_nonzero(kept & (runs.o2 == -sign)))
            retained = n_same + n_diff
            entry[f"series{label}"] = {"runs": n, "retained": retained,
                                       "retained_fraction": retained / n if n else None,
                                       "same": n_same, "different": n_diff}
            if n == 0 or retained == 0:
                ok = False
                continue
            # per run the series contributes +1 (same), -1 (different) or 0 (discarded)
            e = (n_same - n_diff) / n
            e_total += e
            var_total += (retained / n - e * e) / n
        entry["value"] = e_total if ok else None
        entry["std_error"] = math.sqrt(max(var_total, 0.0)) if ok else None
        expect[key] = entry
    if all(expect[k]["value"] is not None for k in ("AB", "BC", "AC")):
        se = math.sqrt(sum(expect[k]["std_error"] ** 2 for k in ("AB", "BC", "AC")))
        es = [max(-1.0, min(1.0, expect[k]["value"])) for k in ("AB", "BC", "AC")]
        if se > 0:
            rep = eval_expect_10(*es, std_error=se, z_violated=z_threshold)
        else:
            rep = eval_expect_10(*es)
            rep.mode = "sampled"
            rep.std_error = 0.0
    else:
        rep = InequalityReport("expect-10", 0.0, 1.0, -1.0, False, mode="sampled",
                               status="insufficient-statistics", insufficient_statistics=True)
    return expect, rep


def protocol_of(runs: RunBatch) -> str:
    codes = set(np.unique(runs.series).tolist())
    if not codes:
        return "free-runs"
    if codes <= {SERIES_CODE["+"], SERIES_CODE["-"]}:
        return "two-series"
    if codes == {SERIES_CODE["prepared"]}:
        return "prepared-runs"
    if codes == {SERIES_CODE["free"]}:
        return "free-runs"
    raise ValueError(f"records mix series {sorted(SERIES_LABELS[c] for c in codes)}")


def build_report(runs: RunBatch, spec: Optional[ExperimentSpec] = None, seed: Optional[int] = None) -> dict:
    """Assemble the report body from records alone, plus predictions when a spec is given."""
    protocol = protocol_of(runs)
    z_thr = spec.z_threshold if spec is not None else Z_VIOLATED
    config = spec.config if spec is not None else None
    body: dict = {"protocol": protocol, "n_records": len(runs)}
    if spec is not None:
        body["spec"] = {**spec.to_dict(), "seed": seed if seed is not None else spec.seed}

    if protocol == "two-series":
        expect, rep10 = _two_series_expectations(runs, z_thr)
        if config is not None:
            rep10.degenerate = config.degenerate
        body["estimates"] = {"expectations": expect}
        body["inequalities"] = {"expect-10": rep10.to_dict()}
        body["perfect_correlation"] = _perfect_correlation(runs)
    else:
        table = runs.counts()
        body["counts"] = _counts_dict(table)
        body["estimates"] = _free_estimates(table)
        body["inequalities"] = {r.variant: r.to_dict() for r in sampled_reports(table, config, z_thr)}
        body["perfect_correlation"] = _perfect_correlation(runs)
        ci = _counting_identity(runs, table)
        if ci is not None:
            body["counting_identity"] = ci

    if spec is not None:
        body["predictions"] = predictions(spec)
        if protocol == "prepared-runs":
            sampled = body["inequalities"]["prob-7"]
            predicted = prob7_margin_from_18(spec.config)
            se = sampled["std_error"]
            body["prepared_check"] = {
                "predicted_margin": predicted,
                "sampled_margin": sampled["margin"],
                "std_error": se,
                "deviation_z": (sampled["margin"] - predicted) / se if se else None,
            }
    return body


def predictions(spec: ExperimentSpec) -> dict:
    """Exact values the sampled estimates should approach."""
    out: dict = {}
    if spec.model == "lhv":
        reps = exact_reports(lhv_prob_table(spec.distribution))
    else:
        state = spec.prep.resolve(spec.config)
        reps = exact_reports(quantum_prob_table(state, spec.config, spec.depolarizing), spec.config)
        reps.append(quantum_report(spec.config, "quantum-16"))
        reps.append(quantum_report(spec.config, "quantum-18"))
    for r in reps:
        out[r.variant] = r.to_dict()
    return out


# -- protocols ----------------------------------------------------------------

def _sample_free(spec: ExperimentSpec, seed: int, series: str) -> RunBatch:
    if spec.model == "lhv":
        return sample_lhv_runs(spec.distribution, spec.n_runs, seed, spec.workers, series=series)
    return sample_quantum_runs(spec.prep, spec.config, spec.n_runs, seed, spec.workers,
                               spec.depolarizing, series=series)


def protocol_free_runs(spec: ExperimentSpec, seed: Optional[int] = None) -> ExperimentReport:
    """Runs with both settings drawn at random; evaluates (6), (7), (8) and (10)."""
    seed = resolve_seed(seed, spec.seed)
    t0 = time.perf_counter()
    runs = _sample_free(spec, seed, "free")
    body = build_report(runs, spec, seed)
    return ExperimentReport(spec, runs, body, time.perf_counter() - t0)


def protocol_two_series(spec: ExperimentSpec, seed: Optional[int] = None) -> ExperimentReport:
    """Post-selected series for each pair of (10): keep first outcome +1, then -1.

    Each of the six series holds ``n_runs`` runs on a fresh ensemble.
    """
    if spec.model != "quantum":
        raise ConfigError("two-series protocol needs the quantum model")
    seed = resolve_seed(seed, spec.seed)
    t0 = time.perf_counter()
    batches = []
    for j, pair in enumerate(TWO_SERIES_PAIRS):
        for m, (label, sign) in enumerate((("+", 1), ("-", -1))):
            batches.append(sample_quantum_runs(
                spec.prep, spec.config, spec.n_runs, seed, spec.workers, spec.depolarizing,
                pair=pair, retain=sign, series=label, stream=(100 + 2 * j + m,)))
    runs = RunBatch.concat(batches)
    body = build_report(runs, spec, seed)
    return ExperimentReport(spec, runs, body, time.perf_counter() - t0)


def protocol_prepared_runs(spec: ExperimentSpec, seed: Optional[int] = None) -> ExperimentReport:
    """Each run starts in the A+ eigenstate; (7) is compared with the closed-form prediction."""
    if spec.model != "quantum" or spec.prep is None or spec.prep.setting != Setting.A or spec.prep.outcome != 1:
        raise ConfigError("prepared-runs needs the quantum model with an A+ eigenstate prep")
    seed = resolve_seed(seed, spec.seed)
    t0 = time.perf_counter()
    runs = _sample_free(spec, seed, "prepared")
    body = build_report(runs, spec, seed)
    return ExperimentReport(spec, runs, body, time.perf_counter() - t0)


PROTOCOL_RUNNERS = {
    "free-runs": protocol_free_runs,
    "two-series": protocol_two_series,
    "prepared-runs": protocol_prepared_runs,
}


def run_experiment(spec: ExperimentSpec, seed: Optional[int] = None) -> ExperimentReport:
    report = PROTOCOL_RUNNERS[spec.protocol](spec, seed)
    log.info("%s/%s: %d records in %.3f s", spec.model, spec.protocol, len(report.records), report.wall_time)
    return report


def report_rows(body: dict) -> list[dict]:
    """Flat rows of the inequality section, for CSV output."""
    rows = []
    for variant, rep in body["inequalities"].items():
        rows.append({k: rep[k] for k in ("variant", "mode", "lhs", "bound", "margin", "std_error",
                                         "z_score", "status", "violated", "insufficient_statistics",
                                         "degenerate")})
    return rows


def write_outputs(report: ExperimentReport, out_dir: "str | Path", fmt: str = "json") -> dict[str, Path]:
    """Persist records, count tables and the report; wall time goes to ``run.log`` only."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"records": out / "records.csv", "spec": out / "spec.json"}
    report.records.to_csv(paths["records"])
    # effective spec (overrides and resolved seed applied) for ``report --spec``
    paths["spec"].write_text(dumps(report.body.get("spec", report.spec.to_dict())))
    runs = report.records
    if report.body["protocol"] == "two-series":
        for label, name in (("+", "plus"), ("-", "minus")):
            sel = runs.series == SERIES_CODE[label]
            paths[f"counts_{name}"] = out / f"counts_{name}.csv"
            runs.select(sel).counts().to_csv(paths[f"counts_{name}"])
    else:
        paths["counts"] = out / "counts.csv"
        runs.counts().to_csv(paths["counts"])
    if fmt == "csv":
        paths["report"] = out / "report.csv"
        write_rows_csv(paths["report"], report_rows(report.body))
    else:
        paths["report"] = out / "report.json"
        paths["report"].write_text(report.to_json())
    paths["log"] = out / "run.log"
    paths["log"].write_text(f"wall_time_s={report.wall_time:.6f}\nrecords={len(runs)}\n")
    return paths


def write_rows_csv(path: "str | Path", rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        if not rows:
            return
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: ("" if v is None else v) for k, v in row.items()})

"""Experiment configuration, orchestration, reports and replay."""

from __future__ import annotations

import copy
import csv
import hashlib
import io as _io
import json
import math
import os
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .agreement import soundness_alpha_estimate
from .errors import ConfigError, ReplayMismatch, ResourceError
from .grassmann import complete_system, grassmann_mas, rs_base_codes
from .io import fraction_str, load_system, system_from_json, trace_to_json
from .linear_code import DEFAULT_BUDGET
from .self_correct import FAIL_ZERO, claim_checks, hypothesis_audit, iterative_self_correct
from .set_system import containment_graph, sampler_lambda_estimate, sampler_lambda_exact, validate
from .tanner import LiftedCodeFamily, rate_report, rejection_rate, rho_estimate, rho_exact

EXPERIMENTS = ("build", "mas-audit", "rho-sweep", "alpha-estimate", "correct", "end-to-end")
ALIASES = {"audit": "mas-audit"}
REPORT_SCHEMA = "lifted-ltc/report"
REPORT_VERSION = 1
CSV_SCHEMA = "v1"
CSV_COLUMNS = ("schema", "section", "trial", "round", "key", "value", "kind", "trials")
OUTPUT_ENV = "LIFTED_LTC_OUTPUT_DIR"

DEFAULTS: dict[str, Any] = {
    "experiment": "end-to-end",
    "system": None,
    "base": {"rs_degree": 1},
    "seeds": {"main": 0},
    "trials": {"rho": 8, "alpha": 40, "lambda": 200, "correct": 20, "tester": 2000},
    "corruption_levels": [1, 2, 3],
    "budgets": {"enumeration": DEFAULT_BUDGET, "lambda_exhaustive": 20, "words": 2**20, "grassmann": 3**5},
    "rho": {"mode": "auto", "s_indices": None},
    "round_cap": None,
    "output": {"dir": ".", "report": "report.json", "csv": "sweep.csv"},
}


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def set_dotted(config: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = config
    for k in keys[:-1]:
        if node.get(k) is None:
            node[k] = {}
        if not isinstance(node[k], dict):
            raise ConfigError(dotted, f"{k} is not a mapping")
        node = node[k]
    node[keys[-1]] = value


def _int(value, path: str, lo: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if lo is not None and value < lo:
        raise ConfigError(path, f"must be >= {lo}")
    return value


@dataclass
class ExperimentConfig:
    experiment: str
    system: dict
    base: dict
    seeds: dict
    trials: dict
    corruption_levels: list
    budgets: dict
    rho: dict
    round_cap: int | None
    output: dict

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        cfg = _merge(DEFAULTS, raw)
        unknown = set(cfg) - set(DEFAULTS)
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown field")
        exp = ALIASES.get(cfg["experiment"], cfg["experiment"])
        if exp not in EXPERIMENTS:
            raise ConfigError("experiment", f"must be one of {EXPERIMENTS}")
        cfg["experiment"] = exp
        src = cfg["system"]
        if not isinstance(src, dict):
            raise ConfigError("system", "a system source is required")
        sources = [k for k in ("grassmann", "complete", "file", "inline") if src.get(k) is not None]
        if len(sources) != 1:
            raise ConfigError("system", f"exactly one source expected, got {sources or 'none'}")
        kind = sources[0]
        if kind == "grassmann":
            g = src["grassmann"]
            for key in ("p", "n", "q0", "q1", "q2"):
                _int(g.get(key), f"system.grassmann.{key}", 0)
            if not 0 < g["q0"] < g["q1"] < g["q2"] <= g["n"]:
                raise ConfigError("system.grassmann", "need 0 < q0 < q1 < q2 <= n")
        elif kind == "complete":
            g = src["complete"]
            for key in ("p", "n", "q0"):
                _int(g.get(key), f"system.complete.{key}", 1)
            _int(g.setdefault("copies", 1), "system.complete.copies", 1)
        elif kind == "file" and not isinstance(src["file"], str):
            raise ConfigError("system.file", "expected a path")
        if kind in ("grassmann", "complete"):
            _int(cfg["base"].get("rs_degree"), "base.rs_degree", 0)
        for key, val in cfg["seeds"].items():
            _int(val, f"seeds.{key}", 0)
        if "main" not in cfg["seeds"]:
            raise ConfigError("seeds.main", "an explicit seed is required")
        for key, val in cfg["trials"].items():
            _int(val, f"trials.{key}", 1)
        for key, val in cfg["budgets"].items():
            _int(val, f"budgets.{key}", 1)
        if not isinstance(cfg["corruption_levels"], list) or not cfg["corruption_levels"]:
            raise ConfigError("corruption_levels", "expected a non-empty list")
        for i, lvl in enumerate(cfg["corruption_levels"]):
            _int(lvl, f"corruption_levels[{i}]", 0)
        if cfg["rho"].get("mode") not in ("auto", "exact", "estimate"):
            raise ConfigError("rho.mode", "must be auto, exact or estimate")
        if cfg["round_cap"] is not None:
            _int(cfg["round_cap"], "round_cap", 1)
        return cls(**cfg)

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "system": self.system,
            "base": self.base,
            "seeds": self.seeds,
            "trials": self.trials,
            "corruption_levels": self.corruption_levels,
            "budgets": self.budgets,
            "rho": self.rho,
            "round_cap": self.round_cap,
            "output": self.output,
        }


# metric records --------------------------------------------------------


def exact(value) -> dict:
    if isinstance(value, Fraction):
        return {"kind": "exact", "value": fraction_str(value)}
    if isinstance(value, (bool, int, str)) or value is None:
        return {"kind": "exact", "value": value}
    raise TypeError(f"cannot tag {value!r} as exact")


def empirical(value, trials: int, interval=None, bound: str | None = None) -> dict:
    rec = {"kind": "empirical", "trials": int(trials)}
    if isinstance(value, Fraction):
        rec["value"] = fraction_str(value)
        rec["decimal"] = f"{float(value):.12g}"
    else:
        rec["value"] = None if value is None else f"{float(value):.12g}"
    rec["interval"] = None if interval is None else [f"{float(x):.12g}" for x in interval]
    if bound:
        rec["bound"] = bound
    return rec


def three_sigma(rate: Fraction, n: int) -> tuple[float, float]:
    r = float(rate)
    half = 3 * math.sqrt(max(r * (1 - r), 0.0) / n)
    return max(0.0, r - half), min(1.0, r + half)


class Recorder:
    def __init__(self):
        self.metrics: dict[str, dict] = {}
        self.rows: list[tuple] = []

    def metric(self, key: str, record: dict) -> None:
        self.metrics[key] = record
        trials = record.get("trials", "")
        self.row("metrics", None, None, key, record.get("decimal", record["value"]), record["kind"], trials)

    def row(self, section, trial, rnd, key, value, kind="exact", trials="") -> None:
        if isinstance(value, Fraction):
            value = fraction_str(value)
        elif isinstance(value, float):
            value = f"{value:.12g}"
        elif value is None:
            value = ""
        self.rows.append((CSV_SCHEMA, section, "" if trial is None else trial, "" if rnd is None else rnd, key,
                          value, kind, trials))

    def csv_text(self) -> str:
        def sort_key(r):
            return (r[1], -1 if r[2] == "" else r[2], -1 if r[3] == "" else r[3], r[4])

        buf = _io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in sorted(self.rows, key=sort_key):
            writer.writerow([str(x) for x in r])
        return buf.getvalue()


# construction ----------------------------------------------------------


@dataclass
class Instance:
    system: Any
    graph: Any
    family: LiftedCodeFamily
    p: int
    grassmann: dict | None


def build_instance(cfg: ExperimentConfig) -> Instance:
    src = cfg.system
    guard = cfg.budgets["grassmann"]
    if "grassmann" in src and src["grassmann"] is not None:
        g = src["grassmann"]
        system, graph = grassmann_mas(g["p"], g["n"], g["q0"], g["q1"], g["q2"], guard=guard)
        base = rs_base_codes(system, g["p"], g["n"], cfg.base["rs_degree"]) if g["q0"] == 1 else None
        if base is None:
            raise ConfigError("system.grassmann.q0", "Reed-Solomon base codes need q0 = 1")
        p, meta = g["p"], dict(g)
    elif "complete" in src and src["complete"] is not None:
        g = src["complete"]
        if g["q0"] != 1:
            raise ConfigError("system.complete.q0", "Reed-Solomon base codes need q0 = 1")
        system, graph = complete_system(g["p"], g["n"], g["q0"], g.get("copies", 1), guard=guard)
        base = rs_base_codes(system, g["p"], g["n"], cfg.base["rs_degree"])
        p, meta = g["p"], None
    else:
        try:
            if src.get("file") is not None:
                system, graph, base, p = load_system(src["file"])
            else:
                system, graph, base, p = system_from_json(src["inline"])
        except OSError as exc:
            raise ConfigError("system.file", str(exc)) from None
        if base is None:
            raise ConfigError("system", "system document has no base codes")
        if graph is None:
            raise ConfigError("system", "system document has no agreement edges")
        meta = None
    report = validate(system)
    if not report.ok:
        raise ConfigError("system", f"invalid system: {report.violations[0]}")
    family = LiftedCodeFamily(system, base, p, budget=cfg.budgets["enumeration"])
    return Instance(system, graph, family, p, meta)


def _random_codeword(code, rng) -> np.ndarray:
    if not code.dimension:
        return np.zeros(code.length, dtype=np.int64)
    return (rng.integers(0, code.p, size=code.dimension) @ code.generator) % code.p


def _corrupt(word: np.ndarray, level: int, p: int, rng) -> np.ndarray:
    out = word.copy()
    pos = rng.choice(len(out), size=min(level, len(out)), replace=False)
    out[pos] = (out[pos] + rng.integers(1, p, size=len(pos))) % p
    return out


# experiments -----------------------------------------------------------


def _exp_build(inst: Instance, cfg: ExperimentConfig, rec: Recorder, ctx: dict) -> None:
    sysm, fam = inst.system, inst.family
    rec.metric("system.valid", exact(validate(sysm).ok))
    for layer in ("V", "T", "K", "S"):
        rec.metric(f"system.size.{layer}", exact(len(sysm.layer(layer))))
    rate = rate_report(fam)
    for key, val in rate.items():
        rec.metric(f"code.{key}", exact(val))
    delta = fam.local_distance()
    ctx["delta"] = delta
    rec.metric("code.local_distance", exact(delta))
    code = fam.code
    if code.dimension and code.size <= cfg.budgets["enumeration"]:
        rec.metric("code.distance", exact(code.minimum_distance(cfg.budgets["enumeration"])))


def _lambda(inst: Instance, cfg: ExperimentConfig, rec: Recorder, ctx: dict) -> None:
    G = containment_graph(inst.system, "K", "T")
    try:
        lam = sampler_lambda_exact(G, budget=cfg.budgets["lambda_exhaustive"])
        rec.metric("sampler.lambda", exact(lam))
        ctx["lambda_exact"] = True
    except ResourceError:
        est = sampler_lambda_estimate(G, cfg.trials["lambda"], cfg.seeds["main"])
        lam = est.value
        rec.metric("sampler.lambda", empirical(lam, cfg.trials["lambda"], bound="lower"))
        ctx["lambda_exact"] = False
    ctx["lambda"] = lam
    if inst.grassmann:
        g = inst.grassmann
        bound = Fraction(1, g["p"] ** (g["q1"] - g["q0"]))
        rec.metric("sampler.grassmann_bound", exact(bound))
        rec.metric("sampler.within_grassmann_bound", exact(lam <= bound))


def _exp_mas_audit(inst: Instance, cfg: ExperimentConfig, rec: Recorder, ctx: dict) -> None:
    sysm = inst.system
    report = validate(sysm)
    rec.metric("system.valid", exact(report.ok))
    rec.metric("system.violations", exact(len(report.violations)))
    for layer in ("T", "K", "S"):
        marg = sysm.marginal_of(layer)
        rec.metric(f"system.uniform.{layer}", exact(len(set(marg.values())) == 1))
    rec.metric("agreement.matches_chain", exact(inst.graph.matches_chain(sysm)))
    _lambda(inst, cfg, rec, ctx)


def _rho(inst: Instance, cfg: ExperimentConfig, rec: Recorder, ctx: dict, local: bool) -> None:
    fam = inst.family
    seed = cfg.seeds["main"]
    targets = [None]
    if local:
        idx = cfg.rho.get("s_indices")
        targets = [("S", s) for s in (idx if idx is not None else range(len(inst.system.S)))]
    mode = cfg.rho.get("mode", "auto")
    best, all_exact, total = None, True, 0
    for ti, tgt in enumerate(targets):
        code = fam.code if tgt is None else fam.lift(tgt)
        label = "V" if tgt is None else f"S{tgt[1]}"
        use_exact = mode == "exact" or (mode == "auto" and code.p**code.length <= cfg.budgets["words"])
        if use_exact:
            res = rho_exact(fam, tgt, budget=cfg.budgets["words"])
            val = res.rho
            total += res.words
            rec.row("rho", ti, None, f"{label}.exact", val)
        else:
            all_exact = False
            est = rho_estimate(fam, cfg.corruption_levels, cfg.trials["rho"], seed + ti, target=tgt)
            val = est.rho
            total += len(est.samples)
            for s in est.samples:
                rec.row("rho", ti, s.trial, f"{label}.level{s.level}.distance", s.distance)
                rec.row("rho", ti, s.trial, f"{label}.level{s.level}.fail", s.fail)
        if val is not None:
            best = val if best is None else min(best, val)
    ctx["rho"], ctx["rho_exact"] = best, all_exact
    key = "testability.rho_local" if local else "testability.rho"
    if all_exact:
        rec.metric(key, exact(best))
    else:
        rec.metric(key, empirical(best, total, bound="upper"))


def _exp_rho_sweep(inst: Instance, cfg: ExperimentConfig, rec: Recorder, ctx: dict) -> None:
    _rho(inst, cfg, rec, ctx, local=False)
    fam = inst.family
    rng = np.random.default_rng([cfg.seeds["main"], 9, 0])
    draws = cfg.trials["tester"]
    for i, lvl in enumerate(cfg.corruption_levels):
        w = _corrupt(_random_codeword(fam.code, rng), lvl, fam.p, rng)
        fail = fam.fail_probability(w)
        rate, n = rejection_rate(fam, w, draws, cfg.seeds["main"] + i)
        rec.row("tester", i, None, "fail_exact", fail)
        rec.row("tester", i, None, "rejection_rate", float(rate), "empirical", n)
        lo, hi = three_sigma(fail, n)
        rec.metric(f"tester.level{lvl}.within_3sigma", exact(bool(lo <= float(rate) <= hi)))


def _exp_alpha(inst: Instance, cfg: ExperimentConfig, rec: Recorder, ctx: dict) -> None:
    delta = ctx.get("delta")
    if delta is None:
        delta = inst.family.local_distance()
        ctx["delta"] = delta
    est = soundness_alpha_estimate(inst.system, inst.graph, cfg.trials["alpha"], delta, cfg.seeds["main"], p=inst.p)
    for s in est.samples:
        rec.row("alpha", s.trial, None, f"{s.strategy}.agreement", s.agreement)
        rec.row("alpha", s.trial, None, f"{s.strategy}.k_distance", s.k_distance)
    rec.metric("agreement.alpha", empirical(est.value, cfg.trials["alpha"], bound="upper"))
    rec.metric("agreement.alpha_inconclusive", exact(est.inconclusive))
    ctx["alpha"] = est.value


def _exp_correct(inst: Instance, cfg: ExperimentConfig, rec: Recorder, ctx: dict) -> None:
    fam, graph = inst.family, inst.graph
    audit = ctx.get("audit")
    n = cfg.trials["correct"]
    successes = 0
    traces = []
    for i in range(n):
        rng = np.random.default_rng([cfg.seeds["main"], 9, 1, i])
        lvl = cfg.corruption_levels[i % len(cfg.corruption_levels)]
        w0 = _corrupt(_random_codeword(fam.code, rng), lvl, fam.p, rng)
        trace = iterative_self_correct(fam, graph, w0, cfg.round_cap)
        traces.append(trace_to_json(trace))
        successes += trace.reason == FAIL_ZERO
        rec.row("correct", i, None, "level", lvl)
        rec.row("correct", i, None, "reason", trace.reason)
        rec.row("correct", i, None, "total_distance", trace.total_distance)
        for r in trace.rounds:
            for key, val in r.metrics().items():
                rec.row("correct", i, r.index, key, val)
        if audit is not None:
            for key, ok in claim_checks(trace, audit).items():
                rec.row("claims", i, None, key, "" if ok is None else str(ok))
    rate = Fraction(successes, n)
    rec.metric("correct.fail_zero_rate", empirical(rate, n, three_sigma(rate, n)))
    ctx["traces"] = traces


def _exp_end_to_end(inst: Instance, cfg: ExperimentConfig, rec: Recorder, ctx: dict) -> None:
    _exp_build(inst, cfg, rec, ctx)
    _lambda(inst, cfg, rec, ctx)
    _rho(inst, cfg, rec, ctx, local=True)
    _exp_alpha(inst, cfg, rec, ctx)
    g = inst.grassmann
    audit = hypothesis_audit(
        inst.family, inst.graph,
        {"rho": ctx["rho"], "delta": ctx["delta"], "lambda": ctx["lambda"], "alpha": ctx["alpha"],
         "exact": {"rho": ctx["rho_exact"], "delta": True, "lambda": ctx["lambda_exact"], "alpha": False}},
        grassmann=(g["q1"], g["q2"]) if g else None,
    )
    ctx["audit"] = audit
    rec.metric("audit.hypothesis_met", exact(audit.hypothesis_met))
    # alpha is always sampled, so quantities derived from it are empirical
    n_alpha = cfg.trials["alpha"]
    rec.metric("audit.lambda_threshold", empirical(audit.threshold, n_alpha, bound="derived"))
    rec.metric("audit.implied_testability", empirical(audit.testability, n_alpha, bound="derived"))
    if g:
        # the flat-system form, where alpha is the agreement-test constant before scaling by delta
        flat = audit.rho * audit.delta**2 * audit.alpha / 16
        rec.metric("audit.flat_testability", empirical(flat, n_alpha, bound="derived"))
    _exp_correct(inst, cfg, rec, ctx)


RUNNERS = {
    "build": _exp_build,
    "mas-audit": _exp_mas_audit,
    "rho-sweep": _exp_rho_sweep,
    "alpha-estimate": _exp_alpha,
    "correct": _exp_correct,
    "end-to-end": _exp_end_to_end,
}


def _jsonable(obj):
    if isinstance(obj, Fraction):
        return fraction_str(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(x) for x in obj]
    return obj


@dataclass
class RunReport:
    config: dict
    metrics: dict
    audit: dict | None
    traces: list | None
    csv_text: str
    seconds: float

    def to_json(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "schema_version": REPORT_VERSION,
            "artifact_version": __version__,
            "config": self.config,
            "seeds": self.config["seeds"],
            "metrics": self.metrics,
            "hypothesis_audit": self.audit,
            "traces": self.traces,
            "sweep_sha256": hashlib.sha256(self.csv_text.encode()).hexdigest(),
            "timing": {"seconds": round(self.seconds, 3)},
        }


def output_dir(cfg: ExperimentConfig) -> Path:
    return Path(os.environ.get(OUTPUT_ENV) or cfg.output.get("dir") or ".")


def run(config: ExperimentConfig | dict, write: bool = True) -> RunReport:
    """Execute one experiment; writes ``report.json`` and ``sweep.csv`` unless ``write`` is false."""
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_dict(config)
    start = time.perf_counter()
    inst = build_instance(cfg)
    rec = Recorder()
    ctx: dict = {}
    RUNNERS[cfg.experiment](inst, cfg, rec, ctx)
    audit = ctx.get("audit")
    report = RunReport(
        config=cfg.to_dict(),
        metrics=rec.metrics,
        audit=_jsonable(audit.as_dict()) if audit is not None else None,
        traces=ctx.get("traces"),
        csv_text=rec.csv_text(),
        seconds=time.perf_counter() - start,
    )
    if write:
        out = output_dir(cfg)
        out.mkdir(parents=True, exist_ok=True)
        (out / cfg.output["report"]).write_text(json.dumps(report.to_json(), indent=1, sort_keys=True) + "\n")
        with open(out / cfg.output["csv"], "w", encoding="utf-8", newline="") as fh:
            fh.write(report.csv_text)
    return report


def replay(report_path) -> RunReport:
    """Re-run a recorded report and raise :class:`ReplayMismatch` at the first differing metric."""
    try:
        doc = json.loads(Path(report_path).read_text())
        config = doc["config"]
        recorded = doc["metrics"]
        recorded_audit = doc.get("hypothesis_audit")
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise ConfigError("report", f"unreadable report: {exc!r}") from None
    fresh = run(ExperimentConfig.from_dict(config), write=False)
    for key in sorted(set(recorded) | set(fresh.metrics)):
        if recorded.get(key) != fresh.metrics.get(key):
            raise ReplayMismatch(key, recorded.get(key), fresh.metrics.get(key))
    if recorded_audit != fresh.audit:
        raise ReplayMismatch("hypothesis_audit", recorded_audit, fresh.audit)
    digest = fresh.to_json()["sweep_sha256"]
    if doc.get("sweep_sha256") != digest:
        raise ReplayMismatch("sweep_sha256", doc.get("sweep_sha256"), digest)
    return fresh

"""Simulation harness: day loops, streams, sweeps, and run artifacts.

Randomness is split hierarchically (stream seed -> day index -> purpose)
so any single day replays without re-running the stream. Sweep cells are
independent streams whose seeds derive from grid coordinates, making the
cell outputs invariant to execution order.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import agents
from .calibrator import (
    CalibratorState,
    audit_bounds,
    audits_pass,
    evaluate_day_errors,
    run_round,
    update_thresholds,
)
from .core import (
    DayRecord,
    LabelSpace,
    RunLog,
    append_human_turn,
    finalize_day,
    new_day,
    outcome_flags,
)
from .rules import rule_from_spec
from .scores import (
    DistributionSpec,
    ExternalProviderAdapter,
    ScoreVector,
    SyntheticOracle,
)

LOG_FORMAT = "collabcal-runlog-v1"

# Purpose tags for per-day RNG derivation; stable across versions.
_RNG_TRUTH, _RNG_POLICY, _RNG_ORACLE = 0, 1, 2


class ConfigError(ValueError):
    """Run configuration is missing fields or out of range."""


@dataclass
class RunConfig:
    """Everything one simulated stream needs, JSON-round-trippable."""

    labels: list
    days: int
    epsilon: float
    delta: float
    eta: float
    rule_ch: dict = field(default_factory=lambda: {"kind": "ch_current_round"})
    rule_comp: dict = field(default_factory=lambda: {"kind": "comp_final_round"})
    oracle: dict = field(default_factory=dict)
    policy: dict = field(default_factory=dict)
    seed: int = 0
    truth_weights: Optional[list] = None
    sweep: Optional[dict] = None
    max_rounds_cap: int = 32

    def __post_init__(self):
        if isinstance(self.labels, dict):
            self.labels = list(range(int(self.labels["size"])))
        if not self.labels:
            raise ConfigError("label space must be nonempty")
        if self.days < 1:
            raise ConfigError("days must be at least 1")
        if not (0 < self.epsilon < 1 and 0 < self.delta < 1):
            raise ConfigError("epsilon and delta must be in (0, 1)")
        if self.eta <= 0:
            raise ConfigError("eta must be positive")
        if self.truth_weights is not None and len(self.truth_weights) != len(self.labels):
            raise ConfigError("truth_weights length must match the label space")

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                return cls.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None

    def to_dict(self) -> dict:
        d = {
            "labels": list(self.labels),
            "days": self.days,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "eta": self.eta,
            "rule_ch": dict(self.rule_ch),
            "rule_comp": dict(self.rule_comp),
            "oracle": dict(self.oracle),
            "policy": dict(self.policy),
            "seed": self.seed,
            "max_rounds_cap": self.max_rounds_cap,
        }
        if self.truth_weights is not None:
            d["truth_weights"] = list(self.truth_weights)
        if self.sweep is not None:
            d["sweep"] = dict(self.sweep)
        return d

    def build(self):
        """Resolve specs into live objects (space, rules, oracle, policy)."""
        space = LabelSpace(self.labels)
        rule_ch = rule_from_spec(self.rule_ch)
        rule_comp = rule_from_spec(self.rule_comp)
        if "endpoint_url" in self.oracle:
            oracle = ExternalProviderAdapter(self.oracle["endpoint_url"])
        else:
            oracle = SyntheticOracle(DistributionSpec.from_dict(self.oracle))
        policy = agents.policy_from_spec(self.policy)
        return space, rule_ch, rule_comp, oracle, policy


@dataclass
class RunSummary:
    """Stream-level results: tracking error, outcomes, and the bound audit."""

    days: int
    epsilon: float
    delta: float
    eta: float
    seed: int
    final_tau: float
    final_lambda: float
    max_tau: float
    max_lambda: float
    avg_ch: float
    avg_comp: float
    gt_loss_rate: float
    gt_gain_rate: float
    conditioned: dict
    audit_passed: bool
    running_avg_ch: np.ndarray
    running_avg_comp: np.ndarray

    def to_dict(self) -> dict:
        d = {
            "days": self.days,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "eta": self.eta,
            "seed": self.seed,
            "final_tau": self.final_tau,
            "final_lambda": self.final_lambda,
            "max_tau": self.max_tau,
            "max_lambda": self.max_lambda,
            "avg_ch": self.avg_ch,
            "avg_comp": self.avg_comp,
            "gt_loss_rate": self.gt_loss_rate,
            "gt_gain_rate": self.gt_gain_rate,
            "conditioned": self.conditioned,
            "audit_passed": self.audit_passed,
        }
        return d


def _day_rng(seed: int, day_index: int, purpose: int):
    return np.random.default_rng([seed, day_index, purpose])


def run_day_loop(config: RunConfig, state: CalibratorState, day_index: int,
                 space=None, rule_ch=None, rule_comp=None, oracle=None,
                 policy=None) -> DayRecord:
    """Execute one full day against the given calibrator state.

    Initial proposal, alternating AI construction and human revision
    until the policy stops or the round budget runs out, then the truth
    reveal and post-hoc error evaluation. The resulting record carries
    realized errors and the final assessment; the caller applies the
    threshold update.
    """
    if space is None:
        space, rule_ch, rule_comp, oracle, policy = config.build()

    truth_rng = _day_rng(config.seed, day_index, _RNG_TRUTH)
    policy_rng = _day_rng(config.seed, day_index, _RNG_POLICY)
    oracle_rng = _day_rng(config.seed, day_index, _RNG_ORACLE)

    weights = config.truth_weights
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        truth = space.labels[int(truth_rng.choice(len(space), p=w / w.sum()))]
    else:
        truth = space.labels[int(truth_rng.integers(len(space)))]

    view = agents.ThresholdView(state.tau, state.lam, day_index)
    day = new_day(f"day-{day_index}", space, day_index=day_index)
    proposal = agents.initial_proposal(policy, space, truth, policy_rng, view)
    append_human_turn(day, proposal)

    round_index = 1
    final_set = proposal
    while True:
        p = oracle.distribution(space, truth, day.human_sets(),
                                oracle_rng, day_index)
        scores = ScoreVector.from_distribution(p, space)
        ai_set, _ = run_round(state, day, scores, rule_ch, rule_comp)
        revised, keep_going = agents.revise(
            policy, proposal, ai_set, policy_rng,
            label_space=space, round_index=round_index, view=view,
        )
        final_set = revised
        if not keep_going or round_index >= config.max_rounds_cap:
            break
        proposal = revised
        append_human_turn(day, proposal)
        round_index += 1

    finalize_day(day, truth, final_assessment=final_set)
    day.realized_errors = evaluate_day_errors(day, rule_ch, rule_comp)
    return day


def run_stream(config: RunConfig):
    """Run ``config.days`` sequential days on one calibration stream."""
    space, rule_ch, rule_comp, oracle, policy = config.build()
    state = CalibratorState.fresh(config.epsilon, config.delta, config.eta)
    meta = {
        "format": LOG_FORMAT,
        "epsilon": config.epsilon,
        "delta": config.delta,
        "eta": config.eta,
        "seed": config.seed,
        "tau_init": 0.0,
        "lambda_init": 0.0,
        "rule_ch": dict(config.rule_ch),
        "rule_comp": dict(config.rule_comp),
        "oracle": dict(config.oracle),
        "policy": dict(config.policy),
        "days": config.days,
    }
    log = RunLog(meta=meta)
    max_tau = state.tau
    max_lam = state.lam
    for t in range(1, config.days + 1):
        day = run_day_loop(config, state, t, space, rule_ch, rule_comp,
                           oracle, policy)
        e_ch, e_comp = day.realized_errors
        state = update_thresholds(state, e_ch, e_comp)
        max_tau = max(max_tau, state.tau)
        max_lam = max(max_lam, state.lam)
        log.append(day)
    summary = summarize(log, seed=config.seed, max_tau=max_tau, max_lambda=max_lam)
    return log, summary


def summarize(log: RunLog, seed: int = 0, max_tau: Optional[float] = None,
              max_lambda: Optional[float] = None) -> RunSummary:
    e_ch, e_comp = log.error_sequences()
    horizons = np.arange(1, len(e_ch) + 1, dtype=float)
    running_ch = np.cumsum(e_ch) / horizons
    running_comp = np.cumsum(e_comp) / horizons
    audits = audit_bounds(log)
    outcomes = [outcome_flags(d) for d in log]
    n = len(outcomes)
    meta = log.meta
    last_day = log.days[-1]
    final_state = update_thresholds(
        CalibratorState(
            tau=last_day.thresholds_used[0], lam=last_day.thresholds_used[1],
            epsilon=meta["epsilon"], delta=meta["delta"], eta=meta["eta"],
        ),
        *last_day.realized_errors,
    )
    return RunSummary(
        days=n,
        epsilon=meta["epsilon"],
        delta=meta["delta"],
        eta=meta["eta"],
        seed=seed,
        final_tau=final_state.tau,
        final_lambda=final_state.lam,
        max_tau=max_tau if max_tau is not None else final_state.tau,
        max_lambda=max_lambda if max_lambda is not None else final_state.lam,
        avg_ch=float(running_ch[-1]),
        avg_comp=float(running_comp[-1]),
        gt_loss_rate=sum(o["gt_loss"] for o in outcomes) / n,
        gt_gain_rate=sum(o["gt_gain"] for o in outcomes) / n,
        conditioned=conditioned_outcomes(log),
        audit_passed=audits_pass(audits),
        running_avg_ch=running_ch,
        running_avg_comp=running_comp,
    )


def conditioned_outcomes(log: RunLog) -> dict:
    """Outcome rates conditioned on realized error events.

    Keys: gt_loss among CH-error days and among CH-clean days; gt_gain
    among days where the complementarity rule triggered and was satisfied
    versus days with a complementarity error. Conditions with no days are
    reported absent rather than as zero rates.
    """
    rule_comp = rule_from_spec(log.meta["rule_comp"])
    buckets = {
        "gt_loss_given_ch_error": [],
        "gt_loss_given_no_ch_error": [],
        "gt_gain_given_comp_satisfied": [],
        "gt_gain_given_comp_error": [],
    }
    for day in log:
        e_ch, e_comp = day.realized_errors
        flags = outcome_flags(day)
        if e_ch:
            buckets["gt_loss_given_ch_error"].append(flags["gt_loss"])
        else:
            buckets["gt_loss_given_no_ch_error"].append(flags["gt_loss"])
        if e_comp:
            buckets["gt_gain_given_comp_error"].append(flags["gt_gain"])
        else:
            human_sets = day.human_sets()
            triggered = any(
                rule_comp(day.ground_truth, human_sets, r)
                for r in range(1, len(human_sets) + 1)
            )
            if triggered:
                buckets["gt_gain_given_comp_satisfied"].append(flags["gt_gain"])
    out = {}
    for key, values in buckets.items():
        if values:
            out[key] = {"rate": float(np.mean(values)), "count": len(values)}
    return out


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

def _cell_seed(base_seed: int, i_eps: int, i_delta: int, i_rep: int) -> int:
    # Stable per grid coordinate so cell outputs ignore execution order.
    return int(np.random.default_rng([base_seed, i_eps, i_delta, i_rep]).integers(2**31))

def _run_cell(config_dict: dict, epsilon: float, delta: float, seed: int):
    cfg = RunConfig.from_dict({**config_dict, "epsilon": epsilon,
                               "delta": delta, "seed": seed, "sweep": None})
    _, summary = run_stream(cfg)
    return summary


def sweep(config: RunConfig, jobs: int = 1) -> dict:
    """One independent stream per (epsilon, delta, seed) grid cell.

    Returns ``{(epsilon, delta): [RunSummary per seed]}``. Cells run in
    parallel worker processes when ``jobs > 1``; rules must then be
    registered kinds (importable in workers).
    """
    if not config.sweep:
        raise ConfigError("config has no sweep grid")
    eps_grid = config.sweep.get("epsilon", [config.epsilon])
    delta_grid = config.sweep.get("delta", [config.delta])
    n_seeds = int(config.sweep.get("seeds", 1))
    base = config.to_dict()
    base.pop("sweep", None)

    cells = []
    for i_eps, eps in enumerate(eps_grid):
        for i_delta, dlt in enumerate(delta_grid):
            for rep in range(n_seeds):
                cells.append((eps, dlt, _cell_seed(config.seed, i_eps, i_delta, rep)))

    results: dict = {}
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_cell, base, eps, dlt, s)
                       for eps, dlt, s in cells]
            summaries = [f.result() for f in futures]
    else:
        summaries = [_run_cell(base, eps, dlt, s) for eps, dlt, s in cells]
    for (eps, dlt, _), summary in zip(cells, summaries):
        results.setdefault((eps, dlt), []).append(summary)
    return results


# ---------------------------------------------------------------------------
# Replay and artifacts
# ---------------------------------------------------------------------------

@dataclass
class ReplayReport:
    ok: bool
    days_checked: int
    first_divergence: Optional[dict] = None


def replay_run_log(log: RunLog, atol: float = 1e-12) -> ReplayReport:
    """Recompute errors, thresholds, and outcome flags from transcripts.

    Walks the log sequentially from the recorded initial thresholds and
    compares every derived quantity against the logged one; reports the
    first divergent day. Real-valued comparisons use ``atol``; error bits
    are compared exactly.
    """
    meta = log.meta
    rule_ch = rule_from_spec(meta["rule_ch"])
    rule_comp = rule_from_spec(meta["rule_comp"])
    state = CalibratorState.fresh(
        meta["epsilon"], meta["delta"], meta["eta"],
        tau=meta.get("tau_init", 0.0), lam=meta.get("lambda_init", 0.0),
    )

    def diverged(day_index, field_name, logged, recomputed):
        return ReplayReport(False, day_index, {
            "day_index": day_index, "field": field_name,
            "logged": logged, "recomputed": recomputed,
        })

    for i, day in enumerate(log, start=1):
        recomputed = evaluate_day_errors(day, rule_ch, rule_comp)
        logged = tuple(day.realized_errors)
        if recomputed != logged:
            return diverged(day.day_index, "errors", list(logged), list(recomputed))
        tau_logged, lam_logged = day.thresholds_used
        if abs(tau_logged - state.tau) > atol:
            return diverged(day.day_index, "tau", tau_logged, state.tau)
        if abs(lam_logged - state.lam) > atol:
            return diverged(day.day_index, "lambda", lam_logged, state.lam)
        flags = outcome_flags(day)
        if day.logged_outcome is not None and day.logged_outcome != flags:
            return diverged(day.day_index, "outcome", day.logged_outcome, flags)
        state = update_thresholds(state, *recomputed)
    return ReplayReport(True, len(log.days))


def write_run_artifacts(log: RunLog, summary: RunSummary, out_dir) -> dict:
    """Write the day log, summary table, and plot-ready trajectory CSV."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "runlog": out / "runlog.jsonl",
        "summary": out / "summary.json",
        "plot": out / "plot.csv",
    }
    log.write_jsonl(paths["runlog"])
    with paths["summary"].open("w", encoding="utf-8") as fh:
        json.dump(summary.to_dict(), fh, indent=2)
        fh.write("\n")

    audits = audit_bounds(log)
    with paths["plot"].open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "tau", "lambda", "e_ch", "e_comp",
                         "avg_ch", "avg_comp", "bound_ch", "bound_comp"])
        for day, audit in zip(log, audits):
            tau, lam = day.thresholds_used
            e_ch, e_comp = day.realized_errors
            writer.writerow([
                audit.horizon, f"{tau:.12g}", f"{lam:.12g}", e_ch, e_comp,
                f"{audit.avg_ch:.12g}", f"{audit.avg_comp:.12g}",
                f"{audit.bound_ch:.12g}", f"{audit.bound_comp:.12g}",
            ])
    return {k: str(v) for k, v in paths.items()}

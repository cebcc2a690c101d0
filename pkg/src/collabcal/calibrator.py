"""Online threshold calibration for collaborative prediction sets.

One threshold pair (tau, lambda) gates label inclusion: a label enters
the AI's set when its nonconformity score is at most
``tau * ch_activation + lambda * comp_activation`` (inclusive, and
additive when both activations fire). Thresholds are frozen within a day
and updated after the truth is revealed by a projected step:

    tau'    = max(0, tau    + eta * (e_ch   - epsilon))
    lambda' = max(0, lambda + eta * (e_comp - delta))

Started from zero thresholds, the running average of either error never
exceeds its target plus ``(1 + eta) / (eta * T)`` at any horizon ``T``,
for any agent behavior; ``audit_bounds`` checks that certificate on a
finished run. The same dynamics keep each threshold below ``1 + eta``,
which is asserted (not enforced) because it emerges from the update.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Optional

import numpy as np

from .core import DayRecord, ProtocolOrder, record_ai_response
from .rules import Rule, activation_profile, evaluate_rule
from .scores import ScoreVector

BOUND_SLACK = 1e-12  # absorbs float accumulation in real-valued bound checks


@dataclass(frozen=True)
class CalibratorState:
    """Threshold pair plus targets, step size, and error counters."""

    tau: float
    lam: float
    epsilon: float
    delta: float
    eta: float
    day_counter: int = 0
    cumulative_ch_errors: int = 0
    cumulative_comp_errors: int = 0

    @classmethod
    def fresh(cls, epsilon: float, delta: float, eta: float,
              tau: float = 0.0, lam: float = 0.0) -> "CalibratorState":
        if not 0.0 < epsilon < 1.0:
            raise ValueError("epsilon must be in (0, 1)")
        if not 0.0 < delta < 1.0:
            raise ValueError("delta must be in (0, 1)")
        if eta <= 0.0:
            raise ValueError("eta must be positive")
        if tau < 0.0 or lam < 0.0:
            raise ValueError("thresholds must be nonnegative")
        return cls(tau=tau, lam=lam, epsilon=epsilon, delta=delta, eta=eta)

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "lambda": self.lam,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "eta": self.eta,
            "day_counter": self.day_counter,
            "cumulative_ch_errors": self.cumulative_ch_errors,
            "cumulative_comp_errors": self.cumulative_comp_errors,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CalibratorState":
        return cls(
            tau=d["tau"], lam=d["lambda"], epsilon=d["epsilon"],
            delta=d["delta"], eta=d["eta"],
            day_counter=d.get("day_counter", 0),
            cumulative_ch_errors=d.get("cumulative_ch_errors", 0),
            cumulative_comp_errors=d.get("cumulative_comp_errors", 0),
        )


@dataclass(frozen=True)
class ThresholdUpdateTrace:
    """Before/after record of one end-of-day threshold update."""

    day_index: int
    tau_before: float
    tau_after: float
    lambda_before: float
    lambda_after: float
    e_ch: int
    e_comp: int
    epsilon: float
    delta: float
    eta: float


def construct_set(scores, ch_active, comp_active, tau: float, lam: float) -> frozenset:
    """Labels whose score is within the activation-gated threshold.

    ``scores`` is a ScoreVector (or mapping over the full space);
    activations are the sets of labels whose CH / COMP activation bit is 1.
    Inclusion is inclusive (<=), so a label with score exactly equal to
    its gate enters the set - including score 0 against a zero gate.
    """
    if tau < 0 or lam < 0:
        raise ValueError("thresholds must be nonnegative")
    if isinstance(scores, ScoreVector):
        labels = scores.label_space.labels
        values = scores.values
    else:
        labels = list(scores.keys())
        values = np.array([scores[y] for y in labels], dtype=float)
    k = len(labels)
    ch = np.fromiter((y in ch_active for y in labels), dtype=bool, count=k)
    comp = np.fromiter((y in comp_active for y in labels), dtype=bool, count=k)
    gates = tau * ch + lam * comp
    mask = values <= gates
    return frozenset(y for y, keep in zip(labels, mask) if keep)


def evaluate_day_errors(day: DayRecord, rule_ch: Rule, rule_comp: Rule) -> tuple:
    """Post-hoc day errors from the full transcript and the original rules.

    An error occurs when the rule triggers at some round whose AI set
    missed the truth. Requires a finalized day with complete rounds.
    """
    if not day.finalized:
        raise ProtocolOrder("day must be finalized before errors are evaluated")
    human_sets = day.human_sets()
    y = day.ground_truth
    e_ch = 0
    e_comp = 0
    for r, rnd in enumerate(day.rounds, start=1):
        if rnd.ai_set is None:
            raise ProtocolOrder(f"round {r} has no AI response")
        missed = y not in rnd.ai_set
        if not missed:
            continue
        if not e_ch and evaluate_rule(rule_ch, y, human_sets, r):
            e_ch = 1
        if not e_comp and evaluate_rule(rule_comp, y, human_sets, r):
            e_comp = 1
        if e_ch and e_comp:
            break
    return e_ch, e_comp


def update_thresholds(state: CalibratorState, e_ch: int, e_comp: int) -> CalibratorState:
    """Projected online update; increments day and error counters."""
    if e_ch not in (0, 1) or e_comp not in (0, 1):
        raise ValueError("error indicators must be 0 or 1")
    return replace(
        state,
        tau=max(0.0, state.tau + state.eta * (e_ch - state.epsilon)),
        lam=max(0.0, state.lam + state.eta * (e_comp - state.delta)),
        day_counter=state.day_counter + 1,
        cumulative_ch_errors=state.cumulative_ch_errors + e_ch,
        cumulative_comp_errors=state.cumulative_comp_errors + e_comp,
    )


def update_with_trace(state: CalibratorState, e_ch: int, e_comp: int,
                      day_index: Optional[int] = None):
    new = update_thresholds(state, e_ch, e_comp)
    trace = ThresholdUpdateTrace(
        day_index=day_index if day_index is not None else new.day_counter,
        tau_before=state.tau, tau_after=new.tau,
        lambda_before=state.lam, lambda_after=new.lam,
        e_ch=e_ch, e_comp=e_comp,
        epsilon=state.epsilon, delta=state.delta, eta=state.eta,
    )
    return new, trace


def theoretical_bound(target: float, eta: float, horizon: int) -> float:
    """Certified ceiling on the running average at the given horizon."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    return target + (1.0 + eta) / (eta * horizon)


@dataclass(frozen=True)
class BoundAudit:
    """Bound check at one prefix horizon."""

    horizon: int
    avg_ch: float
    avg_comp: float
    bound_ch: float
    bound_comp: float
    passed: bool


def audit_bounds(run_log, epsilon: Optional[float] = None,
                 delta: Optional[float] = None, eta: Optional[float] = None,
                 slack: float = BOUND_SLACK) -> list:
    """Per-prefix bound audits for every horizon of a finished run.

    Parameters default to the log's metadata; passing values that
    contradict the metadata is an error. Error counts are compared in
    exact integer arithmetic; only the real-valued bound carries slack.
    """
    meta = getattr(run_log, "meta", {}) or {}
    for name, given in (("epsilon", epsilon), ("delta", delta), ("eta", eta)):
        if given is not None and name in meta and meta[name] != given:
            raise ValueError(
                f"{name}={given} contradicts the log's {name}={meta[name]}"
            )
    epsilon = epsilon if epsilon is not None else meta.get("epsilon")
    delta = delta if delta is not None else meta.get("delta")
    eta = eta if eta is not None else meta.get("eta")
    if epsilon is None or delta is None or eta is None:
        raise ValueError("epsilon, delta, eta must come from the log meta or arguments")

    e_ch, e_comp = run_log.error_sequences()
    horizons = np.arange(1, len(e_ch) + 1, dtype=float)
    if len(e_ch) == 0:
        return []
    cum_ch = np.cumsum(e_ch)
    cum_comp = np.cumsum(e_comp)
    avg_ch = cum_ch / horizons
    avg_comp = cum_comp / horizons
    remainder = (1.0 + eta) / (eta * horizons)
    bound_ch = epsilon + remainder
    bound_comp = delta + remainder
    passed = (avg_ch <= bound_ch + slack) & (avg_comp <= bound_comp + slack)
    return [
        BoundAudit(int(t), float(a), float(b), float(bc), float(bp), bool(ok))
        for t, a, b, bc, bp, ok in zip(
            horizons, avg_ch, avg_comp, bound_ch, bound_comp, passed
        )
    ]


def audits_pass(audits: Iterable[BoundAudit]) -> bool:
    return all(a.passed for a in audits)


def run_round(state: CalibratorState, day: DayRecord, scores,
              rule_ch: Rule, rule_comp: Rule, ai_message: str = ""):
    """Construct and record the AI set for the round awaiting a response.

    Activations are computed from the human-set prefix with the current
    round treated as terminal. The day's thresholds are frozen at first
    use: answering later rounds with a different (tau, lambda) is a
    protocol violation.
    """
    if day.finalized or not day.awaiting_ai:
        raise ProtocolOrder("run_round needs an open day awaiting an AI response")
    if day.thresholds_used is None:
        day.thresholds_used = (state.tau, state.lam)
    elif day.thresholds_used != (state.tau, state.lam):
        raise ProtocolOrder(
            "thresholds changed mid-day: "
            f"{day.thresholds_used} -> {(state.tau, state.lam)}"
        )
    prefix = day.human_sets()
    ch_active, comp_active = activation_profile(
        rule_ch, rule_comp, day.label_space, prefix
    )
    ai_set = construct_set(scores, ch_active, comp_active, state.tau, state.lam)
    record_ai_response(day, ai_set, ai_message)
    return ai_set, day

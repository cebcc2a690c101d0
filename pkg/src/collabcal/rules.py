"""Verifiable collaboration rules and their online activations.

A rule is a deterministic binary predicate ``R(y, human_sets, r)`` over a
label, the full transcript of human sets for a day, and a round index.
Rules see only human sets, never AI sets or messages. The *online
activation* evaluates a rule on a transcript prefix with the current
round treated as terminal, which is what the calibrator can compute
mid-dialogue before the stopping round is known.

The dominance checker verifies, by exhaustive enumeration over bounded
transcripts, that a rule never exceeds its online activation - the
soundness condition the threshold calibrator's guarantee rests on.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

from .core import LabelSpace


class EnumerationCap(ValueError):
    """Dominance-check bounds exceed the configured evaluation budget."""

    def __init__(self, estimated: int, cap: int):
        self.estimated = estimated
        self.cap = cap
        super().__init__(
            f"exhaustive check would need ~{estimated} evaluations (cap {cap})"
        )


class Rule:
    """Named binary predicate over (label, human-set transcript, round).

    ``fn(label, human_sets, r, **params)`` must be pure and return a
    truthy/falsy value; evaluation coerces it to exactly 0 or 1.
    """

    def __init__(self, kind: str, fn: Callable, params: Optional[dict] = None):
        self.kind = kind
        self.fn = fn
        self.params = dict(params or {})

    def __call__(self, label, human_sets, r: int) -> int:
        return 1 if self.fn(label, human_sets, r, **self.params) else 0

    def spec(self) -> dict:
        """Config-file representation (kind + parameters)."""
        return {"kind": self.kind, **self.params}

    def __repr__(self) -> str:
        ps = ", ".join(f"{k}={v}" for k, v in self.params.items())
        return f"Rule({self.kind}{', ' + ps if ps else ''})"


def _ch_current_round(y, human_sets, r):
    return y in human_sets[r - 1]


def _comp_final_round(y, human_sets, r):
    return r == len(human_sets) and y not in human_sets[r - 1]


def _ch_intersection_window(y, human_sets, r, k):
    window = human_sets[max(0, r - k):r]
    return all(y in h for h in window)


def _ch_ever_proposed(y, human_sets, r):
    return any(y in human_sets[j] for j in range(r))


# Builders keyed by the names used in run configuration files.
_REGISTRY: dict = {}


def register_rule(kind: str, builder: Callable[..., Rule]) -> None:
    """Register a rule builder so configs can reference it by name."""
    _REGISTRY[kind] = builder


def register_custom_predicate(kind: str, fn: Callable) -> None:
    """Register a user-supplied predicate ``fn(y, human_sets, r, **params)``."""
    register_rule(kind, lambda **params: Rule(kind, fn, params))


register_rule("ch_current_round", lambda: Rule("ch_current_round", _ch_current_round))
register_rule("comp_final_round", lambda: Rule("comp_final_round", _comp_final_round))
register_rule(
    "ch_intersection_window",
    lambda k=2: Rule("ch_intersection_window", _ch_intersection_window, {"k": int(k)}),
)
register_rule("ch_ever_proposed", lambda: Rule("ch_ever_proposed", _ch_ever_proposed))


def rule_from_spec(spec) -> Rule:
    """Build a rule from its config representation.

    Accepts a bare kind string or a dict ``{"kind": ..., <params>}``.
    """
    if isinstance(spec, Rule):
        return spec
    if isinstance(spec, str):
        spec = {"kind": spec}
    kind = spec.get("kind")
    if kind not in _REGISTRY:
        raise KeyError(f"unknown rule kind {kind!r}")
    params = {k: v for k, v in spec.items() if k != "kind"}
    return _REGISTRY[kind](**params)


def evaluate_rule(rule: Rule, label, human_sets, r: int) -> int:
    """Evaluate ``R(label, human_sets, r)``; requires 1 <= r <= len(human_sets)."""
    n = len(human_sets)
    if not 1 <= r <= n:
        raise ValueError(f"round index {r} out of range 1..{n}")
    return rule(label, human_sets, r)


def online_activation(rule: Rule, label, human_prefix) -> int:
    """Rule evaluated on a prefix with the current round treated as terminal."""
    if not human_prefix:
        raise ValueError("online activation needs at least one human set")
    return rule(label, human_prefix, len(human_prefix))


def activation_profile(rule_ch: Rule, rule_comp: Rule, labels, human_prefix):
    """Per-label activation bits for the current round, as two label sets."""
    ch_active = frozenset(
        y for y in labels if online_activation(rule_ch, y, human_prefix)
    )
    comp_active = frozenset(
        y for y in labels if online_activation(rule_comp, y, human_prefix)
    )
    return ch_active, comp_active


@dataclass
class DominanceReport:
    """Outcome of the exhaustive activation-dominance check."""

    holds: bool
    counterexamples: list = field(default_factory=list)
    evaluations: int = 0
    bounds: dict = field(default_factory=dict)


def estimate_dominance_evaluations(n_labels: int, max_rounds: int,
                                   max_set_size: Optional[int] = None) -> int:
    if max_set_size is None:
        max_set_size = n_labels
    n_subsets = sum(math.comb(n_labels, i) for i in range(min(max_set_size, n_labels) + 1))
    total = 0
    for n in range(1, max_rounds + 1):
        total += (n_subsets ** n) * n_labels * n
    return total


def check_dominance(rule: Rule, label_space, max_rounds: int,
                    max_set_size: Optional[int] = None,
                    cap: int = 5_000_000) -> DominanceReport:
    """Exhaustively verify R(y, H_1:N, r) <= R-bar(y, H_1:r) within bounds.

    Enumerates every transcript of human sets (empty sets included) up to
    ``max_rounds`` rounds with per-round sets of size up to
    ``max_set_size`` (defaults to the full space), every label, and every
    round index. Returns all violations found.
    """
    if not isinstance(label_space, LabelSpace):
        label_space = LabelSpace(label_space)
    labels = list(label_space.labels)
    k = len(labels)
    if max_set_size is None:
        max_set_size = k

    estimated = estimate_dominance_evaluations(k, max_rounds, max_set_size)
    if estimated > cap:
        raise EnumerationCap(estimated, cap)

    subsets = [
        frozenset(c)
        for size in range(min(max_set_size, k) + 1)
        for c in itertools.combinations(labels, size)
    ]

    report = DominanceReport(
        holds=True,
        bounds={"labels": k, "max_rounds": max_rounds, "max_set_size": max_set_size},
    )
    for n in range(1, max_rounds + 1):
        for transcript in itertools.product(subsets, repeat=n):
            human_sets = list(transcript)
            for y in labels:
                for r in range(1, n + 1):
                    report.evaluations += 1
                    full = evaluate_rule(rule, y, human_sets, r)
                    activated = online_activation(rule, y, human_sets[:r])
                    if full > activated:
                        report.holds = False
                        report.counterexamples.append({
                            "label": y,
                            "transcript": [label_space.sort(h) for h in human_sets],
                            "round": r,
                            "rule_value": full,
                            "activation_value": activated,
                        })
    return report

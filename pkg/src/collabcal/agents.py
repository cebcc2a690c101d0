"""Black-box simulated humans for driving interaction streams.

Policies never see the ground truth directly; correctness enters only
through the accuracy/trust channels (a Bernoulli placement of the truth
in the initial proposal, and probabilistic adoption of labels from the
AI's sets). The adversarial policy is the exception by design: it is a
stress input for the calibrator's agent-independent guarantee and may
inspect the current thresholds and the truth to maximize realized errors.

All policies are deterministic functions of their inputs and the RNG
handed to them, so streams replay bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from typing import NamedTuple, Optional

import numpy as np

from .core import DayRecord, LabelSpace, outcome_flags


class ThresholdView(NamedTuple):
    """Read-only glimpse of the stream handed to policies each turn."""

    tau: float
    lam: float
    day_index: int


@dataclass(frozen=True)
class AgentOutcome:
    """Per-day decision-quality flags derived from the transcript."""

    initial_had_truth: bool
    final_had_truth: bool

    @property
    def gt_loss(self) -> bool:
        return self.initial_had_truth and not self.final_had_truth

    @property
    def gt_gain(self) -> bool:
        return not self.initial_had_truth and self.final_had_truth

    @classmethod
    def from_day(cls, day: DayRecord) -> "AgentOutcome":
        flags = outcome_flags(day)
        return cls(
            initial_had_truth=flags["initial_had_truth"],
            final_had_truth=flags["final_had_truth"],
        )

    def to_dict(self) -> dict:
        return {
            "initial_had_truth": self.initial_had_truth,
            "final_had_truth": self.final_had_truth,
            "gt_loss": self.gt_loss,
            "gt_gain": self.gt_gain,
        }


def _sample_without(rng, pool: list, count: int) -> list:
    if count > len(pool):
        raise ValueError(f"cannot sample {count} labels from {len(pool)}")
    if count == 0:
        return []
    idx = rng.choice(len(pool), size=count, replace=False)
    return [pool[i] for i in np.sort(idx)]


@dataclass
class HumanPolicy:
    """Stochastic stationary human with fixed-size proposals.

    ``kind`` selects the proposal shape: "sampled" draws arbitrary
    fixed-size subsets; "interval" proposes contiguous windows over the
    label order (console parity), centered near a noisy perception of the
    truth with spread ``noise_width``. ``drift`` is a step schedule of
    (start_day, field_overrides) applied from that day onward.
    """

    set_size: int = 2
    initial_accuracy: float = 0.7
    trust: float = 0.5
    stubbornness: float = 0.2
    max_rounds: int = 6
    stop_on_agreement: bool = True
    kind: str = "sampled"
    noise_width: float = 2.0
    drift: Optional[list] = None

    def params_at(self, day_index: Optional[int]) -> "HumanPolicy":
        if not self.drift or day_index is None:
            return self
        overrides = {}
        for start, values in self.drift:
            if day_index >= start:
                overrides.update(values)
        return replace(self, **overrides) if overrides else self

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["policy"] = "stationary"
        if d["drift"] is not None:
            d["drift"] = [[start, dict(vals)] for start, vals in d["drift"]]
        else:
            del d["drift"]
        return d

    # -- proposal -----------------------------------------------------------

    def propose(self, label_space: LabelSpace, ground_truth, rng,
                view: Optional[ThresholdView] = None) -> frozenset:
        p = self.params_at(view.day_index if view else None)
        k = len(label_space)
        if p.set_size > k:
            raise ValueError(f"set_size {p.set_size} exceeds label space size {k}")
        include = bool(rng.random() < p.initial_accuracy)
        if p.kind == "interval":
            return p._propose_interval(label_space, ground_truth, include, rng)
        others = [y for y in label_space.labels if y != ground_truth]
        if include:
            members = _sample_without(rng, others, p.set_size - 1) + [ground_truth]
        elif p.set_size <= len(others):
            members = _sample_without(rng, others, p.set_size)
        else:  # set_size == |space|: the whole space, truth unavoidable
            members = list(label_space.labels)
        return frozenset(members)

    def _propose_interval(self, label_space, ground_truth, include, rng) -> frozenset:
        k = len(label_space)
        w = self.set_size
        truth_idx = label_space.index(ground_truth)
        covering = range(max(0, truth_idx - w + 1), min(truth_idx, k - w) + 1)
        if include:
            start = int(rng.choice(list(covering)))
        else:
            starts = [s for s in range(0, k - w + 1) if s not in covering]
            if not starts:
                start = covering[0]  # window covers the whole space
            else:
                dist = np.array([abs(s + (w - 1) / 2 - truth_idx) for s in starts])
                weights = np.exp(-dist / max(self.noise_width, 1e-9))
                weights /= weights.sum()
                start = int(rng.choice(starts, p=weights))
        return frozenset(label_space.labels[start:start + w])

    # -- revision -----------------------------------------------------------

    def revise(self, current_set: frozenset, ai_set: frozenset, rng,
               label_space: Optional[LabelSpace] = None,
               round_index: Optional[int] = None,
               view: Optional[ThresholdView] = None):
        p = self.params_at(view.day_index if view else None)
        stop = p.stop_on_agreement and current_set <= ai_set
        if round_index is not None and round_index >= p.max_rounds:
            stop = True
        if rng.random() < p.stubbornness:
            return current_set, not stop
        if p.kind == "interval" and label_space is not None:
            revised = p._revise_interval(current_set, ai_set, rng, label_space)
            return revised, not stop
        order = label_space.sort if label_space is not None else (
            lambda s: sorted(s, key=repr)
        )
        candidates = order(ai_set - current_set)
        adopted = [y for y in candidates if rng.random() < p.trust][:p.set_size]
        if not adopted:
            return current_set, not stop
        # Make room by discarding AI-unsupported members first: a trusting
        # human keeps the guesses the AI reinforced.
        supported = order(current_set & ai_set)
        unsupported = order(current_set - ai_set)
        keep_pool = ([supported[i] for i in rng.permutation(len(supported))]
                     + [unsupported[i] for i in rng.permutation(len(unsupported))])
        keep = keep_pool[:p.set_size - len(adopted)]
        return frozenset(adopted + keep), not stop

    def _revise_interval(self, current_set, ai_set, rng, label_space) -> frozenset:
        if not ai_set or rng.random() >= self.trust:
            return current_set
        k = len(label_space)
        w = self.set_size
        anchors = label_space.sort(ai_set)
        anchor_idx = label_space.index(anchors[int(rng.choice(len(anchors)))])
        covering = range(max(0, anchor_idx - w + 1), min(anchor_idx, k - w) + 1)
        start = int(rng.choice(list(covering)))
        return frozenset(label_space.labels[start:start + w])


@dataclass
class AdversarialPolicy:
    """Error-maximizing stress agent; sees thresholds and the truth.

    Proposes the truth exactly when the CH threshold is too low to cover
    it (forcing a harm error), otherwise withholds the truth so the
    complementarity rule triggers while that threshold is low. Stops
    after ``rounds`` rounds. ``flip_at`` inverts the targeting from that
    day on (the mid-stream behavior flip used in stress tests).
    ``score_guess`` is the truth score level the adversary assumes, e.g.
    1 - truth_mass of the oracle it is playing against.
    """

    set_size: int = 2
    rounds: int = 1
    score_guess: float = 0.5
    flip_at: Optional[int] = None
    max_rounds: int = 6

    def _attack_ch(self, view: Optional[ThresholdView]) -> bool:
        if view is None:
            return True
        attack = view.tau < self.score_guess
        if self.flip_at is not None and view.day_index >= self.flip_at:
            attack = not attack
        return attack

    def propose(self, label_space: LabelSpace, ground_truth, rng,
                view: Optional[ThresholdView] = None) -> frozenset:
        others = [y for y in label_space.labels if y != ground_truth]
        if self._attack_ch(view):
            fill = _sample_without(rng, others, min(self.set_size - 1, len(others)))
            return frozenset([ground_truth] + fill)
        fill = _sample_without(rng, others, min(self.set_size, len(others)))
        return frozenset(fill)

    def revise(self, current_set, ai_set, rng, label_space=None,
               round_index=None, view=None):
        cont = round_index is None or round_index < min(self.rounds, self.max_rounds)
        return current_set, cont

    def to_dict(self) -> dict:
        return {
            "policy": "adversarial",
            "set_size": self.set_size,
            "rounds": self.rounds,
            "score_guess": self.score_guess,
            "flip_at": self.flip_at,
        }


def initial_proposal(policy, label_space, ground_truth, rng,
                     view: Optional[ThresholdView] = None) -> frozenset:
    """Draw the day's opening proposal from a policy."""
    if not isinstance(label_space, LabelSpace):
        label_space = LabelSpace(label_space)
    return policy.propose(label_space, ground_truth, rng, view)


def revise(policy, current_set, ai_set, rng, label_space=None,
           round_index=None, view=None):
    """One revision step: (possibly unchanged set, continue flag)."""
    return policy.revise(current_set, ai_set, rng, label_space=label_space,
                         round_index=round_index, view=view)


def adversarial_policy(seed: int = 0, **params) -> AdversarialPolicy:
    """Build the stress policy; the seed only matters through stream RNGs."""
    return AdversarialPolicy(**params)


_POLICIES = {
    "stationary": HumanPolicy,
    "adversarial": AdversarialPolicy,
}


def policy_from_spec(spec: dict):
    """Build a policy from its config representation ({"policy": name, ...})."""
    spec = dict(spec)
    name = spec.pop("policy", "stationary")
    if name not in _POLICIES:
        raise KeyError(f"unknown policy {name!r}")
    if name == "stationary" and spec.get("drift") is not None:
        spec["drift"] = [(int(s), dict(v)) for s, v in spec["drift"]]
    return _POLICIES[name](**spec)

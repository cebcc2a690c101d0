"""Per-label nonconformity scores from normalized probability vectors.

Scores are ``1 - p(label)`` clamped to [0, 1]; the calibrator's guarantee
requires scores in that range, so the clamp is enforced here rather than
trusted from providers. A synthetic oracle stands in for a model
probability head during simulation; an adapter with the same signature
exists for external providers and ships with a mock transport.
"""

from __future__ import annotations

import json
import urllib.request
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .core import Label, LabelOutOfSpace, LabelSpace


class DegenerateDistribution(ValueError):
    """No in-space label carries positive mass."""


def normalize_probabilities(raw: Mapping, label_space) -> dict:
    """Normalize raw nonnegative masses into a distribution over the space.

    Labels missing from ``raw`` get mass 0; entries for labels outside the
    space are dropped (hallucinated labels from a provider). Raises
    ``DegenerateDistribution`` when nothing in-space remains.
    """
    if not isinstance(label_space, LabelSpace):
        label_space = LabelSpace(label_space)
    total = 0.0
    kept = {}
    for label in label_space:
        mass = float(raw.get(label, 0.0))
        if mass < 0:
            raise ValueError(f"negative mass {mass} for label {label!r}")
        kept[label] = mass
        total += mass
    if total <= 0.0:
        raise DegenerateDistribution("no in-space label has positive mass")
    return {label: mass / total for label, mass in kept.items()}


def score_from_distribution(p: Mapping, label) -> float:
    """Nonconformity score ``1 - p(label)``, clamped against float error."""
    if label not in p:
        raise LabelOutOfSpace(f"label {label!r} not in distribution")
    return min(1.0, max(0.0, 1.0 - float(p[label])))


@dataclass
class ScoreVector:
    """Scores for every label of a space, aligned to the space's order."""

    label_space: LabelSpace
    values: np.ndarray

    @classmethod
    def from_distribution(cls, p: Mapping, label_space) -> "ScoreVector":
        if not isinstance(label_space, LabelSpace):
            label_space = LabelSpace(label_space)
        values = np.array([1.0 - float(p.get(label, 0.0)) for label in label_space])
        np.clip(values, 0.0, 1.0, out=values)
        return cls(label_space, values)

    def __getitem__(self, label) -> float:
        return float(self.values[self.label_space.index(label)])

    def as_dict(self) -> dict:
        return {label: float(v) for label, v in zip(self.label_space, self.values)}


@dataclass
class DistributionSpec:
    """Synthetic probability oracle configuration.

    ``truth_mass`` is the mass aimed at the ground truth; the remaining
    mass decays over the other labels by rank distance with sharpness
    ``concentration``. With ``truth_kappa`` set, the realized truth mass
    is drawn from a Beta with mean ``truth_mass`` (higher kappa = tighter),
    which makes day-to-day scores vary the way a real model head would.
    ``adaptive_gain`` optionally raises the truth mass once the human has
    proposed the truth, emulating information flowing through the dialogue.
    ``drift`` is a step schedule of (day_index, truth_mass) pairs.
    """

    truth_mass: float = 0.6
    concentration: float = 1.0
    noise_seed: int = 0
    truth_kappa: Optional[float] = None
    confusion_rate: float = 0.0
    adaptive_gain: float = 0.0
    drift: Optional[Sequence] = None

    def __post_init__(self):
        if not 0.0 < self.truth_mass <= 1.0:
            raise ValueError("truth_mass must be in (0, 1]")
        if self.concentration <= 0:
            raise ValueError("concentration must be positive")
        if not 0.0 <= self.confusion_rate < 1.0:
            raise ValueError("confusion_rate must be in [0, 1)")
        if self.drift is not None:
            self.drift = [(int(day), float(mass)) for day, mass in self.drift]

    def truth_mass_at(self, day_index: Optional[int]) -> float:
        mass = self.truth_mass
        if self.drift and day_index is not None:
            for start, value in self.drift:
                if day_index >= start:
                    mass = value
        return mass

    def to_dict(self) -> dict:
        d = {
            "truth_mass": self.truth_mass,
            "concentration": self.concentration,
            "noise_seed": self.noise_seed,
            "confusion_rate": self.confusion_rate,
            "adaptive_gain": self.adaptive_gain,
        }
        if self.truth_kappa is not None:
            d["truth_kappa"] = self.truth_kappa
        if self.drift is not None:
            d["drift"] = [list(step) for step in self.drift]
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "DistributionSpec":
        return cls(**{k: v for k, v in d.items()})


def _decay_weights(k: int, center_idx: int, concentration: float) -> np.ndarray:
    """Rank-distance decay around a center, zero at the center itself."""
    distances = np.abs(np.arange(k) - center_idx).astype(float)
    distances[center_idx] = np.inf
    if np.isinf(concentration):
        nearest = distances.min()
        weights = (distances == nearest).astype(float)
    else:
        weights = np.exp(-concentration * (distances - 1.0))
        weights[center_idx] = 0.0
    return weights


def synthetic_distribution(spec: DistributionSpec, label_space, ground_truth,
                           transcript_so_far=None, rng=None,
                           day_index: Optional[int] = None) -> dict:
    """Generate a valid distribution with the configured mass on the truth.

    Deterministic given (spec, inputs, rng state). ``transcript_so_far``
    is the list of human sets proposed so far; it matters only when
    ``adaptive_gain`` is nonzero. With a nonzero ``confusion_rate`` the
    oracle occasionally centers its mass on a nearby decoy label instead
    of the truth, emulating a misperceiving model head; the expected
    truth mass then falls below ``truth_mass`` by construction.
    """
    if not isinstance(label_space, LabelSpace):
        label_space = LabelSpace(label_space)
    truth_idx = label_space.index(ground_truth)
    k = len(label_space)

    mass = spec.truth_mass_at(day_index)
    if spec.adaptive_gain > 0 and transcript_so_far:
        if ground_truth in transcript_so_far[-1]:
            mass = mass + spec.adaptive_gain * (1.0 - mass)

    needs_rng = spec.truth_kappa is not None or spec.confusion_rate > 0
    if rng is None and needs_rng:
        rng = np.random.default_rng(spec.noise_seed)

    center_idx = truth_idx
    if spec.confusion_rate > 0 and k >= 2 and rng.random() < spec.confusion_rate:
        decoy_weights = _decay_weights(k, truth_idx, spec.concentration)
        decoy_weights /= decoy_weights.sum()
        center_idx = int(rng.choice(k, p=decoy_weights))

    if spec.truth_kappa is not None and 0.0 < mass < 1.0:
        kappa = spec.truth_kappa
        p_center = float(rng.beta(mass * kappa, (1.0 - mass) * kappa))
    else:
        p_center = mass

    if k == 1:
        return {ground_truth: 1.0}

    weights = _decay_weights(k, center_idx, spec.concentration)
    weights *= (1.0 - p_center) / weights.sum()
    weights[center_idx] = p_center
    return {label: float(weights[i]) for i, label in enumerate(label_space)}


class SyntheticOracle:
    """Callable oracle over a DistributionSpec, for harness wiring."""

    def __init__(self, spec: DistributionSpec):
        self.spec = spec

    def distribution(self, label_space, ground_truth, transcript_so_far=None,
                     rng=None, day_index=None) -> dict:
        return synthetic_distribution(
            self.spec, label_space, ground_truth, transcript_so_far, rng, day_index
        )


def _http_post_json(url: str, payload: dict) -> dict:
    data = json.dumps(payload).encode("utf-8")
    req = urllib.request.Request(url, data=data,
                                 headers={"Content-Type": "application/json"})
    with urllib.request.urlopen(req) as resp:
        return json.loads(resp.read().decode("utf-8"))


class ExternalProviderAdapter:
    """Score provider backed by a remote endpoint returning raw masses.

    Same signature as the synthetic oracle. The endpoint receives the
    label space and transcript and must answer ``{"probabilities":
    {label: mass}}``; the reply is normalized (and hallucinated labels
    dropped) before use. ``transport`` is injectable so tests can mock the
    remote side; wiring a real model is out of scope here.
    """

    def __init__(self, endpoint_url: str,
                 transport: Optional[Callable[[str, dict], dict]] = None):
        self.endpoint_url = endpoint_url
        self.transport = transport or _http_post_json

    def distribution(self, label_space, ground_truth=None, transcript_so_far=None,
                     rng=None, day_index=None) -> dict:
        if not isinstance(label_space, LabelSpace):
            label_space = LabelSpace(label_space)
        payload = {
            "labels": list(label_space.labels),
            "transcript": [sorted(map(str, s)) for s in (transcript_so_far or [])],
            "day_index": day_index,
        }
        reply = self.transport(self.endpoint_url, payload)
        return normalize_probabilities(reply["probabilities"], label_space)

"""Domain types for the multi-round human-AI collaboration protocol.

A *day* is one problem instance. Within a day the human and the AI
alternate turns: the human proposes a candidate set plus a free-text
message, the AI answers with its own set and message. The human decides
when to stop; afterwards the ground truth is revealed and the day is
finalized. Messages are opaque payloads and are never interpreted here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional, Union

Label = Union[str, int]
PredictionSet = frozenset  # subset of a day's label space; may be empty


class ProtocolError(Exception):
    """Base class for violations of the day/round protocol."""


class EmptyLabelSpace(ProtocolError):
    pass


class LabelOutOfSpace(ProtocolError):
    pass


class ProtocolOrder(ProtocolError):
    """Turn submitted out of the legal (human, AI)* finalize order."""


class AlreadyFinal(ProtocolError):
    pass


class MalformedLog(ValueError):
    """A run-log line could not be parsed; carries the 1-based line number."""

    def __init__(self, line_number: int, message: str):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


class LabelSpace:
    """Ordered collection of distinct labels (opaque strings or ints).

    Label spaces are per-day; the order is used for deterministic
    serialization and for rank-distance computations in score oracles.
    """

    __slots__ = ("labels", "_index")

    def __init__(self, labels: Iterable[Label]):
        labels = list(labels)
        if not labels:
            raise EmptyLabelSpace("label space must contain at least one label")
        index = {}
        for i, lab in enumerate(labels):
            if lab in index:
                raise ValueError(f"duplicate label {lab!r}")
            index[lab] = i
        self.labels = labels
        self._index = index

    def __len__(self) -> int:
        return len(self.labels)

    def __iter__(self) -> Iterator[Label]:
        return iter(self.labels)

    def __contains__(self, label: Label) -> bool:
        return label in self._index

    def __eq__(self, other) -> bool:
        return isinstance(other, LabelSpace) and self.labels == other.labels

    def index(self, label: Label) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise LabelOutOfSpace(f"label {label!r} not in space") from None

    def subset(self, members: Iterable[Label]) -> PredictionSet:
        """Validate membership and return the members as a prediction set."""
        members = frozenset(members)
        for m in members:
            if m not in self._index:
                raise LabelOutOfSpace(f"label {m!r} not in space")
        return members

    def sort(self, members: Iterable[Label]) -> list:
        """Members ordered by their position in the space (stable output)."""
        return sorted(members, key=self._index.__getitem__)

    def __repr__(self) -> str:
        return f"LabelSpace({self.labels!r})"


@dataclass
class Round:
    """One human-then-AI exchange. ``ai_set`` is None until the AI responds."""

    human_set: PredictionSet
    human_message: str = ""
    ai_set: Optional[PredictionSet] = None
    ai_message: str = ""

    @property
    def complete(self) -> bool:
        return self.ai_set is not None


@dataclass
class DayRecord:
    """Full per-day interaction history.

    ``ground_truth`` and ``realized_errors`` appear only after
    finalization; ``stopping_round`` equals the number of rounds.
    ``final_assessment`` is the human's post-dialogue judgment set; it is
    recorded at finalization and is not part of the round transcript that
    rules evaluate.
    """

    day_index: int
    problem_id: str
    label_space: LabelSpace
    rounds: list = field(default_factory=list)
    ground_truth: Optional[Label] = None
    thresholds_used: Optional[tuple] = None  # (tau, lambda) gating this day
    realized_errors: Optional[tuple] = None  # (e_ch, e_comp)
    final_assessment: Optional[PredictionSet] = None
    logged_outcome: Optional[dict] = None  # flags as stored in a parsed log

    @property
    def finalized(self) -> bool:
        return self.ground_truth is not None

    @property
    def stopping_round(self) -> int:
        return len(self.rounds)

    @property
    def awaiting_ai(self) -> bool:
        return bool(self.rounds) and not self.rounds[-1].complete

    def human_sets(self) -> list:
        """Transcript of human sets proposed so far, in round order."""
        return [r.human_set for r in self.rounds]

    def ai_sets(self) -> list:
        return [r.ai_set for r in self.rounds]


def new_day(problem_id: str, label_space, day_index: int = 0) -> DayRecord:
    """Open a fresh day for one problem instance.

    ``day_index`` may be assigned later (e.g. by a calibration stream that
    orders days at finalization time).
    """
    if not isinstance(label_space, LabelSpace):
        label_space = LabelSpace(label_space)
    return DayRecord(day_index=day_index, problem_id=problem_id, label_space=label_space)


def append_human_turn(day: DayRecord, human_set, human_message: str = "") -> DayRecord:
    """Open a new round with the human half filled.

    Rejected if the day is closed, a previous round still awaits the AI
    response, or the set uses labels outside the day's space.
    """
    if day.finalized:
        raise AlreadyFinal(f"day {day.day_index} is finalized")
    if day.awaiting_ai:
        raise ProtocolOrder("human turn submitted before the AI answered the previous one")
    members = day.label_space.subset(human_set)
    day.rounds.append(Round(human_set=members, human_message=human_message))
    return day


def record_ai_response(day: DayRecord, ai_set, ai_message: str = "") -> DayRecord:
    """Fill the AI half of the currently open round."""
    if day.finalized:
        raise AlreadyFinal(f"day {day.day_index} is finalized")
    if not day.awaiting_ai:
        raise ProtocolOrder("no human turn awaiting an AI response")
    members = day.label_space.subset(ai_set)
    last = day.rounds[-1]
    last.ai_set = members
    last.ai_message = ai_message
    return day


def finalize_day(day: DayRecord, ground_truth: Label,
                 final_assessment=None) -> DayRecord:
    """Close the day: reveal the truth and freeze the transcript.

    Requires at least one complete round. Realized errors are filled in
    separately by the calibrator once rules are evaluated post-hoc.
    """
    if day.finalized:
        raise AlreadyFinal(f"day {day.day_index} already finalized")
    if not day.rounds:
        raise ProtocolOrder("cannot finalize a day with no rounds")
    if day.awaiting_ai:
        raise ProtocolOrder("cannot finalize: last round has no AI response")
    if ground_truth not in day.label_space:
        raise LabelOutOfSpace(f"ground truth {ground_truth!r} not in space")
    if final_assessment is not None:
        final_assessment = day.label_space.subset(final_assessment)
    day.ground_truth = ground_truth
    day.final_assessment = final_assessment
    return day


def outcome_flags(day: DayRecord) -> dict:
    """Decision-quality flags derived from the transcript of a closed day.

    "Final" means the human's post-dialogue assessment when recorded,
    else the last proposed set.
    """
    if not day.finalized or not day.rounds:
        raise ProtocolOrder("outcome flags need a finalized day with rounds")
    final_set = day.final_assessment
    if final_set is None:
        final_set = day.rounds[-1].human_set
    initial = day.ground_truth in day.rounds[0].human_set
    final = day.ground_truth in final_set
    return {
        "initial_had_truth": initial,
        "final_had_truth": final,
        "gt_loss": initial and not final,
        "gt_gain": final and not initial,
    }


# ---------------------------------------------------------------------------
# Serialization: one day per line, stable field names.
# ---------------------------------------------------------------------------

def day_to_dict(day: DayRecord) -> dict:
    space = day.label_space
    d = {
        "day_index": day.day_index,
        "problem_id": day.problem_id,
        "labels": list(space.labels),
        "rounds": [
            {
                "human_set": space.sort(r.human_set),
                "human_message": r.human_message,
                "ai_set": space.sort(r.ai_set) if r.ai_set is not None else None,
                "ai_message": r.ai_message,
            }
            for r in day.rounds
        ],
        "ground_truth": day.ground_truth,
    }
    if day.thresholds_used is not None:
        d["tau"], d["lambda"] = day.thresholds_used
    if day.realized_errors is not None:
        d["e_ch"], d["e_comp"] = day.realized_errors
    if day.final_assessment is not None:
        d["final_set"] = space.sort(day.final_assessment)
    if day.finalized and day.rounds:
        d["outcome"] = outcome_flags(day)
    return d


def day_from_dict(d: dict) -> DayRecord:
    space = LabelSpace(d["labels"])
    day = DayRecord(
        day_index=d["day_index"],
        problem_id=d["problem_id"],
        label_space=space,
        ground_truth=d.get("ground_truth"),
    )
    for r in d["rounds"]:
        day.rounds.append(Round(
            human_set=space.subset(r["human_set"]),
            human_message=r.get("human_message", ""),
            ai_set=space.subset(r["ai_set"]) if r.get("ai_set") is not None else None,
            ai_message=r.get("ai_message", ""),
        ))
    if "tau" in d:
        day.thresholds_used = (d["tau"], d["lambda"])
    if "e_ch" in d:
        day.realized_errors = (d["e_ch"], d["e_comp"])
    if "final_set" in d:
        day.final_assessment = space.subset(d["final_set"])
    if "outcome" in d:
        day.logged_outcome = dict(d["outcome"])
    return day


class RunLog:
    """Append-only sequence of finalized days plus run-level metadata.

    The metadata records everything needed to audit and replay the log:
    targets, step size, initial thresholds, and the rule/oracle/policy
    specs of the run that produced it.
    """

    def __init__(self, meta: Optional[dict] = None):
        self.meta = dict(meta or {})
        self.days: list = []

    def append(self, day: DayRecord) -> None:
        if not day.finalized:
            raise ProtocolOrder("only finalized days enter the run log")
        self.days.append(day)

    def __len__(self) -> int:
        return len(self.days)

    def __iter__(self) -> Iterator[DayRecord]:
        return iter(self.days)

    def error_sequences(self):
        """(e_ch, e_comp) day-by-day, as two lists of 0/1 ints."""
        e_ch = [d.realized_errors[0] for d in self.days]
        e_comp = [d.realized_errors[1] for d in self.days]
        return e_ch, e_comp

    def write_jsonl(self, path) -> None:
        path = Path(path)
        with path.open("w", encoding="utf-8") as fh:
            fh.write(json.dumps({"run_meta": self.meta}) + "\n")
            for day in self.days:
                fh.write(json.dumps(day_to_dict(day)) + "\n")

    @classmethod
    def read_jsonl(cls, path) -> "RunLog":
        path = Path(path)
        log = cls()
        with path.open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    d = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise MalformedLog(lineno, str(exc)) from None
                if "run_meta" in d:
                    log.meta = d["run_meta"]
                    continue
                try:
                    log.days.append(day_from_dict(d))
                except (KeyError, ProtocolError, ValueError) as exc:
                    raise MalformedLog(lineno, str(exc)) from None
        return log

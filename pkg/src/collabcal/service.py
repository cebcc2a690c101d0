"""Live HTTP session service around global calibration streams.

Each stream owns one calibrator state shared by all of its sessions;
days from concurrent sessions interleave into a single sequential
update order. Thresholds are snapshotted when a day begins (frozen for
all of its rounds) and the finalize step applies the projected update
atomically under the stream lock, so the threshold trajectory is always
consistent with the commit order of finalizations.

The built-in task is collaborative shape counting: the server sends a
render seed and count range, the client renders the scene; the hidden
count is derived from the seed by a tiny PRNG implemented identically on
both sides, so no payload ever names the truth before finalization.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .calibrator import (
    CalibratorState,
    audit_bounds,
    evaluate_day_errors,
    run_round,
    update_thresholds,
)
from .core import (
    DayRecord,
    LabelSpace,
    ProtocolError,
    RunLog,
    append_human_turn,
    day_to_dict,
    finalize_day,
    new_day,
    outcome_flags,
)
from .harness import LOG_FORMAT
from .rules import rule_from_spec
from .scores import DistributionSpec, ScoreVector, SyntheticOracle


def mulberry32(seed: int):
    """32-bit PRNG shared with the browser client; must match it bit-for-bit."""
    a = seed & 0xFFFFFFFF

    def rand() -> float:
        nonlocal a
        a = (a + 0x6D2B79F5) & 0xFFFFFFFF
        t = ((a ^ (a >> 15)) * (a | 1)) & 0xFFFFFFFF
        m = ((t ^ (t >> 7)) * (t | 61)) & 0xFFFFFFFF
        t = ((t + m) & 0xFFFFFFFF) ^ t
        return ((t ^ (t >> 14)) & 0xFFFFFFFF) / 4294967296

    return rand


def derive_count(render_seed: int, lo: int, hi: int) -> int:
    """Hidden target count for a stimulus; first draw of the shared PRNG."""
    return lo + int(mulberry32(render_seed)() * (hi - lo + 1))


@dataclass
class TaskSpec:
    """What a session's human is asked to do."""

    kind: str = "counting"
    count_range: tuple = (3, 50)
    set_size: int = 3
    contiguous: bool = True
    max_rounds: int = 2
    shape_types: tuple = ("triangle", "square", "star")
    exposure_ms: tuple = (1000, 500)
    labels: Optional[list] = None  # "labels" kind: explicit space

    def label_space(self) -> LabelSpace:
        if self.kind == "counting":
            lo, hi = self.count_range
            return LabelSpace(list(range(lo, hi + 1)))
        return LabelSpace(self.labels)

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind,
            "set_size": self.set_size,
            "max_rounds": self.max_rounds,
        }
        if self.kind == "counting":
            d["count_range"] = list(self.count_range)
            d["contiguous"] = self.contiguous
            d["shape_types"] = list(self.shape_types)
            d["exposure_ms"] = list(self.exposure_ms)
        else:
            d["labels"] = list(self.labels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TaskSpec":
        d = dict(d)
        if "count_range" in d:
            d["count_range"] = tuple(d["count_range"])
        if "shape_types" in d:
            d["shape_types"] = tuple(d["shape_types"])
        if "exposure_ms" in d:
            d["exposure_ms"] = tuple(d["exposure_ms"])
        return cls(**d)


@dataclass
class Session:
    session_id: str
    stream_id: str
    created_at: float
    day: Optional[DayRecord] = None
    day_seq: Optional[int] = None  # creation sequence within the stream
    day_truth: Optional[int] = None
    day_opened_at: float = 0.0
    day_state: Optional[CalibratorState] = None  # thresholds frozen for the day
    render_seed: Optional[int] = None
    rounds_done: int = 0
    last_turn: Optional[dict] = None  # idempotent retry echo


class Stream:
    """One global calibration stream plus its persistence files."""

    def __init__(self, stream_id: str, state: CalibratorState, task: TaskSpec,
                 rule_ch, rule_comp, oracle: SyntheticOracle, seed: int,
                 data_dir: Path, day_timeout: float, day_seq: int = 0):
        self.stream_id = stream_id
        self.state = state
        self.task = task
        self.rule_ch = rule_ch
        self.rule_comp = rule_comp
        self.oracle = oracle
        self.seed = seed
        self.day_timeout = day_timeout
        self.day_seq = day_seq
        self.lock = threading.Lock()
        self.log_path = data_dir / f"{stream_id}.jsonl"
        self.state_path = data_dir / f"{stream_id}.state.json"
        self.errors_ch: list = []
        self.errors_comp: list = []

    def meta(self) -> dict:
        return {
            "format": LOG_FORMAT,
            "stream_id": self.stream_id,
            "epsilon": self.state.epsilon,
            "delta": self.state.delta,
            "eta": self.state.eta,
            "seed": self.seed,
            "tau_init": 0.0,
            "lambda_init": 0.0,
            "rule_ch": self.rule_ch.spec(),
            "rule_comp": self.rule_comp.spec(),
            "oracle": self.oracle.spec.to_dict(),
            "task": self.task.to_dict(),
        }

    def persist_created(self) -> None:
        with self.log_path.open("w", encoding="utf-8") as fh:
            fh.write(json.dumps({"run_meta": self.meta()}) + "\n")
        self._write_snapshot()

    def commit_day(self, day: DayRecord) -> CalibratorState:
        """Apply one finalized day to the stream; caller holds the lock."""
        e_ch, e_comp = day.realized_errors
        before = self.state
        day.day_index = before.day_counter + 1
        # The log's trajectory columns follow commit order; under
        # interleaved sessions they may differ from the day's snapshot.
        day.thresholds_used = (before.tau, before.lam)
        self.state = update_thresholds(before, e_ch, e_comp)
        self.errors_ch.append(e_ch)
        self.errors_comp.append(e_comp)
        with self.log_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(day_to_dict(day)) + "\n")
        self._write_snapshot()
        return self.state

    def _write_snapshot(self) -> None:
        payload = {
            "state": self.state.to_dict(),
            "day_seq": self.day_seq,
            "meta": self.meta(),
        }
        tmp = self.state_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(payload), encoding="utf-8")
        tmp.replace(self.state_path)

    @classmethod
    def restore(cls, state_path: Path, data_dir: Path,
                day_timeout: float) -> "Stream":
        payload = json.loads(state_path.read_text(encoding="utf-8"))
        meta = payload["meta"]
        stream = cls(
            stream_id=meta["stream_id"],
            state=CalibratorState.from_dict(payload["state"]),
            task=TaskSpec.from_dict(meta["task"]),
            rule_ch=rule_from_spec(meta["rule_ch"]),
            rule_comp=rule_from_spec(meta["rule_comp"]),
            oracle=SyntheticOracle(DistributionSpec.from_dict(meta["oracle"])),
            seed=meta["seed"],
            data_dir=data_dir,
            day_timeout=day_timeout,
            day_seq=payload["day_seq"],
        )
        if stream.log_path.exists():
            log = RunLog.read_jsonl(stream.log_path)
            stream.errors_ch, stream.errors_comp = log.error_sequences()
        return stream


class StreamCreate(BaseModel):
    stream_id: Optional[str] = None
    epsilon: float
    delta: float
    eta: float = 0.1
    seed: int = 0
    rule_ch: dict = {"kind": "ch_current_round"}
    rule_comp: dict = {"kind": "comp_final_round"}
    oracle: dict = {}
    task: dict = {}
    day_timeout_seconds: Optional[float] = None


class TurnBody(BaseModel):
    set: list
    message: str = ""
    round_index: Optional[int] = None


class FinalizeBody(BaseModel):
    final_set: list


def _error(status: int, code: str, message: str) -> HTTPException:
    return HTTPException(status_code=status, detail={"error": code, "message": message})


class _ErrorSequences:
    """Just enough of a run log for audit_bounds: meta + error sequences."""

    def __init__(self, meta: dict, e_ch: list, e_comp: list):
        self.meta = meta
        self.e_ch = e_ch
        self.e_comp = e_comp

    def error_sequences(self):
        return self.e_ch, self.e_comp


def build_stream(body: StreamCreate, data_dir: Path, default_timeout: float) -> Stream:
    state = CalibratorState.fresh(body.epsilon, body.delta, body.eta)
    task = TaskSpec.from_dict(body.task) if body.task else TaskSpec()
    return Stream(
        stream_id=body.stream_id or f"stream-{uuid.uuid4().hex[:8]}",
        state=state,
        task=task,
        rule_ch=rule_from_spec(body.rule_ch),
        rule_comp=rule_from_spec(body.rule_comp),
        oracle=SyntheticOracle(DistributionSpec.from_dict(body.oracle)),
        seed=body.seed,
        data_dir=data_dir,
        day_timeout=(body.day_timeout_seconds
                     if body.day_timeout_seconds is not None
                     else default_timeout),
    )


def create_app(data_dir="collabcal-data", day_timeout: float = 900.0,
               clock=time.monotonic, initial_streams=()) -> FastAPI:
    """Build the service; restores any streams persisted under ``data_dir``.

    ``initial_streams`` is a list of StreamCreate-shaped dicts set up at
    startup (skipped when a persisted stream with that id already exists).
    """
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    app = FastAPI(title="collabcal session service")
    streams: dict = {}
    sessions: dict = {}
    registry_lock = threading.Lock()

    for state_path in sorted(data_dir.glob("*.state.json")):
        stream = Stream.restore(state_path, data_dir, day_timeout)
        streams[stream.stream_id] = stream

    for spec in initial_streams:
        body = StreamCreate(**spec)
        if body.stream_id in streams:
            continue
        stream = build_stream(body, data_dir, day_timeout)
        stream.persist_created()
        streams[stream.stream_id] = stream

    def get_stream(stream_id: str) -> Stream:
        stream = streams.get(stream_id)
        if stream is None:
            raise _error(404, "UnknownStream", f"no stream {stream_id!r}")
        return stream

    def get_session(session_id: str) -> Session:
        session = sessions.get(session_id)
        if session is None:
            raise _error(404, "UnknownSession", f"no session {session_id!r}")
        _expire_stale_day(session)
        return session

    def _expire_stale_day(session: Session) -> None:
        stream = streams[session.stream_id]
        timeout = stream.day_timeout
        if session.day is not None and timeout is not None:
            if clock() - session.day_opened_at > timeout:
                _discard_day(session)

    def _discard_day(session: Session) -> None:
        session.day = None
        session.day_seq = None
        session.day_truth = None
        session.day_state = None
        session.render_seed = None
        session.rounds_done = 0
        session.last_turn = None

    def _validate_human_set(task: TaskSpec, space: LabelSpace, members: list):
        try:
            chosen = space.subset(members)
        except ProtocolError as exc:
            raise _error(422, "LabelOutOfSpace", str(exc))
        if task.set_size is not None and len(chosen) != task.set_size:
            raise _error(422, "SetSize",
                         f"task requires exactly {task.set_size} labels")
        if task.kind == "counting" and task.contiguous:
            values = sorted(chosen)
            if any(b - a != 1 for a, b in zip(values, values[1:])):
                raise _error(422, "SetShape", "range must be contiguous integers")
        return chosen

    @app.get("/healthz")
    def healthz():
        return {"ok": True}

    @app.post("/streams")
    def create_stream(body: StreamCreate):
        with registry_lock:
            if body.stream_id and body.stream_id in streams:
                raise _error(409, "StreamExists", f"stream {body.stream_id!r} exists")
            try:
                stream = build_stream(body, data_dir, day_timeout)
            except (ValueError, KeyError) as exc:
                raise _error(422, "BadStreamConfig", str(exc))
            stream.persist_created()
            streams[stream.stream_id] = stream
        return {"stream_id": stream.stream_id, "state": stream.state.to_dict()}

    @app.get("/streams/{stream_id}/state")
    def stream_state(stream_id: str):
        stream = get_stream(stream_id)
        with stream.lock:
            return stream.state.to_dict()

    @app.get("/streams/{stream_id}/audit")
    def stream_audit(stream_id: str):
        stream = get_stream(stream_id)
        with stream.lock:
            errors = _ErrorSequences(stream.meta(), list(stream.errors_ch),
                                     list(stream.errors_comp))
        audits = audit_bounds(errors) if len(errors.e_ch) else []
        return {
            "pass": all(a.passed for a in audits),
            "horizons": [
                {"t": a.horizon, "avg_ch": a.avg_ch, "avg_comp": a.avg_comp,
                 "bound_ch": a.bound_ch, "bound_comp": a.bound_comp,
                 "pass": a.passed}
                for a in audits
            ],
        }

    @app.post("/streams/{stream_id}/sessions")
    def create_session(stream_id: str):
        stream = get_stream(stream_id)
        session = Session(
            session_id=f"session-{uuid.uuid4().hex[:12]}",
            stream_id=stream.stream_id,
            created_at=clock(),
        )
        sessions[session.session_id] = session
        return {
            "session_id": session.session_id,
            "stream_id": stream.stream_id,
            "task": stream.task.to_dict(),
        }

    @app.post("/sessions/{session_id}/days")
    def begin_day(session_id: str):
        session = get_session(session_id)
        stream = streams[session.stream_id]
        if session.day is not None:
            raise _error(409, "DayOpen", "a day is already open in this session")
        task = stream.task
        space = task.label_space()
        with stream.lock:
            stream.day_seq += 1
            seq = stream.day_seq
            snapshot = stream.state
        seed_rng = np.random.default_rng([stream.seed, seq, 7])
        render_seed = int(seed_rng.integers(2**32))
        if task.kind == "counting":
            lo, hi = task.count_range
            truth = derive_count(render_seed, lo, hi)
            shape = task.shape_types[int(seed_rng.integers(len(task.shape_types)))]
            stimulus = {
                "render_seed": render_seed,
                "shape_type": shape,
                "shape_types": list(task.shape_types),
                "count_range": [lo, hi],
                "exposure_ms": list(task.exposure_ms),
            }
        else:
            truth = space.labels[int(seed_rng.integers(len(space)))]
            stimulus = {"render_seed": render_seed}
        session.day = new_day(f"trial-{seq}", space)
        session.day_seq = seq
        session.day_truth = truth
        session.day_state = snapshot
        session.day_opened_at = clock()
        session.render_seed = render_seed
        session.rounds_done = 0
        session.last_turn = None
        return {
            "day_id": session.day.problem_id,
            "label_space": list(space.labels),
            "stimulus": stimulus,
            "round_index": 0,
        }

    @app.post("/sessions/{session_id}/turns")
    def submit_turn(session_id: str, body: TurnBody):
        session = get_session(session_id)
        stream = streams[session.stream_id]
        if session.day is None:
            raise _error(409, "DayClosed", "no open day; begin one first")
        if body.round_index is not None:
            if (session.last_turn is not None
                    and body.round_index == session.last_turn["round_index"]):
                return session.last_turn  # retry of the acknowledged turn
            if body.round_index != session.rounds_done + 1:
                raise _error(409, "TurnOrder",
                             f"expected round {session.rounds_done + 1}")
        if session.rounds_done >= stream.task.max_rounds:
            raise _error(409, "RoundLimit",
                         f"task allows {stream.task.max_rounds} rounds")
        day = session.day
        space = day.label_space
        chosen = _validate_human_set(stream.task, space, body.set)
        try:
            append_human_turn(day, chosen, body.message)
            oracle_rng = np.random.default_rng(
                [stream.seed, session.day_seq, 2, session.rounds_done + 1])
            p = stream.oracle.distribution(
                space, session.day_truth, day.human_sets(),
                oracle_rng, session.day_seq)
            scores = ScoreVector.from_distribution(p, space)
            ai_set, _ = run_round(session.day_state, day, scores,
                                  stream.rule_ch, stream.rule_comp)
        except ProtocolError as exc:
            raise _error(409, "ProtocolOrder", str(exc))
        session.rounds_done += 1
        response = {
            "round_index": session.rounds_done,
            "ai_set": space.sort(ai_set),
            "ai_message": "",
        }
        session.last_turn = response
        return response

    @app.post("/sessions/{session_id}/finalize")
    def finalize(session_id: str, body: FinalizeBody):
        session = get_session(session_id)
        stream = streams[session.stream_id]
        if session.day is None:
            raise _error(409, "DayClosed", "no open day to finalize")
        day = session.day
        if not day.rounds or day.awaiting_ai:
            raise _error(409, "ProtocolOrder", "no completed round to finalize")
        final_set = _validate_human_set(stream.task, day.label_space, body.final_set)
        try:
            finalize_day(day, session.day_truth, final_assessment=final_set)
        except ProtocolError as exc:
            raise _error(409, "ProtocolOrder", str(exc))
        day.realized_errors = evaluate_day_errors(day, stream.rule_ch,
                                                  stream.rule_comp)
        with stream.lock:
            new_state = stream.commit_day(day)
        response = {
            "day_index": day.day_index,
            "ground_truth": session.day_truth,
            "e_ch": day.realized_errors[0],
            "e_comp": day.realized_errors[1],
            "outcome": outcome_flags(day),
            "new_thresholds": {"tau": new_state.tau, "lambda": new_state.lam},
        }
        _discard_day(session)
        return response

    app.state.streams = streams
    app.state.sessions = sessions
    return app

"""Online calibration of AI prediction sets for multi-round collaboration.

The package is organized around the interaction protocol:

- ``core``: days, rounds, prediction sets, and the run-log format.
- ``rules``: user-defined harm/complementarity rules, their online
  activations, and the exhaustive activation-dominance checker.
- ``scores``: nonconformity scores from normalized probability vectors,
  plus a synthetic probability oracle for simulation.
- ``calibrator``: threshold-gated set construction, post-hoc error
  evaluation, the projected online update, and the bound auditor.
- ``agents``: black-box simulated humans, including an adversarial
  stress policy.
- ``harness``: day/stream loops, target sweeps, outcome metrics, replay.
- ``service``: live HTTP session service over global calibration streams.
- ``cli``: ``collabcal`` command-line entry points.
"""

from .calibrator import (
    BoundAudit,
    CalibratorState,
    ThresholdUpdateTrace,
    audit_bounds,
    audits_pass,
    construct_set,
    evaluate_day_errors,
    run_round,
    theoretical_bound,
    update_thresholds,
)
from .core import (
    DayRecord,
    LabelSpace,
    PredictionSet,
    Round,
    RunLog,
    append_human_turn,
    finalize_day,
    new_day,
)
from .rules import (
    Rule,
    check_dominance,
    evaluate_rule,
    online_activation,
    rule_from_spec,
)
from .scores import (
    DistributionSpec,
    ScoreVector,
    normalize_probabilities,
    score_from_distribution,
    synthetic_distribution,
)
from .harness import RunConfig, RunSummary, replay_run_log, run_stream, sweep

__version__ = "0.1.0"

__all__ = [
    "BoundAudit",
    "CalibratorState",
    "DayRecord",
    "DistributionSpec",
    "LabelSpace",
    "PredictionSet",
    "Round",
    "Rule",
    "RunConfig",
    "RunLog",
    "RunSummary",
    "ScoreVector",
    "ThresholdUpdateTrace",
    "append_human_turn",
    "audit_bounds",
    "audits_pass",
    "check_dominance",
    "construct_set",
    "evaluate_day_errors",
    "evaluate_rule",
    "finalize_day",
    "new_day",
    "normalize_probabilities",
    "online_activation",
    "replay_run_log",
    "rule_from_spec",
    "run_round",
    "run_stream",
    "score_from_distribution",
    "sweep",
    "synthetic_distribution",
    "theoretical_bound",
    "update_thresholds",
]

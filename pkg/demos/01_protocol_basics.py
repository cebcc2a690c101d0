"""Walk one collaboration day by hand.

Shows the turn protocol (human proposes, AI answers, human decides when
to stop), how activations gate the AI's set through the two thresholds,
and how the day's errors are judged after the truth is revealed.
"""

from collabcal.calibrator import CalibratorState, evaluate_day_errors, run_round
from collabcal.core import append_human_turn, finalize_day, new_day
from collabcal.rules import rule_from_spec
from collabcal.scores import ScoreVector, normalize_probabilities

LABELS = ["flu", "cold", "covid", "allergy", "strep"]

rule_ch = rule_from_spec("ch_current_round")
rule_comp = rule_from_spec("comp_final_round")

# Mid-stream thresholds: harm gate fairly generous, complementarity tighter.
state = CalibratorState(tau=0.55, lam=0.35, epsilon=0.1, delta=0.5, eta=0.1)

day = new_day("patient-0017", LABELS, day_index=17)
print(f"new day over {LABELS}")

# The model's (already normalized) beliefs for round 1.
p1 = normalize_probabilities(
    {"flu": 0.30, "cold": 0.10, "covid": 0.45, "allergy": 0.10, "strep": 0.05},
    day.label_space,
)
scores1 = ScoreVector.from_distribution(p1, day.label_space)

append_human_turn(day, {"flu", "cold"}, "sounds seasonal to me")
ai_set1, _ = run_round(state, day, scores1, rule_ch, rule_comp)
print(f"round 1: human {{flu, cold}} -> AI {sorted(ai_set1)}")
print(f"  (human labels pass if score <= tau={state.tau}; "
      f"others if score <= lambda={state.lam})")

# The human adopts the AI's suggestion and asks again; the model sharpens.
p2 = normalize_probabilities(
    {"flu": 0.15, "cold": 0.05, "covid": 0.70, "allergy": 0.05, "strep": 0.05},
    day.label_space,
)
scores2 = ScoreVector.from_distribution(p2, day.label_space)
append_human_turn(day, {"covid", "flu"}, "could it be covid after all?")
ai_set2, _ = run_round(state, day, scores2, rule_ch, rule_comp)
print(f"round 2: human {{covid, flu}} -> AI {sorted(ai_set2)}")

finalize_day(day, "covid", final_assessment={"covid", "flu"})
e_ch, e_comp = evaluate_day_errors(day, rule_ch, rule_comp)
print(f"truth revealed: covid; harm error={e_ch}, complementarity error={e_comp}")
print(f"stopping round N={day.stopping_round}, thresholds frozen at "
      f"{day.thresholds_used} for the whole day")

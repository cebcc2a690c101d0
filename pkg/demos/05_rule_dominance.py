"""Certify rules before trusting them.

The calibrator's guarantee needs each rule to never exceed its online
activation (the rule evaluated as if the current round were the last).
This demo certifies the built-in rule library by exhaustive enumeration
over bounded transcripts, then shows a tempting-but-unsound custom rule
being caught with a concrete counterexample.
"""

from collabcal.rules import Rule, check_dominance, rule_from_spec

BOUNDS = dict(max_rounds=3)
SPACE = ["a", "b", "c"]

print("certifying the built-in rules over |Y|=3, up to 3 rounds, all subsets:")
for spec in ("ch_current_round", "comp_final_round",
             {"kind": "ch_intersection_window", "k": 2}, "ch_ever_proposed"):
    rule = rule_from_spec(spec)
    report = check_dominance(rule, SPACE, **BOUNDS)
    print(f"  {rule!r}: {report.evaluations} checks -> "
          f"{'holds' if report.holds else 'VIOLATED'}")

print("\na rule that fires only before the final round cannot be activated "
      "online\n(at any prefix the current round IS the final round):")
unsound = Rule("absent_before_end",
               lambda y, H, r: y not in H[r - 1] and r < len(H))
report = check_dominance(unsound, SPACE, **BOUNDS)
first = report.counterexamples[0]
print(f"  {unsound!r}: {'holds' if report.holds else 'VIOLATED'} "
      f"({len(report.counterexamples)} counterexamples)")
print(f"  first counterexample: label={first['label']!r} "
      f"transcript={first['transcript']} round={first['round']}")
print(f"  rule fires ({first['rule_value']}) but the online activation "
      f"is {first['activation_value']} - the calibrator could never "
      f"have known to include that label")

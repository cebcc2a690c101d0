"""Watch the two error rates lock onto their targets over a long stream.

Runs one simulated stream and prints the running averages at a few
checkpoints together with the certified ceiling for that horizon; ends
with the full per-prefix bound audit.
"""

from collabcal.calibrator import audit_bounds, audits_pass, theoretical_bound
from collabcal.harness import RunConfig, run_stream

EPSILON, DELTA, ETA, DAYS = 0.1, 0.4, 0.1, 4000

config = RunConfig(
    labels={"size": 16},
    days=DAYS,
    epsilon=EPSILON, delta=DELTA, eta=ETA,
    oracle={"truth_mass": 0.6, "concentration": 0.8, "truth_kappa": 8.0,
            "confusion_rate": 0.2},
    policy={"policy": "stationary", "set_size": 2, "initial_accuracy": 0.55,
            "trust": 0.7, "stubbornness": 0.2, "max_rounds": 4},
    seed=42,
)

print(f"targets: harm {EPSILON}, complementarity {DELTA}; step {ETA}; "
      f"{DAYS} days")
log, summary = run_stream(config)

print(f"\n{'day':>6} {'avg_ch':>8} {'ceil_ch':>8} {'avg_comp':>9} {'ceil_comp':>9}")
for t in (10, 50, 200, 1000, DAYS):
    print(f"{t:>6} {summary.running_avg_ch[t-1]:>8.4f} "
          f"{theoretical_bound(EPSILON, ETA, t):>8.4f} "
          f"{summary.running_avg_comp[t-1]:>9.4f} "
          f"{theoretical_bound(DELTA, ETA, t):>9.4f}")

audits = audit_bounds(log)
print(f"\nbound audit over every horizon 1..{DAYS}: "
      f"{'pass' if audits_pass(audits) else 'FAIL'}")
print(f"final thresholds: tau={summary.final_tau:.3f} "
      f"lambda={summary.final_lambda:.3f}")
print(f"threshold peaks {summary.max_tau:.3f}/{summary.max_lambda:.3f} "
      f"stay under 1+eta={1+ETA}")

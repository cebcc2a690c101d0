"""Error targets are levers over human outcomes.

Runs the three classic instantiations (A: strict harm, B: loose harm,
C: loose complementarity) as independent sweep cells, then sweeps each
target separately to show the directional effect on GT-loss and GT-gain
rates: allowing more harm errors makes humans abandon correct initial
guesses more often; loosening complementarity suppresses recoveries.
"""

import numpy as np

from collabcal.harness import RunConfig, sweep

BASE = dict(
    labels={"size": 12},
    days=3000,
    epsilon=0.05, delta=0.5, eta=0.1,
    oracle={"truth_mass": 0.65, "concentration": 0.8, "truth_kappa": 8.0,
            "confusion_rate": 0.35},
    policy={"policy": "stationary", "set_size": 2, "initial_accuracy": 0.55,
            "trust": 0.8, "stubbornness": 0.1, "max_rounds": 4},
    seed=11,
)


def run_grid(eps_grid, delta_grid, seeds=5):
    config = RunConfig.from_dict(dict(
        BASE, sweep={"epsilon": eps_grid, "delta": delta_grid, "seeds": seeds}))
    return sweep(config)


print("three algorithm instantiations (harm target, complementarity target):")
cells = run_grid([0.05, 0.30], [0.50, 0.70])
for name, key in (("A", (0.05, 0.50)), ("B", (0.30, 0.50)), ("C", (0.05, 0.70))):
    runs = cells[key]
    print(f"  alg {name} {key}: avg_ch={np.mean([s.avg_ch for s in runs]):.3f} "
          f"avg_comp={np.mean([s.avg_comp for s in runs]):.3f} "
          f"audits={'pass' if all(s.audit_passed for s in runs) else 'FAIL'}")

print("\nharm-target sweep (complementarity fixed at 0.3):")
cells = run_grid([0.05, 0.15, 0.30], [0.3])
for eps in (0.05, 0.15, 0.30):
    runs = cells[(eps, 0.3)]
    print(f"  eps={eps:>4}: GT-loss rate "
          f"{np.mean([s.gt_loss_rate for s in runs]):.4f}")

print("\ncomplementarity-target sweep (harm fixed at 0.05):")
cells = run_grid([0.05], [0.3, 0.5, 0.7])
for delta in (0.3, 0.5, 0.7):
    runs = cells[(0.05, delta)]
    print(f"  delta={delta:>4}: GT-gain rate "
          f"{np.mean([s.gt_gain_rate for s in runs]):.4f}")

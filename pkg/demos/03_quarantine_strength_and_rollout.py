"""Two knobs beyond adoption: how seriously alerts are taken, and how
fast the alert system reaches full operation.

The quarantine factor k divides an alerted person's transmission rate;
k=1 means alerts are ignored entirely.  The ramp length models both the
testing backlog at launch and the gradual growth of the user base.
"""

from pathlib import Path

from proximity_sim.epidemic import SimulationParams, run_ensemble
from proximity_sim.report import emit_csv, emit_svg

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)
REPLICATES = 50

print("alert compliance (k divides the transmission rate while alerted)")
k_series = []
for k in (1, 2, 5, 10, 50):
    ensemble = run_ensemble(
        SimulationParams(quarantine_factor=float(k), replicates=REPLICATES), 42
    )
    mean, _ = ensemble.cumulative_stats(60)
    k_series.append((f"k={k}", ensemble.mean))
    print(f"  k={k:>3}: cumulative day 60 = {mean:>12,.0f}")
emit_csv(k_series, OUT / "quarantine_strength.csv")
emit_svg(k_series, OUT / "quarantine_strength.svg", title="daily new infected by k")

print("rollout ramp (days from switch-on to full alert coverage)")
ramp_series = []
for ramp in (0, 5, 10, 20):
    ensemble = run_ensemble(
        SimulationParams(ramp_days=ramp, replicates=REPLICATES), 42
    )
    mean, _ = ensemble.cumulative_stats(60)
    ramp_series.append((f"ramp={ramp}d", ensemble.mean))
    print(f"  ramp={ramp:>2}d: cumulative day 60 = {mean:>12,.0f}")
emit_csv(ramp_series, OUT / "rollout_ramp.csv")
emit_svg(ramp_series, OUT / "rollout_ramp.svg", title="daily new infected by ramp")
print(f"wrote 4 files under {OUT}")

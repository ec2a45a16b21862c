"""Integrate a bundled GoogleNet power trace and break it down by layer kind.

The demo trace covers a sequence of single-image inferences. Each annotated
layer window is integrated separately, then the per-kind shares are printed,
including the share of energy spent between annotated layers.
"""

from __future__ import annotations

from convwatt import data_path, load_annotations, load_power_trace, per_layer_energy
from convwatt.energy_trace import breakdown_from_trace, total_energy

trace = load_power_trace(data_path("googlenet_eigen_tx1_trace.csv"))
notes = load_annotations(data_path("googlenet_eigen_tx1_annotations.csv"))
print(f"trace: {len(trace.timestamps_us)} samples over {trace.duration_s:.3f} s, {total_energy(trace):.2f} mJ")

# Most expensive individual layers, averaged over runs.
summary = per_layer_energy(trace, notes).summary()
print("\nfive most expensive layers:")
for s in sorted(summary, key=lambda s: -s.mean_energy_mj)[:5]:
    print(f"  {s.layer_name:28} {s.layer_kind:6} {s.mean_energy_mj:9.2f} mJ  {s.mean_time_s * 1e3:7.2f} ms")

print("\nshare by layer kind:")
for row in breakdown_from_trace(trace, notes).rows:
    print(f"  {row.kind:14} {row.energy_pct:8.4f} % energy  {row.time_pct:8.4f} % time")

"""Build the three backbone graphs and audit their structure and cost.

Everything here is exact arithmetic on the declarative graphs: no tensors
flow. The census counts blocks by role, the cost report enumerates weights
and multiply-accumulates, the depth report counts weighted layers on the
longest path.

Run:  python demos/03_backbones_census_and_cost.py
"""

import json

from fovea import (build_hourglass54, build_hourglass104_reference,
                   build_squeeze_hourglass, compare_archs, cost_report,
                   depth_report, structure_census)

hg54 = build_hourglass54(num_classes=80)
hg104 = build_hourglass104_reference(num_classes=80)
squeeze = build_squeeze_hourglass(num_classes=80)

c = structure_census(hg54)
print("saccade backbone census:")
print("  modules:", c["n_modules"], "| stem stages:", c["stem"]["n_downsamples"])
m = c["modules"]["module1"]
print("  per module: downs", m["down_channels"], "| middle",
      m["n_middle_blocks"], "x", m["middle_channels"], "ch",
      "| blocks per skip/down/up:",
      set(m["blocks_per_skip"].values()) | set(m["blocks_per_down"].values())
      | set(m["blocks_per_up"].values()))
print("  attention heads:", c["attention"]["n_heads"],
      "| head lead kernels:", c["heads"]["lead_kernels"])

csq = structure_census(squeeze)
print("compact backbone census:")
print("  stem stages:", csq["stem"]["n_downsamples"],
      "| module downs:", csq["modules"]["module1"]["down_channels"])
print("  block kinds in modules:", csq["modules"]["module1"]["block_kind_counts"],
      "| upsampling:", csq["modules"]["module1"]["upsample_ops"][0]["kind"],
      "| 3x3 convs in heads:", csq["heads"]["n_3x3_standard_convs"])

print("\nside-by-side at 1x3x255x255:")
rows = compare_archs([("hourglass54", hg54), ("squeeze", squeeze),
                      ("hg104-ref", hg104)], (1, 3, 255, 255))
hdr = f"{'name':<12} {'GMACs':>8} {'weights':>10} {'module w':>10} {'depth':>6} {'hg peak MB':>11}"
print(hdr)
for r in rows:
    print(f"{r['name']:<12} {r['macs'] / 1e9:>8.2f} {r['weights'] / 1e6:>9.1f}M "
          f"{r['module_weights'] / 1e6:>9.1f}M {r['depth_longest_path']:>6} "
          f"{r['hourglass_peak_bytes'] / 2**20:>11.2f}")

# The extra stem downsampling is where the compact backbone's memory saving
# comes from: everything past the stem runs at quarter area.
with_extra = cost_report(squeeze)
without = cost_report(build_squeeze_hourglass(80, extra_pre_downsample=False))
a = with_extra.stage_aggregate(exclude=("input", "stem"))
b = without.stage_aggregate(exclude=("input", "stem"))
print("\npost-stem activation with/without the extra stem downsampling:")
print(f"  peak bytes {a.peak_activation_bytes:,} vs {b.peak_activation_bytes:,} "
      f"(ratio {b.peak_activation_bytes / a.peak_activation_bytes:.0f}x)")
print(f"  total bytes {a.activation_bytes:,} vs {b.activation_bytes:,} "
      f"(ratio {b.activation_bytes / a.activation_bytes:.0f}x)")

for name, g in [("hourglass54", hg54), ("hg104-ref", hg104)]:
    d = depth_report(g)
    print(f"\n{name}: longest weighted path {d.longest_path_convs} layers, "
          f"{d.total_convs} weighted layers total")

# Graphs serialize to JSON (weights go to an SKT1 sidecar directory).
doc = json.loads(hg54.to_json())
print("\ngraph JSON:", len(doc["nodes"]), "nodes,", len(doc["taps"]), "taps")

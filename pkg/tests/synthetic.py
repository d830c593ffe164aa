"""Deterministic synthetic dataset builder: 17 sub-catchments in four
planted behaviour groups, written in the package's input file layout.

Run directly to materialise a demo dataset:

    python tests/synthetic.py demo_data/
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

# columns: SA SG SP CA CG CP STA STG STP ELE TVO ADD INF OVL IMP SAN
TEMPLATES = {
    "A": [90, 55, 4000, 10, 10, 500, 12, 30, 0, 220, 5.2e5, 10, 35, 30, 10, 15],
    "B": [35, 25, 1500, 45, 18, 2600, 6, 12, 0, 120, 3.0e5, 12, 18, 22, 24, 24],
    "C": [55, 35, 2500, 35, 25, 1800, 9, 20, 0, 160, 4.2e5, 11, 28, 26, 15, 20],
    "D": [8, 8, 300, 80, 6, 5200, 2, 5, 0, 40, 2.2e5, 8, 10, 14, 34, 34],
}
_COMPOSITION_SLOTS = range(11, 16)  # kept exactly at template so they sum to 100

# water level behaviour per group: dominant period (h), amplitude (m),
# baseline (m), pipe diameter (m)
LEVELS = {
    "A": (180.0, 0.10, 0.18, 0.9),
    "B": (48.0, 0.12, 0.42, 0.7),
    "C": (96.0, 0.10, 0.30, 0.8),
    "D": (24.0, 0.15, 0.52, 0.65),
}

# group per catchment id 1..17 (sizes 2/5/5/5)
GROUPS = ["C", "C", "D", "D", "D", "D", "B", "C", "B", "B",
          "C", "D", "B", "B", "A", "A", "C"]

ATTR_COLUMNS = ("SA", "SG", "SP", "CA", "CG", "CP", "STA", "STG", "STP",
                "ELE", "TVO", "ADD", "INF", "OVL", "IMP", "SAN")


def make_dataset(root: Path, seed: int = 20, n_samples: int = 1024,
                 with_flows: bool = True, bad_flow_ids: tuple[str, ...] = ("17",),
                 ) -> dict[str, str]:
    """Write dataset.json, attributes.csv, levels/*.csv and flows/*.csv
    under root; returns the planted id -> group mapping."""
    root = Path(root)
    (root / "levels").mkdir(parents=True, exist_ok=True)
    if with_flows:
        (root / "flows").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    planted: dict[str, str] = {}

    attr_rows = []
    manifest_entries = []
    for idx, group in enumerate(GROUPS, start=1):
        cid = str(idx)
        planted[cid] = group
        base_attrs = np.asarray(TEMPLATES[group], dtype=float)
        attrs = base_attrs.copy()
        for j in range(len(attrs)):
            if j in _COMPOSITION_SLOTS or attrs[j] == 0:
                continue
            attrs[j] = attrs[j] * (1.0 + rng.normal(0.0, 0.03))
        attr_rows.append([cid, f"Catchment {idx:02d}"] + [f"{v:.6g}" for v in attrs])

        period, amp, base, diameter = LEVELS[group]
        t = np.arange(n_samples, dtype=float)
        phase1, phase2 = rng.uniform(0, 2 * np.pi, 2)
        level = (base * (1.0 + rng.normal(0.0, 0.02))
                 + amp * np.sin(2 * np.pi * t / period + phase1)
                 + 0.5 * amp * np.sin(2 * np.pi * t / (period / 3.0) + phase2)
                 + rng.normal(0.0, 0.003, n_samples))
        level = np.clip(level, 0.005, None)
        _write_levels(root / "levels" / f"{cid}.csv", level)

        entry = {"id": cid, "name": f"Catchment {idx:02d}",
                 "levels": f"levels/{cid}.csv", "diameter_m": diameter}
        if with_flows:
            _write_flows(root / "flows" / f"{cid}.csv",
                         rng, bad=cid in bad_flow_ids)
            entry["flows"] = f"flows/{cid}.csv"
        manifest_entries.append(entry)

    header = "id,name," + ",".join(ATTR_COLUMNS)
    lines = [header] + [",".join(row) for row in attr_rows]
    (root / "attributes.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    manifest = {"attributes": "attributes.csv", "catchments": manifest_entries}
    (root / "dataset.json").write_text(json.dumps(manifest, indent=2) + "\n",
                                       encoding="utf-8")
    return planted


def _write_levels(path: Path, level: np.ndarray) -> None:
    lines = ["timestamp,level"]
    for i, v in enumerate(level):
        day, hour = divmod(i, 24)
        month, dom = divmod(day, 28)
        lines.append(f"2014-{month + 1:02d}-{dom + 1:02d}T{hour:02d}:00:00+00:00,{v:.6f}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_flows(path: Path, rng: np.random.Generator, n: int = 240,
                 bad: bool = False) -> None:
    t = np.arange(n, dtype=float)
    observed = 5.0 + 2.0 * np.sin(2 * np.pi * t / 24.0) + rng.normal(0.0, 0.2, n)
    if bad:
        simulated = np.full(n, observed.mean()) + rng.normal(0.0, 1.5, n)
    else:
        simulated = observed * 0.95 + 0.2 + rng.normal(0.0, 0.35, n)
    lines = ["timestamp,observed,simulated"]
    for i in range(n):
        day, hour = divmod(i, 24)
        lines.append(f"2014-06-{day + 1:02d}T{hour:02d}:00:00+00:00,"
                     f"{observed[i]:.6f},{simulated[i]:.6f}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


if __name__ == "__main__":
    target = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo_data")
    planted = make_dataset(target)
    print(f"dataset written to {target} ({len(planted)} catchments)")

"""P99 clock offset against timestamp jitter for each sync mode.

    python scripts/sync_jitter_sweep.py --tiles 32 --seeds 3
"""

import argparse

import numpy as np

from weavesim.orchestrator import parse_scenario, sweep

BASE = """
[topology]
n_tiles = {tiles}
fanout = 8
link_jitter_ns = 20
residence_jitter_ns = 20
transparent_clock = true

[sync]
mode = "{mode}"

[experiment]
kind = "sync_accuracy"
duration_s = 25.0
seeds = {seeds}
"""


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--tiles", type=int, default=32)
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--jitter", default="0.1,1,10,100", help="timestamp jitter values in ns")
    args = ap.parse_args()
    values = [float(v) for v in args.jitter.split(",")]

    print(f"{'mode':<26}" + "".join(f"{v:>12g}" for v in values) + "   (P99 |offset| in ns, mean over seeds)")
    for mode in ("message_sync", "message_sync_syntonized", "dedicated"):
        sc = parse_scenario(BASE.format(tiles=args.tiles, mode=mode, seeds=list(range(args.seeds))))
        points = sweep(sc, "sync.ts_jitter_ns", values)
        row = [np.mean([p.report.metric("offset_abs_p99") for p in points if p.value == v]) for v in values]
        print(f"{mode:<26}" + "".join(f"{x:>12.4g}" for x in row))


if __name__ == "__main__":
    main()

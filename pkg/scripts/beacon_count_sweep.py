"""Median positioning error against the number of active acoustic beacons."""

import argparse

from weavesim.orchestrator import load_scenario, sweep


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--scenario", default="scenarios/acoustic_calibrated.toml")
    ap.add_argument("--min", type=int, default=4)
    ap.add_argument("--max", type=int, default=16)
    args = ap.parse_args()
    sc = load_scenario(args.scenario)
    counts = list(range(args.min, args.max + 1))
    print(f"{'beacons':>8}{'seed':>6}{'median m':>10}{'p95 m':>9}")
    for p in sweep(sc, "positioning.active_beacons", counts):
        r = p.report
        print(f"{int(p.value):>8}{r.seed:>6}{r.metric('error_median'):>10.3f}{r.metric('error_p95'):>9.3f}")


if __name__ == "__main__":
    main()

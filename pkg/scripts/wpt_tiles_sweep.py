"""Harvested energy and time to the device budget against the number of focusing tiles."""

import argparse

from weavesim.orchestrator import load_scenario, sweep


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--scenario", default="scenarios/wpt_focus.toml")
    ap.add_argument("--tiles", default="1,4,9,16,25,36")
    args = ap.parse_args()
    sc = load_scenario(args.scenario)
    counts = [int(v) for v in args.tiles.split(",")]
    print(f"{'tiles':>6}{'P_rx mW':>10}{'gain':>9}{'energy mJ':>11}{'to target s':>13}")
    for p in sweep(sc, "topology.n_tiles", counts):
        r = p.report
        print(
            f"{int(p.value):>6}{1e3 * r.metric('received_power'):>10.4f}{r.metric('focus_gain'):>9.1f}"
            f"{1e3 * r.metric('harvested_energy'):>11.4f}{r.metric('time_to_target'):>13.3f}"
        )


if __name__ == "__main__":
    main()

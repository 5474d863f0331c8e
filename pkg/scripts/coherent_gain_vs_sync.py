"""Focusing gain at the carrier as clock quality degrades.

Sweeps the dedicated-reference residual and prints mean gain against the
coherent (N^2) and incoherent (N) limits together with the phase-noise
closed form N + N(N-1)exp(-sigma^2).
"""

import argparse
import math

from weavesim.orchestrator import parse_scenario, sweep

BASE = """
[topology]
n_tiles = {tiles}
fanout = 8

[sync]
mode = "dedicated"

[phy]
carrier_hz = {carrier}

[experiment]
kind = "coherent_gain_vs_sync"
duration_s = 131.25
"""


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--tiles", type=int, default=64)
    ap.add_argument("--carrier", type=float, default=3.8e9)
    ap.add_argument("--errors-ps", default="0,5,10,20,40,80,160,1000")
    args = ap.parse_args()
    n = args.tiles
    errs = [float(v) for v in args.errors_ps.split(",")]

    sc = parse_scenario(BASE.format(tiles=n, carrier=args.carrier))
    points = sweep(sc, "sync.dedicated_error_ns", [e / 1000 for e in errs])
    print(f"N = {n}, carrier {args.carrier / 1e9:g} GHz, limits N^2 = {n * n}, N = {n}")
    print(f"{'clock sigma ps':>15}{'gain':>12}{'stderr':>10}{'closed form':>14}{'dB':>8}")
    for e, p in zip(errs, points):
        r = p.report
        sigma = 2 * math.pi * args.carrier * e * 1e-12
        closed = n + n * (n - 1) * math.exp(-(sigma**2))
        print(f"{e:>15g}{r.metric('gain_mean'):>12.1f}{r.metric('gain_stderr'):>10.2f}{closed:>14.1f}{r.metric('gain_mean_db'):>8.2f}")


if __name__ == "__main__":
    main()

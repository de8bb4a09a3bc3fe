"""Mean response time against transaction size for both policies.

Sizes are varied through network.digest_bytes (bytes contributed per sensor
packet). Writes one CSV row per (digest_bytes, policy) to stdout.

    python3 scripts/size_sweep.py [--scenario scenarios/loaded.yaml] [--seeds 1..5]
"""

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from iotpoa import cli, config, engine, metrics

FIELDS = ["digest_bytes", "mean_tx_bytes", "policy", "seeds", "mean_response_s", "fallbacks"]


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--scenario", default=str(Path(__file__).resolve().parents[1]
                                             / "scenarios" / "loaded.yaml"))
    p.add_argument("--seeds", default="1..5")
    p.add_argument("--digest-bytes", default="8,16,32,64")
    args = p.parse_args(argv)
    base = config.load(args.scenario)
    seeds = cli.parse_seeds(args.seeds)
    w = csv.DictWriter(sys.stdout, fieldnames=FIELDS, lineterminator="\n")
    w.writeheader()
    for d in (int(x) for x in args.digest_bytes.split(",")):
        for pol in ("tbs", "wbs"):
            means, sizes, fallbacks = [], [], 0
            for s in seeds:
                trace = engine.run(base.replace(network={"digest_bytes": d}, run={"seed": s},
                                                consensus={"selection_policy": pol}))
                means.append(metrics.response_time_stats(trace)["mean"])
                sizes.extend(r["size"] for r in trace.of("tx_created"))
                fallbacks += sum(1 for r in trace.of("select") if r["mode"] == "wbs-fallback")
            w.writerow({"digest_bytes": d, "mean_tx_bytes": f"{np.mean(sizes):.1f}",
                        "policy": pol, "seeds": args.seeds,
                        "mean_response_s": f"{np.mean(means):.4f}", "fallbacks": fallbacks})
    return 0


if __name__ == "__main__":
    sys.exit(main())

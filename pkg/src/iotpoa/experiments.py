"""Paired TBS/WBS runs over seeds and parameter grids."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from iotpoa import config, engine, metrics
from iotpoa.config import ScenarioConfig
from iotpoa.metrics import MetricsReport


@dataclass
class Pair:
    seed: int
    tbs: MetricsReport
    wbs: MetricsReport

    @property
    def comparison(self) -> metrics.Comparison:
        return metrics.compare(self.tbs, self.wbs)


def run_policy(cfg: ScenarioConfig, policy: str, seed: int) -> MetricsReport:
    c = cfg.replace(consensus={"selection_policy": policy}, run={"seed": seed})
    return metrics.report(engine.run(c))


def _pair(job: tuple[dict, int]) -> Pair:
    d, seed = job
    cfg = config.from_dict(d)
    return Pair(seed, run_policy(cfg, "tbs", seed), run_policy(cfg, "wbs", seed))


def paired(cfg: ScenarioConfig, seeds, jobs: int = 1) -> list[Pair]:
    """TBS and WBS runs per seed. Runs share no state, so jobs > 1 fans out
    over worker processes with identical results."""
    work = [(cfg.to_dict(), s) for s in seeds]
    if jobs <= 1 or len(work) <= 1:
        return [_pair(w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_pair, work))


@dataclass
class Summary:
    metric: str
    mean_tbs: float | None
    mean_wbs: float | None
    mean_improvement_pct: float | None
    wins: int
    n: int
    signs: str  # one of + - = per seed, + meaning WBS is better


def summarize(pairs: list[Pair]) -> list[Summary]:
    out = []
    for name, get, _ in metrics.METRICS:
        imps, a_vals, b_vals, signs = [], [], [], []
        for p in pairs:
            row = p.comparison.row(name)
            a_vals.append(get(p.tbs))
            b_vals.append(get(p.wbs))
            imp = row["improvement_pct"]
            if imp is not None:
                imps.append(imp)
            signs.append("?" if imp is None else "+" if imp > 0 else "-" if imp < 0 else "=")

        def mean(xs):
            xs = [x for x in xs if x is not None]
            return float(np.mean(xs)) if xs else None

        out.append(Summary(name, mean(a_vals), mean(b_vals), mean(imps),
                           signs.count("+"), len(pairs), "".join(signs)))
    return out


def summary_csv(rows: list[Summary], extra: dict | None = None) -> str:
    extra = extra or {}
    buf = io.StringIO()
    fields = list(extra) + ["metric", "mean_tbs", "mean_wbs", "mean_improvement_pct",
                            "wins", "n", "signs"]
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({**extra, **r.__dict__})
    return buf.getvalue()

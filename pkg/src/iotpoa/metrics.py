"""Metrics over traces, invariant replay, and TBS-vs-WBS comparison."""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import asdict, dataclass, field

import numpy as np

from iotpoa.engine import Trace

ENERGY_TOL_J = 1e-9
NODE_CLASSES = ("sensors", "heads", "validators")
_CLS_KEY = {"sensor": "sensors", "head": "heads", "validator": "validators"}


class ConfigMismatch(ValueError):
    pass


@dataclass
class MetricsReport:
    response_time: dict[str, float | None]
    throughput_bps: float
    energy_j: dict[str, float]
    counts: dict[str, int]
    policy: str = ""
    seed: int | None = None
    fingerprint: str = ""
    duration_s: float = 0.0
    extra: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(**d)


def _summary(values: list[float]) -> dict[str, float | None]:
    if not values:
        return {"mean": None, "median": None, "p95": None, "max": None, "n": 0}
    arr = np.asarray(values, dtype=float)
    return {
        "mean": float(arr.mean()),
        "median": float(np.median(arr)),
        "p95": float(np.percentile(arr, 95)),
        "max": float(arr.max()),
        "n": int(arr.size),
    }


def response_times(trace: Trace) -> list[float]:
    created = {r["tx"]: r["t"] for r in trace.of("tx_created")}
    return [r["t"] - created[r["tx"]] for r in trace.of("tx_committed")]


def response_time_stats(trace: Trace) -> dict[str, float | None]:
    return _summary(response_times(trace))


def throughput(trace: Trace) -> float:
    duration = trace.header["duration_s"]
    if duration <= 0:
        return 0.0
    return sum(r["size"] for r in trace.of("tx_committed")) / duration


def node_classes(trace: Trace) -> dict[str, str]:
    return {r["node"]: _CLS_KEY[r["cls"]] for r in trace.of("place")}


def energy_report(trace: Trace) -> dict[str, float]:
    cls = node_classes(trace)
    out = {k: 0.0 for k in NODE_CLASSES}
    for r in trace.of("energy"):
        out[cls[r["node"]]] += r["amount_j"]
    out["total"] = sum(out[k] for k in NODE_CLASSES)
    return out


def tx_counts(trace: Trace) -> dict[str, int]:
    created = {r["tx"] for r in trace.of("tx_created")}
    committed = {r["tx"] for r in trace.of("tx_committed")}
    dropped = {r["tx"] for r in trace.of("tx_dropped")} - committed
    return {
        "created": len(created),
        "committed": len(committed),
        "pending": len(created - committed - dropped),
        "dropped": len(dropped),
    }


def report(trace: Trace) -> MetricsReport:
    head = trace.header
    selects = trace.of("select")
    fallback = sum(1 for r in selects if r["mode"] == "wbs-fallback")
    queued = sum(1 for r in selects if r["mode"] == "queued")
    slow = [r["slowdown"] for r in trace.of("task_start")]
    return MetricsReport(
        response_time=response_time_stats(trace),
        throughput_bps=throughput(trace),
        energy_j=energy_report(trace),
        counts=tx_counts(trace),
        policy=head["policy"],
        seed=head["seed"],
        fingerprint=head["fingerprint"],
        duration_s=head["duration_s"],
        extra={
            "selections": len(selects),
            "wbs_fallbacks": fallback,
            "queued": queued,
            "mean_slowdown": float(np.mean(slow)) if slow else 1.0,
        },
    )


# -- invariant replay ---------------------------------------------------------

def check_trace(trace: Trace) -> list[str]:
    """Replay run invariants over a trace; returns human-readable violations."""
    problems: list[str] = []
    try:
        head = trace.header
    except ValueError as exc:
        return [str(exc)]
    duration = head["duration_s"]

    last_t = 0.0
    for i, r in enumerate(trace):
        t = r["t"]
        if t < last_t:
            problems.append(f"record {i} ({r['kind']}) goes back in time")
        if not 0 <= t <= duration:
            problems.append(f"record {i} ({r['kind']}) at t={t} outside [0, {duration}]")
        last_t = max(last_t, t)

    # energy conservation per node
    debits: dict[str, float] = defaultdict(float)
    for r in trace.of("energy"):
        if r["amount_j"] < 0:
            problems.append(f"negative debit on {r['node']}")
        debits[r["node"]] += r["amount_j"]
    finals = {r["node"]: r for r in trace.of("node_final")}
    for node in node_classes(trace):
        fin = finals.get(node)
        if fin is None:
            problems.append(f"node {node} has no final energy record")
            continue
        if fin["remaining_j"] < 0:
            problems.append(f"node {node} ends with negative energy")
        spent = fin["initial_j"] - fin["remaining_j"]
        if abs(spent - debits.get(node, 0.0)) > ENERGY_TOL_J:
            problems.append(f"node {node}: spent {spent!r} J but debits sum to "
                            f"{debits.get(node, 0.0)!r} J")

    # transaction accounting and causality
    created = {r["tx"]: r["t"] for r in trace.of("tx_created")}
    arrived: dict[str, float] = {}
    for r in trace.of("tx_arrived"):
        arrived.setdefault(r["tx"], r["t"])
    committed: dict[str, float] = {}
    for r in trace.of("tx_committed"):
        if r["tx"] in committed:
            problems.append(f"tx {r['tx']} committed twice")
        committed[r["tx"]] = r["t"]
    for tx, t in committed.items():
        if tx not in created:
            problems.append(f"tx {tx} committed but never created")
        elif tx not in arrived:
            problems.append(f"tx {tx} committed but never arrived")
        elif not created[tx] <= arrived[tx] <= t:
            problems.append(f"tx {tx} lifecycle out of order")
    counts = tx_counts(trace)
    finals_tx = trace.of("tx_final")
    if not finals_tx:
        problems.append("trace has no tx_final record")
    else:
        f = finals_tx[-1]
        if f["created"] != f["committed"] + f["pending"] + f["dropped"]:
            problems.append("tx_final: created != committed + pending + dropped")
        for k in ("created", "committed", "pending", "dropped"):
            if f[k] != counts[k]:
                problems.append(f"tx_final.{k}={f[k]} but lifecycle records give {counts[k]}")

    # placement procedure
    policy = head["policy"]
    for r in trace.of("select"):
        if r["mode"] == "wbs-fallback" and r["tbs_admit"]:
            problems.append(f"task {r['task']}: fallback although turn candidate admitted it")
        if r["mode"] == "tbs" and not r["tbs_admit"]:
            problems.append(f"task {r['task']}: tagged tbs but turn candidate refused it")
        if policy == "tbs" and r["mode"] == "wbs-fallback":
            problems.append(f"task {r['task']}: fallback under pure TBS")
    if policy == "tbs" and trace.of("wbs_eval"):
        problems.append("attractiveness evaluated under pure TBS")

    idx = [r["index"] for r in trace.of("block_commit")]
    if idx != list(range(1, len(idx) + 1)):
        problems.append("committed block indices are not 1, 2, 3, ...")
    return problems


def fallback_conformance(trace: Trace) -> list[str]:
    """Every fallback must sit right after a refusal by the turn candidate at the same instant."""
    problems = []
    recs = trace.records
    for i, r in enumerate(recs):
        if r["kind"] != "select" or r["mode"] != "wbs-fallback":
            continue
        prev = recs[i - 1] if i else None
        if (prev is None or prev["kind"] != "wbs_eval" or prev["task"] != r["task"]
                or prev["t"] != r["t"] or r["tbs_admit"]):
            problems.append(f"task {r['task']} at t={r['t']}")
    return problems


# -- comparison -------------------------------------------------------------------

# (label, getter, direction) where direction +1 means higher is better
METRICS = (
    ("mean_response_s", lambda m: m.response_time["mean"], -1),
    ("p95_response_s", lambda m: m.response_time["p95"], -1),
    ("throughput_bps", lambda m: m.throughput_bps, +1),
    ("validator_energy_j", lambda m: m.energy_j["validators"], -1),
    ("wsn_energy_j", lambda m: m.energy_j["sensors"] + m.energy_j["heads"], -1),
    ("committed", lambda m: m.counts["committed"], +1),
)


@dataclass
class Comparison:
    rows: list[dict]

    def row(self, metric: str) -> dict:
        return next(r for r in self.rows if r["metric"] == metric)

    # the header spells out the sign convention
    CSV_HEADER = ("metric", "a", "b", "delta_pct=(a-b)/a*100", "improvement_pct=positive_favours_b")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_HEADER)
        for r in self.rows:
            w.writerow([r["metric"], r["a"], r["b"], r["delta_pct"], r["improvement_pct"]])
        return buf.getvalue()


def pct_delta(a: float | None, b: float | None) -> float | None:
    """(a - b) / a * 100, with a as the baseline."""
    if a is None or b is None:
        return None
    if a == 0:
        return 0.0 if b == 0 else None
    return (a - b) / a * 100.0


def compare(a: MetricsReport, b: MetricsReport, check_fingerprint: bool = True) -> Comparison:
    """Percent deltas of b against baseline a.

    delta_pct is (a - b) / a * 100 for every metric. improvement_pct flips the
    sign for higher-is-better metrics so that positive always favours b.
    """
    if check_fingerprint and a.fingerprint != b.fingerprint:
        raise ConfigMismatch(f"scenario fingerprints differ: {a.fingerprint} vs {b.fingerprint}")
    rows = []
    for name, get, direction in METRICS:
        va, vb = get(a), get(b)
        d = pct_delta(va, vb)
        imp = None if d is None else (d if direction < 0 else -d)
        rows.append({"metric": name, "a": va, "b": vb, "delta_pct": d, "improvement_pct": imp})
    return Comparison(rows)

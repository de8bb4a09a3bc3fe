"""Scenario configuration: nested dataclasses loaded from YAML."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from iotpoa import cluster, virt


class ConfigInvalid(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("; ".join(problems))


@dataclass
class NetworkConfig:
    sensor_count: int = 50
    head_count: int = 5
    area_side_m: float = 100.0
    sensing_interval_s: float = 5.0
    dissemination_interval_s: float = 30.0
    packet_bits: int = 1000
    header_bytes: int = cluster.DEFAULT_HEADER_BYTES
    digest_bytes: int = cluster.DEFAULT_DIGEST_BYTES
    sensor_energy_j: float = 3.0
    head_energy_j: float = 5.0
    e_elec: float = cluster.E_ELEC
    e_amp: float = cluster.E_AMP
    # uplink target for cluster heads; defaults to the area centre
    sink_position: list[float] | None = None
    # explicit placements override seeded random placement
    sensor_positions: list[list[float]] | None = None
    head_positions: list[list[float]] | None = None
    head_rotation: bool = False


@dataclass
class ValidatorConfig:
    validator_count: int | None = 4
    validator_ratio: float | None = None
    vms_per_pm: int = 4
    pm_cores: float = virt.PM_CORES
    pm_mem_gb: float = virt.PM_MEM_GB
    vm_cores: float = virt.VM_CORES
    vm_mem_gb: float = virt.VM_MEM_GB
    t_upper: float = 0.8
    cpu_weight: float = 0.5
    energy_j: float = 10.0
    busy_power_w: float = virt.BUSY_POWER_W
    idle_power_w: float = virt.IDLE_POWER_W
    task_cpu_cores: float = 0.5
    task_mem_gb: float = 0.85
    work_alpha: float = virt.WORK_ALPHA
    work_beta: float = virt.WORK_BETA
    per_core_rate: float = virt.PER_CORE_RATE
    overload_penalty: float = 1.0


@dataclass
class Downtime:
    validator: int
    start_s: float
    end_s: float


@dataclass
class ConsensusConfig:
    selection_policy: str = "wbs"
    round_length_s: float = 5.0
    max_txs_per_block: int = 256
    propose_cost_factor: float = 1.0
    verify_cost_factor: float = 0.1
    vote_bytes: int = 64
    downtime: list[Downtime] = field(default_factory=list)


@dataclass
class RunConfig:
    duration_s: float = 1800.0
    seed: int = 1
    bandwidth_bps: float = 1e6
    propagation_s: float = 1e-3
    jitter: bool = True


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    network: NetworkConfig = field(default_factory=NetworkConfig)
    validators: ValidatorConfig = field(default_factory=ValidatorConfig)
    consensus: ConsensusConfig = field(default_factory=ConsensusConfig)
    run: RunConfig = field(default_factory=RunConfig)

    @property
    def n_validators(self) -> int:
        vc = self.validators
        if vc.validator_ratio is not None:
            devices = self.network.sensor_count + self.network.head_count
            return max(1, round(vc.validator_ratio * devices))
        return int(vc.validator_count)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def fingerprint(self, ignore_policy: bool = True) -> str:
        """Digest of the scenario, by default blind to the selection policy."""
        d = self.to_dict()
        if ignore_policy:
            d["consensus"].pop("selection_policy")
        d.pop("name")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    def replace(self, **sections: dict) -> "ScenarioConfig":
        """Copy with some section fields overridden, e.g. run={"seed": 3}."""
        d = self.to_dict()
        for sec, values in sections.items():
            if isinstance(d.get(sec), dict):
                d[sec].update(values)
            else:
                d[sec] = values
        return from_dict(d)

    def validate(self) -> None:
        problems = []
        n, v, c, r = self.network, self.validators, self.consensus, self.run

        def need(cond: bool, msg: str):
            if not cond:
                problems.append(msg)

        need(n.sensor_count >= 0, "network.sensor_count must be >= 0")
        need(n.head_count >= 1, "network.head_count must be >= 1")
        need(n.area_side_m > 0, "network.area_side_m must be > 0")
        need(n.sensing_interval_s > 0, "network.sensing_interval_s must be > 0")
        need(n.dissemination_interval_s > 0, "network.dissemination_interval_s must be > 0")
        need(n.packet_bits > 0, "network.packet_bits must be > 0")
        need(n.header_bytes > 0, "network.header_bytes must be > 0")
        need(n.digest_bytes >= 0, "network.digest_bytes must be >= 0")
        need(n.sensor_energy_j >= 0 and n.head_energy_j >= 0,
             "network energies must be >= 0")
        if n.sensor_positions is not None:
            need(len(n.sensor_positions) == n.sensor_count,
                 "network.sensor_positions length must equal sensor_count")
        if n.head_positions is not None:
            need(len(n.head_positions) == n.head_count,
                 "network.head_positions length must equal head_count")
        for label, pts in (("sensor_positions", n.sensor_positions),
                           ("head_positions", n.head_positions)):
            for p in pts or []:
                need(len(p) == 2 and all(0 <= x <= n.area_side_m for x in p),
                     f"network.{label} entry {p} outside the area")
        need(v.validator_count is not None or v.validator_ratio is not None,
             "validators.validator_count or validators.validator_ratio is required")
        if v.validator_ratio is None:
            need(v.validator_count is not None and v.validator_count >= 1,
                 "validators.validator_count must be >= 1")
        else:
            need(v.validator_ratio > 0, "validators.validator_ratio must be > 0")
        need(v.vms_per_pm >= 1, "validators.vms_per_pm must be >= 1")
        need(v.vm_cores > 0 and v.vm_cores * v.vms_per_pm <= v.pm_cores + 1e-12,
             "validators.vm_cores * vms_per_pm must fit in pm_cores")
        need(v.pm_mem_gb > 0, "validators.pm_mem_gb must be > 0")
        need(0 <= v.t_upper <= 1, "validators.t_upper must be in [0, 1]")
        need(0 <= v.cpu_weight <= 1, "validators.cpu_weight must be in [0, 1]")
        need(0 < v.task_cpu_cores <= v.vm_cores,
             "validators.task_cpu_cores must be in (0, vm_cores]")
        need(0 < v.task_mem_gb <= v.pm_mem_gb,
             "validators.task_mem_gb must be in (0, pm_mem_gb]")
        need(v.per_core_rate > 0, "validators.per_core_rate must be > 0")
        need(v.work_alpha >= 0 and v.work_beta >= 0 and v.work_alpha + v.work_beta > 0,
             "validators.work_alpha/work_beta must be >= 0 and not both zero")
        need(v.busy_power_w >= 0 and v.idle_power_w >= 0, "validator powers must be >= 0")
        need(v.overload_penalty >= 0, "validators.overload_penalty must be >= 0")
        need(c.selection_policy in ("tbs", "wbs"),
             "consensus.selection_policy must be 'tbs' or 'wbs'")
        need(c.round_length_s > 0, "consensus.round_length_s must be > 0")
        need(c.max_txs_per_block >= 1, "consensus.max_txs_per_block must be >= 1")
        need(c.propose_cost_factor > 0, "consensus.propose_cost_factor must be > 0")
        need(c.verify_cost_factor > 0, "consensus.verify_cost_factor must be > 0")
        for d in c.downtime:
            need(0 <= d.validator < max(1, self.n_validators) and d.end_s > d.start_s >= 0,
                 f"consensus.downtime entry {d} is invalid")
        need(r.duration_s >= 0, "run.duration_s must be >= 0")
        need(r.bandwidth_bps > 0, "run.bandwidth_bps must be > 0")
        need(r.propagation_s >= 0, "run.propagation_s must be >= 0")
        if problems:
            raise ConfigInvalid(problems)


_SECTIONS = {
    "network": NetworkConfig,
    "validators": ValidatorConfig,
    "consensus": ConsensusConfig,
    "run": RunConfig,
}


def from_dict(data: dict[str, Any]) -> ScenarioConfig:
    problems = []
    kwargs: dict[str, Any] = {}
    for key, value in (data or {}).items():
        if key == "name":
            kwargs["name"] = str(value)
            continue
        cls = _SECTIONS.get(key)
        if cls is None:
            problems.append(f"unknown section {key!r}")
            continue
        if not isinstance(value, dict):
            problems.append(f"section {key!r} must be a mapping")
            continue
        known = {f.name for f in dataclasses.fields(cls)}
        extra = sorted(set(value) - known)
        for name in extra:
            problems.append(f"unknown key {key}.{name}")
        values = {k: v for k, v in value.items() if k in known}
        for f in dataclasses.fields(cls):
            v = values.get(f.name)
            if f.type in ("float", "float | None") and isinstance(v, int) \
                    and not isinstance(v, bool):
                values[f.name] = float(v)
        if cls is ConsensusConfig and "downtime" in values:
            try:
                values["downtime"] = [d if isinstance(d, Downtime) else Downtime(**d)
                                      for d in values["downtime"] or []]
            except TypeError as exc:
                problems.append(f"consensus.downtime: {exc}")
                values.pop("downtime")
        kwargs[key] = cls(**values)
    if problems:
        raise ConfigInvalid(problems)
    cfg = ScenarioConfig(**kwargs)
    cfg.validate()
    return cfg


def load(path: str | Path) -> ScenarioConfig:
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigInvalid([f"{path}: not valid YAML ({exc})"]) from exc
    if not isinstance(data, dict):
        raise ConfigInvalid([f"{path}: top level must be a mapping"])
    return from_dict(data)

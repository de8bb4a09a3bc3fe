import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iotpoa import consensus, ledger, virt
from iotpoa.consensus import ConsensusState, Validator
from iotpoa.ledger import Transaction
from iotpoa.virt import PhysicalMachine, ValidationTask

from oracles import brute_force_wbs, random_fleet


def fleet(n_pm=2, n_vm=4, policy="wbs", **pm_kw):
    vals = [Validator(f"v{p}", PhysicalMachine.with_vms(p, n_vm, **pm_kw)) for p in range(n_pm)]
    return ConsensusState(vals, policy=policy)


def task(i, cpu=0.5, mem=0.85):
    return ValidationTask(f"t{i}", f"tx{i}", cpu, mem, 1000.0)


def tx(i, t=0.0):
    return Transaction(f"tx{i}", "h0", 100, t)


# -- turn-based rotation -----------------------------------------------------------------

def test_tbs_cycles():
    st_ = fleet(n_pm=1, n_vm=3)
    got = [consensus.tbs_next(st_)[1].vm_id for _ in range(4)]
    assert got == [0, 1, 2, 0]


def test_tbs_single_vm():
    st_ = fleet(n_pm=1, n_vm=1)
    assert {consensus.tbs_next(st_)[1].vm_id for _ in range(5)} == {0}


def test_tbs_skips_inactive_validator():
    st_ = fleet(n_pm=3, n_vm=1)
    st_.validators[1].active = False
    got = [consensus.tbs_next(st_)[0].pm_id for _ in range(4)]
    assert got == [0, 2, 0, 2]


def test_tbs_no_validators():
    st_ = fleet(n_pm=1)
    st_.validators[0].active = False
    with pytest.raises(consensus.NoValidators):
        consensus.tbs_next(st_)


@given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 5))
def test_tbs_fairness(n_pm, n_vm, k):
    st_ = fleet(n_pm=n_pm, n_vm=n_vm)
    counts = {}
    for _ in range(k * n_pm * n_vm):
        pm, vm = consensus.tbs_next(st_)
        counts[(pm.pm_id, vm.vm_id)] = counts.get((pm.pm_id, vm.vm_id), 0) + 1
    assert len(counts) == n_pm * n_vm and set(counts.values()) == {k}


# -- weight-based selection ------------------------------------------------------------------

def test_wbs_picks_lower_weight():
    st_ = fleet(n_pm=2, n_vm=4)
    # load PM 0 so its weights rise
    virt.admit_task(st_.validators[0].pm.vms[0], st_.validators[0].pm, task(0, cpu=1.0, mem=4.0))
    pm, vm = consensus.wbs_select(st_, task(1))
    assert (pm.pm_id, vm.vm_id) == (1, 0)
    w = sorted(consensus.wbs_weights(st_, task(1)))
    assert w[0][1:] == (1, 0) and w[0][0] < w[-1][0]


def test_wbs_tie_break():
    st_ = fleet(n_pm=2, n_vm=2, s_vm=1.0)
    pm, vm = consensus.wbs_select(st_, task(1))
    assert (pm.pm_id, vm.vm_id) == (0, 0)


def test_wbs_skips_pm_without_cpu():
    st_ = fleet(n_pm=1, n_vm=4)
    pm = st_.validators[0].pm
    for i, vm in enumerate(pm.vms):
        virt.admit_task(vm, pm, task(i, cpu=1.0, mem=0.5))
    with pytest.raises(consensus.NoCapacity):
        consensus.wbs_select(st_, task(9, cpu=0.1, mem=0.1))


def test_wbs_never_evaluates_load_fraction_on_full_pm(monkeypatch):
    st_ = fleet(n_pm=2, n_vm=4)
    full = st_.validators[0].pm
    for i, vm in enumerate(full.vms):
        virt.admit_task(vm, full, task(i, cpu=1.0, mem=0.5))
    seen = []
    real = consensus.attractiveness

    def spy(pm, vm):
        seen.append(pm.pm_id)
        return real(pm, vm)

    monkeypatch.setattr(consensus, "attractiveness", spy)
    consensus.wbs_select(st_, task(9))
    assert seen and 0 not in seen


def test_wbs_matches_brute_force_randomized():
    rng = random.Random(7)
    for _ in range(2000):
        state, t = random_fleet(rng)
        want = brute_force_wbs(state, t)
        if not state.active():
            with pytest.raises(consensus.NoValidators):
                consensus.wbs_select(state, t)
            continue
        if want is None:
            with pytest.raises(consensus.NoCapacity):
                consensus.wbs_select(state, t)
            continue
        pm, vm = consensus.wbs_select(state, t)
        assert (pm.pm_id, vm.vm_id) == want


# -- selection procedure -------------------------------------------------------------------------

def test_select_uses_turn_when_it_fits():
    st_ = fleet()
    sel = consensus.select_validator(st_, task(1))
    assert sel.mode == consensus.MODE_TBS and sel.weights is None
    assert (sel.pm.pm_id, sel.vm.vm_id) == (0, 0)
    assert "t1" in sel.vm.running


def test_select_falls_back_to_argmin():
    st_ = fleet(n_pm=2, n_vm=2, s_vm=1.0)
    pm0 = st_.validators[0].pm
    virt.admit_task(pm0.vms[0], pm0, task(0, cpu=1.0, mem=1.0))
    t = task(1, cpu=1.0)
    want = brute_force_wbs(st_, t)
    sel = consensus.select_validator(st_, t)
    assert sel.mode == consensus.MODE_FALLBACK and not sel.tbs_admitted
    assert (sel.tbs_pm, sel.tbs_vm) == (0, 0)
    # the empty PM beats the free VM on the loaded one
    assert (sel.pm.pm_id, sel.vm.vm_id) == want == (1, 0)


def test_select_queues_when_full_then_fifo():
    st_ = fleet(n_pm=1, n_vm=1, s_vm=1.0)
    pm = st_.validators[0].pm
    vm = pm.vms[0]
    s1 = consensus.select_validator(st_, task(1, cpu=1.0))
    s2 = consensus.select_validator(st_, task(2, cpu=1.0))
    s3 = consensus.select_validator(st_, task(3, cpu=1.0))
    assert s1.mode == "tbs" and s2.mode == s3.mode == "queued"
    assert [t.task_id for t in st_.pending_queue] == ["t2", "t3"]
    virt.release_task(vm, pm, vm.running["t1"])
    started = consensus.retry_pending(st_)
    assert [t.task_id for t, _ in started] == ["t2"]
    assert [t.task_id for t in st_.pending_queue] == ["t3"]


def test_pure_tbs_queues_on_turn_vm():
    st_ = fleet(n_pm=2, n_vm=1, s_vm=1.0, policy="tbs")
    s1 = consensus.select_validator(st_, task(1, cpu=1.0))
    s2 = consensus.select_validator(st_, task(2, cpu=0.5))
    s3 = consensus.select_validator(st_, task(3, cpu=0.6))   # turn is PM 0 again, full
    assert (s1.mode, s2.mode, s3.mode) == ("tbs", "tbs", "queued")
    assert s3.weights is None
    assert [t.task_id for t in st_.validators[0].pm.vms[0].task_queue] == ["t3"]
    assert not st_.pending_queue


def test_unknown_policy():
    with pytest.raises(ValueError):
        ConsensusState([], policy="lottery")


def test_place_local_jumps_queue():
    st_ = fleet(n_pm=1, n_vm=1, s_vm=1.0, policy="tbs")
    val = st_.validators[0]
    vm = val.pm.vms[0]
    consensus.select_validator(st_, task(1, cpu=1.0))
    consensus.select_validator(st_, task(2, cpu=1.0))
    prop = ValidationTask("p", None, 1.0, 0.5, 10.0, kind="propose")
    assert consensus.place_local(val, prop) is None
    assert [t.task_id for t in vm.task_queue] == ["p", "t2"]
    virt.release_task(vm, val.pm, vm.running["t1"])
    assert [t.task_id for t in consensus.drain_vm_queue(vm, val.pm)] == ["p"]


# -- blocks and votes ------------------------------------------------------------------------

def test_propose_block_fifo():
    val = fleet(n_pm=1).validators[0]
    for i in range(3):
        val.mempool[f"tx{i}"] = tx(i)
    blk = consensus.propose_block(val, 5.0, 100)
    assert [t.tx_id for t in blk.transactions] == ["tx0", "tx1", "tx2"]
    assert blk.index == 1 and blk.prev_hash == val.local_chain.tip.block_hash
    assert not val.mempool


def test_propose_block_respects_max():
    val = fleet(n_pm=1).validators[0]
    for i in range(5):
        val.mempool[f"tx{i}"] = tx(i)
    blk = consensus.propose_block(val, 5.0, 2)
    assert len(blk.transactions) == 2 and list(val.mempool) == ["tx2", "tx3", "tx4"]


def test_propose_empty_mempool():
    assert consensus.propose_block(fleet(n_pm=1).validators[0], 5.0, 10) is None


def test_verify_block():
    st_ = fleet(n_pm=2)
    a, b = st_.validators
    a.mempool["tx1"] = tx(1)
    blk = consensus.propose_block(a, 5.0, 10)
    assert consensus.verify_block(b, blk)
    bad = ledger.Block.build(1, 5.0, [tx(1)], b"\x01" * 32, "v0")
    assert not consensus.verify_block(b, bad)


def test_verify_energy_is_tenth_of_proposal():
    pm = PhysicalMachine.with_vms(0, 4)
    vm = pm.vms[0]
    work = sum(virt.work_units(s) for s in (160, 224, 96))
    prop = ValidationTask("p", None, 0.5, 0.85, work, kind="propose")
    ver = ValidationTask("v", None, 0.5, 0.85, 0.1 * work, kind="verify")
    e_prop = virt.compute_energy(pm, virt.service_time(prop, vm), 0.0)
    e_ver = virt.compute_energy(pm, virt.service_time(ver, vm), 0.0)
    assert e_ver == pytest.approx(0.1 * e_prop, rel=1e-12)


def _round(n, approve):
    st_ = fleet(n_pm=n)
    prop = st_.validators[0]
    for v in st_.validators:
        v.mempool["tx1"] = tx(1)
    blk = consensus.propose_block(prop, 5.0, 10)
    votes = {v.validator_id: v.validator_id in approve for v in st_.validators[1:]}
    return st_, blk, votes


def test_commit_three_of_four():
    st_, blk, votes = _round(4, {"v1", "v2"})
    assert consensus.commit_block(st_, blk, votes)
    assert all(v.local_chain.tip is blk for v in st_.validators)
    assert all("tx1" not in v.mempool for v in st_.validators)


def test_reject_two_of_four_returns_txs():
    st_, blk, votes = _round(4, {"v1"})
    assert not consensus.commit_block(st_, blk, votes)
    assert all(len(v.local_chain) == 1 for v in st_.validators)
    assert list(st_.validators[0].mempool) == ["tx1"]


def test_single_validator_self_approval():
    st_, blk, votes = _round(1, set())
    assert votes == {}
    assert consensus.commit_block(st_, blk, votes)


def test_electorate_limits_voters():
    st_, blk, votes = _round(4, {"v1"})
    # only v0 and v1 were in the electorate: 2/2 approve
    assert consensus.commit_block(st_, blk, votes, electorate=["v0", "v1"])


def test_resync_catches_up():
    st_, blk, votes = _round(3, {"v1", "v2"})
    late = st_.validators[2]
    late.active = False
    assert consensus.commit_block(st_, blk, votes)
    assert len(late.local_chain) == 1
    st_.validators[0].mempool["tx9"] = tx(9)
    late.active = True
    consensus.resync(late, st_.validators[0])
    assert late.local_chain.tip is blk
    assert list(late.mempool) == ["tx9"]


@settings(max_examples=50)
@given(st.lists(st.booleans(), min_size=1, max_size=20))
def test_commit_safety(outcomes):
    st_ = fleet(n_pm=4)
    committed = []
    for r, ok in enumerate(outcomes):
        prop = st_.validators[r % 4]
        for v in st_.validators:
            v.mempool[f"tx{r}"] = tx(r, float(r))
        blk = consensus.propose_block(prop, float(r), 10)
        votes = {v.validator_id: ok for v in st_.validators if v is not prop}
        if consensus.commit_block(st_, blk, votes):
            committed.append(blk.block_hash)
        else:
            assert all(blk.block_hash not in {b.block_hash for b in v.local_chain.blocks}
                       for v in st_.validators)
    for v in st_.validators:
        assert [b.block_hash for b in v.local_chain.blocks[1:]] == committed
        assert ledger.validate_chain(v.local_chain).ok

import json

import pytest

from leofuzz.config import CampaignConfig
from leofuzz.coverage import Outcome
from leofuzz.engine import Campaign, CampaignError, SeedQueue, get_next_seed, run_campaign
from leofuzz.stagecoord import EXPLOITATION


def det(**kw):
    kw.setdefault("exec_budget", 20000)
    return CampaignConfig(deterministic=True, budget=1e9, **kw)


def campaign(fx, out=None, **kw):
    return Campaign(fx.program, fx.sequences, fx.seeds, det(**kw), out)


def test_queue_cycles():
    q = SeedQueue("t")
    q.append("s1")
    q.append("s2")
    assert [get_next_seed(q) for _ in range(3)] == ["s1", "s2", "s1"]
    single = SeedQueue()
    single.append("only")
    assert {single.get_next() for _ in range(4)} == {"only"}
    with pytest.raises(IndexError):
        SeedQueue().get_next()


def test_campaign_needs_seeds_and_sequences(load):
    fx = load("p0")
    with pytest.raises(CampaignError):
        Campaign(fx.program, fx.sequences, [], det())
    with pytest.raises(CampaignError):
        Campaign(fx.program, [], fx.seeds, det())


def test_p0_reaches_both_targets(load):
    fx = load("p0")
    crashes, stats = run_campaign(fx.program, fx.sequences, fx.seeds, det(), rng_seed=1)
    assert stats.all_reached and stats.stop_reason == "all_targets"
    assert set(crashes.crashes) == {"n3", "n6"}
    assert stats.executions_to_all == max(v["executions"] for v in stats.first_reach.values())


def test_routing(load):
    fx = load("p0")
    c = campaign(fx)
    c.bootstrap()
    # the seed covers n0-n2, which beats the empty maxima: CQ plus DQ
    assert len(c.cq) == 1 and len(c.dq) == 1
    assert c.run_input(b"A") == "crash"
    assert "n3" in c.crashes.crashes
    assert c.run_input(b"QXYZ") is Outcome.DIRECTED
    assert len(c.dq) == 2 and len(c.cq) == 1  # new edges too, but DQ wins
    assert c.run_input(b"QXYZ") is Outcome.NEITHER
    assert c.stats.routed == {"crash": 1, "dq": 1, "cq": 0, "discarded": 1}


def test_coverage_only_goes_to_cq(load):
    fx = load("fig1")
    c = campaign(fx)
    c.bootstrap()
    n = len(c.cq)
    data = bytearray(16)
    data[8] = 0x30  # a header arm: new edges, no sequence progress
    assert c.run_input(bytes(data)) is Outcome.COVERAGE_ONLY
    assert len(c.cq) == n + 1


def test_gmax_sees_crashing_runs_but_coverage_does_not(load):
    fx = load("p0")
    c = campaign(fx)
    c.bootstrap()
    c.run_input(b"QXYZ!")
    seq6 = next(s for s in c.sequences if s.target.resolved_block == "n6")
    assert seq6.g_max_cov == 1.0
    assert ("n4", "n6") not in c.coverage.seen_edges


def test_caller_sequences_untouched(load):
    fx = load("p0")
    run_campaign(fx.program, fx.sequences, fx.seeds, det(), rng_seed=2)
    assert all(s.g_max_cov == 0.0 for s in fx.sequences)


def test_fallback_to_cq_is_logged(load):
    fx = load("fig1")
    c = campaign(fx, strategy="mes")
    c.bootstrap()
    c.dq.items.clear()
    c.state.sof = EXPLOITATION
    assert c._select_queue() is c.cq
    assert c._select_queue() is c.cq
    assert c.stats.fallbacks == 2
    assert sum(e["event"] == "fallback" for e in c.log.events) == 1


@pytest.mark.parametrize("strategy", ["mes", "aflgo_distance", "seqcov_single"])
def test_conservation(load, strategy):
    fx = load("fig1")
    _, stats = run_campaign(fx.program, fx.sequences, fx.seeds, det(strategy=strategy, exec_budget=5000), rng_seed=4)
    assert stats.executions == 5000 or stats.stop_reason == "all_targets"
    assert stats.generated == stats.executions - stats.bootstrap
    assert stats.generated == sum(stats.routed.values())


def test_energy_contract(load):
    fx = load("fig1")
    c = campaign(fx, exec_budget=3000, record_selections=True, concolic=False)
    c.run()
    sel = c.stats.selections
    assert sel and all(done == energy for _, energy, done in sel[:-1])
    # near t = 0 every seed has capability ~0.5, so energy ~ base * 2**3
    assert 120 <= sel[0][1] <= 128


def test_baselines_use_single_queue(load):
    fx = load("fig1")
    for strategy in ("aflgo_distance", "seqcov_single"):
        c = campaign(fx, strategy=strategy, exec_budget=3000)
        c.run()
        assert len(c.dq) == 0 and c.stats.stage_log == []


def test_exec_budget_zero(load):
    fx = load("p0")
    crashes, stats = run_campaign(fx.program, fx.sequences, fx.seeds, det(exec_budget=0))
    assert stats.executions == 0 and not stats.all_reached and len(crashes) == 0


def test_determinism_in_process(load, tmp_path):
    fx = load("fig1")
    a = campaign(fx, tmp_path / "a", rng_seed=9)
    b = campaign(fx, tmp_path / "b", rng_seed=9)
    _, sa = a.run()
    _, sb = b.run()
    assert sa == sb
    assert (tmp_path / "a" / "stats.jsonl").read_bytes() == (tmp_path / "b" / "stats.jsonl").read_bytes()


def test_corpus_layout(load, tmp_path):
    fx = load("p0")
    crashes, stats = run_campaign(fx.program, fx.sequences, fx.seeds, det(), rng_seed=1, out_dir=tmp_path)
    names = sorted(p.name for p in (tmp_path / "crashes").iterdir())
    assert len(names) == 2 and {n.rsplit("_", 1)[1] for n in names} == {"n3", "n6"}
    assert any((tmp_path / "queue_cov").iterdir())
    events = [json.loads(line) for line in (tmp_path / "stats.jsonl").read_text().splitlines()]
    kinds = {e["event"] for e in events}
    assert {"start", "target", "crash", "end"} <= kinds
    assert events[-1]["stop"] == "all_targets"


def test_stage_events_logged(load, tmp_path):
    fx = load("fig1")
    _, stats = run_campaign(fx.program, fx.sequences, fx.seeds,
                            det(exec_budget=60000, concolic=False, rate_init=0.3), rng_seed=0, out_dir=tmp_path)
    assert stats.stage_log and stats.stage_log[0]["sof"] == EXPLOITATION
    events = [json.loads(line) for line in (tmp_path / "stats.jsonl").read_text().splitlines()]
    stages = [e for e in events if e["event"] == "stage"]
    assert len(stages) == len(stats.stage_log)
    assert all({"sof", "epoch", "rate"} <= e.keys() for e in stages)


def test_threaded_worker_runs(load):
    fx = load("p0")
    cfg = CampaignConfig(budget=2.0, stop_on_all_targets=True)
    crashes, stats = run_campaign(fx.program, fx.sequences, fx.seeds, cfg, rng_seed=0)
    assert stats.executions > 0
    assert stats.generated == sum(stats.routed.values())

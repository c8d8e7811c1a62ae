import math

import pytest

from dataring.config import RunConfig
from dataring.data import synth_dataset
from dataring.errors import ConfigurationError
from dataring.query_eval import encode_query
from dataring.rng import derive_seed
from dataring.stats import pass_probability
from dataring.sim import experiments
from dataring.sim.adversary import CheatStrategy, add_records, fake_dataset, keep_true, replace_records
from dataring.sim.sessions import honest_view, make_world, run_pv_session, run_query_session
from dataring.sim.sessions import test_kinds as kinds_for
from dataring.sim.transport import Transport

SMALL = RunConfig(N=60, a=4, V=20, L=12, m_q=4, m_t=4, group="sim", trials=20)


def test_transport_fifo_and_counters():
    t = Transport()
    t.send("a", "b", "x", b"12345", framing=4)
    t.send("a", "b", "y", b"67")
    assert t.pending("b") == 2
    assert t.recv("b", "a", "x") == b"12345"
    with pytest.raises(LookupError):
        t.recv("b", "a", "x")
    assert t.counters() == {"a>b:x": 1, "a>b:y": 2}
    assert t.framing_bytes[("a", "b", "x")] == 4


def test_strategy_parsing():
    assert CheatStrategy.parse("modify:0.2") == CheatStrategy("modify", 0.2)
    assert str(CheatStrategy.parse("add:0.5")) == "add:0.5"
    assert CheatStrategy.parse("modify:0.07").count(100) == 7
    with pytest.raises(ConfigurationError):
        CheatStrategy.parse("drop:1")
    with pytest.raises(ConfigurationError):
        CheatStrategy("modify", 1.5)


def test_fake_datasets():
    ds = synth_dataset(50, 200, 1)
    mod = replace_records(ds, 10, 2)
    assert mod.N == 50 and len(set(mod.labels) & set(ds.labels)) == 40
    add = add_records(ds, 25, 3)
    assert add.N == 75 and set(ds.labels) <= set(add.labels)
    assert fake_dataset(ds, CheatStrategy(), 4) is ds
    assert keep_true(ds, 0, 5).N == 50 and not set(keep_true(ds, 0, 5).labels) & set(ds.labels)
    with pytest.raises(ConfigurationError):
        add_records(ds, 151)


def test_round_robin_kinds():
    assert kinds_for("LVN", 5) == list("LVNLV")


def test_world_checks_dataset_shape():
    with pytest.raises(ConfigurationError):
        make_world(SMALL, 0, dataset=synth_dataset(10, 240, 0))


@pytest.mark.parametrize("n", [None, 30, 0])
def test_plain_and_crypto_pv_agree(n):
    plain = make_world(SMALL, 3)
    crypto = make_world(SMALL, 3, "crypto")
    for seed in range(3):
        a = run_pv_session(plain, seed, n=n).verdict
        b = run_pv_session(crypto, seed, n=n, mode="crypto").verdict
        assert (a.matched, a.accept) == (b.matched, b.accept)
    if n == 0:
        assert not b.accept


def test_pv_byte_counters():
    world = make_world(SMALL, 1, "crypto")
    size = SMALL.domain_size
    counters = run_pv_session(world, 2, mode="crypto").bytes
    assert counters == {
        "participant>server1:lbs": size * 8,
        "participant>server2:perm": size * 4,
        "server1>server2:enc-lbs": size * 70,
        "server2>server1:pv": size * 66,
    }


def test_query_session_conservation_and_bytes():
    world = make_world(SMALL, 1, "crypto")
    pv = honest_view(world, 1, "crypto")
    out = run_query_session(world, 5, mode="crypto", pv=pv)
    m, size = SMALL.m, SMALL.domain_size
    assert len(out.slots) == m and len(out.tests) == SMALL.m_t
    assert out.bytes["participant>server1:answer"] == 66 * m
    assert out.bytes["server1>participant:query"] == 66 * size * m
    assert out.bytes["querier>server1:query"] == 66 * size * SMALL.m_q
    if not out.flagged:
        assert len(out.released) == SMALL.m_q


def test_plain_and_crypto_query_sessions_agree():
    plain = make_world(SMALL, 2)
    crypto = make_world(SMALL, 2, "crypto")
    strategy = CheatStrategy("modify", 1)
    pv_p = honest_view(plain, 4)
    pv_c = honest_view(crypto, 4, "crypto")
    for seed in range(4):
        a = run_query_session(plain, seed, strategy, x=3, pv=pv_p, real_answers=True)
        b = run_query_session(crypto, seed, strategy, x=3, mode="crypto", pv=pv_c)
        assert a.slots == b.slots and a.tests == b.tests and a.flagged == b.flagged
        assert a.released == b.released


def test_released_answers_follow_query_order():
    cfg = SMALL.replace(epsilon=1e6, epsilon_s=1e6)
    world = make_world(cfg, 6, "crypto")
    queries = [encode_query(world.dataset.labels[:k], cfg.domain_size) for k in (1, 5, 9, 20)]
    out = run_query_session(world, 7, mode="crypto", queries=queries)
    assert out.released == [1, 5, 9, 20]


def test_cheat_placement_nested_in_x():
    world = make_world(SMALL, 1)
    pv = honest_view(world, 1)
    strategy = CheatStrategy("modify", 1)
    prev = set()
    for x in range(SMALL.m + 1):
        out = run_query_session(world, 9, strategy, x=x, pv=pv)
        cheats = {i for i, s in enumerate(out.slots) if s[2]}
        assert len(cheats) == x and prev <= cheats
        prev = cheats
    with pytest.raises(ConfigurationError):
        run_query_session(world, 9, strategy, x=SMALL.m + 1, pv=pv)


def test_total_cheating_is_always_caught():
    cfg = RunConfig(N=400, a=4, V=100, L=60, m_q=10, m_t=10, epsilon=50, epsilon_s=50, group="sim")
    world = make_world(cfg, 0)
    pv = honest_view(world, 0)
    for seed in range(30):
        assert run_query_session(world, seed, CheatStrategy("modify", 1), p_c=1, pv=pv).flagged


def test_iid_slots_have_random_test_count():
    world = make_world(SMALL, 1)
    pv = honest_view(world, 1)
    counts = {len(run_query_session(world, s, slots="iid", pv=pv).tests) for s in range(40)}
    assert len(counts) > 1


def test_nmin_table_small():
    header, rows = experiments.nmin_table(RunConfig(N=2000, V=200, L=50), [0.9])
    assert header[-1] == "n_min" and rows[0][-1] == 1567


def test_lmin_table_rows():
    _, rows = experiments.lmin_table([100], 0.1, 0.05)
    assert rows[0][4] == 25


def test_predicted_accept_extremes():
    assert experiments.predicted_accept(60, 20, 12, 2, 0) == 0
    p = experiments.predicted_accept(60, 20, 12, 2, 60)
    assert p == pass_probability(60, 20, 12, 2)


def test_experiments_are_deterministic():
    a = experiments.to_csv(*experiments.detection_curve(SMALL, ["modify:1"], [1, 2], 10, 3, pd_trials=10))
    b = experiments.to_csv(*experiments.detection_curve(SMALL, ["modify:1"], [1, 2], 10, 3, pd_trials=10))
    assert a == b
    c = experiments.to_csv(*experiments.pv_threshold(SMALL, [60, 0], 10, 1))
    assert c == experiments.to_csv(*experiments.pv_threshold(SMALL, [60, 0], 10, 1))


def test_workers_do_not_change_results():
    one = experiments.pv_threshold(SMALL, [60, 20], 12, 4)
    two = experiments.pv_threshold(SMALL.replace(workers=2), [60, 20], 12, 4)
    assert one == two


def test_seed_derivation_is_stable():
    assert derive_seed(1, "a", 2) == derive_seed(1, "a", 2) != derive_seed(1, "a", 3)


def test_fmt_precision():
    assert experiments.fmt(1 / 3) == "0.333333333333"
    assert experiments.fmt(None) == "" and experiments.fmt(True) == "1"
    assert math.isclose(float(experiments.fmt(2.5)), 2.5)


def test_fake_records_nested_across_rates():
    ds = synth_dataset(50, 200, 1)
    small, large = replace_records(ds, 5, 7), replace_records(ds, 12, 7)
    true = set(ds.labels.tolist())
    assert true - set(small.labels.tolist()) <= true - set(large.labels.tolist())
    assert set(small.labels.tolist()) - true <= set(large.labels.tolist()) - true
    assert set(add_records(ds, 3, 9).labels.tolist()) <= set(add_records(ds, 8, 9).labels.tolist())


def honest_flags(cfg, sessions):
    world = make_world(cfg, 11)
    pv = honest_view(world, 11)
    return sum(run_query_session(world, derive_seed(12, t), pv=pv).flagged for t in range(sessions))


def test_honest_sessions_never_flagged_with_small_tail():
    cfg = RunConfig(N=1000, V=100, L=100, m_q=10, m_t=10, tail=1e-6, group="sim")
    assert honest_flags(cfg, 10_000) == 0


def test_strict_tail_false_positive_rate():
    cfg = RunConfig(N=1000, V=100, L=100, m_q=10, m_t=10, tail=0.05, tolerance="strict", group="sim")
    sessions = 10_000
    bound = 1 - 0.95**cfg.m_t
    rate = honest_flags(cfg, sessions) / sessions
    assert rate <= bound + 3 * math.sqrt(bound * (1 - bound) / sessions)

"""One partial-view session and one query session, end to end.

``mode="crypto"`` runs the real protocol: every message is serialized onto
the transport and all arithmetic happens on ciphertexts.  ``mode="plain"``
replays the same session on plaintext counts, which is what makes 10^5
trial Monte-Carlo runs affordable.  Both modes draw every random choice
from the same named streams of the session seed, so for a given seed they
reach the same verdicts; only the "crypto" stream (nonces) is extra.
"""

from dataclasses import dataclass, field

import numpy as np

from ..crypto.dlog import decode_window
from ..crypto.elgamal import collective_key, decrypt, keygen
from ..crypto.groups import get_group
from ..data import HistogramDataset, random_permutation, sample_background, synth_dataset
from ..errors import ConfigurationError, ProtocolError
from ..partial_view import (
    EncryptedUpload,
    LbsUpload,
    Participant,
    PartialView,
    PvVerdict,
    ServerOne,
    ServerTwo,
    selector_vector,
    verify_pv,
)
from ..query_eval import (
    EncryptedQuery,
    PrivacyBudget,
    QueryVector,
    TestSpec,
    answer_query,
    encrypt_query,
    make_test,
    release_answers,
    schedule,
    verify_answer,
)
from ..rng import derive_seed
from ..stats import choose_r0
from .. import wire
from .adversary import CheatStrategy, fake_dataset, keep_true
from .transport import Transport

MODES = ("plain", "crypto")
P, S1, S2, Q = "participant", "server1", "server2", "querier"


class Streams:
    """Independent generators per purpose, split from one session seed."""

    def __init__(self, seed):
        self.seed = seed
        self._gens = {}

    def __getitem__(self, name):
        if name not in self._gens:
            self._gens[name] = np.random.default_rng(derive_seed(self.seed, name))
        return self._gens[name]


@dataclass
class Keys:
    s1: object
    s2: object
    querier: object
    collective: object
    window: object

    @classmethod
    def generate(cls, config, rng):
        group = get_group(config.group)
        s1, s2, querier = (keygen(group, rng) for _ in range(3))
        return cls(s1, s2, querier, collective_key([s1, s2]), decode_window(group, config.half_window))


@dataclass
class World:
    """A data owner's true dataset and what the servers know about it."""

    config: object
    dataset: HistogramDataset
    background: object
    r0: int
    keys: Keys = None


def make_world(config, seed, mode="plain", dataset=None, keys=None):
    """Synthetic (or given) dataset, sampled background knowledge, r0, keys."""
    config.validate()
    s = Streams(seed)
    ds = dataset if dataset is not None else synth_dataset(config.N, config.domain_size, s["data"])
    if ds.N != config.N or ds.size != config.domain_size:
        raise ConfigurationError(
            f"dataset has N={ds.N}, |domain|={ds.size}; config says N={config.N}, a*N={config.domain_size}"
        )
    background = sample_background(ds, config.L, s["background"])
    r0 = choose_r0(config.N, config.V, config.L, config.eta)
    if keys is None and mode == "crypto":
        keys = Keys.generate(config, s["keys"])
    return World(config, ds, background, r0, keys)


@dataclass
class PlainView:
    """Plaintext stand-in for a partial view: the sampled labels."""

    labels: np.ndarray
    verified: bool = False


@dataclass
class PvResult:
    verdict: PvVerdict
    view: object
    claimed: HistogramDataset
    bytes: dict = field(default_factory=dict)


def run_pv_session(world, seed, n=None, mode="plain", transport=None):
    """Collect and verify one partial view; the owner keeps n true records."""
    if mode not in MODES:
        raise ConfigurationError(f"mode must be one of {MODES}")
    cfg = world.config
    s = Streams(seed)
    claimed = world.dataset
    if n is not None and n != cfg.N:
        claimed = keep_true(world.dataset, n, s["pv-fake"])
    perm = random_permutation(cfg.domain_size, s["perm"])
    selector = selector_vector(claimed.N, cfg.V, s["select"])

    if mode == "plain":
        flags = np.zeros(cfg.domain_size, dtype=np.uint8)
        flags[perm.forward] = claimed.indicator
        ones = np.flatnonzero(flags)
        labels = np.sort(perm.inverse[ones[selector == 1]])
        hits = np.isin(world.background.labels, labels)
        bits = {int(l): int(h) for l, h in zip(world.background.labels, hits)}
        matched = int(hits.sum())
        accept = matched >= world.r0
        verdict = PvVerdict(matched, bits, accept, world.r0, None if accept else "too few known labels")
        return PvResult(verdict, PlainView(labels, accept), claimed)

    keys = world.keys
    if keys is None:
        raise ConfigurationError("crypto mode needs a world built with mode='crypto'")
    t = transport or Transport()
    group = keys.collective.group
    s1 = ServerOne(keys.s1, keys.collective)
    s2 = ServerTwo(keys.s2, keys.collective)
    upload, inverse = Participant(claimed).prepare(permutation=perm)
    t.send(P, S1, "lbs", wire.encode_lbs(upload.flags))
    t.send(P, S2, "perm", wire.encode_perm(inverse))

    s1.receive_upload(LbsUpload(wire.decode_lbs(t.recv(S1, P, "lbs"))))
    enc = s1.sample(cfg.V, s["crypto"], selector)
    t.send(S1, S2, "enc-lbs", wire.encode_enc_lbs(enc.ciphertexts))

    s2.receive_inverse(wire.decode_perm(t.recv(S2, P, "perm")))
    s2.receive_encrypted(EncryptedUpload(wire.decode_enc_lbs(t.recv(S2, S1, "enc-lbs"), group)))
    pv = s2.finalize(s["crypto"])
    t.send(S2, S1, "pv", wire.encode_ciphertexts(pv.ciphertexts))
    pv = PartialView(wire.decode_ciphertexts(t.recv(S1, S2, "pv"), group))
    verdict = verify_pv(pv, world.background, world.r0, [s1, s2], keys.window)
    return PvResult(verdict, pv, claimed, t.counters())


def honest_view(world, seed, mode="plain", attempts=100):
    """First accepted honest PV over derived seeds; query sessions need one."""
    for attempt in range(attempts):
        result = run_pv_session(world, derive_seed(seed, "pv", attempt), mode=mode)
        if result.verdict.accept:
            return result
    raise ProtocolError(f"honest partial view rejected {attempts} times in a row")


@dataclass
class QueryOutcome:
    """One query session seen from the servers' side."""

    cheated: bool
    flagged: bool
    slots: list
    tests: list
    released: list = None
    bytes: dict = field(default_factory=dict)

    @property
    def cheats_on_tests(self):
        return sum(1 for t in self.tests if t["cheated"])


def test_kinds(mix, m_t):
    """Round-robin over the mix string, e.g. 'LVN' -> L, V, N, L, ..."""
    return [mix[i % len(mix)] for i in range(m_t)]


def half_width(config, budget):
    tail = config.tail if config.tolerance == "strict" else config.tail / max(config.m_t, 1)
    return budget.half_width(tail)


def _slot_plan(cfg, s, slots):
    """List of ("real", index) / ("test", kind) in answer order."""
    kinds = test_kinds(cfg.mix, cfg.m_t)
    if slots == "shuffle":
        real = [("real", i) for i in range(cfg.m_q)]
        tests = [("test", k) for k in kinds]
        return schedule(real, tests, s["schedule"])
    if slots == "iid":
        rng = s["schedule"]
        p_t = cfg.m_t / cfg.m
        plan, r = [], 0
        for _ in range(cfg.m):
            if rng.random() < p_t:
                plan.append(("test", cfg.mix[rng.integers(len(cfg.mix))]))
            else:
                plan.append(("real", r % cfg.m_q))
                r += 1
        return plan
    raise ConfigurationError("slots must be 'shuffle' or 'iid'")


def _cheat_flags(m, s, x, p_c):
    rng = s["cheat"]
    flags = np.zeros(m, dtype=bool)
    if x is not None:
        if not 0 <= x <= m:
            raise ConfigurationError(f"x={x} must lie in [0, m={m}]")
        # prefix of one shuffle: the cheat slots for x are a subset of those for x+1
        flags[rng.permutation(m)[:x]] = True
    elif p_c is not None:
        flags = rng.random(m) < p_c
    return flags


def _plain_count(kind, ds, world, view):
    if kind == "L":
        return int(ds.indicator[world.background.labels].sum())
    if kind == "V":
        return int(ds.indicator[view.labels].sum())
    return ds.N


def run_query_session(
    world,
    seed,
    strategy=CheatStrategy(),
    *,
    x=None,
    p_c=None,
    mode="plain",
    slots="shuffle",
    pv=None,
    real_answers=False,
    queries=None,
    transport=None,
):
    """Schedule m queries, answer them (cheating per plan), verify, release.

    Cheat placement: exactly ``x`` slots chosen uniformly, or each slot
    independently with probability ``p_c``; neither means honest answers.
    ``queries`` replaces the querier's random real queries.
    """
    cfg = world.config
    if mode not in MODES:
        raise ConfigurationError(f"mode must be one of {MODES}")
    s = Streams(seed)
    pv = pv or honest_view(world, seed, mode)
    view = pv.view
    budget = PrivacyBudget(cfg.epsilon, cfg.epsilon_s, cfg.m_q, cfg.m_t, cfg.noise_rule)
    tol = half_width(cfg, budget)

    fake = fake_dataset(world.dataset, strategy, s["fake"])
    plan = _slot_plan(cfg, s, slots)
    cheat = _cheat_flags(len(plan), s, x, p_c)
    if strategy.kind == "honest":
        cheat[:] = False
    noise = np.rint(s["noise"].laplace(0.0, budget.scale, size=len(plan))).astype(np.int64)
    if queries is not None:
        if len(queries) != cfg.m_q:
            raise ConfigurationError(f"{len(queries)} queries given but m_q={cfg.m_q}")
    elif real_answers or mode == "crypto":
        # the querier's own queries: random subsets of the domain
        queries = [
            QueryVector((s["queries"].random(cfg.domain_size) < 0.5).astype(np.uint8)) for _ in range(cfg.m_q)
        ]
    specs = {k: TestSpec(k, {"L": cfg.L, "V": cfg.V, "N": cfg.N}[k], tol) for k in "LVN"}

    tests, slot_log, real_out = [], [], []
    if mode == "plain":
        for t, (what, item) in enumerate(plan):
            ds = fake if cheat[t] else world.dataset
            budget.consume()
            if what == "test":
                value = _plain_count(item, ds, world, view) + int(noise[t])
                tests.append({"kind": item, "cheated": bool(cheat[t]), "passed": specs[item].accepts(value)})
            elif queries is not None:
                real_out.append((item, queries[item].answer(ds) + int(noise[t])))
            slot_log.append((what, item, bool(cheat[t])))
        flagged = not all(tr["passed"] for tr in tests)
        released = None if flagged or not real_answers else [v for _, v in sorted(real_out, key=lambda p: p[0])]
        return QueryOutcome(bool(cheat.any()), flagged, slot_log, tests, released)

    keys = world.keys
    t_ = transport or Transport()
    group = keys.collective.group
    crypto = s["crypto"]
    enc_real = [encrypt_query(q, keys.collective, crypto) for q in queries]
    for q in enc_real:
        t_.send(Q, S1, "query", q.to_bytes(), framing=wire.COUNT)
        t_.recv(S1, Q, "query")
    answers, test_answers = [], []
    for t, (what, item) in enumerate(plan):
        if what == "real":
            eq = enc_real[item]
        else:
            eq, _ = make_test(
                item,
                keys.collective,
                noise_max=tol,
                background=world.background,
                pv=view,
                domain_size=cfg.domain_size,
                N=cfg.N,
                V=cfg.V,
                seed=crypto,
            )
        t_.send(S1, P, "query", eq.to_bytes(), framing=wire.COUNT)
        received = EncryptedQuery(wire.decode_counted(t_.recv(P, S1, "query"), group))
        ds = fake if cheat[t] else world.dataset
        ct = answer_query(ds, received, budget, keys.collective, crypto, noise=int(noise[t]))
        t_.send(P, S1, "answer", bytes(ct))
        ct = type(ct).from_bytes(t_.recv(S1, P, "answer"), group)
        if what == "test":
            test_answers.append((item, bool(cheat[t]), ct))
        else:
            answers.append((item, ct))
        slot_log.append((what, item, bool(cheat[t])))
    # verification only starts once every answer is in
    for kind, cheated, ct in test_answers:
        ok = verify_answer(ct, specs[kind], [keys.s1, keys.s2], keys.window)
        tests.append({"kind": kind, "cheated": cheated, "passed": ok})
    verdicts = [tr["passed"] for tr in tests]
    # release in query order, not slot order
    answers = [ct for _, ct in sorted(answers, key=lambda p: p[0])]
    release = release_answers(answers, keys.querier.public, verdicts, [keys.s1, keys.s2], crypto)
    t_.send(S1, Q, "release", wire.encode_counted(release.ciphertexts), framing=wire.COUNT)
    cts = wire.decode_counted(t_.recv(Q, S1, "release"), group)
    released = None
    if not release.flagged:
        released = [decrypt(keys.querier, c, keys.window) for c in cts]
    return QueryOutcome(bool(cheat.any()), release.flagged, slot_log, tests, released, t_.counters())

"""Experiment drivers.  Each returns (header, rows); CSV writing is separate.

Seeds: a trial's seed is ``derive_seed(master, experiment, ..., trial)`` so
results do not depend on worker count or execution order.  Detection
curves reuse the same trial seeds across every (strategy, x) cell, so cells
differ only by the cheat itself.
"""

import csv
import io
import math
from dataclasses import astuple
from fractions import Fraction
from multiprocessing import Pool

from .. import stats
from ..rng import derive_seed
from .adversary import CheatStrategy
from .sessions import honest_view, make_world, run_pv_session, run_query_session, test_kinds

_WORLDS = {}


def _world(config, seed):
    key = (astuple(config), seed)
    if key not in _WORLDS:
        world = make_world(config, seed)
        _WORLDS.clear()
        _WORLDS[key] = (world, honest_view(world, seed))
    return _WORLDS[key]


def _map(fn, jobs, workers):
    if workers <= 1:
        return [fn(j) for j in jobs]
    with Pool(workers) as pool:
        return pool.map(fn, jobs, chunksize=max(1, len(jobs) // (8 * workers)))


def fmt(value):
    """Ints verbatim, floats to 12 significant digits, None empty."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (float, Fraction)):
        return format(float(value), ".12g")
    return str(value)


def to_csv(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


# -- exact tables --------------------------------------------------------------


def nmin_table(config, thetas):
    header = ["theta", "N", "V", "L", "r0_max", "v_opt", "n_min"]
    rows = []
    for theta in thetas:
        plan = stats.adversary_plan(config.N, config.V, config.L, theta)
        r0_max = max(plan.v_min) if plan.v_min else None
        rows.append([theta, config.N, config.V, config.L, r0_max, plan.v_opt, plan.n_min])
    return header, rows


def lmin_table(Ns, rho, eta):
    header = ["N", "rho", "eta", "V", "l_min", "p_no_hit", "p_no_hit_prev"]
    rows = []
    for N in Ns:
        L = stats.l_min(N, rho, eta)
        V = stats.sample_size(N, rho)
        prev = stats.prob_no_hit(N, V, L - 1) if L > 1 else None
        rows.append([N, rho, eta, V, L, stats.prob_no_hit(N, V, L), prev])
    return header, rows


# -- partial-view acceptance vs. records kept ---------------------------------


def predicted_accept(N, V, L, r0, n):
    """Pass probability when the owner keeps n true records.

    v ~ Hyp(N, n, V) true records reach the PV; given v, the hits on the
    known labels follow Hyp(N, v, L).
    """
    total = Fraction(0)
    for v, p in stats.hyper_pmf_all(N, n, V).items():
        total += p * stats.hyper_tail(N, v, L, r0)
    return total


def _pv_trial(job):
    config, world_seed, n, trial_seed = job
    world, _ = _world(config, world_seed)
    return run_pv_session(world, trial_seed, n=n).verdict


def pv_threshold(config, ns, trials, seed):
    world, _ = _world(config, seed)
    header = ["n", "trials", "accepted", "accept_rate", "predicted", "r0", "mean_matched"]
    rows = []
    for n in ns:
        jobs = [(config, seed, n, derive_seed(seed, "pv-threshold", n, t)) for t in range(trials)]
        verdicts = _map(_pv_trial, jobs, config.workers)
        accepted = sum(v.accept for v in verdicts)
        pred = predicted_accept(config.N, config.V, config.L, world.r0, n)
        mean = sum(v.matched for v in verdicts) / trials
        rows.append([n, trials, accepted, accepted / trials, pred, world.r0, mean])
    return header, rows


# -- cheating detection -------------------------------------------------------


def _query_trial(job):
    config, world_seed, strategy, x, p_c, slots, trial_seed = job
    world, pv = _world(config, world_seed)
    out = run_query_session(world, trial_seed, strategy, x=x, p_c=p_c, slots=slots, pv=pv)
    return out.cheated, out.flagged, [(t["kind"], t["cheated"], t["passed"]) for t in out.tests]


def measure_pd(config, strategy, trials, seed):
    """Per-kind failure rate of test answers computed on the fake dataset.

    Every slot cheats, so each test in each session contributes one sample.
    """
    jobs = [
        (config, seed, strategy, config.m, None, "shuffle", derive_seed(seed, "pd", str(strategy), t))
        for t in range(trials)
    ]
    fails = {k: [0, 0] for k in "LVN"}
    for _, _, tests in _map(_query_trial, jobs, config.workers):
        for kind, _, passed in tests:
            fails[kind][0] += not passed
            fails[kind][1] += 1
    return {k: f / n for k, (f, n) in fails.items() if n}


def detection_curve(config, strategies, xs, trials, seed, pd_trials=2000):
    header = [
        "strategy", "x", "trials", "cheated", "detected", "accuracy",
        "p_d_hat", "closed_pd1", "closed_pd_hat", "exact_pd1",
    ]
    rows = []
    m, m_q, m_t = config.m, config.m_q, config.m_t
    p_t = m_t / m
    kinds = test_kinds(config.mix, m_t)
    for strategy in strategies:
        strategy = CheatStrategy.parse(strategy) if isinstance(strategy, str) else strategy
        pd = measure_pd(config, strategy, pd_trials, seed) if strategy.kind != "honest" else {}
        pd_hat = sum(pd.get(k, 0.0) for k in kinds) / len(kinds) if pd else 0.0
        for x in xs:
            if strategy.kind == "honest" and x:
                continue
            jobs = [
                (config, seed, strategy, x, None, "shuffle", derive_seed(seed, "detect", t))
                for t in range(trials)
            ]
            results = _map(_query_trial, jobs, config.workers)
            cheated = sum(r[0] for r in results)
            detected = sum(r[1] for r in results)
            if x == 0:
                # honest row: flagged sessions are false positives
                rows.append([str(strategy), 0, trials, cheated, detected, None, None, None, None, None])
                continue
            exact = 1 - Fraction(math.comb(m_q, x), math.comb(m, x))
            rows.append([
                str(strategy), x, trials, cheated, detected, detected / trials, pd_hat,
                stats.detection_prob(m, p_t, x / m, 1.0),
                stats.detection_prob(m, p_t, x / m, pd_hat), exact,
            ])
    return header, rows


def closed_form_check(config, cells, trials, seed, pd_trials=20000):
    """Detection frequency under independent per-query cheating vs. the closed form.

    ``iid`` sessions make each slot a test with probability m_t/m, which is
    what the closed form assumes; ``shuffle`` sessions use the real
    schedule (exactly m_t tests), whose exact prediction is the product
    over the scheduled tests.  Both are reported with their gap.
    """
    header = [
        "strategy", "p_c", "slots", "trials", "detected", "freq",
        "p_d_hat", "closed_form", "exact", "sigma", "z", "gap",
    ]
    rows = []
    m, m_t = config.m, config.m_t
    p_t = m_t / m
    kinds = test_kinds(config.mix, m_t)
    for strategy, p_c in cells:
        strategy = CheatStrategy.parse(strategy) if isinstance(strategy, str) else strategy
        pd = measure_pd(config, strategy, pd_trials, seed)
        mix_pd = sum(pd.get(k, 0.0) for k in config.mix) / len(config.mix)
        closed = stats.detection_prob(m, p_t, p_c, mix_pd)
        for slots in ("iid", "shuffle"):
            jobs = [
                (config, seed, strategy, None, p_c, slots,
                 derive_seed(seed, "closed-form", str(strategy), p_c, slots, t))
                for t in range(trials)
            ]
            detected = sum(r[1] for r in _map(_query_trial, jobs, config.workers))
            freq = detected / trials
            if slots == "iid":
                exact = closed
            else:
                exact = 1 - math.prod(1 - p_c * pd.get(k, 0.0) for k in kinds)
            sigma = _sigma(exact, trials, m, p_t, p_c, mix_pd, pd_trials * len(kinds))
            z = (freq - exact) / sigma if sigma else 0.0
            rows.append([
                str(strategy), p_c, slots, trials, detected, freq, mix_pd, closed, exact, sigma, z, exact - closed,
            ])
    return header, rows


def _sigma(p, trials, m, p_t, p_c, p_d, pd_samples):
    """Binomial error of the frequency plus the propagated error of p_d_hat."""
    var = p * (1 - p) / trials
    dp = m * p_t * p_c * (1 - p_t * p_c * p_d) ** (m - 1)
    var += dp * dp * p_d * (1 - p_d) / max(pd_samples, 1)
    return math.sqrt(var)

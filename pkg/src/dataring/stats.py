"""Exact hypergeometric decision quantities.

All probabilities are :class:`fractions.Fraction`; call ``float()`` only for
display.  Thresholds given as floats are read by their decimal repr, so
``0.95`` means 19/20 exactly.

Notation: a population of ``N`` items holds ``K`` marked ones; ``n`` are
drawn without replacement; ``k`` counts marked items among the draws.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import BackgroundKnowledgeTooSmall, ConfigurationError, TargetUnattainable


def exact(p):
    """Fraction from a probability given as float, str, int or Fraction."""
    if isinstance(p, Fraction):
        return p
    if isinstance(p, float):
        return Fraction(repr(p))
    return Fraction(p)


def _check(N, K, n):
    if not (0 <= K <= N and 0 <= n <= N):
        raise ConfigurationError(f"need 0 <= K, n <= N (N={N}, K={K}, n={n})")


def _support(N, K, n):
    return max(0, n - (N - K)), min(K, n)


def _terms(N, K, n, k_from, k_to):
    """Yield C(K,k)*C(N-K,n-k) for k in [k_from, k_to] by exact recurrences."""
    if k_from > k_to:
        return
    a = math.comb(K, k_from)
    b = math.comb(N - K, n - k_from)
    for k in range(k_from, k_to + 1):
        yield a * b
        if k == k_to:
            break
        a = a * (K - k) // (k + 1)
        b = b * (n - k) // (N - K - n + k + 1)


def hyper_pmf(N, K, n, k):
    """Pr(X = k) for X ~ Hypergeometric(N, K, n)."""
    _check(N, K, n)
    lo, hi = _support(N, K, n)
    if not lo <= k <= hi:
        return Fraction(0)
    return Fraction(math.comb(K, k) * math.comb(N - K, n - k), math.comb(N, n))


def hyper_pmf_all(N, K, n):
    """Exact PMF as a dict over the support."""
    _check(N, K, n)
    lo, hi = _support(N, K, n)
    total = math.comb(N, n)
    return {k: Fraction(t, total) for k, t in zip(range(lo, hi + 1), _terms(N, K, n, lo, hi))}


def hyper_tail(N, K, n, k0):
    """Pr(X >= k0) for X ~ Hypergeometric(N, K, n), exactly.

    K and n play symmetric roles, so the smaller is used as the draw count,
    and whichever side of k0 has fewer terms is summed.
    """
    _check(N, K, n)
    if k0 < 0:
        raise ConfigurationError("threshold must be non-negative")
    K, n = max(K, n), min(K, n)
    lo, hi = _support(N, K, n)
    if k0 <= lo:
        return Fraction(1)
    if k0 > hi:
        return Fraction(0)
    total = math.comb(N, n)
    if hi - k0 <= k0 - lo:
        return Fraction(sum(_terms(N, K, n, k0, hi)), total)
    return 1 - Fraction(sum(_terms(N, K, n, lo, k0 - 1)), total)


def pass_probability(N, V, L, r0):
    """Probability that at least r0 of L known records land in a V-sample."""
    if not 0 <= r0 <= L:
        raise ConfigurationError("need 0 <= r0 <= L")
    if V > N or L > N:
        raise ConfigurationError("need V <= N and L <= N")
    return hyper_tail(N, V, L, r0)


def choose_r0(N, V, L, eta):
    """Largest r0 in [1, L] with Pr(R >= r0) >= 1 - eta."""
    eta = exact(eta)
    if not 0 < eta < 1:
        raise ConfigurationError("eta must lie in (0, 1)")
    if not (1 <= L <= N and 0 <= V <= N):
        raise ConfigurationError("need 1 <= L <= N and 0 <= V <= N")
    lo, hi = _support(N, V, L)
    total = math.comb(N, L)
    bound = eta * total  # Pr(R < r) <= eta, scaled by C(N, L)
    below = 0  # total * Pr(R < r)
    best = None
    terms = _terms(N, V, L, lo, hi)
    for r in range(1, L + 1):
        if r - 1 >= lo:
            below += next(terms, 0)
        if below > bound:
            break
        best = r
    if best is None:
        raise BackgroundKnowledgeTooSmall(
            f"no r0 in [1, {L}] keeps honest rejection below {float(eta)} (N={N}, V={V})"
        )
    return best


def prob_no_hit(N, V, L):
    """Pr(R = 0) = C(N-V, L) / C(N, L)."""
    return Fraction(math.comb(N - V, L), math.comb(N, L))


def sample_size(N, rho):
    """V = floor(rho * N), with rho read exactly."""
    return math.floor(exact(rho) * N)


def l_min(N, rho, eta):
    """Smallest L with Pr(R = 0) < eta when V = floor(rho * N)."""
    eta = exact(eta)
    rho = exact(rho)
    if not 0 < rho <= 1:
        raise ConfigurationError("rho must lie in (0, 1]")
    if not 0 < eta < 1:
        raise ConfigurationError("eta must lie in (0, 1)")
    V = sample_size(N, rho)
    if V == 0:
        raise ConfigurationError("rho * N rounds down to an empty sample")
    # float estimate, then settle exactly
    log_eta = math.log(eta)
    acc, guess = 0.0, N
    for j in range(N):
        if N - V - j <= 0:
            guess = j + 1
            break
        acc += math.log1p(-V / (N - j))
        if acc < log_eta:
            guess = j + 1
            break
    L = guess
    while L < N and prob_no_hit(N, V, L) >= eta:
        L += 1
    while L > 1 and prob_no_hit(N, V, L - 1) < eta:
        L -= 1
    return L


def _bisect(pred, lo, hi):
    """Smallest x in [lo, hi] with pred(x) true; pred must be monotone."""
    while lo < hi:
        mid = (lo + hi) // 2
        if pred(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo


def v_min(N, V, L, theta, r0):
    """Fewest true PV entries v giving Pr(at least r0 of L hit) >= theta."""
    theta = exact(theta)
    if not 1 <= r0 <= L:
        raise ConfigurationError("need 1 <= r0 <= L")
    if pass_probability(N, V, L, r0) < theta:
        raise TargetUnattainable(f"r0={r0} cannot reach {float(theta)} even with v=V={V}")
    return _bisect(lambda v: hyper_tail(N, v, L, r0) >= theta, 0, V)


@dataclass
class AdversaryPlan:
    theta: Fraction
    v_min: dict = field(default_factory=dict)
    v_opt: int = None
    n_min: int = None


def v_min_table(N, V, L, theta):
    """v_min for every attainable r0; attainability stops at the first miss."""
    theta = exact(theta)
    table = {}
    for r0 in range(1, L + 1):
        try:
            table[r0] = v_min(N, V, L, theta, r0)
        except TargetUnattainable:
            break
    return table


def v_opt(N, V, L, theta):
    table = v_min_table(N, V, L, theta)
    if not table:
        raise TargetUnattainable(f"no r0 in [1, {L}] can reach {float(exact(theta))}")
    return max(table.values())


def n_min(N, V, v_opt, theta):
    """Fewest true records n so that a V-sample holds >= v_opt of them w.p. >= theta."""
    theta = exact(theta)
    if not 0 <= v_opt <= V <= N:
        raise ConfigurationError("need 0 <= v_opt <= V <= N")
    if v_opt == 0:
        return 0
    return _bisect(lambda n: hyper_tail(N, n, V, v_opt) >= theta, 0, N)


def adversary_plan(N, V, L, theta):
    table = v_min_table(N, V, L, theta)
    plan = AdversaryPlan(exact(theta), table)
    if table:
        plan.v_opt = max(table.values())
        plan.n_min = n_min(N, V, plan.v_opt, theta)
    else:
        # no threshold is reachable: the adversary must keep everything
        plan.n_min = N
    return plan


def detection_prob(m, p_t, p_c, p_d):
    """1 - (1 - p_t p_c p_d)^m."""
    for p in (p_t, p_c, p_d):
        if not 0 <= p <= 1:
            raise ConfigurationError("probabilities must lie in [0, 1]")
    if m < 1:
        raise ConfigurationError("m must be at least 1")
    return 1 - (1 - p_t * p_c * p_d) ** m

"""Encrypted count queries, hidden tests, noisy answers and answer release.

A count query is a 0/1 vector over the domain; its answer on a dataset is
the dot product.  The servers mix the querier's real queries with test
queries whose answers they know (|L|, V or N), the data owner answers all
of them under Laplace noise, and the servers only re-encrypt the real
answers to the querier if every test answer lands inside its tolerance.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .crypto.elgamal import (
    encrypt,
    encrypt_many,
    finish_reencryption,
    reencrypt_stage,
    rerandomize,
    start_reencryption,
    sum_ciphertexts,
)
from .errors import BudgetExhausted, ConfigurationError, DecodeOverflow, DomainError, ProtocolError
from .partial_view import joint_decrypt
from .rng import as_rng, crypto_rng
from .wire import encode_counted

TEST_KINDS = ("L", "V", "N")


@dataclass
class QueryVector:
    bits: np.ndarray

    def __len__(self):
        return len(self.bits)

    def answer(self, ds):
        """Plaintext dot product with a dataset."""
        return int(np.dot(self.bits.astype(np.int64), ds.indicator))


def encode_query(labels, domain):
    size = domain if isinstance(domain, (int, np.integer)) else len(domain)
    bits = np.zeros(size, dtype=np.uint8)
    labels = np.asarray(list(labels), dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= size):
        raise DomainError("query label outside the domain")
    bits[labels] = 1
    return QueryVector(bits)


@dataclass(eq=False)
class EncryptedQuery:
    """Ciphertexts under the servers' collective key.

    ``origin`` is server-side bookkeeping and is never serialized.
    """

    ciphertexts: list
    origin: str = field(default="real", repr=False)

    def __len__(self):
        return len(self.ciphertexts)

    def to_bytes(self):
        return encode_counted(self.ciphertexts)


def encrypt_query(qv, collective, seed=None, origin="real"):
    return EncryptedQuery(encrypt_many(collective, qv.bits, seed), origin)


@dataclass(frozen=True)
class TestSpec:
    kind: str
    center: int
    noise_max: float

    def accepts(self, value):
        return abs(value - self.center) <= self.noise_max


def noise_max(m_q, delta_t, epsilon, tail):
    """ln(1/tail) * m_q * delta_t / epsilon."""
    if not 0 < tail <= 1:
        raise ConfigurationError("tail must lie in (0, 1]")
    return math.log(1 / tail) * m_q * delta_t / epsilon


def make_test(
    kind, collective, *, noise_max, background=None, pv=None, domain_size=None, N=None, V=None, seed=None
):
    """Encrypted test query plus what its answer should be.

    L: indicator of the known labels, center |L|.  N: all ones, center the
    claimed dataset size.  V: every PV ciphertext re-randomized, center V.
    """
    rng = crypto_rng(seed)
    if kind == "L":
        labels = getattr(background, "labels", background)
        qv = encode_query(labels, domain_size)
        return encrypt_query(qv, collective, rng, "test"), TestSpec("L", len(labels), noise_max)
    if kind == "N":
        qv = QueryVector(np.ones(domain_size, dtype=np.uint8))
        return encrypt_query(qv, collective, rng, "test"), TestSpec("N", N, noise_max)
    if kind == "V":
        if pv is None or not pv.verified:
            raise ProtocolError("Test V needs a verified partial view")
        if V is None:
            raise ConfigurationError("Test V needs the sample size V")
        cts = [rerandomize(collective, c, rng) for c in pv.ciphertexts]
        return EncryptedQuery(cts, "test"), TestSpec("V", V, noise_max)
    raise ConfigurationError(f"unknown test kind {kind!r}")


def reuse_test(eq, collective, seed=None):
    """Fresh-looking copy of an encrypted test."""
    rng = crypto_rng(seed)
    return EncryptedQuery([rerandomize(collective, c, rng) for c in eq.ciphertexts], eq.origin)


class PrivacyBudget:
    """Answer allowance of one data owner toward one querier and the servers.

    ``rule="per-budget"`` (default) gives every answer Laplace scale
    m_q / eps, each of the two budgets covering the m_q answers it funds.
    Unequal budgets use the smaller one.  ``rule="pooled"`` uses
    m / (eps + eps_s) with m = m_q + m_t.
    """

    def __init__(self, epsilon, epsilon_s, m_q, m_t, rule="per-budget"):
        if epsilon <= 0 or epsilon_s <= 0:
            raise ConfigurationError("privacy budgets must be positive")
        if m_q < 1 or m_t < 0:
            raise ConfigurationError("need m_q >= 1 and m_t >= 0")
        if m_t > m_q:
            raise ConfigurationError(f"m_t={m_t} exceeds m_q={m_q}")
        if rule not in ("per-budget", "pooled"):
            raise ConfigurationError(f"unknown noise rule {rule!r}")
        self.epsilon = epsilon
        self.epsilon_s = epsilon_s
        self.m_q = m_q
        self.m_t = m_t
        self.rule = rule
        self.used = 0

    @property
    def m(self):
        return self.m_q + self.m_t

    @property
    def scale(self):
        if self.rule == "pooled":
            return self.m / (self.epsilon + self.epsilon_s)
        return self.m_q / min(self.epsilon, self.epsilon_s)

    @property
    def remaining(self):
        return self.m - self.used

    def consume(self):
        if self.used >= self.m:
            raise BudgetExhausted(f"all {self.m} answers already given")
        self.used += 1

    def half_width(self, tail):
        """Acceptance half-width for a test answer: ln(1/tail) * scale."""
        if not 0 < tail <= 1:
            raise ConfigurationError("tail must lie in (0, 1]")
        return math.log(1 / tail) * self.scale


def laplace_noise(scale, seed=None):
    """Integer-rounded Laplace draw."""
    return int(np.rint(as_rng(seed).laplace(0.0, scale)))


def schedule(real, tests, seed=None):
    """Uniformly random interleaving of all queries, popped without replacement."""
    real, tests = list(real), list(tests)
    if len(tests) > len(real):
        raise ConfigurationError(f"{len(tests)} tests exceed {len(real)} real queries")
    pool = real + tests
    order = as_rng(seed).permutation(len(pool))
    return [pool[i] for i in order]


def answer_query(ds, eq, budget, collective, seed=None, noise=None):
    """Sum the query entries at the dataset's labels, plus encrypted noise.

    ``noise`` overrides the Laplace draw (tests use 0).
    """
    budget.consume()
    rng = crypto_rng(seed)
    if noise is None:
        noise = laplace_noise(budget.scale, rng)
    group = collective.group
    picked = [eq.ciphertexts[i] for i in ds.labels]
    picked.append(encrypt(collective, int(noise), rng))
    return sum_ciphertexts(picked, group)


def verify_answer(ct, spec, server_keys, window):
    """Joint decryption, then the tolerance check; overflow counts as a fail."""
    try:
        value = joint_decrypt(server_keys, ct, window)
    except DecodeOverflow:
        return False
    return spec.accepts(value)


@dataclass
class Release:
    ciphertexts: list
    flagged: bool


def release_answers(answers, querier, verdicts, server_keys, seed=None):
    """Re-encrypt every real answer to the querier, or discard all on any failed test."""
    if not all(verdicts):
        return Release([], True)
    rng = crypto_rng(seed)
    out = []
    for ct in answers:
        state = start_reencryption(ct, querier)
        for key in server_keys:
            reencrypt_stage(state, getattr(key, "keypair", key), rng)
        out.append(finish_reencryption(state, len(server_keys)))
    return Release(out, False)

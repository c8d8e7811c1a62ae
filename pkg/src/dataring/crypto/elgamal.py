"""Additive ElGamal: (C1, C2) = (rB, xB + rK).

Multi-party operations are staged so each secret key is applied by one call
that returns only the updated ciphertext.
"""

from dataclasses import dataclass

from ..errors import ConfigurationError, ProtocolError
from ..rng import as_rng, random_scalar
from .groups import get_group

CIPHERTEXT_SIZE = 66


def _scalars(seed):
    # None keeps group scalars on the OS CSPRNG
    return None if seed is None else as_rng(seed)


@dataclass(frozen=True)
class PublicKey:
    group: object
    point: object

    def __bytes__(self):
        return self.group.encode(self.point)

    @classmethod
    def from_bytes(cls, data, group="p256"):
        group = get_group(group) if isinstance(group, str) else group
        return cls(group, group.decode(bytes(data)))

    def __eq__(self, other):
        return isinstance(other, PublicKey) and bytes(self) == bytes(other)

    def __hash__(self):
        return hash(bytes(self))


@dataclass(frozen=True, eq=False)
class KeyPair:
    group: object
    secret: int
    public: PublicKey

    def secret_bytes(self):
        return self.secret.to_bytes(32, "big")

    def to_bytes(self):
        """Key file body: 32-byte big-endian secret, then the 33-byte public point."""
        return self.secret_bytes() + bytes(self.public)

    @classmethod
    def from_bytes(cls, data, group="p256"):
        group = get_group(group) if isinstance(group, str) else group
        if len(data) != 32 + group.element_size:
            raise ConfigurationError(f"key file must be {32 + group.element_size} bytes")
        pair = cls.from_secret(group, int.from_bytes(data[:32], "big"))
        if bytes(pair.public) != bytes(data[32:]):
            raise ConfigurationError("key file public point does not match its secret")
        return pair

    @classmethod
    def from_secret(cls, group, secret):
        if not 1 <= secret < group.order:
            raise ConfigurationError("secret key out of range")
        return cls(group, secret, PublicKey(group, group.base_mul(secret)))


@dataclass(frozen=True, eq=False)
class CollectiveKey:
    parts: tuple
    public: PublicKey

    @property
    def group(self):
        return self.public.group


class Ciphertext:
    __slots__ = ("group", "c1", "c2")

    def __init__(self, group, c1, c2):
        self.group = group
        self.c1 = c1
        self.c2 = c2

    def __bytes__(self):
        return self.group.encode(self.c1) + self.group.encode(self.c2)

    @classmethod
    def from_bytes(cls, data, group="p256"):
        group = get_group(group) if isinstance(group, str) else group
        if len(data) != CIPHERTEXT_SIZE:
            raise ValueError(f"ciphertext must be {CIPHERTEXT_SIZE} bytes")
        half = CIPHERTEXT_SIZE // 2
        return cls(group, group.decode(bytes(data[:half])), group.decode(bytes(data[half:])))

    def __add__(self, other):
        return add(self, other)

    def __eq__(self, other):
        return isinstance(other, Ciphertext) and bytes(self) == bytes(other)

    def __hash__(self):
        return hash(bytes(self))

    def __repr__(self):
        return f"Ciphertext({bytes(self).hex()[:16]}...)"


def _public(key):
    return key if isinstance(key, PublicKey) else key.public


def _secret(key):
    return key if isinstance(key, int) else key.secret


def keygen(group="p256", seed=None):
    group = get_group(group) if isinstance(group, str) else group
    k = random_scalar(group.order, _scalars(seed))
    return KeyPair(group, k, PublicKey(group, group.base_mul(k)))


def collective_key(pubs):
    pubs = tuple(_public(p) for p in pubs)
    if len(pubs) < 2:
        raise ConfigurationError("a collective key needs at least two public keys")
    group = pubs[0].group
    if any(p.group is not group for p in pubs):
        raise ConfigurationError("public keys come from different groups")
    return CollectiveKey(pubs, PublicKey(group, group.sum(p.point for p in pubs)))


def _plain_point(group, x):
    if x == 0:
        return group.identity
    if x == 1:
        return group.generator
    return group.base_mul(x)


def encrypt(key, x, seed=None):
    pk = _public(key)
    group = pk.group
    r = random_scalar(group.order, _scalars(seed))
    return Ciphertext(
        group,
        group.base_mul(r),
        group.add(_plain_point(group, x), group.mul(pk.point, r)),
    )


def encrypt_many(key, values, seed=None):
    rng = _scalars(seed)
    return [encrypt(key, int(x), rng) for x in values]


def decrypt(key, ct, window):
    group = ct.group
    return window.decode(group.sub(ct.c2, group.mul(ct.c1, _secret(key))))


def add(a, b):
    g = a.group
    return Ciphertext(g, g.add(a.c1, b.c1), g.add(a.c2, b.c2))


def sum_ciphertexts(cts, group=None):
    cts = list(cts)
    group = group or cts[0].group
    return Ciphertext(group, group.sum(c.c1 for c in cts), group.sum(c.c2 for c in cts))


def zero_ciphertext(group):
    """Trivial encryption of 0 with nonce 0; a neutral starting accumulator."""
    return Ciphertext(group, group.identity, group.identity)


def scalar_mul(ct, alpha):
    g = ct.group
    return Ciphertext(g, g.mul(ct.c1, alpha), g.mul(ct.c2, alpha))


def rerandomize(key, ct, seed=None):
    return add(ct, encrypt(key, 0, seed))


def partial_decrypt(key, ct):
    """One decryption stage: C2 <- C2 - k*C1."""
    g = ct.group
    return Ciphertext(g, ct.c1, g.sub(ct.c2, g.mul(ct.c1, _secret(key))))


def decode_plaintext(ct, window):
    """Final stage after every share has been applied."""
    return window.decode(ct.c2)


def threshold_decrypt(shares, ct, window, collective=None):
    shares = list(shares)
    if not shares:
        raise ProtocolError("no decryption shares given")
    if collective is not None:
        group = collective.group
        expected = group.key(collective.public.point)
        got = group.key(group.sum(group.base_mul(_secret(s)) for s in shares))
        if len(shares) != len(collective.parts) or got != expected:
            raise ProtocolError("decryption shares do not cover the collective key")
    for share in shares:
        ct = partial_decrypt(share, ct)
    return decode_plaintext(ct, window)


class Reencryption:
    """Running state of a staged key switch.

    Starts at (identity, C2).  Stage i, holding k_i and a fresh v_i, maps
    (A1, A2) to (A1 + v_i B, A2 - k_i C1 + v_i U), so after all stages the
    result is (vB, X + vU) with v the sum of the v_i.
    """

    __slots__ = ("source_c1", "c1", "c2", "target", "stages")

    def __init__(self, ct, target):
        self.source_c1 = ct.c1
        self.c1 = ct.group.identity
        self.c2 = ct.c2
        self.target = _public(target)
        self.stages = 0


def start_reencryption(ct, target):
    return Reencryption(ct, target)


def reencrypt_stage(state, key, seed=None):
    pk = state.target
    g = pk.group
    v = random_scalar(g.order, _scalars(seed))
    state.c1 = g.add(state.c1, g.base_mul(v))
    state.c2 = g.add(g.sub(state.c2, g.mul(state.source_c1, _secret(key))), g.mul(pk.point, v))
    state.stages += 1
    return state


def finish_reencryption(state, expected_stages):
    if state.stages != expected_stages:
        raise ProtocolError(
            f"re-encryption ran {state.stages} of {expected_stages} stages"
        )
    return Ciphertext(state.target.group, state.c1, state.c2)


def reencrypt(shares, target, ct, seed=None, expected_stages=None):
    shares = list(shares)
    rng = _scalars(seed)
    state = start_reencryption(ct, target)
    for share in shares:
        reencrypt_stage(state, share, rng)
    need = len(shares) if expected_stages is None else expected_stages
    return finish_reencryption(state, need)

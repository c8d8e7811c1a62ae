"""Partial-view collection and verification.

Flow: the participant permutes its flags and sends them to S1, the inverse
permutation to S2.  S1 swaps each 1-flag for the next encrypted selector
bit and each 0-flag for a fresh encryption of 0.  S2 re-randomizes and
un-permutes, giving the partial view (PV) in label order.  The servers then
jointly decrypt the PV at the labels they already know and accept if enough
of them are sampled.

Each role only takes the inputs it is allowed to see and drops protocol
inputs once it has used them.
"""

from dataclasses import dataclass, field

import numpy as np

from .crypto.elgamal import (
    decode_plaintext,
    encrypt,
    partial_decrypt,
    rerandomize,
)
from .data import invert_permutation, random_permutation
from .errors import ConfigurationError, DecodeOverflow, ProtocolError
from .rng import as_rng, crypto_rng


@dataclass
class LbsUpload:
    """Flags indexed by permuted position: flags[sigma(i)] = val(i)."""

    flags: np.ndarray

    @property
    def N(self):
        return int(np.count_nonzero(self.flags))

    def __len__(self):
        return len(self.flags)


@dataclass
class EncryptedUpload:
    """One ciphertext per permuted position."""

    ciphertexts: list

    def __len__(self):
        return len(self.ciphertexts)


@dataclass
class PartialView:
    """One ciphertext per label, in label order."""

    ciphertexts: list
    verified: bool = False

    def __len__(self):
        return len(self.ciphertexts)


@dataclass
class PvVerdict:
    """Outcome of checking a PV against known labels.

    Only the known labels are decrypted, so ``bits`` says nothing about the
    rest of the PV.
    """

    matched: int
    bits: dict = field(default_factory=dict)
    accept: bool = False
    r0: int = None
    cause: str = None


def participant_prepare(ds, seed=None, permutation=None):
    """Permuted flags for S1 and the inverse permutation for S2."""
    perm = permutation if permutation is not None else random_permutation(ds.size, seed)
    flags = np.zeros(ds.size, dtype=np.uint8)
    flags[perm.forward] = ds.indicator
    return LbsUpload(flags), perm.inverse.copy()


def selector_vector(N, V, seed=None):
    """N bits with exactly V ones in random positions."""
    if not 0 <= V <= N:
        raise ConfigurationError(f"need 0 <= V <= N (V={V}, N={N})")
    bits = np.zeros(N, dtype=np.uint8)
    bits[as_rng(seed).choice(N, size=V, replace=False)] = 1
    return bits


def s1_sample(upload, V, collective, seed=None, selector=None):
    """Replace 1-flags with encrypted selector bits and 0-flags with Enc(0).

    Selector bits are consumed in ascending position order.  ``selector``
    fixes the bits instead of drawing them from ``seed``.
    """
    N = upload.N
    if V > N:
        raise ConfigurationError(f"V={V} exceeds the {N} records in the upload")
    rng = crypto_rng(seed)
    if selector is None:
        selector = selector_vector(N, V, rng)
    elif len(selector) != N or int(np.sum(selector)) != V:
        raise ConfigurationError("selector must have length N and weight V")
    selector = iter(selector)
    out = []
    for f in upload.flags:
        bit = next(selector) if f else 0
        out.append(encrypt(collective, int(bit), rng))
    return EncryptedUpload(out)


def s2_finalize(enc_upload, inverse, collective, seed=None):
    """Re-randomize every entry, then move entry j to label inverse[j]."""
    size = len(enc_upload)
    inverse = np.asarray(inverse, dtype=np.int64)
    if len(inverse) != size:
        raise ProtocolError("inverse permutation length differs from the upload")
    try:
        invert_permutation(inverse)
    except ValueError:
        raise ProtocolError("inverse permutation is not a bijection") from None
    rng = crypto_rng(seed)
    pv = [None] * size
    for j, ct in enumerate(enc_upload.ciphertexts):
        pv[inverse[j]] = rerandomize(collective, ct, rng)
    return PartialView(pv)


def joint_decrypt(keys, ct, window):
    """Apply each server's decryption stage in turn, then decode."""
    for key in keys:
        ct = partial_decrypt(getattr(key, "keypair", key), ct)
    return decode_plaintext(ct, window)


def verify_pv(pv, background, r0, server_keys, window):
    """Decrypt PV at the known labels; accept iff all bits are 0/1 and >= r0 hit."""
    labels = getattr(background, "labels", background)
    if not 1 <= r0 <= len(labels):
        raise ConfigurationError("need 1 <= r0 <= L")
    bits = {}
    for label in labels:
        label = int(label)
        try:
            value = joint_decrypt(server_keys, pv.ciphertexts[label], window)
        except DecodeOverflow:
            return PvVerdict(sum(bits.values()), bits, False, r0, "decode overflow")
        if value not in (0, 1):
            bits[label] = value
            return PvVerdict(
                sum(v for v in bits.values() if v == 1), bits, False, r0, "malformed flag"
            )
        bits[label] = value
    matched = sum(bits.values())
    accept = matched >= r0
    pv.verified = accept
    return PvVerdict(matched, bits, accept, r0, None if accept else "too few known labels")


class Participant:
    """Data owner.  Keeps its dataset; sigma is dropped after preparing."""

    def __init__(self, dataset):
        self.dataset = dataset

    def prepare(self, seed=None, permutation=None):
        return participant_prepare(self.dataset, seed, permutation)


class ServerOne:
    """Samples the PV.  Sees permuted flags, never the permutation."""

    def __init__(self, keypair, collective):
        self.keypair = keypair
        self.collective = collective
        self.upload = None

    def receive_upload(self, upload):
        self.upload = upload

    def sample(self, V, seed=None, selector=None):
        if self.upload is None:
            raise ProtocolError("S1 has no upload to sample")
        try:
            return s1_sample(self.upload, V, self.collective, seed, selector)
        finally:
            self.upload = None

    def partial_decrypt(self, ct):
        return partial_decrypt(self.keypair, ct)


class ServerTwo:
    """Un-permutes the PV.  Sees only ciphertexts and the inverse permutation."""

    def __init__(self, keypair, collective):
        self.keypair = keypair
        self.collective = collective
        self.inverse = None
        self.enc_upload = None

    def receive_inverse(self, inverse):
        self.inverse = inverse

    def receive_encrypted(self, enc_upload):
        self.enc_upload = enc_upload

    def finalize(self, seed=None):
        if self.inverse is None or self.enc_upload is None:
            raise ProtocolError("S2 needs both the inverse permutation and the encrypted lbs")
        try:
            return s2_finalize(self.enc_upload, self.inverse, self.collective, seed)
        finally:
            # used once, never kept
            self.inverse = None
            self.enc_upload = None

    def partial_decrypt(self, ct):
        return partial_decrypt(self.keypair, ct)

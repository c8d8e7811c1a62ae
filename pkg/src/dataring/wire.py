"""Byte layouts of every protocol message.  Integers are little-endian.

=============  ==============================================
lbs            per label: u32 position, u32 flag       (8 B)
inverse perm   per label: u32 original label           (4 B)
encrypted lbs  per label: u32 position, ciphertext    (70 B)
partial view   per label: ciphertext                  (66 B)
QUERY          u32 count, then count ciphertexts
ANSWER         one ciphertext                         (66 B)
RELEASE        u32 count, then count ciphertexts
=============  ==============================================
"""

import struct

import numpy as np

from .crypto.elgamal import CIPHERTEXT_SIZE, Ciphertext

LBS_ENTRY = 8
PERM_ENTRY = 4
ENC_LBS_ENTRY = 4 + CIPHERTEXT_SIZE
COUNT = 4


def encode_lbs(flags):
    flags = np.asarray(flags, dtype="<u4")
    out = np.empty((len(flags), 2), dtype="<u4")
    out[:, 0] = np.arange(len(flags))
    out[:, 1] = flags
    return out.tobytes()


def decode_lbs(data):
    if len(data) % LBS_ENTRY:
        raise ValueError("lbs message is not a whole number of entries")
    arr = np.frombuffer(data, dtype="<u4").reshape(-1, 2)
    flags = np.zeros(len(arr), dtype=np.uint8)
    pos = arr[:, 0].astype(np.int64)
    if len(arr) and (pos.max() >= len(arr) or len(np.unique(pos)) != len(arr)):
        raise ValueError("lbs positions are not a permutation of the domain")
    if (arr[:, 1] > 1).any():
        raise ValueError("lbs flag is not 0 or 1")
    flags[pos] = arr[:, 1]
    return flags


def encode_perm(perm):
    return np.asarray(perm, dtype="<u4").tobytes()


def decode_perm(data):
    if len(data) % PERM_ENTRY:
        raise ValueError("permutation message is not a whole number of entries")
    return np.frombuffer(data, dtype="<u4").astype(np.int64)


def encode_ciphertexts(cts):
    return b"".join(bytes(c) for c in cts)


def decode_ciphertexts(data, group):
    if len(data) % CIPHERTEXT_SIZE:
        raise ValueError("payload is not a whole number of ciphertexts")
    return [
        Ciphertext.from_bytes(data[i : i + CIPHERTEXT_SIZE], group)
        for i in range(0, len(data), CIPHERTEXT_SIZE)
    ]


def encode_enc_lbs(cts):
    return b"".join(struct.pack("<I", j) + bytes(c) for j, c in enumerate(cts))


def decode_enc_lbs(data, group):
    if len(data) % ENC_LBS_ENTRY:
        raise ValueError("encrypted lbs message is not a whole number of entries")
    count = len(data) // ENC_LBS_ENTRY
    out = [None] * count
    for e in range(count):
        off = e * ENC_LBS_ENTRY
        (j,) = struct.unpack_from("<I", data, off)
        if j >= count or out[j] is not None:
            raise ValueError("encrypted lbs positions are not a permutation")
        out[j] = Ciphertext.from_bytes(data[off + 4 : off + ENC_LBS_ENTRY], group)
    return out


def encode_counted(cts):
    """QUERY and RELEASE framing: u32 count then the ciphertexts."""
    cts = list(cts)
    return struct.pack("<I", len(cts)) + encode_ciphertexts(cts)


def decode_counted(data, group):
    (count,) = struct.unpack_from("<I", data)
    body = data[COUNT:]
    if len(body) != count * CIPHERTEXT_SIZE:
        raise ValueError(f"count says {count} ciphertexts but body holds {len(body)} bytes")
    return decode_ciphertexts(body, group)

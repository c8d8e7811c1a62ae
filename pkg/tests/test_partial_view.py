import numpy as np
import pytest

from dataring import stats
from dataring.crypto import decode_window, encrypt
from dataring.data import HistogramDataset, Permutation, random_permutation, sample_background, synth_dataset
from dataring.errors import ConfigurationError, ProtocolError
from dataring.partial_view import (
    EncryptedUpload,
    Participant,
    PartialView,
    ServerOne,
    ServerTwo,
    joint_decrypt,
    participant_prepare,
    s1_sample,
    s2_finalize,
    selector_vector,
    verify_pv,
)

LOAN = HistogramDataset([1, 0, 0, 1, 1, 0, 0, 1])


def decrypt_all(keys, cts, window):
    return [joint_decrypt(keys, c, window) for c in cts]


def collect(ds, V, keys, seed):
    s1, s2, _, ck = keys
    upload, inverse = participant_prepare(ds, seed)
    enc = s1_sample(upload, V, ck, seed + 1)
    return upload, inverse, enc, s2_finalize(enc, inverse, ck, seed + 2)


def test_upload_weight_and_inverse():
    upload, inverse = participant_prepare(LOAN, 3)
    assert upload.N == 4 and len(upload) == 8
    # sigma^-1 maps permuted positions back to labels
    back = np.zeros(8, dtype=np.uint8)
    back[inverse] = upload.flags
    assert (back == LOAN.indicator).all()


def test_identity_permutation_keeps_order():
    upload, inverse = participant_prepare(LOAN, permutation=Permutation.identity(8))
    assert upload.flags.tolist() == LOAN.indicator.tolist()
    assert inverse.tolist() == list(range(8))


def test_selector_weight():
    bits = selector_vector(30, 7, 1)
    assert bits.sum() == 7 and len(bits) == 30
    with pytest.raises(ConfigurationError):
        selector_vector(3, 4)


def test_loan_example_sampling(p256_keys, p256_window):
    s1, s2, _, _ = p256_keys
    for seed in range(3):
        _, _, _, pv = collect(LOAN, 2, p256_keys, 10 * seed)
        bits = decrypt_all([s1, s2], pv.ciphertexts, p256_window)
        assert sum(bits) == 2
        assert {i for i, b in enumerate(bits) if b} <= {0, 3, 4, 7}


@pytest.mark.parametrize("V", [0, 4])
def test_sampling_extremes(V, sim_keys):
    s1, s2, _, ck = sim_keys
    w = decode_window(ck.group, 10)
    upload, _ = participant_prepare(LOAN, 1)
    enc = s1_sample(upload, V, ck, 2)
    bits = decrypt_all([s1, s2], enc.ciphertexts, w)
    assert bits == ([int(f) for f in upload.flags] if V == 4 else [0] * 8)


def test_finalize_reorders_and_rerandomizes(sim_keys):
    s1, s2, _, ck = sim_keys
    w = decode_window(ck.group, 10)
    ds = synth_dataset(20, 60, 4)
    upload, inverse, enc, pv = collect(ds, 8, sim_keys, 5)
    raw = decrypt_all([s1, s2], enc.ciphertexts, w)
    expect = [0] * 60
    for j, b in enumerate(raw):
        expect[inverse[j]] = b
    got = decrypt_all([s1, s2], pv.ciphertexts, w)
    assert got == expect
    assert sum(got) == 8 and {i for i, b in enumerate(got) if b} <= set(ds.labels.tolist())
    assert not {bytes(c) for c in pv.ciphertexts} & {bytes(c) for c in enc.ciphertexts}


def test_finalize_with_identity_changes_bytes_only(sim_keys):
    s1, s2, _, ck = sim_keys
    w = decode_window(ck.group, 10)
    upload, _ = participant_prepare(LOAN, permutation=Permutation.identity(8))
    enc = s1_sample(upload, 2, ck, 1)
    pv = s2_finalize(enc, np.arange(8), ck, 2)
    assert decrypt_all([s1, s2], pv.ciphertexts, w) == decrypt_all([s1, s2], enc.ciphertexts, w)
    assert all(a != b for a, b in zip(pv.ciphertexts, enc.ciphertexts))


def test_finalize_rejects_bad_inverse(sim_keys):
    ck = sim_keys[3]
    enc = EncryptedUpload(s1_sample(participant_prepare(LOAN, 1)[0], 2, ck, 1).ciphertexts)
    with pytest.raises(ProtocolError):
        s2_finalize(enc, [0] * 8, ck)
    with pytest.raises(ProtocolError):
        s2_finalize(enc, list(range(7)), ck)


def test_verify_full_sample_accepts(sim_keys):
    s1, s2, _, ck = sim_keys
    w = decode_window(ck.group, 100)
    ds = synth_dataset(20, 60, 1)
    bg = sample_background(ds, 6, 2)
    *_, pv = collect(ds, 20, sim_keys, 3)
    v = verify_pv(pv, bg, 6, [s1, s2], w)
    assert v.accept and v.matched == 6 and pv.verified


def test_verify_fake_dataset_rejects(sim_keys):
    s1, s2, _, ck = sim_keys
    w = decode_window(ck.group, 100)
    ds = synth_dataset(20, 60, 1)
    bg = sample_background(ds, 6, 2)
    fake = HistogramDataset.from_labels(ds.absent[:20], 60)
    *_, pv = collect(fake, 10, sim_keys, 3)
    v = verify_pv(pv, bg, 1, [s1, s2], w)
    assert not v.accept and v.matched == 0 and v.cause == "too few known labels"


def test_verify_flags_malformed_entries(sim_keys):
    s1, s2, _, ck = sim_keys
    w = decode_window(ck.group, 100)
    pv = PartialView([encrypt(ck, 2, i) for i in range(4)])
    v = verify_pv(pv, [0, 1], 1, [s1, s2], w)
    assert not v.accept and v.cause == "malformed flag"
    small = decode_window(ck.group, 1)
    pv = PartialView([encrypt(ck, 50, i) for i in range(4)])
    assert verify_pv(pv, [0], 1, [s1, s2], small).cause == "decode overflow"


def test_honest_accept_rate(sim_keys):
    s1, s2, _, ck = sim_keys
    w = decode_window(ck.group, 10)
    N, V = 100, 20
    L = stats.l_min(N, V / N, 0.05)
    r0 = stats.choose_r0(N, V, L, 0.05)
    rng = np.random.default_rng(0)
    ds = synth_dataset(N, 2 * N, 1)
    accepted = 0
    trials = 150
    for t in range(trials):
        bg = sample_background(ds, L, rng)
        *_, pv = collect(ds, V, sim_keys, 100 * t)
        accepted += verify_pv(pv, bg, r0, [s1, s2], w).accept
    p = float(stats.pass_probability(N, V, L, r0))
    sigma = (p * (1 - p) / trials) ** 0.5
    assert accepted / trials >= p - 3 * sigma


def test_roles_drop_inputs(sim_keys):
    s1k, s2k, _, ck = sim_keys
    upload, inverse = Participant(LOAN).prepare(1)
    s1, s2 = ServerOne(s1k, ck), ServerTwo(s2k, ck)
    s1.receive_upload(upload)
    enc = s1.sample(2, 2)
    assert s1.upload is None
    with pytest.raises(ProtocolError):
        s1.sample(2)
    s2.receive_inverse(inverse)
    s2.receive_encrypted(enc)
    pv = s2.finalize(3)
    assert len(pv) == 8 and s2.inverse is None and s2.enc_upload is None
    w = decode_window(ck.group, 10)
    assert sum(decrypt_all([s1, s2], pv.ciphertexts, w)) == 2


def test_selector_size_checked(sim_keys):
    upload, _ = participant_prepare(LOAN, 1)
    with pytest.raises(ConfigurationError):
        s1_sample(upload, 5, sim_keys[3])
    with pytest.raises(ConfigurationError):
        s1_sample(upload, 2, sim_keys[3], selector=[1, 1, 1, 0])


def test_random_permutation_used_when_unset():
    a, _ = participant_prepare(LOAN, 1)
    b, _ = participant_prepare(LOAN, permutation=random_permutation(8, 1))
    assert a.flags.tolist() == b.flags.tolist()

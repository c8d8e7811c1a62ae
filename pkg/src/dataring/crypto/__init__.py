from .dlog import DecodeWindow, decode_window
from .elgamal import (
    CIPHERTEXT_SIZE,
    Ciphertext,
    CollectiveKey,
    KeyPair,
    PublicKey,
    add,
    collective_key,
    decode_plaintext,
    decrypt,
    encrypt,
    encrypt_many,
    finish_reencryption,
    keygen,
    partial_decrypt,
    reencrypt,
    reencrypt_stage,
    rerandomize,
    scalar_mul,
    start_reencryption,
    sum_ciphertexts,
    threshold_decrypt,
    zero_ciphertext,
)
from .groups import ELEMENT_SIZE, P256Group, SimulationGroup, get_group

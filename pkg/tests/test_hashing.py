import pytest
from hypothesis import given, strategies as st

from pinalite.errors import DocumentError, StateFileError
from pinalite.hashing import (
    ClientHash,
    Salt,
    SaltedHash,
    UserId,
    canonical_context_bytes,
    canonical_pair_bytes,
    client_hash_context,
    client_hash_pair,
    load_or_create_salt,
    salted_hash,
)
from pinalite.screens import AppContext

AMEX = AppContext("com.amex", "Pay")
UBER = AppContext("com.uber", "Pay")

# Digests frozen from an independent SHA-512 implementation (coreutils
# sha512sum) over the exact canonical byte layouts.
SHA512_EMPTY = (
    "cf83e1357eefb8bdf1542850d66d8007d620e4050b5715dc83f4a921d36ce9ce"
    "47d0d13c5d85f2b0ff8318d2877eec2f63b931bd47417a81a538327af927da3e")
AMEX_PAY_A = (
    "f5c455a16554111e6707355a69704ee5e61163eefbb565bd96a6b5e2cabcee71"
    "a2246de8da2de16476a8efef4f40b7b94fc894f8e43f0ae6da6bccb59c737e6c")
AMEX_PAY_EMPTY = (
    "53e1f17fdc67aef23ad4d2878c6bd30f53e36fc408f2ee0ba0835d48b958b258"
    "6adae45513df69dddc8910480bcfd3c557384f549edf6c03c7da80b739deee88")
AMEX_PAY_CONTEXT = (
    "50235f67c01dbc9f3ae7fa083ebcdcfb186fa29046ae921839582f68d657ce98"
    "ddf0cce095099295d6002af5209584f546958cf4766699bc1b696fa15b95a12b")
UBER_PAY_A = (
    "cb5fe75368f67300365a98899b76fd7b0b457f5218b0116f1041364f58375eb2"
    "72953d765081bd22109ae2ae04489ecfd4577dabb96eadec10d36d9143825342")
AMEX_PAY_A_SALTED_ZERO = (
    "8ad14f5f59a12acc4cfa1cb4ca7559a870df387bd66ceda54a4f60b9cd8c51fa"
    "85dc22896ca92daf168d6546dceb7995530032b90c1e96db984a7091aaaebfed")
AMEX_PAY_A_SALTED_AAAA = (
    "4bb7d25f9478192f9b8b1f62c8180a97ca429df1d406d9858433b6736858d69e"
    "46b8364b2759c59253df17e9c0b1df4d7e75ea7ee8077ccf1d19f4ee4bf9e2d3")

ZERO_SALT = Salt(b"\x00" * 64)
AAAA_SALT = Salt(b"A" * 64)


# --- canonical byte layout ---

def test_pair_bytes_layout():
    assert canonical_pair_bytes(AMEX, "a") == b"com.amex\x1fPay\x1fa"


def test_pair_bytes_empty_content_ends_with_delimiter():
    assert canonical_pair_bytes(AMEX, "") == b"com.amex\x1fPay\x1f"


def test_context_bytes_layout():
    assert canonical_context_bytes(AMEX) == b"com.amex\x1fPay"


def test_delimiter_in_context_fields_rejected():
    with pytest.raises(DocumentError):
        AppContext("com.a\x1fmex", "Pay")
    with pytest.raises(DocumentError):
        AppContext("com.amex", "Pa\x1fy")


def test_delimiter_makes_field_boundaries_unambiguous():
    # Content may contain the delimiter; boundaries still cannot collide
    # because context fields cannot.
    a = canonical_pair_bytes(AppContext("com.app", "AB"), "c")
    b = canonical_pair_bytes(AppContext("com.app", "A"), "B\x1fc")
    assert a != b


# --- known-answer digests ---

def test_sha512_empty_input_reference_vector():
    import hashlib
    assert hashlib.sha512(b"").hexdigest() == SHA512_EMPTY


def test_client_pair_hash_known_answers():
    assert client_hash_pair(AMEX, "a").hex == AMEX_PAY_A
    assert client_hash_pair(AMEX, "").hex == AMEX_PAY_EMPTY
    assert client_hash_pair(UBER, "a").hex == UBER_PAY_A


def test_client_context_hash_known_answer():
    assert client_hash_context(AMEX).hex == AMEX_PAY_CONTEXT


def test_salted_hash_known_answers():
    h = ClientHash(AMEX_PAY_A)
    assert salted_hash(h, ZERO_SALT).hex == AMEX_PAY_A_SALTED_ZERO
    assert salted_hash(h, AAAA_SALT).hex == AMEX_PAY_A_SALTED_AAAA


def test_same_content_different_context_differs():
    assert client_hash_pair(AMEX, "a") != client_hash_pair(UBER, "a")


# --- format and behavioral properties ---

contents = st.text(max_size=40)


@given(contents)
def test_hash_is_deterministic_and_well_formed(content):
    first = client_hash_pair(AMEX, content)
    second = client_hash_pair(AMEX, content)
    assert first == second
    assert len(first.hex) == 128
    assert first.hex == first.hex.lower()
    assert all(c in "0123456789abcdef" for c in first.hex)


@given(contents)
def test_salted_output_differs_from_client_hash(content):
    h = client_hash_pair(AMEX, content)
    assert salted_hash(h, ZERO_SALT).hex != h.hex


@given(contents)
def test_different_salts_disagree(content):
    h = client_hash_pair(AMEX, content)
    assert salted_hash(h, ZERO_SALT) != salted_hash(h, AAAA_SALT)


def test_hash_types_reject_malformed_hex():
    for bad in ("", "ff", "G" * 128, AMEX_PAY_A.upper(), AMEX_PAY_A + "00"):
        with pytest.raises(ValueError):
            ClientHash(bad)
        with pytest.raises(ValueError):
            SaltedHash(bad)


def test_salt_must_be_64_bytes():
    with pytest.raises(ValueError):
        Salt(b"\x00" * 63)
    assert "withheld" in repr(ZERO_SALT)
    assert "00" not in repr(AAAA_SALT)


def test_user_id_canonical_form():
    uid = UserId.fresh()
    assert UserId(uid.uuid) == uid
    with pytest.raises(ValueError):
        UserId("not-a-uuid")
    with pytest.raises(ValueError):
        UserId(uid.uuid.upper())


# --- salt key file ---

def test_salt_file_created_then_reused(tmp_path):
    path = tmp_path / "keys" / "server.salt"
    first = load_or_create_salt(path)
    assert path.read_bytes() == first.value
    assert load_or_create_salt(path) == first


def test_salt_file_wrong_length_rejected(tmp_path):
    path = tmp_path / "server.salt"
    path.write_bytes(b"\x00" * 10)
    with pytest.raises(StateFileError):
        load_or_create_salt(path)


def test_salt_path_from_environment(tmp_path, monkeypatch):
    path = tmp_path / "env.salt"
    monkeypatch.setenv("PINALITE_SALT_FILE", str(path))
    salt = load_or_create_salt()
    assert path.read_bytes() == salt.value
    monkeypatch.delenv("PINALITE_SALT_FILE")
    with pytest.raises(StateFileError):
        load_or_create_salt()

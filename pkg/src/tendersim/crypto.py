"""Keys, bidder certificates, and the split sealed-key scheme.

A tendering organisation owns one curve key pair. Certificates are
recoverable signatures over a hash binding the bidder id to one specific
tender contract address, so a certificate issued for one tender never
verifies against another. Bid documents are encrypted under a fresh
256-bit symmetric key; that key is sealed to the organisation's public key
(ephemeral ECDH + AES-GCM) and the sealed bytes are split down the middle:
the first half rides on the ledger with the bid, the second half stays
with the bidder until the deadline.
"""

from __future__ import annotations

import hashlib
import secrets
from dataclasses import dataclass
from random import Random

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF
from cryptography.hazmat.primitives import hashes

from . import secp256k1 as curve
from .errors import AuthFailed, DecryptionFailed, MalformedCertificate

_SEAL_INFO = b"tendersim/sealed-bid-key"
_NONCE_LEN = 12
_GCM_TAG_LEN = 16
_PUB_LEN = 64


def _rand_bytes(rng: Random | None, n: int) -> bytes:
    if rng is None:
        return secrets.token_bytes(n)
    return rng.randbytes(n)


@dataclass(frozen=True)
class KeyPair:
    """Curve key pair; the private half never appears in ledger payloads."""

    private_key: bytes
    public_key: bytes

    @property
    def private_scalar(self) -> int:
        return int.from_bytes(self.private_key, "big")


def generate_keypair(rng: Random | None = None) -> KeyPair:
    while True:
        raw = _rand_bytes(rng, 32)
        scalar = int.from_bytes(raw, "big")
        if 0 < scalar < curve.N:
            break
    return KeyPair(private_key=raw, public_key=curve.public_key_bytes(scalar))


# --- certificates -----------------------------------------------------------

@dataclass(frozen=True)
class Certificate:
    bidder_id: str
    msg_hash: bytes
    v: int
    r: bytes
    s: bytes

    def to_bytes(self) -> bytes:
        ident = self.bidder_id.encode("utf-8")
        return (
            len(ident).to_bytes(2, "big")
            + ident
            + self.msg_hash
            + self.v.to_bytes(1, "big")
            + self.r
            + self.s
        )

    @classmethod
    def from_bytes(cls, raw: bytes) -> "Certificate":
        try:
            id_len = int.from_bytes(raw[:2], "big")
            ident = raw[2 : 2 + id_len].decode("utf-8")
            rest = raw[2 + id_len :]
            msg_hash, v, r, s = rest[:32], rest[32], rest[33:65], rest[65:97]
        except (IndexError, UnicodeDecodeError) as exc:
            raise MalformedCertificate(f"unparseable certificate bytes: {exc}")
        cert = cls(bidder_id=ident, msg_hash=msg_hash, v=v, r=r, s=s)
        check_component_shapes(cert.msg_hash, cert.v, cert.r, cert.s)
        if len(raw) != 2 + id_len + 97:
            raise MalformedCertificate("trailing bytes after certificate")
        return cert


def cert_message_hash(bidder_id: str, rft_address: bytes) -> bytes:
    material = b"tender-cert|" + rft_address + b"|" + bidder_id.encode("utf-8")
    return hashlib.sha256(material).digest()


def issue_certificate(to_private_key: bytes, bidder_id: str, rft_address: bytes) -> Certificate:
    msg_hash = cert_message_hash(bidder_id, rft_address)
    v, r, s = curve.sign_digest(int.from_bytes(to_private_key, "big"), msg_hash)
    return Certificate(bidder_id=bidder_id, msg_hash=msg_hash, v=v, r=r, s=s)


def check_component_shapes(msg_hash: bytes, v: int, r: bytes, s: bytes) -> None:
    if len(msg_hash) != 32:
        raise MalformedCertificate(f"msg_hash must be 32 bytes, got {len(msg_hash)}")
    if len(r) != 32 or len(s) != 32:
        raise MalformedCertificate(f"r/s must be 32 bytes, got {len(r)}/{len(s)}")
    if v not in (27, 28):
        raise MalformedCertificate(f"v must be 27 or 28, got {v}")


def verify_certificate(public_key: bytes, msg_hash: bytes, v: int, r: bytes, s: bytes) -> bool:
    """Recovery check of the signature components under ``public_key``.

    Malformed component shapes raise, they do not return False: garbage is a
    protocol error, a well-formed but wrong signature is a failed check.
    """
    check_component_shapes(msg_hash, v, r, s)
    return curve.verify_digest(public_key, msg_hash, v, r, s)


def certificate_matches(public_key: bytes, bidder_id: str, rft_address: bytes,
                        msg_hash: bytes, v: int, r: bytes, s: bytes) -> bool:
    """Full check: hash binds (bidder_id, rft_address) and signature verifies."""
    if not verify_certificate(public_key, msg_hash, v, r, s):
        return False
    return msg_hash == cert_message_hash(bidder_id, rft_address)


# --- sealed bid keys --------------------------------------------------------

@dataclass(frozen=True)
class SealedBidKey:
    half_a: bytes
    half_b: bytes
    total_len: int

    def combined(self) -> bytes:
        return self.half_a + self.half_b


def serialize_half(total_len: int, half: bytes) -> bytes:
    return total_len.to_bytes(4, "big") + half


def parse_half(raw: bytes) -> tuple[int, bytes]:
    if len(raw) < 4:
        raise ValueError("half too short")
    return int.from_bytes(raw[:4], "big"), raw[4:]


def new_bid_key(rng: Random | None = None) -> bytes:
    return _rand_bytes(rng, 32)


def _seal_key_material(shared_x: bytes) -> bytes:
    hkdf = HKDF(algorithm=hashes.SHA256(), length=32, salt=None, info=_SEAL_INFO)
    return hkdf.derive(shared_x)


def seal_bid_key(bid_key: bytes, to_public_key: bytes, rng: Random | None = None) -> SealedBidKey:
    eph = generate_keypair(rng)
    shared = curve.ecdh_shared_secret(eph.private_scalar, to_public_key)
    nonce = _rand_bytes(rng, _NONCE_LEN)
    ct = AESGCM(_seal_key_material(shared)).encrypt(nonce, bid_key, None)
    sealed = eph.public_key + nonce + ct
    cut = (len(sealed) + 1) // 2
    return SealedBidKey(half_a=sealed[:cut], half_b=sealed[cut:], total_len=len(sealed))


def unseal_bid_key(sealed: bytes, to_private_key: bytes) -> bytes:
    if len(sealed) < _PUB_LEN + _NONCE_LEN + _GCM_TAG_LEN:
        raise DecryptionFailed("sealed key bytes truncated")
    eph_pub = sealed[:_PUB_LEN]
    nonce = sealed[_PUB_LEN : _PUB_LEN + _NONCE_LEN]
    ct = sealed[_PUB_LEN + _NONCE_LEN :]
    try:
        shared = curve.ecdh_shared_secret(int.from_bytes(to_private_key, "big"), eph_pub)
        return AESGCM(_seal_key_material(shared)).decrypt(nonce, ct, None)
    except (ValueError, InvalidTag) as exc:
        raise DecryptionFailed(str(exc))


# --- bid document encryption ------------------------------------------------

def encrypt_bid(plaintext: bytes, bid_key: bytes, rng: Random | None = None) -> bytes:
    nonce = _rand_bytes(rng, _NONCE_LEN)
    return nonce + AESGCM(bid_key).encrypt(nonce, plaintext, None)


def decrypt_bid(ciphertext: bytes, bid_key: bytes) -> bytes:
    if len(ciphertext) < _NONCE_LEN + _GCM_TAG_LEN:
        raise AuthFailed("ciphertext truncated")
    try:
        return AESGCM(bid_key).decrypt(ciphertext[:_NONCE_LEN], ciphertext[_NONCE_LEN:], None)
    except InvalidTag:
        raise AuthFailed("ciphertext failed authentication")


# --- signed receipts (stateless-scheme acknowledgements) --------------------

def receipt_digest(bid_address: bytes) -> bytes:
    return hashlib.sha256(b"tender-ack|" + bid_address).digest()


def sign_receipt(private_key: bytes, bid_address: bytes) -> tuple[int, bytes, bytes]:
    return curve.sign_digest(int.from_bytes(private_key, "big"), receipt_digest(bid_address))


def verify_receipt(public_key: bytes, bid_address: bytes, v: int, r: bytes, s: bytes) -> bool:
    return curve.verify_digest(public_key, receipt_digest(bid_address), v, r, s)

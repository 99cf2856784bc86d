"""Minimal secp256k1 arithmetic: recoverable ECDSA and Diffie-Hellman.

Points are affine ``(x, y)`` int pairs externally and Jacobian triples
internally. Public keys travel as 64 raw bytes (X || Y, big-endian);
signatures as ``(v, r, s)`` where ``v`` is 27 or 28 and encodes the parity
of the ephemeral point so the signing key can be recovered from the
signature alone. Nonces are derived from the key and digest (HMAC-SHA256),
so signing is deterministic.
"""

from __future__ import annotations

import hashlib
import hmac

P = 2**256 - 2**32 - 977
N = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141
GX = 0x79BE667EF9DCBBAC55A06295CE870B07029BFCDB2DCE28D959F2815B16F81798
GY = 0x483ADA7726A3C4655DA4FBFC0E1108A8FD17B448A68554199C47D08FFB10D4B8

try:  # gmpy2 roughly halves field arithmetic time; plain ints work fine too
    from gmpy2 import mpz

    P = mpz(P)
    N = mpz(N)
    GX = mpz(GX)
    GY = mpz(GY)
except ImportError:
    pass

_JINF = (0, 0, 0)


def _jac_double(pt):
    X1, Y1, Z1 = pt
    if not Y1 or not Z1:
        return _JINF
    S = (4 * X1 * Y1 * Y1) % P
    M = (3 * X1 * X1) % P
    X3 = (M * M - 2 * S) % P
    Y3 = (M * (S - X3) - 8 * pow(Y1, 4, P)) % P
    Z3 = (2 * Y1 * Z1) % P
    return (X3, Y3, Z3)


def _jac_add(a, b):
    if not a[2]:
        return b
    if not b[2]:
        return a
    X1, Y1, Z1 = a
    X2, Y2, Z2 = b
    Z1Z1 = Z1 * Z1 % P
    Z2Z2 = Z2 * Z2 % P
    U1 = X1 * Z2Z2 % P
    U2 = X2 * Z1Z1 % P
    S1 = Y1 * Z2 * Z2Z2 % P
    S2 = Y2 * Z1 * Z1Z1 % P
    if U1 == U2:
        if S1 != S2:
            return _JINF
        return _jac_double(a)
    H = (U2 - U1) % P
    I = 4 * H * H % P
    J = H * I % P
    R = 2 * (S2 - S1) % P
    V = U1 * I % P
    X3 = (R * R - J - 2 * V) % P
    Y3 = (R * (V - X3) - 2 * S1 * J) % P
    Z3 = 2 * H * Z1 * Z2 % P
    return (X3, Y3, Z3)


def _to_jacobian(pt):
    if pt is None:
        return _JINF
    return (pt[0], pt[1], 1)


def _to_affine(pt):
    X, Y, Z = pt
    if not Z:
        return None
    zi = pow(Z, -1, P)
    zi2 = zi * zi % P
    return (X * zi2 % P, Y * zi2 % P * zi % P)


def _jac_mul(k, pt):
    acc = _JINF
    add = pt
    while k:
        if k & 1:
            acc = _jac_add(acc, add)
        add = _jac_double(add)
        k >>= 1
    return acc


def scalar_mult(k: int, point=None):
    """k * point in affine coordinates (generator when point is None)."""
    base = (GX, GY) if point is None else point
    return _to_affine(_jac_mul(k % N or N, _to_jacobian(base)))


def _dual_mult(u1: int, u2: int, point):
    a = _jac_add(_jac_mul(u1, _to_jacobian((GX, GY))), _jac_mul(u2, _to_jacobian(point)))
    return _to_affine(a)


def on_curve(pt) -> bool:
    if pt is None:
        return False
    x, y = pt
    return 0 < x < P and 0 < y < P and (y * y - (x * x * x + 7)) % P == 0


def point_to_bytes(pt) -> bytes:
    return int(pt[0]).to_bytes(32, "big") + int(pt[1]).to_bytes(32, "big")


def point_from_bytes(raw: bytes):
    if len(raw) != 64:
        raise ValueError("public key must be 64 bytes")
    pt = (int.from_bytes(raw[:32], "big"), int.from_bytes(raw[32:], "big"))
    if not on_curve(pt):
        raise ValueError("point not on curve")
    return pt


def public_key_bytes(private_scalar: int) -> bytes:
    return point_to_bytes(scalar_mult(private_scalar))


def _derive_nonce(private_scalar: int, digest: bytes, counter: int) -> int:
    seed = int(private_scalar).to_bytes(32, "big") + digest + counter.to_bytes(4, "big")
    k = int.from_bytes(hmac.new(seed, b"nonce", hashlib.sha256).digest(), "big") % N
    return k


def sign_digest(private_scalar: int, digest: bytes) -> tuple[int, bytes, bytes]:
    """Sign a 32-byte digest, returning (v, r, s) with recoverable v."""
    if len(digest) != 32:
        raise ValueError("digest must be 32 bytes")
    z = int.from_bytes(digest, "big")
    counter = 0
    while True:
        k = _derive_nonce(private_scalar, digest, counter)
        counter += 1
        if not 0 < k < N:
            continue
        px, py = scalar_mult(k)
        r = px % N
        if r == 0 or px >= N:
            # px >= N would need v+=2 to recover; retry keeps v in {27, 28}
            continue
        s = (pow(k, -1, N) * (z + r * private_scalar)) % N
        if s == 0:
            continue
        v = 27 + int(py & 1)
        return v, int(r).to_bytes(32, "big"), int(s).to_bytes(32, "big")


def recover_public_key(digest: bytes, v: int, r: bytes, s: bytes) -> bytes | None:
    """Recover the signing public key, or None when the triple is invalid."""
    if len(digest) != 32 or len(r) != 32 or len(s) != 32 or v not in (27, 28):
        return None
    ri = int.from_bytes(r, "big")
    si = int.from_bytes(s, "big")
    if not 0 < ri < N or not 0 < si < N:
        return None
    # Rebuild the ephemeral point from its x coordinate and parity.
    x = ri
    alpha = (pow(x, 3, P) + 7) % P
    y = pow(alpha, (P + 1) // 4, P)
    if y * y % P != alpha:
        return None
    if (y & 1) != (v - 27):
        y = P - y
    ep = (x, y)
    z = int.from_bytes(digest, "big")
    rinv = pow(ri, -1, N)
    # Q = r^-1 (s*R - z*G)
    q = _dual_mult((-z * rinv) % N, (si * rinv) % N, ep)
    if q is None or not on_curve(q):
        return None
    return point_to_bytes(q)


def verify_digest(public_key: bytes, digest: bytes, v: int, r: bytes, s: bytes) -> bool:
    recovered = recover_public_key(digest, v, r, s)
    return recovered is not None and recovered == public_key


def ecdh_shared_secret(private_scalar: int, peer_public: bytes) -> bytes:
    """x-coordinate of the shared point, 32 bytes."""
    pt = scalar_mult(private_scalar, point_from_bytes(peer_public))
    if pt is None:
        raise ValueError("degenerate shared point")
    return int(pt[0]).to_bytes(32, "big")

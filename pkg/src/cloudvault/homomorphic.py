"""Additively homomorphic public-key encryption (Paillier, g = n + 1).

Ciphertexts live in Z_{n^2}; multiplying two of them adds the underlying
plaintexts mod n, and raising one to a plaintext power scales it. Those two
facts give the full supported surface: he_add, he_sub and he_scale.
Plaintext division has no realization in this scheme and errors out rather
than silently degrading.

Encryption is probabilistic (a fresh nonce every call), decryption strips
it. Key generation is deterministic under a seeded generator so tests and
the dispatcher can replay byte-identical state. Moduli far below 2048 bits
keep the exhaustive tests fast but are toy material: such keys carry
``insecure=True`` and must never protect real data.

Negative plaintexts ride on the usual wraparound encoding centered at n // 2:
values in (-n/2, n/2] map to v mod n, and anything decrypted above the center
is read back as negative.
"""

from __future__ import annotations

import hashlib
import math
import random
import struct
from dataclasses import dataclass

MIN_KEY_BITS = 16
SECURE_KEY_BITS = 2048

_SMALL_PRIMES = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67]


class HomomorphicError(Exception):
    pass


class KeyMismatch(HomomorphicError):
    """Ciphertexts under different keys never combine."""


class UnsupportedOperation(HomomorphicError):
    """The scheme cannot express this computation."""


def _is_probable_prime(n: int, rng: random.Random) -> bool:
    if n < 2:
        return False
    for p in _SMALL_PRIMES:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    # Fixed witnesses are a proven test below 3.3e24; larger candidates get
    # extra rounds drawn from the caller's generator (still deterministic
    # under a fixed seed).
    witnesses = list(_SMALL_PRIMES)
    if n.bit_length() > 64:
        witnesses += [rng.randrange(2, n - 1) for _ in range(16)]
    for a in witnesses:
        a %= n
        if a < 2:
            continue
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = pow(x, 2, n)
            if x == n - 1:
                break
        else:
            return False
    return True


def _random_prime(bits: int, rng: random.Random) -> int:
    if bits < 2:
        raise ValueError("prime size too small")
    while True:
        candidate = rng.getrandbits(bits) | (1 << (bits - 1)) | 1
        while candidate.bit_length() == bits:
            if _is_probable_prime(candidate, rng):
                return candidate
            candidate += 2


@dataclass(frozen=True)
class PublicKey:
    """Everything needed to encrypt and to combine ciphertexts."""

    n: int

    @property
    def nsquare(self) -> int:
        return self.n * self.n

    @property
    def fingerprint(self) -> str:
        raw = self.n.to_bytes((self.n.bit_length() + 7) // 8, "big")
        return hashlib.blake2b(raw, digest_size=16).hexdigest()

    @property
    def insecure(self) -> bool:
        return self.n.bit_length() < SECURE_KEY_BITS

    @property
    def signed_max(self) -> int:
        """Largest encodable signed value; the center of the wraparound."""
        return self.n // 2


@dataclass(frozen=True)
class KeyPair:
    public: PublicKey
    p: int
    q: int

    @property
    def lam(self) -> int:
        return (self.p - 1) * (self.q - 1)

    @property
    def mu(self) -> int:
        return pow(self.lam, -1, self.public.n)


@dataclass(frozen=True)
class Ciphertext:
    """Immutable ciphertext bound to its key by fingerprint."""

    value: int
    public: PublicKey

    @property
    def fingerprint(self) -> str:
        return self.public.fingerprint


def keygen(bits: int, rng: random.Random) -> KeyPair:
    """Generate a keypair with an exactly ``bits``-long modulus.

    Deterministic for a given seeded generator. Keys below 2048 bits are
    flagged insecure on the public half.

    Raises:
        ValueError: bits below the scheme minimum of 16.
    """
    if bits < MIN_KEY_BITS:
        raise ValueError(f"modulus must be at least {MIN_KEY_BITS} bits")
    half = bits // 2
    while True:
        p = _random_prime(half, rng)
        q = _random_prime(bits - half, rng)
        if p == q:
            continue
        n = p * q
        if n.bit_length() == bits and math.gcd(n, (p - 1) * (q - 1)) == 1:
            return KeyPair(public=PublicKey(n=n), p=p, q=q)


def encrypt(key: PublicKey, plaintext: int, rng: random.Random) -> Ciphertext:
    """Encrypt a value in [0, n) under a fresh nonce.

    Two calls on the same plaintext give different ciphertexts that decrypt
    identically; equality of ciphertexts therefore reveals nothing.
    """
    n = key.n
    if not 0 <= plaintext < n:
        raise ValueError(f"plaintext {plaintext} outside [0, {n})")
    while True:
        r = rng.randrange(1, n)
        if math.gcd(r, n) == 1:
            break
    nsq = key.nsquare
    # (n + 1)^m = 1 + m*n (mod n^2), so the generator power needs no pow().
    gm = (1 + plaintext * n) % nsq
    return Ciphertext(value=(gm * pow(r, n, nsq)) % nsq, public=key)


def decrypt(keypair: KeyPair, c: Ciphertext) -> int:
    """Recover the plaintext in [0, n).

    Raises:
        KeyMismatch: ciphertext was produced under a different key.
    """
    if c.fingerprint != keypair.public.fingerprint:
        raise KeyMismatch("ciphertext is bound to a different key")
    n = keypair.public.n
    u = pow(c.value, keypair.lam, keypair.public.nsquare)
    return ((u - 1) // n) * keypair.mu % n


def _require_same_key(a: Ciphertext, b: Ciphertext) -> None:
    if a.fingerprint != b.fingerprint:
        raise KeyMismatch("ciphertexts under different keys")


def he_add(a: Ciphertext, b: Ciphertext) -> Ciphertext:
    """Ciphertext of the sum (mod n) of the two plaintexts."""
    _require_same_key(a, b)
    nsq = a.public.nsquare
    return Ciphertext(value=(a.value * b.value) % nsq, public=a.public)


def he_sub(a: Ciphertext, b: Ciphertext) -> Ciphertext:
    """Ciphertext of the difference (mod n) of the two plaintexts."""
    _require_same_key(a, b)
    nsq = a.public.nsquare
    return Ciphertext(value=(a.value * pow(b.value, -1, nsq)) % nsq, public=a.public)


def he_scale(c: Ciphertext, scalar: int) -> Ciphertext:
    """Ciphertext of scalar * plaintext (mod n); the scalar stays plain."""
    nsq = c.public.nsquare
    return Ciphertext(value=pow(c.value, scalar % c.public.n, nsq), public=c.public)


def he_div(c: Ciphertext, divisor: int) -> Ciphertext:
    """Unsupported on purpose; see the module docstring."""
    raise UnsupportedOperation(
        "division is not additively homomorphic; refusing to approximate it"
    )


def encode_signed(key: PublicKey, value: int) -> int:
    """Map a signed value into the plaintext space (wraparound at n // 2)."""
    if not -key.signed_max < value <= key.signed_max:
        raise ValueError(f"{value} outside the signed range of this key")
    return value % key.n


def decode_signed(key: PublicKey, plaintext: int) -> int:
    """Inverse of ``encode_signed`` on decrypted values."""
    if not 0 <= plaintext < key.n:
        raise ValueError("plaintext outside [0, n)")
    return plaintext if plaintext <= key.signed_max else plaintext - key.n


CIPHERTEXT_MAGIC = b"CHE1"


def serialize_ciphertext(c: Ciphertext) -> bytes:
    """Wire form: "CHE1", u8 fingerprint length, fingerprint (ascii hex),
    then the ciphertext magnitude big-endian."""
    fp = c.fingerprint.encode("ascii")
    size = max(1, (c.value.bit_length() + 7) // 8)
    return CIPHERTEXT_MAGIC + struct.pack("<B", len(fp)) + fp + c.value.to_bytes(size, "big")


def parse_ciphertext(data: bytes, key: PublicKey) -> Ciphertext:
    """Rebind serialized bytes to ``key``; refuses other keys' ciphertexts.

    Raises:
        ValueError: malformed bytes.
        KeyMismatch: fingerprint does not match ``key``.
    """
    if data[:4] != CIPHERTEXT_MAGIC:
        raise ValueError("bad ciphertext magic")
    fp_len = data[4]
    fp = data[5 : 5 + fp_len].decode("ascii")
    if fp != key.fingerprint:
        raise KeyMismatch("serialized ciphertext belongs to a different key")
    value = int.from_bytes(data[5 + fp_len :], "big")
    if value >= key.nsquare:
        raise ValueError("ciphertext value outside the key's range")
    return Ciphertext(value=value, public=key)

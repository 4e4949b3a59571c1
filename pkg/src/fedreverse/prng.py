"""Seedable, platform-stable random streams built on the ChaCha20 keystream.

Every stochastic feature of the package (noise attacks, permuted cover
selection) draws from ChaChaStream so that identical seeds reproduce
identical bytes on any platform. The derivations are fixed:

* raw stream   = ChaCha20(key, nonce=16 zero bytes) keystream
* uint64       = consecutive 8-byte little-endian words of the stream
* uniform      = (uint64 >> 11) * 2**-53, in [0, 1)
* gaussian     = Box-Muller on uniform pairs (z1 = sqrt(-2 ln(1-u1)) * cos(2*pi*u2),
                 z2 = same with sin), pairs consumed in order
* randbelow(k) = rejection sampling: draw uint64 until it is below
                 (2**64 // k) * k, then reduce mod k
* shuffle      = Fisher-Yates: a = [0..n-1]; for i = n-1 .. 1:
                 j = randbelow(i+1); swap a[i], a[j]
"""

import hashlib

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms

_ZERO_NONCE = bytes(16)
_CHUNK = 1 << 16


def stream_key(tag: str, seed: int) -> bytes:
    """Derive a 32-byte stream key from a domain tag and a 64-bit seed."""
    if not 0 <= seed < 2**64:
        raise ValueError("seed must fit in 64 bits")
    return hashlib.sha256(tag.encode() + b":" + seed.to_bytes(8, "big")).digest()


class ChaChaStream:
    """Deterministic byte/number stream from a 32-byte key."""

    def __init__(self, key: bytes):
        if len(key) != 32:
            raise ValueError("key must be exactly 32 bytes")
        enc = Cipher(algorithms.ChaCha20(key, _ZERO_NONCE), mode=None).encryptor()
        self._enc = enc
        self._buf = b""

    def take(self, n: int) -> bytes:
        while len(self._buf) < n:
            self._buf += self._enc.update(bytes(_CHUNK))
        out, self._buf = self._buf[:n], self._buf[n:]
        return out

    def uint64(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * count), dtype="<u8")

    def uniform(self, count: int) -> np.ndarray:
        return (self.uint64(count) >> np.uint64(11)) * 2.0**-53

    def gaussian(self, count: int) -> np.ndarray:
        pairs = (count + 1) // 2
        u1 = self.uniform(pairs)
        u2 = self.uniform(pairs)
        radius = np.sqrt(-2.0 * np.log1p(-u1))
        angle = 2.0 * np.pi * u2
        z = np.empty(2 * pairs)
        z[0::2] = radius * np.cos(angle)
        z[1::2] = radius * np.sin(angle)
        return z[:count]

    def randbelow(self, k: int) -> int:
        if k <= 0:
            raise ValueError("k must be positive")
        limit = (2**64 // k) * k
        while True:
            u = int.from_bytes(self.take(8), "little")
            if u < limit:
                return u % k

    def shuffled_indices(self, n: int) -> np.ndarray:
        a = np.arange(n, dtype=np.int64)
        for i in range(n - 1, 0, -1):
            j = self.randbelow(i + 1)
            a[i], a[j] = a[j], a[i]
        return a

"""Counter-based deterministic randomness.

Every draw is a pure function of its key, so unconsumed draws never shift
later ones.  This is what keeps seed-matched policy comparisons honest: two
executions that consume different subsets of the random stream still agree
on every draw they share.
"""

from __future__ import annotations

import hashlib
import struct
from typing import Sequence

_MASK64 = (1 << 64) - 1


def _digest_u64(*parts: int) -> int:
    buf = struct.pack(f">{len(parts)}Q", *(p & _MASK64 for p in parts))
    return int.from_bytes(hashlib.sha256(buf).digest()[:8], "big")


def derive_seed(master_seed: int, *parts) -> int:
    """Stable 64-bit sub-seed from a master seed and a mixed key.

    String parts are folded in by hashing their UTF-8 bytes first, so the
    key space is uniform regardless of part types.
    """
    ints = [master_seed & _MASK64]
    for p in parts:
        if isinstance(p, str):
            ints.append(int.from_bytes(
                hashlib.sha256(p.encode("utf-8")).digest()[:8], "big"))
        else:
            ints.append(int(p) & _MASK64)
    return _digest_u64(*ints)


def uniform_index(n: int, master_seed: int, *key: int) -> int:
    """Unbiased uniform draw over range(n) for a fixed counter key."""
    if n <= 0:
        raise ValueError("uniform_index needs a nonempty range")
    if n == 1:
        return 0
    limit = (1 << 64) - ((1 << 64) % n)
    salt = 0
    while True:
        r = _digest_u64(master_seed, *key, salt)
        if r < limit:
            return r % n
        salt += 1


def rand_control(master_seed: int, agent_id: int, round_index: int,
                 em_step: int, feasible: Sequence, attempt: int = 0):
    """Deterministic uniform pick among feasible controls.

    Keyed by (seed, agent, round, step[, attempt]); the attempt counter gives
    collision-mode resampling a fresh draw without disturbing other keys.
    """
    if not feasible:
        raise ValueError("rand_control requires a nonempty feasible set")
    idx = uniform_index(len(feasible), master_seed, agent_id, round_index,
                        em_step, attempt)
    return feasible[idx]

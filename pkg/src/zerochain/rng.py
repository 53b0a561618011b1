"""Counter-based random streams.

Every draw is addressed by ``(run_seed, stream, index)``: the seed and stream id
form the Philox key and the index sits in a counter word.  Any round's seed can
therefore be regenerated without replaying earlier rounds.
"""
import numpy as np

MASK64 = (1 << 64) - 1

# stream ids
ORACLE = 0
ALGORITHM = 1
INSTANCE = 2
TRIAL = 3


def check_seed(seed):
    if int(seed) != seed or not 0 <= seed <= MASK64:
        raise ValueError(f"seeds are unsigned 64-bit integers, got {seed!r}")
    return int(seed)


def stream(run_seed, stream_id, index=0):
    """Generator for block ``index`` of stream ``stream_id`` under ``run_seed``."""
    key = np.array([check_seed(run_seed), stream_id], dtype=np.uint64)
    counter = np.array([0, 0, index & MASK64, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def derive_seed(master, *path):
    """Deterministic 64-bit child seed of ``master`` along an integer path."""
    ss = np.random.SeedSequence([check_seed(master), *[int(p) & MASK64 for p in path]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])

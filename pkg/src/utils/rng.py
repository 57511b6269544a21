# -*- coding: utf-8 -*-
import numpy as np

# Counter-based streams: stream (seed, index) never depends on how many
# other streams were drawn before it, so chunked and threaded runs replay
# bit for bit.


def stream(seed, index=0):
    seed = int(seed)
    index = int(index)
    if seed < 0 or index < 0:
        raise ValueError("seed and stream index must be nonnegative")
    return np.random.Generator(np.random.Philox(key=(index << 64) | seed))


def chunk_sizes(total, chunk):
    full, rest = divmod(int(total), int(chunk))
    return [chunk] * full + ([rest] if rest else [])

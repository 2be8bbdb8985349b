"""Named, seed-derived random streams.

Each consumer of randomness gets its own generator keyed by ``(seed, name)``,
so changing how many draws one consumer makes never shifts another's stream.
"""

from __future__ import annotations

import zlib

import numpy as np

INIT_NOISE = "init-noise"
GUIDANCE_NOISE = "guidance-noise"
STEP_NOISE = "step-noise"
SYNTH = "synth"


def _key(token) -> int:
    if isinstance(token, (int, np.integer)):
        return int(token)
    return zlib.crc32(str(token).encode("utf-8"))


def rng_stream(seed: int, name: str, *extra) -> np.random.Generator:
    seed = int(seed)
    if seed < 0:
        raise ValueError(f"seed must be >= 0, got {seed}")
    return np.random.default_rng([seed, _key(name), *(_key(e) for e in extra)])

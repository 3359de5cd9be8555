"""Counter-based random number streams.

Every replication owns a Philox stream keyed by (master_seed, stream_id), so a
path is reproducible from its key alone, independent of scheduling, worker
count, or how many other replications ran first. Purpose codes partition the
stream-id space so that distinct estimators never share a stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["RngStream", "stream_id", "PURPOSE"]

# purpose code -> high bits of the stream id; blocks of 2^40 replications
PURPOSE = {
    "path": 0,
    "arl": 1,
    "delay": 2,
    "lower_bound": 3,
    "martingale": 4,
    "converge": 5,
    "calibrate": 6,
    "generic": 7,
}

_BLOCK_BITS = 40
_PURPOSE_BITS = 56


def stream_id(purpose: str, replication: int, block: int = 0) -> int:
    """Compose a 64-bit stream id from (purpose, block, replication)."""
    if replication < 0 or replication >= (1 << _BLOCK_BITS):
        raise ValueError(f"replication index out of range: {replication}")
    if block < 0 or block >= (1 << (_PURPOSE_BITS - _BLOCK_BITS)):
        raise ValueError(f"block index out of range: {block}")
    return (PURPOSE[purpose] << _PURPOSE_BITS) | (block << _BLOCK_BITS) | replication


@dataclass(frozen=True)
class RngStream:
    """A (master_seed, stream_id) pair naming one independent Philox stream."""

    master_seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        key = np.array([self.master_seed, self.stream_id], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, purpose: str, replication: int, block: int = 0) -> "RngStream":
        return RngStream(self.master_seed, stream_id(purpose, replication, block))

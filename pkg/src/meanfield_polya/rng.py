"""Counter-based uniform randomness with pure positional addressing.

Every random number the package consumes is a deterministic function of a
(seed, stream, t, position) address, realised through the Philox counter-based
generator.  Distinct addresses map to distinct counter words, so replicas and
time steps can be sampled in any order, in parallel, or re-drawn in isolation
and always produce the same values.
"""

from dataclasses import dataclass

import numpy as np
from numpy.random import Philox
from scipy.special import ndtri

# Stream ids keep independent uses of randomness on disjoint counter lanes.
DYNAMICS_STREAM = 0
GAUSSIAN_STREAM = 1

_U64 = np.uint64
_INV_2_53 = 2.0 ** -53


@dataclass(frozen=True)
class UniformSource:
    """Addressable source of i.i.d. uniforms on [0, 1).

    The value at flat position ``k`` of step ``t`` is word ``k`` of the Philox
    stream keyed by (seed, stream) with counter (k // 4, 0, t, stream), mapped
    to a double as ``(word >> 11) * 2**-53``.  Urn ``i`` of replica ``r`` owns
    position ``r * n_urns + i``, which depends only on the address, never on
    how many replicas or urns are drawn in one batch.
    """

    seed: int
    stream: int = DYNAMICS_STREAM

    def _raw(self, t: int, start: int, count: int) -> np.ndarray:
        q, rem = divmod(int(start), 4)
        key = np.array([self.seed & 0xFFFFFFFFFFFFFFFF, self.stream], dtype=_U64)
        counter = np.array([q, 0, int(t), self.stream], dtype=_U64)
        words = Philox(key=key, counter=counter).random_raw(rem + int(count))
        return words[rem:]

    def uniform_block(self, t: int, start: int, count: int) -> np.ndarray:
        """Uniforms on [0, 1) at positions start .. start+count-1 of step t."""
        return (self._raw(t, start, count) >> _U64(11)) * _INV_2_53

    def uniform_at(self, t: int, replica: int, urn: int, n_urns: int) -> float:
        """Single uniform at the (t, replica, urn) address."""
        return float(self.uniform_block(t, replica * n_urns + urn, 1)[0])

    def step_uniforms(self, t: int, n_urns: int, replica_lo: int, replica_hi: int) -> np.ndarray:
        """Uniform matrix (replicas, urns) for one step of a replica range."""
        count = (replica_hi - replica_lo) * n_urns
        block = self.uniform_block(t, replica_lo * n_urns, count)
        return block.reshape(replica_hi - replica_lo, n_urns)

    def normal_block(self, t: int, start: int, count: int) -> np.ndarray:
        """Standard normals via the inverse normal CDF of addressed uniforms.

        Uses the centered 53-bit lattice (word >> 11 + 1/2) * 2**-53 so the
        uniforms lie strictly inside (0, 1) and ndtri is always finite.
        """
        u = ((self._raw(t, start, count) >> _U64(11)) + 0.5) * _INV_2_53
        return ndtri(u)

    def with_stream(self, stream: int) -> "UniformSource":
        return UniformSource(seed=self.seed, stream=stream)

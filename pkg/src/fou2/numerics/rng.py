"""Counter-based, stream-splittable standard normal source."""

from dataclasses import dataclass

import numpy as np
from scipy import special as _sc

from ..exceptions import DomainError

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    """A reproducible stream of N(0, 1) draws keyed by ``(seed, stream)``.

    Uniforms come from the Philox4x64 counter-based generator, keyed by the pair
    and with the counter's top word used as a block selector; normals are the
    inverse-CDF transform of uniforms placed at bin centres of a 2**-53 lattice,
    so they never hit 0 or 1.  The object holds no state: equal arguments give
    bitwise-equal arrays, and distinct blocks are non-overlapping substreams.
    """

    seed: int
    stream: int = 0

    def __post_init__(self):
        if not (isinstance(self.seed, (int, np.integer)) and 0 <= self.seed <= _MASK64):
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if not (isinstance(self.stream, (int, np.integer)) and 0 <= self.stream <= _MASK64):
            raise DomainError(f"stream index must be a non-negative 64-bit integer, got {self.stream!r}")

    def _bitgen(self, block):
        key = (int(self.stream) << 64) | int(self.seed)
        return np.random.Philox(key=key, counter=[0, 0, 0, int(block)])

    def uniforms(self, n, block=0):
        raw = self._bitgen(block).random_raw(int(n)) >> np.uint64(11)
        return (raw.astype(np.float64) + 0.5) * 2.0 ** -53

    def normals(self, n, block=0):
        """First ``n`` standard normal draws of substream ``block``."""
        return _sc.ndtri(self.uniforms(n, block))

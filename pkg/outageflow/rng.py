from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

STREAM_NAMES: Tuple[str, ...] = ("network", "population", "attempts", "outcomes", "substitution", "withdrawals")


def stream_seed(master_seed: int, name: str) -> np.random.SeedSequence:
    """Seed material for one named stream.

    The derivation is part of the output contract: ``SeedSequence([master_seed,
    crc32(name)])`` feeding a PCG64 generator. Any reimplementation using the
    same rule reproduces every draw.
    """
    return np.random.SeedSequence([int(master_seed), zlib.crc32(name.encode("utf-8"))])


@dataclass
class RngStreams:
    master_seed: int
    generators: Dict[str, np.random.Generator] = field(default_factory=dict)

    @classmethod
    def from_seed(cls, master_seed: int) -> "RngStreams":
        gens = {name: np.random.Generator(np.random.PCG64(stream_seed(master_seed, name))) for name in STREAM_NAMES}
        return cls(master_seed=int(master_seed), generators=gens)

    def __getitem__(self, name: str) -> np.random.Generator:
        return self.generators[name]

    @property
    def network(self) -> np.random.Generator:
        return self.generators["network"]

    @property
    def population(self) -> np.random.Generator:
        return self.generators["population"]

    @property
    def attempts(self) -> np.random.Generator:
        return self.generators["attempts"]

    @property
    def outcomes(self) -> np.random.Generator:
        return self.generators["outcomes"]

    @property
    def substitution(self) -> np.random.Generator:
        return self.generators["substitution"]

    @property
    def withdrawals(self) -> np.random.Generator:
        return self.generators["withdrawals"]

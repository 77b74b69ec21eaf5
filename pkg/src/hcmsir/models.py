"""Network models: a subgraph set plus per-orbit hyperstub count marginals.

A marginal is attached to an orbit of a subgraph and describes how many
hyperstubs of that orbit a node carries. Three families cover everything
used here: plain Poisson counts, Poisson counts scaled by an integer (the
"2Pois(2)" null construction), and exact deterministic counts.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .subgraphs import (LIBRARY, OrbitKey, PositionIndex, Subgraph,
                        SubgraphError, build_position_index)


@dataclass(frozen=True)
class Poisson:
    rate: float

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError(f"Poisson rate must be >= 0, got {self.rate}")

    mean = property(lambda self: self.rate)
    var = property(lambda self: self.rate)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.poisson(self.rate, size)


@dataclass(frozen=True)
class ScaledPoisson:
    """Count = scale * K with K ~ Poisson(rate); only multiples occur."""

    scale: int
    rate: float

    def __post_init__(self):
        if self.scale < 1 or int(self.scale) != self.scale:
            raise ValueError("scale must be a positive integer")
        if self.rate < 0:
            raise ValueError(f"Poisson rate must be >= 0, got {self.rate}")

    mean = property(lambda self: self.scale * self.rate)
    var = property(lambda self: self.scale ** 2 * self.rate)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.scale * rng.poisson(self.rate, size)


@dataclass(frozen=True)
class ExactCount:
    count: int

    def __post_init__(self):
        if self.count < 0 or int(self.count) != self.count:
            raise ValueError("count must be a nonnegative integer")

    mean = property(lambda self: float(self.count))
    var = property(lambda self: 0.0)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.full(size, self.count, dtype=np.int64)


Marginal = Poisson | ScaledPoisson | ExactCount


@dataclass(frozen=True)
class NetworkModel:
    """Generative specification: subgraphs and one marginal per orbit."""

    subgraphs: tuple[Subgraph, ...]
    marginals: dict[OrbitKey, Marginal]

    def __post_init__(self):
        if not self.subgraphs:
            if self.marginals:
                raise SubgraphError("marginals given without subgraphs")
            return
        index = self.index
        keys = set(index.orbit_keys())
        given = set(self.marginals)
        missing = keys - given
        if missing:
            raise SubgraphError(f"missing marginals for orbits {sorted(missing)}")
        extra = given - keys
        if extra:
            raise SubgraphError(f"marginals for unknown orbits {sorted(extra)}")

    @cached_property
    def index(self) -> PositionIndex:
        return build_position_index(list(self.subgraphs))

    def marginal(self, key: OrbitKey) -> Marginal:
        return self.marginals[key]


def single_orbit_model(subgraph: Subgraph, marginal: Marginal) -> NetworkModel:
    """Model with one subgraph whose every orbit carries the same marginal."""
    index = build_position_index([subgraph])
    return NetworkModel((subgraph,),
                        {k: marginal for k in index.orbit_keys()})


def mixture_model(parts: list[tuple[Subgraph, Marginal]]) -> NetworkModel:
    """Model from (subgraph, marginal) pairs; one marginal for all orbits
    of each subgraph."""
    subgraphs = tuple(s for s, _ in parts)
    index = build_position_index(list(subgraphs))
    marginals: dict[OrbitKey, Marginal] = {}
    by_id = {s.id: m for s, m in parts}
    for key in index.orbit_keys():
        marginals[key] = by_id[key[0]]
    return NetworkModel(subgraphs, marginals)


# Clustered mixtures with identical mean degree 4, degree variance 8 and
# global clustering 0.2, realised with complete subgraphs of growing size.
def model_1() -> NetworkModel:
    return single_orbit_model(LIBRARY["triangle"], Poisson(2.0))


def model_2() -> NetworkModel:
    return mixture_model([(LIBRARY["edge"], Poisson(2.0)),
                          (LIBRARY["k4"], Poisson(2 / 3))])


def model_3() -> NetworkModel:
    return mixture_model([(LIBRARY["edge"], Poisson(8 / 3)),
                          (LIBRARY["k5"], Poisson(1 / 3))])


def model_4() -> NetworkModel:
    return mixture_model([(LIBRARY["edge"], Poisson(3.0)),
                          (LIBRARY["k6"], Poisson(0.2))])


# Cycle family: identical classical degree distribution 2*Pois(2), cycles of
# growing length, plus the randomly wired null case.
def null_model() -> NetworkModel:
    return single_orbit_model(LIBRARY["edge"], ScaledPoisson(2, 2.0))


def model_c1() -> NetworkModel:
    return model_1()


def model_c2() -> NetworkModel:
    return single_orbit_model(LIBRARY["square"], Poisson(2.0))


def model_c3() -> NetworkModel:
    return single_orbit_model(LIBRARY["pentagon"], Poisson(2.0))


def model_c4() -> NetworkModel:
    return single_orbit_model(LIBRARY["hexagon"], Poisson(2.0))


def null_model_hex() -> NetworkModel:
    """Random-wiring counterpart of model 4: degree ~ Pois(3) + 5*Pois(1/5)."""
    return mixture_model([
        (LIBRARY["edge"], Poisson(3.0)),
        (LIBRARY["edge"].renamed("edge5"), ScaledPoisson(5, 0.2)),
    ])


PRESET_MODELS = {
    "model1": model_1,
    "model2": model_2,
    "model3": model_3,
    "model4": model_4,
    "null": null_model,
    "c1": model_c1,
    "c2": model_c2,
    "c3": model_c3,
    "c4": model_c4,
    "null_hex": null_model_hex,
}

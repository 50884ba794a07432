import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from gebo_package.errors import (
    BadBounds,
    BadCardinality,
    DuplicateName,
    EmptySpace,
    InvalidConfiguration,
)

DISCRETE = "discrete"
CONTINUOUS = "continuous"

Value = Union[int, float]


@dataclass(frozen=True)
class VariableSpec:
    name: str
    kind: str
    cardinality: Optional[int] = None
    bounds: Optional[Tuple[float, float]] = None

    @property
    def is_discrete(self) -> bool:
        return self.kind == DISCRETE

    @property
    def feature_size(self) -> int:
        """Width of the raw node feature (one-hot length or 1)."""
        return int(self.cardinality) if self.is_discrete else 1

    def to_dict(self) -> Dict[str, Any]:
        if self.is_discrete:
            return {"name": self.name, "kind": DISCRETE, "cardinality": int(self.cardinality)}
        return {"name": self.name, "kind": CONTINUOUS, "bounds": [float(self.bounds[0]), float(self.bounds[1])]}

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "VariableSpec":
        kind = payload.get("kind")
        if kind == DISCRETE:
            return cls(name=str(payload["name"]), kind=DISCRETE, cardinality=payload.get("cardinality"))
        if kind == CONTINUOUS:
            bounds = payload.get("bounds")
            if bounds is None or len(bounds) != 2:
                raise BadBounds(f"variable '{payload.get('name')}' needs two bounds")
            return cls(name=str(payload["name"]), kind=CONTINUOUS, bounds=(float(bounds[0]), float(bounds[1])))
        raise InvalidConfiguration(f"unknown variable kind {kind!r}")


def discrete(name: str, cardinality: int) -> VariableSpec:
    return VariableSpec(name=name, kind=DISCRETE, cardinality=cardinality)


def continuous(name: str, lo: float, hi: float) -> VariableSpec:
    return VariableSpec(name=name, kind=CONTINUOUS, bounds=(float(lo), float(hi)))


@dataclass(frozen=True)
class MixedSpace:
    """
    Ordered declaration of the variables of a mixed search space.

    The position of a variable is its node index in every molded graph.
    """

    variables: Tuple[VariableSpec, ...]
    _index: Dict[str, int] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "_index", {v.name: i for i, v in enumerate(self.variables)})

    @property
    def dim(self) -> int:
        return len(self.variables)

    @property
    def names(self) -> List[str]:
        return [v.name for v in self.variables]

    @property
    def discrete_indices(self) -> List[int]:
        return [i for i, v in enumerate(self.variables) if v.is_discrete]

    @property
    def continuous_indices(self) -> List[int]:
        return [i for i, v in enumerate(self.variables) if not v.is_discrete]

    @property
    def feature_sizes(self) -> List[int]:
        return [v.feature_size for v in self.variables]

    @property
    def flat_size(self) -> int:
        """Σ n_i + k_c, the width of the decoder output."""
        return int(sum(self.feature_sizes))

    def index_of(self, name: str) -> int:
        return self._index[name]

    def to_dict(self) -> Dict[str, Any]:
        return {"variables": [v.to_dict() for v in self.variables]}

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "MixedSpace":
        space = cls(tuple(VariableSpec.from_dict(v) for v in payload.get("variables", [])))
        validate(space)
        return space


@dataclass(frozen=True)
class Configuration:
    values: Tuple[Value, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, item):
        return self.values[item]

    def to_dict(self) -> Dict[str, List[Value]]:
        return {"values": list(self.values)}

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "Configuration":
        return cls(tuple(payload["values"]))


def validate(space: MixedSpace) -> None:
    """
    Checks the invariants of a space declaration.

    Args:
        space (MixedSpace): Space to check.

    Raises:
        EmptySpace: Fewer than two variables.
        BadBounds: Continuous bounds not finite or hi <= lo.
        BadCardinality: Discrete cardinality below 2.
        DuplicateName: Two variables share a name.
    """
    if space.dim < 2:
        raise EmptySpace(f"a mixed space needs at least 2 variables, got {space.dim}")

    seen = set()
    for var in space.variables:
        if var.name in seen:
            raise DuplicateName(f"variable name '{var.name}' is declared twice")
        seen.add(var.name)

        if var.is_discrete:
            n = var.cardinality
            if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 2:
                raise BadCardinality(f"variable '{var.name}' needs an integer cardinality >= 2, got {n!r}")
        elif var.kind == "continuous":
            lo, hi = var.bounds
            if not (math.isfinite(lo) and math.isfinite(hi)) or hi - lo <= 0:
                raise BadBounds(f"variable '{var.name}' has invalid bounds [{lo}, {hi}]")
        else:
            raise InvalidConfiguration(f"variable '{var.name}' has unknown kind {var.kind!r}")


def load_space(path: Union[str, Path]) -> MixedSpace:
    with open(path, "r", encoding="utf-8") as f:
        return MixedSpace.from_dict(json.load(f))


def check_configuration(cfg: Configuration, space: MixedSpace) -> None:
    """
    Raises InvalidConfiguration unless every value lies in its variable's domain.
    """
    if len(cfg) != space.dim:
        raise InvalidConfiguration(f"expected {space.dim} values, got {len(cfg)}")

    for var, value in zip(space.variables, cfg.values):
        if var.is_discrete:
            if isinstance(value, bool) or not float(value).is_integer():
                raise InvalidConfiguration(f"'{var.name}' expects an index, got {value!r}")
            if not 0 <= int(value) < var.cardinality:
                raise InvalidConfiguration(f"'{var.name}' index {value} outside [0, {var.cardinality})")
        else:
            lo, hi = var.bounds
            if not math.isfinite(float(value)) or not lo <= float(value) <= hi:
                raise InvalidConfiguration(f"'{var.name}' value {value} outside [{lo}, {hi}]")


def encode_features(cfg: Configuration, space: MixedSpace) -> List[np.ndarray]:
    """
    Builds the raw per-node features of a configuration.

    Discrete nodes become one-hot rows of length n_i, continuous nodes a single
    value unit-scaled by the variable bounds.

    Args:
        cfg (Configuration): Configuration valid for `space`.
        space (MixedSpace): The search space.

    Returns:
        List[np.ndarray]: One feature vector per node, in variable order.
    """
    check_configuration(cfg, space)

    features = []
    for var, value in zip(space.variables, cfg.values):
        if var.is_discrete:
            row = np.zeros(var.cardinality)
            row[int(value)] = 1.0
        else:
            lo, hi = var.bounds
            row = np.array([(float(value) - lo) / (hi - lo)])
        features.append(row)
    return features


def feature_blocks(configs: Sequence[Configuration], space: MixedSpace) -> List[np.ndarray]:
    """
    Stacks the node features of a batch: one (B, n_i) block per variable.
    """
    per_config = [encode_features(cfg, space) for cfg in configs]
    return [np.stack([feats[i] for feats in per_config]) for i in range(space.dim)]


def flat_features(configs: Sequence[Configuration], space: MixedSpace) -> np.ndarray:
    """Reconstruction targets laid out like the decoder output, shape (B, Σ n_i + k_c)."""
    return np.concatenate(feature_blocks(configs, space), axis=1)


def sample_uniform(space: MixedSpace, rng: np.random.Generator) -> Configuration:
    """
    Draws one configuration uniformly from the space.

    Args:
        space (MixedSpace): Space to sample.
        rng (np.random.Generator): Caller-owned random stream.

    Returns:
        Configuration: Sampled configuration.
    """
    values: List[Value] = []
    for var in space.variables:
        if var.is_discrete:
            values.append(int(rng.integers(0, var.cardinality)))
        else:
            lo, hi = var.bounds
            values.append(float(rng.uniform(lo, hi)))
    return Configuration(tuple(values))

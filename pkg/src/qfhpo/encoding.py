"""Mapping between native hyperparameter values and circuit inputs in ``[0, pi]``.

Continuous and discrete dimensions occupy one input each and are mapped
affinely onto ``[0, pi]`` (continuous dimensions may opt into a log10 scale).
A categorical dimension with ``c`` categories occupies ``ceil(log2 c)`` inputs:
the category index is written in binary, most significant bit first, and each
bit is placed at ``0`` or ``pi``. Decoding thresholds those inputs at ``pi/2``;
unused bit patterns clamp to the last category so that every point of
``[0, pi]^d`` decodes to a valid assignment.

Search spaces are stored as YAML::

    dimensions:
      - name: alpha
        kind: continuous
        low: 0.0001
        high: 1.0
        log: true
      - name: max_iter
        kind: discrete
        low: 10
        high: 50
        step: 10
      - name: solver
        kind: categorical
        categories: [direct, gradient]
"""
from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List, Mapping, Optional, Sequence, Union

import numpy as np
import yaml

from .errors import DomainError, IncompleteAssignmentError
from .simulator import MAX_QUBITS

KINDS = ("continuous", "discrete", "categorical")
DECODE_TOL = 1e-9
_LATTICE_TOL = 1e-9

Assignment = Dict[str, Any]


@dataclass(frozen=True)
class DimensionSpec:
    name: str
    kind: str
    low: Optional[float] = None
    high: Optional[float] = None
    step: Optional[float] = None
    categories: tuple = ()
    log: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"{self.name}: kind must be one of {KINDS}, got {self.kind!r}")
        if self.kind == "categorical":
            cats = tuple(self.categories)
            object.__setattr__(self, "categories", cats)
            if not cats:
                raise ValueError(f"{self.name}: categories must be non-empty")
            if len(set(cats)) != len(cats):
                raise ValueError(f"{self.name}: categories must be unique")
            return
        for attr in ("low", "high", "step"):
            if getattr(self, attr) is not None:
                object.__setattr__(self, attr, float(getattr(self, attr)))
        if self.low is None or self.high is None or not self.low < self.high:
            raise ValueError(f"{self.name}: need low < high, got {self.low}, {self.high}")
        if self.kind == "discrete":
            if self.step is None or not self.step > 0:
                raise ValueError(f"{self.name}: discrete dimension needs step > 0")
            if self.log:
                raise ValueError(f"{self.name}: log scale applies to continuous dimensions only")
        if self.log and self.low <= 0:
            raise ValueError(f"{self.name}: log scale needs low > 0")

    @property
    def width(self) -> int:
        if self.kind == "categorical":
            return math.ceil(math.log2(len(self.categories)))
        return 1

    @property
    def n_lattice(self) -> int:
        """Number of lattice values (discrete) or categories (categorical)."""
        if self.kind == "discrete":
            return int(math.floor((self.high - self.low) / self.step + _LATTICE_TOL)) + 1
        if self.kind == "categorical":
            return len(self.categories)
        raise ValueError(f"{self.name}: continuous dimensions have no lattice")

    def lattice_value(self, k: int):
        value = round(self.low + k * self.step, 12)
        if _is_integral(self.low) and _is_integral(self.step):
            return int(round(value))
        return value

    def lattice(self) -> list:
        if self.kind == "categorical":
            return list(self.categories)
        return [self.lattice_value(k) for k in range(self.n_lattice)]

    def to_dict(self) -> dict:
        out: Dict[str, Any] = {"name": self.name, "kind": self.kind}
        if self.kind == "categorical":
            out["categories"] = list(self.categories)
        else:
            out["low"] = self.low
            out["high"] = self.high
            if self.kind == "discrete":
                out["step"] = self.step
            if self.log:
                out["log"] = True
        return out

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "DimensionSpec":
        unknown = set(d) - {"name", "kind", "low", "high", "step", "categories", "log"}
        if unknown:
            raise ValueError(f"unknown dimension keys: {sorted(unknown)}")
        return cls(
            name=str(d["name"]),
            kind=d["kind"],
            low=None if d.get("low") is None else float(d["low"]),
            high=None if d.get("high") is None else float(d["high"]),
            step=None if d.get("step") is None else float(d["step"]),
            categories=tuple(str(c) for c in d.get("categories", ())),
            log=bool(d.get("log", False)),
        )


def _is_integral(v: float) -> bool:
    return float(v).is_integer()


@dataclass(frozen=True)
class SearchSpace:
    dims: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(self.dims))
        names = [d.name for d in self.dims]
        if len(set(names)) != len(names):
            raise ValueError("dimension names must be unique")
        if self.width > MAX_QUBITS:
            raise DomainError(
                f"encoded width {self.width} exceeds simulator capacity of {MAX_QUBITS} qubits"
            )

    @property
    def width(self) -> int:
        return sum(d.width for d in self.dims)

    @property
    def names(self) -> List[str]:
        return [d.name for d in self.dims]

    def __getitem__(self, name: str) -> DimensionSpec:
        for d in self.dims:
            if d.name == name:
                return d
        raise KeyError(name)

    def slices(self) -> Dict[str, slice]:
        """Positions each dimension occupies in the encoded vector."""
        out, start = {}, 0
        for d in self.dims:
            out[d.name] = slice(start, start + d.width)
            start += d.width
        return out

    def column_names(self) -> List[str]:
        cols = []
        for d in self.dims:
            if d.width == 1 and d.kind != "categorical":
                cols.append(d.name)
            else:
                cols.extend(f"{d.name}_bit{j}" for j in range(d.width))
        return cols

    def to_dict(self) -> dict:
        return {"dimensions": [d.to_dict() for d in self.dims]}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "SearchSpace":
        return cls(tuple(DimensionSpec.from_dict(x) for x in d["dimensions"]))

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=False))

    @classmethod
    def load(cls, path: Union[str, Path]) -> "SearchSpace":
        return cls.from_dict(yaml.safe_load(Path(path).read_text()))

    def lattice_size(self) -> int:
        return math.prod(d.n_lattice for d in self.dims)

    def iter_lattice(self) -> Iterator[Assignment]:
        """Every assignment of a space without continuous dimensions."""
        if any(d.kind == "continuous" for d in self.dims):
            raise ValueError("continuous dimensions have no finite lattice")
        for combo in itertools.product(*(d.lattice() for d in self.dims)):
            yield dict(zip(self.names, combo))


def _unit(dim: DimensionSpec, v: float) -> float:
    if dim.log:
        return (math.log10(v) - math.log10(dim.low)) / (math.log10(dim.high) - math.log10(dim.low))
    return (v - dim.low) / (dim.high - dim.low)


def _from_unit(dim: DimensionSpec, u: float) -> float:
    if dim.log:
        lo, hi = math.log10(dim.low), math.log10(dim.high)
        return 10 ** (lo + u * (hi - lo))
    return dim.low + u * (dim.high - dim.low)


def category_bits(index: int, width: int) -> List[int]:
    return [(index >> (width - 1 - j)) & 1 for j in range(width)]


def encode(space: SearchSpace, assignment: Mapping[str, Any]) -> np.ndarray:
    """Native assignment -> encoded vector of length ``space.width`` in ``[0, pi]``."""
    missing = [n for n in space.names if n not in assignment]
    if missing:
        raise IncompleteAssignmentError(f"assignment lacks dimensions {missing}")
    out: List[float] = []
    for dim in space.dims:
        v = assignment[dim.name]
        if dim.kind == "categorical":
            if v not in dim.categories:
                raise DomainError(f"{dim.name}: {v!r} is not one of {list(dim.categories)}")
            out.extend(np.pi * b for b in category_bits(dim.categories.index(v), dim.width))
            continue
        v = float(v)
        if not dim.low <= v <= dim.high:
            raise DomainError(f"{dim.name}: {v} outside [{dim.low}, {dim.high}]")
        if dim.kind == "discrete":
            k = (v - dim.low) / dim.step
            if abs(k - round(k)) > 1e-6:
                raise DomainError(f"{dim.name}: {v} is not on the lattice of step {dim.step}")
        out.append(np.pi * _unit(dim, v))
    return np.array(out, dtype=float)


def decode(space: SearchSpace, point: Sequence[float]) -> Assignment:
    """Encoded vector -> native assignment; total on ``[0, pi]^d``."""
    x = np.asarray(point, dtype=float)
    if x.shape != (space.width,):
        raise DomainError(f"expected {space.width} components, got shape {x.shape}")
    if np.any(~np.isfinite(x)) or np.any(x < -DECODE_TOL) or np.any(x > np.pi + DECODE_TOL):
        raise DomainError(f"components must lie in [0, pi], got {x}")
    x = np.clip(x, 0.0, np.pi)
    out: Assignment = {}
    for dim, sl in zip(space.dims, space.slices().values()):
        comp = x[sl]
        if dim.kind == "categorical":
            index = 0
            for c in comp:
                index = (index << 1) | int(c >= np.pi / 2)
            out[dim.name] = dim.categories[min(index, len(dim.categories) - 1)]
            continue
        v = _from_unit(dim, float(comp[0]) / np.pi)
        if dim.kind == "continuous":
            out[dim.name] = min(max(v, dim.low), dim.high)
        else:
            # half-up rounding onto the lattice
            k = math.floor((v - dim.low) / dim.step + 0.5)
            out[dim.name] = dim.lattice_value(min(max(k, 0), dim.n_lattice - 1))
    return out


def normalize_score(raw, lo: float, hi: float):
    """Affine map of raw scores onto ``[-1, 1]`` (``lo -> -1``, ``hi -> +1``)."""
    if not hi > lo:
        raise DomainError(f"need hi > lo, got lo={lo}, hi={hi}")
    if np.ndim(raw):
        return 2.0 * (np.asarray(raw, dtype=float) - lo) / (hi - lo) - 1.0
    return 2.0 * (float(raw) - lo) / (hi - lo) - 1.0


def denormalize_score(y, lo: float, hi: float):
    if not hi > lo:
        raise DomainError(f"need hi > lo, got lo={lo}, hi={hi}")
    if np.ndim(y):
        return (np.asarray(y, dtype=float) + 1.0) * (hi - lo) / 2.0 + lo
    return (float(y) + 1.0) * (hi - lo) / 2.0 + lo


def sample_uniform(space: SearchSpace, n: int, rng: np.random.Generator) -> List[Assignment]:
    """Draw ``n`` assignments uniformly (log-uniformly for log dimensions)."""
    out = []
    for _ in range(n):
        a: Assignment = {}
        for dim in space.dims:
            if dim.kind == "continuous":
                a[dim.name] = _from_unit(dim, float(rng.uniform()))
            elif dim.kind == "discrete":
                a[dim.name] = dim.lattice_value(int(rng.integers(dim.n_lattice)))
            else:
                a[dim.name] = dim.categories[int(rng.integers(len(dim.categories)))]
        out.append(a)
    return out


def grid_values(dim: DimensionSpec, count: int) -> list:
    """``count`` evenly spread values of ``dim`` (all categories for categoricals)."""
    if dim.kind == "categorical":
        return list(dim.categories)
    if count < 1:
        raise ValueError("count must be >= 1")
    if dim.kind == "continuous":
        if count == 1:
            return [_from_unit(dim, 0.5)]
        return [_from_unit(dim, u) for u in np.linspace(0.0, 1.0, count)]
    n = dim.n_lattice
    if count >= n:
        return dim.lattice()
    ks = sorted(set(int(round(k)) for k in np.linspace(0, n - 1, count)))
    return [dim.lattice_value(k) for k in ks]


def grid_assignments(space: SearchSpace, counts: Mapping[str, int]) -> List[Assignment]:
    """Cartesian grid with ``counts[name]`` values per non-categorical dimension."""
    axes = []
    for dim in space.dims:
        if dim.kind == "categorical":
            axes.append(grid_values(dim, len(dim.categories)))
        else:
            axes.append(grid_values(dim, int(counts[dim.name])))
    return [dict(zip(space.names, combo)) for combo in itertools.product(*axes)]


def counts_for_budget(space: SearchSpace, budget: int) -> Dict[str, int]:
    """Largest uniform per-axis resolution whose grid fits in ``budget`` points.

    Categorical axes always keep every category; discrete axes never exceed
    their lattice size.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")

    def size(r: int) -> int:
        total = 1
        for dim in space.dims:
            if dim.kind == "categorical":
                total *= len(dim.categories)
            elif dim.kind == "discrete":
                total *= min(r, dim.n_lattice)
            else:
                total *= r
        return total

    r = 1
    limit = max([dim.n_lattice for dim in space.dims if dim.kind == "discrete"] + [budget])
    while r < limit and size(r + 1) <= budget:
        r += 1
    return {d.name: (min(r, d.n_lattice) if d.kind == "discrete" else r)
            for d in space.dims if d.kind != "categorical"}

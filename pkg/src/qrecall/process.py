"""Sequential processes, information structures and joint distributions.

Outcome tuples are indexed lexicographically with stage 1 most significant,
i.e. C order on the tensor of shape ``alphabet_sizes``. A prefix of length
``k - 1`` is indexed the same way over ``alphabet_sizes[:k-1]``.

Stages are numbered from 1 wherever a function takes a stage argument; the
per-stage containers themselves are ordinary 0-based sequences.
"""

from __future__ import annotations

import itertools
from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from math import prod

import numpy as np

from .constants import PROB_TOL
from .errors import NegativityError, NormalizationError, StructureError

GENERATORS = ("constant", "perfect-recall")


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ProcessSpec:
    """Stage alphabets plus the info-label map of every stage.

    ``info_maps[k]`` is an integer array with one entry per prefix of stage
    ``k + 1`` (so stage 1 has a single entry for the empty prefix).
    """

    alphabet_sizes: tuple[int, ...]
    info_maps: tuple[np.ndarray, ...]
    info_label_counts: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(a) for a in self.alphabet_sizes)
        if not sizes:
            raise StructureError("a process needs at least one stage")
        if any(a < 1 for a in sizes):
            raise StructureError(f"alphabet sizes must be >= 1, got {list(sizes)}")
        if len(self.info_maps) != len(sizes) or len(self.info_label_counts) != len(sizes):
            raise StructureError(
                f"expected {len(sizes)} info maps and label counts, got "
                f"{len(self.info_maps)} and {len(self.info_label_counts)}"
            )
        maps = []
        for k, (m, count) in enumerate(zip(self.info_maps, self.info_label_counts)):
            m = np.asarray(m)
            if m.dtype.kind not in "iu":
                raise StructureError(f"stage {k + 1}: info labels must be integers")
            expected = prod(sizes[:k])
            if m.shape != (expected,):
                raise StructureError(
                    f"stage {k + 1}: info map must cover {expected} prefixes, got shape {m.shape}"
                )
            if count < 1:
                raise StructureError(f"stage {k + 1}: label count must be >= 1")
            if m.size and (m.min() < 0 or m.max() >= count):
                raise StructureError(
                    f"stage {k + 1}: labels must lie in 0..{count - 1}, got range "
                    f"{int(m.min())}..{int(m.max())}"
                )
            maps.append(_frozen(m.astype(np.int64)))
        object.__setattr__(self, "alphabet_sizes", sizes)
        object.__setattr__(self, "info_maps", tuple(maps))
        object.__setattr__(self, "info_label_counts", tuple(int(c) for c in self.info_label_counts))

    @classmethod
    def from_generators(cls, alphabet_sizes: Sequence[int], generators: Sequence[str]) -> ProcessSpec:
        """Expand named generators (``constant`` / ``perfect-recall``) per stage."""
        sizes = tuple(int(a) for a in alphabet_sizes)
        if len(generators) != len(sizes):
            raise StructureError(f"expected {len(sizes)} generators, got {len(generators)}")
        maps, counts = [], []
        for k, gen in enumerate(generators):
            n_prefix = prod(sizes[:k])
            if gen == "constant":
                maps.append(np.zeros(n_prefix, dtype=np.int64))
                counts.append(1)
            elif gen == "perfect-recall":
                maps.append(np.arange(n_prefix, dtype=np.int64))
                counts.append(n_prefix)
            else:
                raise StructureError(f"stage {k + 1}: unknown generator {gen!r}; valid: {list(GENERATORS)}")
        return cls(sizes, tuple(maps), tuple(counts))

    @classmethod
    def perfect_recall(cls, alphabet_sizes: Sequence[int]) -> ProcessSpec:
        return cls.from_generators(alphabet_sizes, ["perfect-recall"] * len(alphabet_sizes))

    @classmethod
    def oblivious(cls, alphabet_sizes: Sequence[int]) -> ProcessSpec:
        return cls.from_generators(alphabet_sizes, ["constant"] * len(alphabet_sizes))

    @property
    def n(self) -> int:
        return len(self.alphabet_sizes)

    @property
    def n_outcomes(self) -> int:
        return prod(self.alphabet_sizes)

    def prefix_count(self, k: int) -> int:
        """Number of prefixes seen by stage ``k`` (1-based)."""
        return prod(self.alphabet_sizes[: k - 1])

    def prefixes(self, k: int) -> Iterator[tuple[int, ...]]:
        """Prefixes of stage ``k`` in index order."""
        return itertools.product(*(range(a) for a in self.alphabet_sizes[: k - 1]))

    def prefix_index(self, prefix: Sequence[int]) -> int:
        if not prefix:
            return 0
        return int(np.ravel_multi_index(tuple(prefix), self.alphabet_sizes[: len(prefix)]))

    def prefix_from_index(self, k: int, index: int) -> tuple[int, ...]:
        if k == 1:
            return ()
        return tuple(int(i) for i in np.unravel_index(index, self.alphabet_sizes[: k - 1]))

    def label(self, k: int, prefix: Sequence[int]) -> int:
        return int(self.info_maps[k - 1][self.prefix_index(prefix)])

    def generator(self, k: int) -> str | None:
        """Name of the generator stage ``k`` matches exactly, if any."""
        m = self.info_maps[k - 1]
        if self.info_label_counts[k - 1] == 1:
            return "constant"
        if self.info_label_counts[k - 1] == m.size and np.array_equal(m, np.arange(m.size)):
            return "perfect-recall"
        return None

    def first_collision(self, k: int) -> tuple[int, tuple[int, ...], tuple[int, ...]] | None:
        """First label of stage ``k`` shared by two prefixes, with those prefixes."""
        seen: dict[int, int] = {}
        for idx, y in enumerate(self.info_maps[k - 1].tolist()):
            if y in seen:
                return y, self.prefix_from_index(k, seen[y]), self.prefix_from_index(k, idx)
            seen[y] = idx
        return None

    def has_perfect_recall(self) -> bool:
        return all(self.first_collision(k) is None for k in range(1, self.n + 1))

    def __eq__(self, other):
        if not isinstance(other, ProcessSpec):
            return NotImplemented
        return (
            self.alphabet_sizes == other.alphabet_sizes
            and self.info_label_counts == other.info_label_counts
            and all(np.array_equal(a, b) for a, b in zip(self.info_maps, other.info_maps))
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Dense probability vector over complete outcome tuples."""

    alphabet_sizes: tuple[int, ...]
    probs: np.ndarray

    def __post_init__(self):
        sizes = tuple(int(a) for a in self.alphabet_sizes)
        p = np.asarray(self.probs, dtype=float)
        if p.shape != (prod(sizes),):
            raise StructureError(f"expected {prod(sizes)} probabilities for alphabets {list(sizes)}, got shape {p.shape}")
        if not np.all(np.isfinite(p)):
            raise NegativityError("probabilities must be finite", float("nan"))
        if p.size and p.min() < 0:
            raise NegativityError(f"negative probability {p.min()!r}", p.min())
        total = float(p.sum())
        if abs(total - 1.0) > PROB_TOL:
            raise NormalizationError(f"probabilities sum to {total!r}, not 1", total)
        object.__setattr__(self, "alphabet_sizes", sizes)
        object.__setattr__(self, "probs", _frozen(p))

    @classmethod
    def from_tensor(cls, tensor: np.ndarray) -> JointDistribution:
        tensor = np.asarray(tensor, dtype=float)
        return cls(tensor.shape, tensor.reshape(-1))

    @classmethod
    def uniform(cls, alphabet_sizes: Sequence[int]) -> JointDistribution:
        m = prod(alphabet_sizes)
        return cls(tuple(alphabet_sizes), np.full(m, 1.0 / m))

    @classmethod
    def point_mass(cls, alphabet_sizes: Sequence[int], outcome: Sequence[int]) -> JointDistribution:
        t = np.zeros(tuple(alphabet_sizes))
        t[tuple(outcome)] = 1.0
        return cls.from_tensor(t)

    @classmethod
    def from_mapping(cls, alphabet_sizes: Sequence[int], mass: dict) -> JointDistribution:
        """Build from ``{outcome tuple: probability}``; unlisted tuples get 0."""
        t = np.zeros(tuple(alphabet_sizes))
        for x, p in mass.items():
            t[tuple(x)] = p
        return cls.from_tensor(t)

    @property
    def n(self) -> int:
        return len(self.alphabet_sizes)

    def tensor(self) -> np.ndarray:
        return self.probs.reshape(self.alphabet_sizes)

    def __getitem__(self, outcome: Sequence[int]) -> float:
        return float(self.tensor()[tuple(outcome)])

    def outcomes(self) -> Iterator[tuple[int, ...]]:
        return itertools.product(*(range(a) for a in self.alphabet_sizes))

    def check_compatible(self, proc: ProcessSpec) -> None:
        if self.alphabet_sizes != proc.alphabet_sizes:
            raise StructureError(
                f"distribution alphabets {list(self.alphabet_sizes)} do not match process "
                f"alphabets {list(proc.alphabet_sizes)}"
            )

    def __eq__(self, other):
        if not isinstance(other, JointDistribution):
            return NotImplemented
        return self.alphabet_sizes == other.alphabet_sizes and np.array_equal(self.probs, other.probs)

    __hash__ = None


def max_abs_error(p: JointDistribution | np.ndarray, q: JointDistribution | np.ndarray) -> float:
    a = p.probs if isinstance(p, JointDistribution) else np.asarray(p)
    b = q.probs if isinstance(q, JointDistribution) else np.asarray(q)
    if a.shape != b.shape:
        raise StructureError(f"cannot compare distributions of shapes {a.shape} and {b.shape}")
    return float(np.max(np.abs(a - b))) if a.size else 0.0

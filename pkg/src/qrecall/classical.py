"""Classical local and latent-variable models under an information structure.

A local model picks stage ``k``'s outcome from a row ``P_k(. | y_k)`` keyed
only by the info label ``y_k = f_k(x_<k)``; a latent model additionally
lets every row depend on a shared hidden value ``s`` that no stage observes.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .constants import PROB_TOL, ROW_TOL, SUPPORT_TOL
from .errors import NegativityError, NormalizationError, PreconditionError, StructureError
from .process import JointDistribution, ProcessSpec, _frozen


def _check_rows(rows: np.ndarray, what: str) -> None:
    if rows.size == 0:
        return
    if not np.all(np.isfinite(rows)):
        raise NegativityError(f"{what}: non-finite probability", float("nan"))
    if rows.min() < 0:
        raise NegativityError(f"{what}: negative probability {rows.min()!r}", rows.min())
    dev = np.abs(rows.sum(axis=-1) - 1.0)
    if dev.max() > PROB_TOL:
        raise NormalizationError(f"{what}: row sums deviate from 1 by {dev.max()!r}", dev.max())


@dataclass(frozen=True, eq=False)
class LocalModel:
    """``tables[k]`` has shape ``(labels of stage k+1, |X_{k+1}|)``."""

    tables: tuple[np.ndarray, ...]

    def __post_init__(self):
        tabs = []
        for k, t in enumerate(self.tables):
            t = np.asarray(t, dtype=float)
            if t.ndim != 2:
                raise StructureError(f"stage {k + 1}: table must be 2-d (label x outcome), got shape {t.shape}")
            _check_rows(t, f"stage {k + 1}")
            tabs.append(_frozen(t))
        object.__setattr__(self, "tables", tuple(tabs))

    @classmethod
    def uniform(cls, proc: ProcessSpec) -> LocalModel:
        return cls(tuple(np.full((c, a), 1.0 / a) for c, a in zip(proc.info_label_counts, proc.alphabet_sizes)))

    def check_compatible(self, proc: ProcessSpec) -> None:
        if len(self.tables) != proc.n:
            raise StructureError(f"model has {len(self.tables)} stages, process has {proc.n}")
        for k, t in enumerate(self.tables):
            want = (proc.info_label_counts[k], proc.alphabet_sizes[k])
            if t.shape != want:
                raise StructureError(f"stage {k + 1}: table shape {t.shape} does not match process {want}")

    def __eq__(self, other):
        if not isinstance(other, LocalModel):
            return NotImplemented
        return len(self.tables) == len(other.tables) and all(
            a.shape == b.shape and np.array_equal(a, b) for a, b in zip(self.tables, other.tables)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class LatentModel:
    """``latent_probs[s]`` and ``tables[k][s, y, x] = P_{k+1}(x | s, y)``."""

    latent_probs: np.ndarray
    tables: tuple[np.ndarray, ...]

    def __post_init__(self):
        p = np.asarray(self.latent_probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise StructureError(f"latent_probs must be a non-empty vector, got shape {p.shape}")
        _check_rows(p, "latent_probs")
        tabs = []
        for k, t in enumerate(self.tables):
            t = np.asarray(t, dtype=float)
            if t.ndim != 3 or t.shape[0] != p.size:
                raise StructureError(
                    f"stage {k + 1}: table must have shape (|S|={p.size}, labels, outcomes), got {t.shape}"
                )
            _check_rows(t, f"stage {k + 1}")
            tabs.append(_frozen(t))
        object.__setattr__(self, "latent_probs", _frozen(p))
        object.__setattr__(self, "tables", tuple(tabs))

    @classmethod
    def from_deterministic(
        cls, latent_probs: Sequence[float], outcomes: Sequence[Sequence[int]], proc: ProcessSpec
    ) -> LatentModel:
        """Point-mass rows: stage ``k`` outputs ``outcomes[k][s]`` whatever its label."""
        p = np.asarray(latent_probs, dtype=float)
        if len(outcomes) != proc.n:
            raise StructureError(f"expected deterministic outcomes for {proc.n} stages, got {len(outcomes)}")
        tabs = []
        for k, xs in enumerate(outcomes):
            if len(xs) != p.size:
                raise StructureError(f"stage {k + 1}: need one outcome per latent value ({p.size}), got {len(xs)}")
            a = proc.alphabet_sizes[k]
            t = np.zeros((p.size, proc.info_label_counts[k], a))
            for s, x in enumerate(xs):
                if not 0 <= x < a:
                    raise StructureError(f"stage {k + 1}: outcome {x} outside alphabet of size {a}")
                t[s, :, x] = 1.0
            tabs.append(t)
        return cls(p, tuple(tabs))

    @classmethod
    def from_local(cls, model: LocalModel) -> LatentModel:
        return cls(np.ones(1), tuple(t[None] for t in model.tables))

    @property
    def n_latent(self) -> int:
        return self.latent_probs.size

    def slice(self, s: int) -> LocalModel:
        """The local model used when the hidden value is ``s``."""
        return LocalModel(tuple(t[s] for t in self.tables))

    def check_compatible(self, proc: ProcessSpec) -> None:
        if len(self.tables) != proc.n:
            raise StructureError(f"model has {len(self.tables)} stages, process has {proc.n}")
        for k, t in enumerate(self.tables):
            want = (proc.info_label_counts[k], proc.alphabet_sizes[k])
            if t.shape[1:] != want:
                raise StructureError(f"stage {k + 1}: table shape {t.shape[1:]} does not match process {want}")

    def __eq__(self, other):
        if not isinstance(other, LatentModel):
            return NotImplemented
        return np.array_equal(self.latent_probs, other.latent_probs) and all(
            a.shape == b.shape and np.array_equal(a, b) for a, b in zip(self.tables, other.tables)
        )

    __hash__ = None


def _product_tensor(rows: Sequence[np.ndarray], proc: ProcessSpec) -> np.ndarray:
    """Tensor of ``prod_k rows[k][f_k(x_<k), x_k]`` over all outcome tuples."""
    sizes = proc.alphabet_sizes
    out = np.ones(())
    for k, r in enumerate(rows):
        factor = r[proc.info_maps[k]].reshape(sizes[: k + 1])
        out = out[..., None] * factor
    return out


def eval_classical(model: LocalModel, proc: ProcessSpec) -> JointDistribution:
    """Joint distribution induced by a local model."""
    model.check_compatible(proc)
    return JointDistribution.from_tensor(_product_tensor(model.tables, proc))


def eval_latent(model: LatentModel, proc: ProcessSpec) -> JointDistribution:
    """Mixture over hidden values of the local models ``model.slice(s)``."""
    model.check_compatible(proc)
    total = np.zeros(proc.alphabet_sizes)
    for s, ps in enumerate(model.latent_probs):
        total = total + ps * _product_tensor([t[s] for t in model.tables], proc)
    return JointDistribution.from_tensor(total)


def _split(target: JointDistribution, proc: ProcessSpec, k: int) -> np.ndarray:
    """Mass of (prefix index, x_k), marginalising later stages."""
    sizes = proc.alphabet_sizes
    t = target.probs.reshape(proc.prefix_count(k), sizes[k - 1], -1)
    return t.sum(axis=2)


def _check_stage(proc: ProcessSpec, k: int) -> None:
    if not 1 <= k <= proc.n:
        raise StructureError(f"stage must be in 1..{proc.n}, got {k}")


def conditionals(target: JointDistribution, proc: ProcessSpec, k: int) -> dict[tuple[int, ...], np.ndarray]:
    """``P(x_k | h)`` for every prefix ``h`` of stage ``k`` with mass above the support threshold."""
    target.check_compatible(proc)
    _check_stage(proc, k)
    joint = _split(target, proc, k)
    marg = joint.sum(axis=1)
    return {
        proc.prefix_from_index(k, i): joint[i] / marg[i]
        for i in range(joint.shape[0])
        if marg[i] > SUPPORT_TOL
    }


def _conditioned_rows(target: JointDistribution, proc: ProcessSpec, k: int) -> np.ndarray:
    """Rows obtained by conditioning on each info label; uniform where the label is unreached."""
    joint = _split(target, proc, k)
    labels = proc.info_maps[k - 1]
    n_labels = proc.info_label_counts[k - 1]
    a = proc.alphabet_sizes[k - 1]
    num = np.zeros((n_labels, a))
    np.add.at(num, labels, joint)
    mass = num.sum(axis=1)
    rows = np.full((n_labels, a), 1.0 / a)
    hit = mass > SUPPORT_TOL
    rows[hit] = num[hit] / mass[hit, None]
    # re-normalise against rounding so the rows pass LocalModel validation
    rows[hit] /= rows[hit].sum(axis=1, keepdims=True)
    return rows


def conditioned_model(target: JointDistribution, proc: ProcessSpec) -> LocalModel:
    """Local model whose row for label ``y`` is ``P(x_k | f_k(x_<k) = y)``.

    Reproduces ``target`` exactly when (and only when) the target is
    classically implementable under ``proc``.
    """
    target.check_compatible(proc)
    return LocalModel(tuple(_conditioned_rows(target, proc, k) for k in range(1, proc.n + 1)))


def behavioral_from_joint(target: JointDistribution, proc: ProcessSpec) -> LocalModel:
    """Behavioural strategy of a perfect-recall process: condition the joint on each history."""
    target.check_compatible(proc)
    for k in range(1, proc.n + 1):
        hit = proc.first_collision(k)
        if hit is not None:
            y, h, h2 = hit
            raise PreconditionError(
                f"process lacks perfect recall: stage {k} label {y} is shared by prefixes {list(h)} and {list(h2)}"
            )
    return conditioned_model(target, proc)


@dataclass(frozen=True)
class Witness:
    """Two reachable prefixes with the same label but different conditional rows."""

    stage: int
    label: int
    prefix: tuple[int, ...]
    other_prefix: tuple[int, ...]
    discrepancy: float


@dataclass(frozen=True)
class ImplementabilityReport:
    feasible: bool
    certificate: Optional[LocalModel] = None
    witness: Optional[Witness] = None


def _stage_witness(target: JointDistribution, proc: ProcessSpec, k: int) -> Optional[Witness]:
    joint = _split(target, proc, k)
    marg = joint.sum(axis=1)
    labels = proc.info_maps[k - 1]
    best = None
    for y in range(proc.info_label_counts[k - 1]):
        idx = np.flatnonzero((labels == y) & (marg > SUPPORT_TOL))
        if idx.size < 2:
            continue
        rows = joint[idx] / marg[idx, None]
        spread = rows.max(axis=0) - rows.min(axis=0)
        x = int(np.argmax(spread))
        gap = float(spread[x])
        if best is None or gap > best.discrepancy:
            i, j = sorted((int(idx[np.argmax(rows[:, x])]), int(idx[np.argmin(rows[:, x])])))
            best = Witness(k, y, proc.prefix_from_index(k, i), proc.prefix_from_index(k, j), gap)
    return best


def check_classical_implementable(target: JointDistribution, proc: ProcessSpec) -> ImplementabilityReport:
    """Decide whether some local model under ``proc`` induces ``target``.

    A target factorises as ``prod_k P_k(x_k | y_k)`` exactly when, at every
    stage, all reachable prefixes sharing an info label have the same
    conditional distribution of the next outcome. On failure the witness is
    the label/prefix pair with the largest max-abs disagreement.
    """
    target.check_compatible(proc)
    worst = None
    for k in range(2, proc.n + 1):
        w = _stage_witness(target, proc, k)
        if w is not None and (worst is None or w.discrepancy > worst.discrepancy):
            worst = w
    if worst is not None and worst.discrepancy > ROW_TOL:
        return ImplementabilityReport(False, witness=worst)
    return ImplementabilityReport(True, certificate=conditioned_model(target, proc))

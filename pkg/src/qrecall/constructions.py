"""Quantum models that realise latent-variable targets under restricted information.

Three builders, each returning a model whose Born-rule distribution is
checked against the intended target:

* :func:`build_latent_diagonal` copies the hidden value ``s`` into every
  subsystem as ``|s><s|`` and reads it out with measurements diagonal in that
  basis, so no stage ever conditions on ``s``.
* :func:`build_universal` applies the same idea with ``s`` ranging over
  complete outcome tuples, which reproduces any fixed joint distribution.
* :func:`build_discordant` hides the hidden value of the second stage in
  possibly non-orthogonal pure states, distinguished by one fixed measurement.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from itertools import product as cartesian
from typing import Optional

import numpy as np

from .classical import LatentModel
from .constants import MATRIX_TOL, VERIFY_TOL
from .errors import ConstructionError, PreconditionError, StructureError, UsageError
from .process import JointDistribution, ProcessSpec, max_abs_error
from .quantum import (
    KET0,
    KET1,
    KET_MINUS,
    KET_PLUS,
    QuantumModel,
    SeparableDecomposition,
    basis_off_diagonal,
    born_joint,
    commutation_witness,
    projector,
    validate_povm,
    validate_state,
)


def separable_model(
    weights: Sequence[float],
    factors: Sequence[Sequence[np.ndarray]],
    povms: Sequence[Sequence[Sequence[np.ndarray]]],
) -> QuantumModel:
    """Model on ``sum_s weights[s] (x)_k factors[s][k]`` measured with ``povms[k][y]``.

    Each ``factors[s][k]`` must itself be a density matrix; the decomposition
    is kept on the model so separability can be checked by inspection.
    """
    w = tuple(float(x) for x in weights)
    if len(factors) != len(w):
        raise StructureError(f"{len(w)} weights but {len(factors)} product terms")
    facs = []
    for s, fs in enumerate(factors):
        local = tuple(validate_state(f).matrix for f in fs)
        if facs and tuple(f.shape[0] for f in local) != tuple(f.shape[0] for f in facs[0]):
            raise StructureError(f"product term {s} has subsystem dims unlike term 0")
        facs.append(local)
    decomposition = SeparableDecomposition(w, tuple(facs))
    state = validate_state(decomposition.matrix())
    dims = tuple(f.shape[0] for f in facs[0])
    meas = tuple(tuple(validate_povm(m, dims[k]) for m in stage) for k, stage in enumerate(povms))
    return QuantumModel(dims, state, meas, decomposition)


def _diagonal_state(weights: np.ndarray, n: int) -> np.ndarray:
    """``sum_s w_s |s..s><s..s|`` without forming the Kronecker products."""
    d = weights.size
    stride = sum(d**j for j in range(n))
    rho = np.zeros((d**n, d**n), dtype=complex)
    idx = np.arange(d) * stride
    rho[idx, idx] = weights
    return rho


def build_latent_diagonal(model: LatentModel, proc: ProcessSpec) -> QuantumModel:
    """Encode the hidden value as a shared classical label on every subsystem.

    State ``sum_s p(s) (x)_k |s><s|`` and measurements
    ``M^(k)_x(y) = sum_s P_k(x | s, y) |s><s|``; every subsystem has
    dimension ``|S|``.
    """
    model.check_compatible(proc)
    n, d = proc.n, model.n_latent
    basis = [np.diag(np.eye(d)[s]).astype(complex) for s in range(d)]
    state = validate_state(_diagonal_state(model.latent_probs, n))
    povms = tuple(
        tuple(
            validate_povm([np.diag(t[:, y, x]).astype(complex) for x in range(t.shape[2])], d)
            for y in range(t.shape[1])
        )
        for t in model.tables
    )
    decomposition = SeparableDecomposition(
        tuple(float(p) for p in model.latent_probs), tuple((basis[s],) * n for s in range(d))
    )
    return QuantumModel((d,) * n, state, povms, decomposition)


def build_universal(target: JointDistribution, proc: ProcessSpec) -> QuantumModel:
    """Realise any joint distribution: the hidden value is the whole outcome tuple."""
    target.check_compatible(proc)
    outcomes = list(target.outcomes())
    deterministic = [[x[k] for x in outcomes] for k in range(proc.n)]
    latent = LatentModel.from_deterministic(target.probs, deterministic, proc)
    return build_latent_diagonal(latent, proc)


def diagonal_to_latent(q: QuantumModel, proc: ProcessSpec) -> LatentModel:
    """Read a model that is diagonal in the computational product basis as a latent model.

    The hidden value is the basis tuple; rows are re-normalised to absorb the
    matrix-level tolerance.
    """
    q.check_compatible(proc)
    rho = q.state.matrix
    if np.any(np.abs(rho - np.diag(np.diag(rho))) > MATRIX_TOL):
        raise PreconditionError("state is not diagonal in the computational product basis")
    p = np.diag(rho).real.clip(0.0, None)
    p = p / p.sum()
    tuples = list(cartesian(*(range(d) for d in q.subsystem_dims)))
    tables = []
    for k, stage in enumerate(q.povms):
        diag = []
        for y, m in enumerate(stage):
            for x, e in enumerate(m.elements):
                if np.any(np.abs(e - np.diag(np.diag(e))) > MATRIX_TOL):
                    raise PreconditionError(f"stage {k + 1} label {y} outcome {x}: POVM element is not diagonal")
            diag.append(np.stack([np.diag(e).real for e in m.elements], axis=-1))
        local = np.stack(diag)  # (labels, d_k, outcomes)
        t = np.stack([local[:, s[k], :] for s in tuples]).clip(0.0, None)
        tables.append(t / t.sum(axis=-1, keepdims=True))
    return LatentModel(p, tuple(tables))


@dataclass(frozen=True)
class DiscordantSpec:
    """Data for the two-stage construction with hidden pure states on the second subsystem.

    ``basis_a`` holds the orthonormal family ``|s>`` as columns and
    ``states_b[s]`` the pure state ``|phi_s>``. ``declared_basis_b`` (columns,
    identity by default) is the basis against which diagonality of the
    ``|phi_s>`` family is reported.
    """

    latent_probs: Sequence[float]
    g: Sequence[int]
    h: Sequence[int]
    basis_a: np.ndarray
    states_b: Sequence[np.ndarray]
    declared_basis_b: Optional[np.ndarray] = None
    alphabet_sizes: Optional[tuple[int, int]] = None


@dataclass(frozen=True)
class DiscordantBuild:
    model: QuantumModel
    process: ProcessSpec
    target: JointDistribution
    commutation: float
    off_diagonal: float


def _span_projector(vectors: list[np.ndarray], dim: int) -> np.ndarray:
    if not vectors:
        return np.zeros((dim, dim), dtype=complex)
    u, sv, _ = np.linalg.svd(np.column_stack(vectors), full_matrices=False)
    u = u[:, sv > MATRIX_TOL]
    return u @ u.conj().T


def build_discordant(spec: DiscordantSpec) -> DiscordantBuild:
    """Two-stage model ``sum_s p(s) |s><s| (x) |phi_s><phi_s|`` with oblivious stage 2.

    Stage 1 measures in the ``|s>`` basis coarse-grained by ``g``; stage 2
    projects onto the span of ``{phi_s : h(s) = x}``. Whatever either
    measurement leaves uncovered is assigned to outcome 0. Requires states
    with different ``h`` values to be orthogonal, which is exactly when a
    single fixed measurement can read ``h(s)`` off ``|phi_s>`` with certainty.
    """
    p = np.asarray(spec.latent_probs, dtype=float)
    n_s = p.size
    g = [int(v) for v in spec.g]
    h = [int(v) for v in spec.h]
    basis_a = np.asarray(spec.basis_a, dtype=complex)
    phis = [np.asarray(v, dtype=complex).reshape(-1) for v in spec.states_b]
    if len(g) != n_s or len(h) != n_s or len(phis) != n_s:
        raise StructureError(f"g, h and states_b must each have {n_s} entries")
    if basis_a.ndim != 2 or basis_a.shape[1] != n_s:
        raise StructureError(f"basis_a must have one column per latent value ({n_s}), got shape {basis_a.shape}")
    if min(g + h, default=0) < 0:
        raise StructureError("outcome labels in g and h must be non-negative")
    d_a = basis_a.shape[0]
    d_b = phis[0].size if phis else 0
    if any(v.size != d_b for v in phis):
        raise StructureError("all states_b must share one dimension")

    gram_gap = float(np.max(np.abs(basis_a.conj().T @ basis_a - np.eye(n_s))))
    if gram_gap > MATRIX_TOL:
        raise ConstructionError(f"basis_a columns are not orthonormal (deviation {gram_gap!r})")
    for s, v in enumerate(phis):
        norm = float(np.linalg.norm(v))
        if abs(norm - 1.0) > MATRIX_TOL:
            raise ConstructionError(f"states_b[{s}] has norm {norm!r}, expected 1")
    for s in range(n_s):
        for t in range(s + 1, n_s):
            if h[s] != h[t]:
                overlap = abs(complex(np.vdot(phis[s], phis[t])))
                if overlap > MATRIX_TOL:
                    raise ConstructionError(
                        f"states_b[{s}] and states_b[{t}] have different h but overlap {overlap!r}; "
                        "no fixed measurement distinguishes them"
                    )

    sizes = spec.alphabet_sizes or (max(g) + 1, max(h) + 1)
    a1, a2 = int(sizes[0]), int(sizes[1])
    if max(g) >= a1 or max(h) >= a2:
        raise StructureError(f"g/h values exceed alphabet sizes {[a1, a2]}")

    kets_a = [basis_a[:, s] for s in range(n_s)]
    m1 = [sum((projector(kets_a[s]) for s in range(n_s) if g[s] == x), np.zeros((d_a, d_a), complex)) for x in range(a1)]
    m1[0] = m1[0] + (np.eye(d_a) - sum(m1))
    m2 = [_span_projector([phis[s] for s in range(n_s) if h[s] == x], d_b) for x in range(a2)]
    m2[0] = m2[0] + (np.eye(d_b) - sum(m2))

    model = separable_model(
        p,
        [(projector(kets_a[s]), projector(phis[s])) for s in range(n_s)],
        [[m1], [m2]],
    )
    proc = ProcessSpec.oblivious((a1, a2))
    t = np.zeros((a1, a2))
    for s in range(n_s):
        t[g[s], h[s]] += p[s]
    ensemble = [projector(v) for v in phis]
    declared = np.eye(d_b) if spec.declared_basis_b is None else spec.declared_basis_b
    return DiscordantBuild(
        model,
        proc,
        JointDistribution.from_tensor(t),
        commutation_witness(ensemble),
        basis_off_diagonal(ensemble, declared),
    )


EXAMPLES = ("illex2", "diagonal-flip", "three-stage")

_COMPUTATIONAL = [projector(KET0), projector(KET1)]
# |+> reads out as 1 and |-> as 0
_PLUS_MINUS = [projector(KET_MINUS), projector(KET_PLUS)]


def named_example(name: str) -> tuple[QuantumModel, ProcessSpec, JointDistribution]:
    """Model, (oblivious) process and target of a named worked example.

    ``illex2``: ``1/2 (|0><0| (x) |+><+| + |1><1| (x) |-><-|)`` with a
    computational then a +/- readout. ``diagonal-flip``: the classically
    correlated ``1/2 (|00><00| + |11><11|)`` with a flipped second readout.
    ``three-stage``: the +/- construction with a third, computational,
    subsystem copying the first.
    """
    anti = {(0, 1): 0.5, (1, 0): 0.5}
    if name == "illex2":
        model = separable_model(
            [0.5, 0.5],
            [(projector(KET0), projector(KET_PLUS)), (projector(KET1), projector(KET_MINUS))],
            [[_COMPUTATIONAL], [_PLUS_MINUS]],
        )
        proc = ProcessSpec.oblivious((2, 2))
        return model, proc, JointDistribution.from_mapping((2, 2), anti)
    if name == "diagonal-flip":
        proc = ProcessSpec.oblivious((2, 2))
        latent = LatentModel.from_deterministic([0.5, 0.5], [[0, 1], [1, 0]], proc)
        return build_latent_diagonal(latent, proc), proc, JointDistribution.from_mapping((2, 2), anti)
    if name == "three-stage":
        model = separable_model(
            [0.5, 0.5],
            [
                (projector(KET0), projector(KET_PLUS), projector(KET0)),
                (projector(KET1), projector(KET_MINUS), projector(KET1)),
            ],
            [[_COMPUTATIONAL], [_PLUS_MINUS], [_COMPUTATIONAL]],
        )
        proc = ProcessSpec.oblivious((2, 2, 2))
        target = JointDistribution.from_mapping((2, 2, 2), {(0, 1, 0): 0.5, (1, 0, 1): 0.5})
        return model, proc, target
    raise UsageError(f"unknown example {name!r}; valid: {', '.join(EXAMPLES)}")


@dataclass(frozen=True)
class VerificationReport:
    passed: bool
    max_abs_error: float
    tol: float
    residuals: np.ndarray = field(repr=False)


def verify_model(
    q: QuantumModel, proc: ProcessSpec, target: JointDistribution, tol: float = VERIFY_TOL
) -> VerificationReport:
    """Compare the Born-rule distribution of ``q`` with ``target`` in max-abs error."""
    target.check_compatible(proc)
    got = born_joint(q, proc)
    residuals = got.probs - target.probs
    err = max_abs_error(got, target)
    return VerificationReport(err <= tol, err, float(tol), residuals)


# interface names used by the command line and external callers
build_thm1 = build_latent_diagonal
build_diag_universal = build_universal
paper_example = named_example


def build_thm2(spec: DiscordantSpec) -> QuantumModel:
    """Just the model from :func:`build_discordant`."""
    return build_discordant(spec).model

"""Density matrices, POVMs and the Born-rule joint distribution.

Also hosts the two nonclassicality diagnostics: the commutation witness of
an ensemble of local states and one-sided measured discord with a qubit on
the measured side. Entropies are in bits.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from math import prod
from typing import Optional

import numpy as np

from .constants import IMAG_TOL, MATRIX_TOL, PROB_TOL
from .errors import (
    CompletenessError,
    HermiticityError,
    ImaginaryResidueError,
    NormalizationDriftError,
    PositivityError,
    StructureError,
    TraceError,
    UnsupportedDimensionError,
)
from .process import JointDistribution, ProcessSpec

KET0 = np.array([1.0, 0.0], dtype=complex)
KET1 = np.array([0.0, 1.0], dtype=complex)
KET_PLUS = (KET0 + KET1) / np.sqrt(2.0)
KET_MINUS = (KET0 - KET1) / np.sqrt(2.0)

_PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


def projector(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())


def as_matrix(m, what: str = "matrix") -> np.ndarray:
    a = np.array(m, dtype=complex)
    if a.ndim != 2:
        raise StructureError(f"{what} must be 2-d, got shape {a.shape}")
    a.setflags(write=False)
    return a


def _square(m, what):
    a = as_matrix(m, what)
    if a.shape[0] != a.shape[1]:
        raise StructureError(f"{what} must be square, got shape {a.shape}")
    return a


def _hermiticity_gap(a: np.ndarray) -> float:
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


def _min_eigenvalue(a: np.ndarray) -> float:
    diag = np.diag(a)
    if not np.any(a - np.diag(diag)):
        return float(diag.real.min())
    return float(np.linalg.eigvalsh((a + a.conj().T) / 2)[0])


def eigh_sorted(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix with a reproducible ordering.

    Eigenvalues ascend; each eigenvector is phase-fixed so its first entry of
    non-negligible magnitude is real positive, and vectors whose eigenvalues
    agree within 1e-12 are ordered lexicographically by (re, im) entries.
    """
    a = np.asarray(m, dtype=complex)
    a = (a + a.conj().T) / 2
    w, v = np.linalg.eigh(a)
    for j in range(v.shape[1]):
        col = v[:, j]
        lead = np.flatnonzero(np.abs(col) > 1e-12)
        if lead.size:
            z = col[lead[0]]
            v[:, j] = col * (abs(z) / z)

    def key(j):
        vec = v[:, j]
        return tuple(np.round(np.column_stack([vec.real, vec.imag]).reshape(-1), 12))

    order = []
    j = 0
    while j < len(w):
        block = [j]
        while j + 1 < len(w) and w[j + 1] - w[block[0]] <= 1e-12:
            j += 1
            block.append(j)
        order.extend(sorted(block, key=key))
        j += 1
    return w[order], v[:, order]


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __eq__(self, other):
        if not isinstance(other, DensityMatrix):
            return NotImplemented
        return np.array_equal(self.matrix, other.matrix)

    __hash__ = None


def validate_state(m) -> DensityMatrix:
    """Check hermiticity, unit trace and positivity (in that order)."""
    a = _square(m, "state")
    gap = _hermiticity_gap(a)
    if gap > MATRIX_TOL:
        raise HermiticityError(f"state is not Hermitian: max |rho - rho^dag| = {gap!r}", gap)
    tr = complex(np.trace(a))
    if abs(tr - 1.0) > MATRIX_TOL:
        raise TraceError(f"state trace is {tr.real!r}, expected 1", tr.real)
    lo = _min_eigenvalue(a)
    if lo < -MATRIX_TOL:
        raise PositivityError(f"state has negative eigenvalue {lo!r}", lo)
    return DensityMatrix(a)


@dataclass(frozen=True, eq=False)
class Povm:
    elements: tuple[np.ndarray, ...]

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    @property
    def n_outcomes(self) -> int:
        return len(self.elements)

    def __eq__(self, other):
        if not isinstance(other, Povm):
            return NotImplemented
        return len(self.elements) == len(other.elements) and all(
            np.array_equal(a, b) for a, b in zip(self.elements, other.elements)
        )

    __hash__ = None


def validate_povm(elems: Sequence, dim: int) -> Povm:
    """Check every element is a Hermitian PSD ``dim x dim`` matrix and that they sum to identity."""
    if len(elems) == 0:
        raise StructureError("a POVM needs at least one element")
    mats = []
    for i, e in enumerate(elems):
        a = _square(e, f"POVM element {i}")
        if a.shape[0] != dim:
            raise StructureError(f"POVM element {i} has dimension {a.shape[0]}, expected {dim}")
        gap = _hermiticity_gap(a)
        if gap > MATRIX_TOL:
            raise HermiticityError(f"POVM element {i} is not Hermitian (deviation {gap!r})", gap)
        lo = _min_eigenvalue(a)
        if lo < -MATRIX_TOL:
            raise PositivityError(f"POVM element {i} has negative eigenvalue {lo!r}", lo)
        mats.append(a)
    dev = float(np.max(np.abs(sum(mats) - np.eye(dim))))
    if dev > MATRIX_TOL:
        raise CompletenessError(f"POVM elements do not sum to identity: max deviation {dev!r}", dev)
    return Povm(tuple(mats))


@dataclass(frozen=True)
class SeparableDecomposition:
    """``rho = sum_s weights[s] * kron(factors[s][0], ..., factors[s][n-1])``."""

    weights: tuple[float, ...]
    factors: tuple[tuple[np.ndarray, ...], ...]

    def matrix(self) -> np.ndarray:
        dim = prod(f.shape[0] for f in self.factors[0])
        rho = np.zeros((dim, dim), dtype=complex)
        for w, fs in zip(self.weights, self.factors):
            term = np.ones((1, 1), dtype=complex)
            for f in fs:
                term = np.kron(term, f)
            rho += w * term
        return rho


@dataclass(frozen=True, eq=False)
class QuantumModel:
    """Shared state plus ``povms[k][y]``, the stage-``k+1`` measurement for label ``y``."""

    subsystem_dims: tuple[int, ...]
    state: DensityMatrix
    povms: tuple[tuple[Povm, ...], ...]
    decomposition: Optional[SeparableDecomposition] = field(default=None)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.subsystem_dims)
        object.__setattr__(self, "subsystem_dims", dims)
        object.__setattr__(self, "povms", tuple(tuple(p) for p in self.povms))
        if self.state.dim != prod(dims):
            raise StructureError(f"state dimension {self.state.dim} != product of subsystem dims {list(dims)}")
        if len(self.povms) != len(dims):
            raise StructureError(f"{len(dims)} subsystems but measurements for {len(self.povms)} stages")
        for k, stage in enumerate(self.povms):
            if not stage:
                raise StructureError(f"stage {k + 1} has no measurements")
            for y, m in enumerate(stage):
                if m.dim != dims[k]:
                    raise StructureError(
                        f"stage {k + 1} label {y}: POVM acts on dimension {m.dim}, subsystem has {dims[k]}"
                    )

    def check_compatible(self, proc: ProcessSpec) -> None:
        if len(self.povms) != proc.n:
            raise StructureError(f"model has {len(self.povms)} stages, process has {proc.n}")
        for k, stage in enumerate(self.povms):
            if len(stage) != proc.info_label_counts[k]:
                raise StructureError(
                    f"stage {k + 1}: {len(stage)} measurements for {proc.info_label_counts[k]} info labels"
                )
            for y, m in enumerate(stage):
                if m.n_outcomes != proc.alphabet_sizes[k]:
                    raise StructureError(
                        f"stage {k + 1} label {y}: {m.n_outcomes} outcomes, alphabet has {proc.alphabet_sizes[k]}"
                    )

    def __eq__(self, other):
        if not isinstance(other, QuantumModel):
            return NotImplemented
        return (
            self.subsystem_dims == other.subsystem_dims
            and self.state == other.state
            and self.povms == other.povms
        )

    __hash__ = None


def born_joint(q: QuantumModel, proc: ProcessSpec) -> JointDistribution:
    """``P(x) = Tr[(M_{x_1}(y_1) (x) ... (x) M_{x_n}(y_n)) rho]`` with ``y_k = f_k(x_<k)``.

    Subsystems are contracted one stage at a time down the prefix tree, so
    the full tensor-product operator is never formed. Raises when the result
    has a non-negligible imaginary part or drifts from unit mass; it is never
    renormalised.
    """
    q.check_compatible(proc)
    dims = q.subsystem_dims
    n = len(dims)
    out = np.zeros(proc.n_outcomes, dtype=complex)
    flat = 0

    def descend(k: int, prefix_idx: int, t: np.ndarray) -> None:
        nonlocal flat
        d = dims[k]
        rest = prod(dims[k + 1 :])
        t = t.reshape(d, rest, d, rest)
        y = proc.info_maps[k][prefix_idx]
        for x, m in enumerate(q.povms[k][y].elements):
            reduced = np.einsum("ji,iajb->ab", m, t)
            if k == n - 1:
                out[flat] = reduced[0, 0]
                flat += 1
            else:
                descend(k + 1, prefix_idx * proc.alphabet_sizes[k] + x, reduced)

    descend(0, 0, q.state.matrix)
    imag = float(np.max(np.abs(out.imag)))
    if imag > IMAG_TOL:
        raise ImaginaryResidueError(f"Born probabilities carry imaginary residue {imag!r}", imag)
    probs = np.clip(out.real, 0.0, 1.0)
    total = float(probs.sum())
    if abs(total - 1.0) > PROB_TOL:
        raise NormalizationDriftError(f"Born probabilities sum to {total!r}; the model is not normalised", total)
    return JointDistribution(proc.alphabet_sizes, probs)


def partial_trace(rho, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Reduced state on the subsystems ``keep`` (kept in their original order)."""
    dims = [int(d) for d in dims]
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (prod(dims), prod(dims)):
        raise StructureError(f"state of shape {rho.shape} does not match subsystem dims {dims}")
    keep = sorted(set(keep))
    t = rho.reshape(dims + dims)
    for i in sorted(set(range(len(dims))) - set(keep), reverse=True):
        t = np.trace(t, axis1=i, axis2=i + t.ndim // 2)
    d = prod(dims[i] for i in keep)
    return t.reshape(d, d)


def von_neumann_entropy(rho) -> float:
    """Entropy in bits, with ``0 log 0 = 0``."""
    w = np.linalg.eigvalsh(np.asarray(rho, dtype=complex))
    w = w[w > 1e-15]
    return float(-(w * np.log2(w)).sum())


def commutation_witness(states: Sequence) -> float:
    """Largest spectral norm of a pairwise commutator in the family.

    Zero exactly when the Hermitian family is simultaneously diagonalisable.
    """
    mats = [_square(s, f"state {i}") for i, s in enumerate(states)]
    if mats and any(m.shape != mats[0].shape for m in mats):
        raise StructureError("all states must share one dimension")
    for i, m in enumerate(mats):
        gap = _hermiticity_gap(m)
        if gap > MATRIX_TOL:
            raise HermiticityError(f"state {i} is not Hermitian (deviation {gap!r})", gap)
    worst = 0.0
    for i in range(len(mats)):
        for j in range(i + 1, len(mats)):
            c = mats[i] @ mats[j] - mats[j] @ mats[i]
            worst = max(worst, float(np.linalg.norm(c, 2)))
    return worst


def basis_off_diagonal(states: Sequence, basis) -> float:
    """Largest off-diagonal magnitude of the states written in ``basis`` (columns).

    Zero iff every state is diagonal in that declared basis.
    """
    u = as_matrix(basis, "basis")
    worst = 0.0
    for s in states:
        m = u.conj().T @ np.asarray(s, dtype=complex) @ u
        off = m - np.diag(np.diag(m))
        worst = max(worst, float(np.max(np.abs(off))) if off.size else 0.0)
    return worst


def _bloch(theta, phi):
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta) * np.ones_like(phi)], axis=-1)


def _hermitian3_eigvals(m: np.ndarray) -> np.ndarray:
    """Spectra of a batch of 3x3 Hermitian matrices by the trigonometric cubic solution.

    Loses accuracy near repeated eigenvalues, so it only ranks grid points;
    reported values always come from ``eigvalsh``.
    """
    a0, a1, a2 = m[..., 0, 0].real, m[..., 1, 1].real, m[..., 2, 2].real
    u, v, w = m[..., 0, 1], m[..., 1, 2], m[..., 0, 2]
    q = (a0 + a1 + a2) / 3.0
    a0, a1, a2 = a0 - q, a1 - q, a2 - q
    uu, vv, ww = np.abs(u) ** 2, np.abs(v) ** 2, np.abs(w) ** 2
    p = np.sqrt(np.clip((a0 * a0 + a1 * a1 + a2 * a2 + 2.0 * (uu + vv + ww)) / 6.0, 0.0, None))
    det = a0 * a1 * a2 + 2.0 * (u * v * w.conj()).real - a0 * vv - a1 * ww - a2 * uu
    safe = np.where(p > 1e-300, p, 1.0)
    r = np.clip(det / (2.0 * safe**3), -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    hi = q + 2.0 * p * np.cos(phi)
    lo = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    return np.stack([lo, 3.0 * q - hi - lo, hi], axis=-1)


def _batched_entropy(mats: np.ndarray, fast: bool = False) -> np.ndarray:
    """``p * S(m / p)`` in bits for a batch of PSD matrices with traces ``p``."""
    w = _hermitian3_eigvals(mats) if fast and mats.shape[-1] == 3 else np.linalg.eigvalsh(mats)
    w = np.clip(w, 0.0, None)
    return -_xlog2x(w).sum(axis=-1) + _xlog2x(np.trace(mats, axis1=-2, axis2=-1).real)


class _ConditionalEntropy:
    """Average entropy left on the unmeasured side after a qubit projective measurement."""

    def __init__(self, rho: np.ndarray, d_other: int):
        t = rho.reshape(d_other, 2, d_other, 2)
        self.d = d_other
        self.rho_other = np.einsum("abcb->ac", t)
        # Tr_B[(I (x) sigma_i) rho] for each Pauli, flattened to (3, d*d)
        self.pauli_parts = np.einsum("ibc,acdb->iad", _PAULI, t).reshape(3, -1)

    def __call__(self, theta, phi, fast: bool = False) -> np.ndarray:
        r = _bloch(theta, phi)
        shape = r.shape[:-1]
        shift = r.reshape(-1, 3) @ self.pauli_parts
        base = self.rho_other.reshape(1, -1)
        if self.d == 2:
            # closed-form 2x2 spectra; only the diagonal and |off-diagonal| matter
            out = 0.0
            for sign in (1.0, -1.0):
                m = 0.5 * (base + sign * shift)
                out = out + _qubit_entropy(m[:, 0].real, m[:, 3].real, np.abs(m[:, 1]))
            return out.reshape(shape)
        up = (0.5 * (base + shift)).reshape(-1, self.d, self.d)
        down = (0.5 * (base - shift)).reshape(-1, self.d, self.d)
        return (_batched_entropy(up, fast) + _batched_entropy(down, fast)).reshape(shape)


def _xlog2x(w):
    safe = np.where(w > 1e-15, w, 1.0)
    return np.where(w > 1e-15, w * np.log2(safe), 0.0)


def _qubit_entropy(a, d, b):
    """``p * S(m / p)`` for 2x2 PSD ``m = [[a, b], [b*, d]]`` with ``p = a + d``."""
    half = 0.5 * (a + d)
    rad = np.sqrt(0.25 * (a - d) ** 2 + b * b)
    lo = np.clip(half - rad, 0.0, None)
    hi = half + rad
    return -_xlog2x(lo) - _xlog2x(hi) + _xlog2x(a + d)


def _golden_min(f, lo, hi, iters):
    g = (np.sqrt(5.0) - 1.0) / 2.0
    c, d = hi - g * (hi - lo), lo + g * (hi - lo)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - g * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + g * (hi - lo)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


REFINE_ROUNDS = 20


def discord_one_sided(rho, dims: Sequence[int], measured_side: str = "B", resolution: int = 512) -> float:
    """Measured discord ``I(A:B) - max J`` with rank-1 projective measurements on one qubit side.

    The measurement direction is searched on a ``resolution x resolution``
    grid over the Bloch sphere (theta in [0, pi], phi in [0, 2 pi)), after
    which each angle gets a fixed number of golden-section steps around the
    grid minimum. Ties on the grid go to the lowest grid index.
    """
    if isinstance(rho, DensityMatrix):
        rho = rho.matrix
    rho = np.asarray(rho, dtype=complex)
    if len(dims) != 2:
        raise StructureError(f"discord needs a bipartite split, got dims {list(dims)}")
    d_a, d_b = int(dims[0]), int(dims[1])
    if rho.shape != (d_a * d_b, d_a * d_b):
        raise StructureError(f"state of shape {rho.shape} does not match dims {[d_a, d_b]}")
    side = measured_side.upper()
    if side not in ("A", "B"):
        raise StructureError(f"measured side must be 'A' or 'B', got {measured_side!r}")
    if resolution < 2:
        raise StructureError(f"grid resolution must be >= 2, got {resolution}")
    if side == "A":
        rho = rho.reshape(d_a, d_b, d_a, d_b).transpose(1, 0, 3, 2).reshape(d_a * d_b, d_a * d_b)
        d_a, d_b = d_b, d_a
    if d_b != 2:
        raise UnsupportedDimensionError(f"measured side must be a qubit, got dimension {d_b}", d_b)

    s_b = von_neumann_entropy(partial_trace(rho, (d_a, 2), [1]))
    s_ab = von_neumann_entropy(rho)
    cond = _ConditionalEntropy(rho, d_a)

    thetas = np.linspace(0.0, np.pi, resolution)
    phis = 2.0 * np.pi * np.arange(resolution) / resolution
    best_val, best_idx = np.inf, (0, 0)
    rows_per_chunk = max(1, 131072 // resolution)
    for start in range(0, resolution, rows_per_chunk):
        th = thetas[start : start + rows_per_chunk, None]
        vals = cond(th, phis[None, :], fast=True)
        i = int(np.argmin(vals))
        if vals.flat[i] < best_val:
            best_val = float(vals.flat[i])
            best_idx = (start + i // resolution, i % resolution)

    theta, phi = thetas[best_idx[0]], phis[best_idx[1]]
    d_theta, d_phi = np.pi / (resolution - 1), 2.0 * np.pi / resolution

    def at(t, p):
        return float(cond(np.asarray(t), np.asarray(p)))

    best_val = at(theta, phi)

    theta, v = _golden_min(lambda t: at(t, phi), max(0.0, theta - d_theta), min(np.pi, theta + d_theta), REFINE_ROUNDS)
    best_val = min(best_val, v)
    phi, v = _golden_min(lambda p: at(theta, p), phi - d_phi, phi + d_phi, REFINE_ROUNDS)
    best_val = min(best_val, v)

    return max(0.0, s_b - s_ab + best_val)

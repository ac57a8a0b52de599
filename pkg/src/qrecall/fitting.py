"""Nearest local model to a target distribution.

Multistart coordinate descent: each sweep visits the rows stage-major,
label-minor, and moves one row at a time along the simplex segments through
its vertices. The joint distribution is linear in any single row, so a whole
grid of candidate rows is scored with one matrix product before a
golden-section polish around the best grid point.

The result is an upper bound on the true classical gap; nothing here claims
global optimality.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classical import LocalModel, _product_tensor, conditioned_model, eval_classical
from .constants import KL_EPS
from .errors import UsageError
from .process import JointDistribution, ProcessSpec

METRICS = ("total-variation", "L2", "KL")
_ALIASES = {"tv": "total-variation", "total-variation": "total-variation", "l2": "L2", "kl": "KL"}

# a restart that reaches this distance cannot be meaningfully improved on
EXACT_TOL = 1e-14
# total variation is kinked along whole curves where every point is
# coordinate-wise stationary; descend on smoothed versions first
TV_SMOOTHING = (1e-2, 1e-3, 1e-4)
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def canonical_metric(name: str) -> str:
    try:
        return _ALIASES[name.lower()]
    except KeyError:
        raise UsageError(f"unknown metric {name!r}; valid: tv, l2, kl") from None


def _distances(metric: str, target: np.ndarray, cand: np.ndarray, smoothing: float = 0.0) -> np.ndarray:
    """Metric between ``target`` and each row of ``cand`` (shape ``(m, N)``).

    ``smoothing > 0`` swaps ``|z|`` in total variation for the pseudo-Huber
    ``sqrt(z^2 + mu^2) - mu``; other metrics ignore it.
    """
    if metric == "total-variation":
        z = cand - target
        if smoothing > 0:
            return 0.5 * (np.sqrt(z * z + smoothing * smoothing) - smoothing).sum(axis=-1)
        return 0.5 * np.abs(z).sum(axis=-1)
    if metric == "L2":
        return np.sqrt(((cand - target) ** 2).sum(axis=-1))
    # KL(target || model), natural log, both sides smoothed then renormalised
    n = target.shape[-1]
    cand = np.clip(cand, 0.0, None)
    p = (target + KL_EPS) / (target.sum() + n * KL_EPS)
    q = (cand + KL_EPS) / (cand.sum(axis=-1, keepdims=True) + n * KL_EPS)
    return np.clip((p * np.log(p / q)).sum(axis=-1), 0.0, None)


def distance(target: JointDistribution, model_dist: JointDistribution, metric: str = "total-variation") -> float:
    metric = canonical_metric(metric)
    return float(_distances(metric, target.probs, model_dist.probs[None])[0])


@dataclass(frozen=True)
class SearchParams:
    seed: int = 0
    restarts: int = 8
    grid_step: float = 0.01
    max_iter: int = 200


@dataclass(frozen=True)
class FitReport:
    best_model: LocalModel
    distance: float
    metric: str
    restarts_used: int
    iterations: int
    best_restart: int


def _segment_rows(r: np.ndarray, j: int, u: np.ndarray) -> np.ndarray:
    """Rows on the segment through vertex ``j`` and ``r``, with ``row[j] = u``."""
    a = r.size
    rest = r.copy()
    rest[j] = 0.0
    mass = rest.sum()
    shape = rest / mass if mass > 1e-15 else np.where(np.arange(a) == j, 0.0, 1.0 / (a - 1))
    out = (1.0 - u)[:, None] * shape[None, :]
    out[:, j] = u
    return out


class _Descent:
    def __init__(self, target: np.ndarray, proc: ProcessSpec, metric: str, params: SearchParams):
        self.target = target
        self.proc = proc
        self.metric = metric
        self.params = params
        n_grid = max(2, int(round(1.0 / params.grid_step)) + 1)
        self.grid = np.linspace(0.0, 1.0, n_grid)

        self.smoothing = 0.0

    def _score(self, cand: np.ndarray) -> np.ndarray:
        return _distances(self.metric, self.target, cand, self.smoothing)

    def _gradient_basis(self, rows, k, y):
        """Joint as ``offset + row @ basis`` in the single row (k, y)."""
        a = rows[k].shape[1]
        basis = np.empty((a, self.target.size))
        probe = list(rows)
        for x in range(a):
            t = rows[k].copy()
            t[y] = 0.0
            t[y, x] = 1.0
            probe[k] = t
            basis[x] = _product_tensor(probe, self.proc).reshape(-1)
        t = rows[k].copy()
        t[y] = 0.0
        probe[k] = t
        offset = _product_tensor(probe, self.proc).reshape(-1)
        return offset, basis

    def _golden(self, f, lo, hi, iters=40):
        c = hi - _GOLDEN * (hi - lo)
        d = lo + _GOLDEN * (hi - lo)
        fc, fd = f(c), f(d)
        for _ in range(iters):
            if fc <= fd:
                hi, d, fd = d, c, fc
                c = hi - _GOLDEN * (hi - lo)
                fc = f(c)
            else:
                lo, c, fc = c, d, fd
                d = lo + _GOLDEN * (hi - lo)
                fd = f(d)
        return (c, fc) if fc <= fd else (d, fd)

    def _improve_row(self, rows, k, y, current):
        r = rows[k][y]
        a = r.size
        if a == 1:
            return current
        offset, basis = self._gradient_basis(rows, k, y)
        best_row, best = None, current
        # on a binary row both vertex segments are the same line
        for j in range(1 if a == 2 else a):
            cand = _segment_rows(r, j, self.grid)
            scores = self._score(offset + cand @ basis)
            i = int(np.argmin(scores))
            u0 = self.grid[i]
            lo = max(0.0, u0 - self.params.grid_step)
            hi = min(1.0, u0 + self.params.grid_step)

            def f(u):
                return float(self._score(offset + _segment_rows(r, j, np.array([u])) @ basis)[0])

            u, fu = self._golden(f, lo, hi)
            if scores[i] <= fu:
                u, fu = u0, float(scores[i])
            if fu < best - 1e-15:
                best, best_row = fu, _segment_rows(r, j, np.array([u]))[0]
        if best_row is not None:
            rows[k] = rows[k].copy()
            rows[k][y] = np.clip(best_row, 0.0, None) / np.clip(best_row, 0.0, None).sum()
            best = float(self._score(_product_tensor(rows, self.proc).reshape(1, -1))[0])
        return best

    def _sweeps(self, rows, budget):
        current = float(self._score(_product_tensor(rows, self.proc).reshape(1, -1))[0])
        sweeps = 0
        while sweeps < budget and current > EXACT_TOL:
            before = current
            for k in range(self.proc.n):
                for y in range(self.proc.info_label_counts[k]):
                    current = self._improve_row(rows, k, y, current)
            sweeps += 1
            if before - current <= 1e-13:
                break
        return current, sweeps

    def run(self, rows):
        rows = [np.array(t, dtype=float) for t in rows]
        schedule = TV_SMOOTHING if self.metric == "total-variation" else ()
        sweeps = 0
        self.smoothing = 0.0
        if float(self._score(_product_tensor(rows, self.proc).reshape(1, -1))[0]) > EXACT_TOL:
            for mu in schedule:
                self.smoothing = mu
                sweeps += self._sweeps(rows, self.params.max_iter - sweeps)[1]
        self.smoothing = 0.0
        current, extra = self._sweeps(rows, max(1, self.params.max_iter - sweeps))
        return rows, current, sweeps + extra


def _random_rows(proc: ProcessSpec, rng: np.random.Generator):
    return [rng.dirichlet(np.ones(a), size=c) for c, a in zip(proc.info_label_counts, proc.alphabet_sizes)]


def fit_local_model(
    target: JointDistribution,
    proc: ProcessSpec,
    metric: str = "total-variation",
    params: SearchParams | None = None,
) -> FitReport:
    """Search for the local model whose induced joint is closest to ``target``.

    Start 0 is the label-conditioned model (exact whenever the target is
    classically implementable), start 1 the uniform model, and starts
    ``2 ..`` are Dirichlet draws from ``default_rng([seed, i])``. Ties in the
    final selection go to the lower start index. KL is ``KL(target || model)``
    in nats with additive smoothing of both arguments.
    """
    params = params or SearchParams()
    metric = canonical_metric(metric)
    target.check_compatible(proc)
    if params.grid_step <= 0 or params.grid_step > 1:
        raise UsageError(f"grid step must lie in (0, 1], got {params.grid_step}")
    if params.restarts < 0 or params.max_iter < 0:
        raise UsageError("restarts and iteration cap must be non-negative")

    descent = _Descent(target.probs, proc, metric, params)
    n_starts = 2 + params.restarts
    best = None
    iterations = used = 0
    for i in range(n_starts):
        if i == 0:
            start = list(conditioned_model(target, proc).tables)
        elif i == 1:
            start = list(LocalModel.uniform(proc).tables)
        else:
            start = _random_rows(proc, np.random.default_rng([params.seed, i]))
        rows, dist, sweeps = descent.run(start)
        used += 1
        iterations += sweeps
        if best is None or dist < best[1]:
            best = (rows, dist, i)
        if best[1] <= EXACT_TOL:
            break

    rows, _, idx = best
    model = LocalModel(tuple(r / r.sum(axis=1, keepdims=True) for r in rows))
    final = distance(target, eval_classical(model, proc), metric)
    return FitReport(model, final, metric, used, iterations, idx)

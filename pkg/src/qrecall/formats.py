"""JSON document formats for processes, distributions and models.

Complex entries are ``[re, im]`` pairs (plain numbers are accepted on input),
matrices are row-major nested arrays, and distributions are flat arrays in
lexicographic outcome order. Emission always uses the same shape, so every
emitted document parses back to an equal value.
"""

from __future__ import annotations

import json
from typing import Any

import numpy as np

from .classical import LatentModel, LocalModel
from .constructions import DiscordantSpec
from .errors import ParseError, QrecallError
from .process import JointDistribution, ProcessSpec
from .quantum import DensityMatrix, Povm, QuantumModel, SeparableDecomposition, validate_povm, validate_state


def loads(text: str, what: str = "document") -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{what}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ParseError(f"{what}: top level must be an object")
    return doc


def dumps(doc: Any, machine: bool = True) -> str:
    if machine:
        return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False)


def section(doc: dict, key: str) -> dict:
    """Return ``doc[key]`` when ``doc`` is a bundle holding that section, else ``doc``."""
    inner = doc.get(key)
    return inner if isinstance(inner, dict) else doc


def _field(doc: dict, key: str, where: str):
    if key not in doc:
        raise ParseError(f"{where}: missing field {key!r}")
    return doc[key]


def _int(v, where: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ParseError(f"{where}: expected an integer, got {v!r}")
    return v


def _int_list(v, where: str) -> list[int]:
    if not isinstance(v, list):
        raise ParseError(f"{where}: expected an array of integers")
    return [_int(x, f"{where}[{i}]") for i, x in enumerate(v)]


def _float_array(v, where: str) -> np.ndarray:
    try:
        a = np.array(v, dtype=float)
    except (TypeError, ValueError):
        raise ParseError(f"{where}: expected numbers") from None
    if a.dtype == object:
        raise ParseError(f"{where}: ragged array")
    return a


def _complex(v, where: str) -> complex:
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return complex(v)
    if isinstance(v, list) and len(v) == 2 and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        return complex(v[0], v[1])
    raise ParseError(f"{where}: complex entries must be numbers or [re, im] pairs, got {v!r}")


def parse_matrix(v, where: str) -> np.ndarray:
    if not isinstance(v, list) or not v or not all(isinstance(r, list) for r in v):
        raise ParseError(f"{where}: matrix must be a non-empty array of rows")
    width = len(v[0])
    if any(len(r) != width for r in v):
        raise ParseError(f"{where}: rows have unequal lengths")
    return np.array([[_complex(x, f"{where}[{i}][{j}]") for j, x in enumerate(r)] for i, r in enumerate(v)])


def parse_vector(v, where: str) -> np.ndarray:
    if not isinstance(v, list) or not v:
        raise ParseError(f"{where}: vector must be a non-empty array")
    return np.array([_complex(x, f"{where}[{i}]") for i, x in enumerate(v)])


def _num(x: float) -> float | int:
    x = float(x)
    return 0.0 if x == 0 else x  # drop negative zero so output is byte-stable


def dump_matrix(m: np.ndarray) -> list:
    return [[[_num(z.real), _num(z.imag)] for z in row] for row in np.asarray(m, dtype=complex)]


def _wrap(fn, where):
    """Re-raise domain errors from constructors as parse errors with context."""
    try:
        return fn()
    except ParseError:
        raise
    except QrecallError as exc:
        raise type(exc)(f"{where}: {exc}", *([exc.magnitude] if hasattr(exc, "magnitude") else [])) from None


# -- process ---------------------------------------------------------------


def parse_process(doc: dict) -> ProcessSpec:
    where = "process"
    alphabets = _int_list(_field(doc, "alphabets", where), f"{where}.alphabets")
    n = _int(_field(doc, "n", where), f"{where}.n")
    if n != len(alphabets) or n < 1:
        raise ParseError(f"{where}: n={n} but {len(alphabets)} alphabets given")
    if any(a < 1 for a in alphabets):
        raise ParseError(f"{where}.alphabets: sizes must be >= 1, got {alphabets}")
    info = _field(doc, "info", where)
    if not isinstance(info, list) or len(info) != n:
        raise ParseError(f"{where}.info: expected one entry per stage ({n})")
    maps, counts = [], []
    for k, entry in enumerate(info):
        here = f"{where}.info[{k}] (stage {k + 1})"
        if not isinstance(entry, dict):
            raise ParseError(f"{here}: expected an object")
        prefix_shape = alphabets[:k]
        n_prefix = int(np.prod(prefix_shape, dtype=int))
        if "gen" in entry:
            gen = entry["gen"]
            if gen == "constant":
                maps.append(np.zeros(n_prefix, dtype=np.int64))
                counts.append(1)
            elif gen == "perfect-recall":
                maps.append(np.arange(n_prefix, dtype=np.int64))
                counts.append(n_prefix)
            else:
                raise ParseError(f"{here}: unknown generator {gen!r}; valid: 'constant', 'perfect-recall'")
            continue
        table = _field(entry, "map", here)
        if not isinstance(table, dict):
            raise ParseError(f"{here}.map: expected an object from prefix to label")
        labels = np.full(n_prefix, -1, dtype=np.int64)
        for key, label in table.items():
            try:
                prefix = tuple(int(t) for t in key.split(",")) if key.strip() else ()
            except ValueError:
                raise ParseError(f"{here}.map: bad prefix key {key!r}") from None
            if len(prefix) != k or any(not 0 <= x < a for x, a in zip(prefix, prefix_shape)):
                raise ParseError(f"{here}.map: prefix {key!r} is not a valid length-{k} prefix")
            idx = int(np.ravel_multi_index(prefix, prefix_shape)) if prefix else 0
            labels[idx] = _int(label, f"{here}.map[{key!r}]")
        missing = np.flatnonzero(labels < 0)
        if missing.size:
            first = tuple(int(i) for i in np.unravel_index(missing[0], prefix_shape)) if k else ()
            raise ParseError(
                f"{here}: info map is not total; missing prefix ({','.join(map(str, first))})"
            )
        count = _int(entry["labels"], f"{here}.labels") if "labels" in entry else int(labels.max()) + 1
        if labels.max() >= count:
            raise ParseError(f"{here}: label {int(labels.max())} out of range 0..{count - 1}")
        maps.append(labels)
        counts.append(count)
    return ProcessSpec(tuple(alphabets), tuple(maps), tuple(counts))


def parse_process_file(text: str) -> ProcessSpec:
    return parse_process(section(loads(text, "process"), "process"))


def dump_process(proc: ProcessSpec) -> dict:
    info = []
    for k in range(1, proc.n + 1):
        gen = proc.generator(k)
        if gen is not None:
            info.append({"gen": gen})
            continue
        table = {
            ",".join(map(str, proc.prefix_from_index(k, i))): int(y) for i, y in enumerate(proc.info_maps[k - 1])
        }
        info.append({"map": table, "labels": proc.info_label_counts[k - 1]})
    return {"n": proc.n, "alphabets": list(proc.alphabet_sizes), "info": info}


# -- distributions and classical models -----------------------------------


def parse_distribution(doc: dict) -> JointDistribution:
    alphabets = _int_list(_field(doc, "alphabets", "distribution"), "distribution.alphabets")
    probs = _float_array(_field(doc, "probs", "distribution"), "distribution.probs")
    return _wrap(lambda: JointDistribution(tuple(alphabets), probs), "distribution")


def dump_distribution(dist: JointDistribution) -> dict:
    return {"alphabets": list(dist.alphabet_sizes), "probs": [_num(p) for p in dist.probs]}


def parse_local_model(doc: dict) -> LocalModel:
    tables = _field(doc, "tables", "local model")
    if not isinstance(tables, list):
        raise ParseError("local model.tables: expected [stage][label] -> [probabilities]")
    arrays = [_float_array(t, f"local model.tables[{k}]") for k, t in enumerate(tables)]
    return _wrap(lambda: LocalModel(tuple(arrays)), "local model")


def dump_local_model(model: LocalModel) -> dict:
    return {"tables": [[[_num(p) for p in row] for row in t] for t in model.tables]}


def parse_latent_model(doc: dict, proc: ProcessSpec) -> LatentModel:
    where = "latent model"
    probs = _float_array(_field(doc, "latent_probs", where), f"{where}.latent_probs")
    if "deterministic" in doc:
        det = doc["deterministic"]
        if not isinstance(det, list):
            raise ParseError(f"{where}.deterministic: expected [stage] -> [outcome per latent value]")
        outs = [_int_list(d, f"{where}.deterministic[{k}]") for k, d in enumerate(det)]
        return _wrap(lambda: LatentModel.from_deterministic(probs, outs, proc), where)
    tables = _field(doc, "tables", where)
    if not isinstance(tables, list):
        raise ParseError(f"{where}.tables: expected [stage][s][label] -> [probabilities]")
    arrays = [_float_array(t, f"{where}.tables[{k}]") for k, t in enumerate(tables)]
    return _wrap(lambda: LatentModel(probs, tuple(arrays)), where)


def dump_latent_model(model: LatentModel) -> dict:
    return {
        "latent_probs": [_num(p) for p in model.latent_probs],
        "tables": [[[[_num(p) for p in row] for row in per_s] for per_s in t] for t in model.tables],
    }


# -- quantum models --------------------------------------------------------


def parse_quantum_model(doc: dict) -> QuantumModel:
    where = "quantum model"
    dims = _int_list(_field(doc, "dims", where), f"{where}.dims")
    rho = parse_matrix(_field(doc, "state", where), f"{where}.state")
    state = _wrap(lambda: validate_state(rho), f"{where}.state")
    povms_doc = _field(doc, "povms", where)
    if not isinstance(povms_doc, list) or len(povms_doc) != len(dims):
        raise ParseError(f"{where}.povms: expected one entry per subsystem ({len(dims)})")
    povms = []
    for k, stage in enumerate(povms_doc):
        if not isinstance(stage, list) or not stage:
            raise ParseError(f"{where}.povms[{k}]: expected a non-empty list of POVMs, one per label")
        row = []
        for y, elems in enumerate(stage):
            here = f"{where}.povms[{k}][{y}] (stage {k + 1}, label {y})"
            if not isinstance(elems, list) or not elems:
                raise ParseError(f"{here}: expected a list of outcome matrices")
            mats = [parse_matrix(e, f"{here}[{x}]") for x, e in enumerate(elems)]
            row.append(_wrap(lambda: validate_povm(mats, dims[k]), here))
        povms.append(tuple(row))
    decomposition = None
    if "separable" in doc:
        sep = doc["separable"]
        weights = _float_array(_field(sep, "weights", f"{where}.separable"), f"{where}.separable.weights")
        factors = _field(sep, "factors", f"{where}.separable")
        decomposition = SeparableDecomposition(
            tuple(float(w) for w in weights),
            tuple(
                tuple(parse_matrix(f, f"{where}.separable.factors[{s}][{k}]") for k, f in enumerate(fs))
                for s, fs in enumerate(factors)
            ),
        )
    return _wrap(lambda: QuantumModel(tuple(dims), state, tuple(povms), decomposition), where)


def dump_quantum_model(q: QuantumModel) -> dict:
    doc = {
        "dims": list(q.subsystem_dims),
        "state": dump_matrix(q.state.matrix),
        "povms": [[[dump_matrix(e) for e in m.elements] for m in stage] for stage in q.povms],
    }
    if q.decomposition is not None:
        doc["separable"] = {
            "weights": [_num(w) for w in q.decomposition.weights],
            "factors": [[dump_matrix(f) for f in fs] for fs in q.decomposition.factors],
        }
    return doc


def parse_state(doc: dict) -> tuple[DensityMatrix, list[int]]:
    dims = _int_list(_field(doc, "dims", "state"), "state.dims")
    rho = parse_matrix(_field(doc, "state", "state"), "state.state")
    return _wrap(lambda: validate_state(rho), "state"), dims


def parse_ensemble(doc: dict) -> list[np.ndarray]:
    """``{"states": [matrix, ...]}`` or ``{"vectors": [ket, ...]}`` (turned into projectors)."""
    if "states" in doc:
        return [parse_matrix(m, f"states[{i}]") for i, m in enumerate(doc["states"])]
    if "vectors" in doc:
        kets = [parse_vector(v, f"vectors[{i}]") for i, v in enumerate(doc["vectors"])]
        return [np.outer(v, v.conj()) for v in kets]
    raise ParseError("ensemble: expected a 'states' or 'vectors' field")


def parse_discordant_spec(doc: dict) -> DiscordantSpec:
    where = "discordant spec"
    probs = _float_array(_field(doc, "latent_probs", where), f"{where}.latent_probs")
    g = _int_list(_field(doc, "g", where), f"{where}.g")
    h = _int_list(_field(doc, "h", where), f"{where}.h")
    basis_a = parse_matrix(_field(doc, "basis_A", where), f"{where}.basis_A")
    states = _field(doc, "states_B", where)
    if not isinstance(states, list):
        raise ParseError(f"{where}.states_B: expected a list of vectors")
    phis = [parse_vector(v, f"{where}.states_B[{i}]") for i, v in enumerate(states)]
    declared = parse_matrix(doc["declared_basis_B"], f"{where}.declared_basis_B") if "declared_basis_B" in doc else None
    sizes = None
    if "alphabets" in doc:
        sizes = _int_list(doc["alphabets"], f"{where}.alphabets")
        if len(sizes) != 2:
            raise ParseError(f"{where}.alphabets: expected two sizes")
        sizes = (sizes[0], sizes[1])
    return DiscordantSpec(probs, g, h, basis_a, phis, declared, sizes)

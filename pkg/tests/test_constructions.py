import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_joint, random_latent_model, random_process
from qrecall import (
    EXAMPLES,
    DiscordantSpec,
    JointDistribution,
    LatentModel,
    ProcessSpec,
    born_joint,
    build_discordant,
    build_latent_diagonal,
    build_universal,
    check_classical_implementable,
    diagonal_to_latent,
    discord_one_sided,
    eval_latent,
    max_abs_error,
    named_example,
    partial_trace,
    verify_model,
)
from qrecall.errors import ConstructionError, PreconditionError, UsageError
from qrecall.quantum import KET0, KET1, KET_MINUS, KET_PLUS, projector


def test_diagonal_flip_state():
    model, proc, target = named_example("diagonal-flip")
    expected = np.zeros((4, 4))
    expected[0, 0] = expected[3, 3] = 0.5
    np.testing.assert_allclose(model.state.matrix, expected, atol=1e-15)
    assert max_abs_error(born_joint(model, proc), target) == 0.0


@pytest.mark.parametrize("name", EXAMPLES)
def test_examples_verify_and_are_classically_infeasible(name):
    model, proc, target = named_example(name)
    rep = verify_model(model, proc, target)
    assert rep.passed and rep.max_abs_error <= 1e-12
    assert not check_classical_implementable(target, proc).feasible
    # oblivious: one POVM per stage
    assert all(len(stage) == 1 for stage in model.povms)
    assert model.decomposition is not None


def test_unknown_example():
    with pytest.raises(UsageError, match="illex2"):
        named_example("nope")


def test_verify_reports_error_against_wrong_target():
    model, proc, _ = named_example("illex2")
    rep = verify_model(model, proc, JointDistribution.uniform((2, 2)))
    assert not rep.passed
    assert rep.max_abs_error == pytest.approx(0.25, abs=1e-12)
    assert rep.residuals.shape == (4,)


def test_separable_decomposition_reassembles_state():
    for name in EXAMPLES:
        model, _, _ = named_example(name)
        dec = model.decomposition
        assert sum(dec.weights) == pytest.approx(1.0, abs=1e-15)
        np.testing.assert_allclose(dec.matrix(), model.state.matrix, atol=1e-14)


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n_latent=st.integers(1, 4))
def test_latent_encoding_reproduces_latent_model(seed, n_latent):
    rng = np.random.default_rng(seed)
    alphabets = tuple(int(a) for a in rng.integers(1, 4, size=int(rng.integers(1, 4))))
    proc = random_process(rng, alphabets, max_labels=3)
    latent = random_latent_model(rng, proc, n_latent)
    q = build_latent_diagonal(latent, proc)
    assert q.subsystem_dims == (n_latent,) * proc.n
    assert max_abs_error(born_joint(q, proc), eval_latent(latent, proc)) <= 1e-10


def test_single_latent_value_gives_one_dimensional_systems():
    proc = ProcessSpec.oblivious((2, 3))
    latent = LatentModel(np.ones(1), (np.array([[[0.2, 0.8]]]), np.array([[[0.1, 0.3, 0.6]]])))
    q = build_latent_diagonal(latent, proc)
    assert q.subsystem_dims == (1, 1)
    assert max_abs_error(born_joint(q, proc), eval_latent(latent, proc)) <= 1e-15


def test_universal_encoding_uniform_target_has_mixed_marginals():
    proc = ProcessSpec.oblivious((2, 2))
    q = build_universal(JointDistribution.uniform((2, 2)), proc)
    assert q.subsystem_dims == (4, 4)
    np.testing.assert_allclose(partial_trace(q.state.matrix, (4, 4), [0]), np.eye(4) / 4, atol=1e-15)
    np.testing.assert_allclose(partial_trace(q.state.matrix, (4, 4), [1]), np.eye(4) / 4, atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_universal_encoding_reproduces_any_target(seed):
    rng = np.random.default_rng(seed)
    alphabets = tuple(int(a) for a in rng.integers(1, 3, size=int(rng.integers(1, 4))))
    proc = random_process(rng, alphabets)
    target = random_joint(rng, alphabets)
    assert verify_model(build_universal(target, proc), proc, target).passed


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_diagonal_model_reads_back_as_latent(seed):
    rng = np.random.default_rng(seed)
    proc = random_process(rng, (2, 3))
    q = build_latent_diagonal(random_latent_model(rng, proc, 3), proc)
    back = diagonal_to_latent(q, proc)
    assert max_abs_error(eval_latent(back, proc), born_joint(q, proc)) <= 1e-12


def test_non_diagonal_model_cannot_be_read_as_latent():
    model, proc, _ = named_example("illex2")
    with pytest.raises(PreconditionError):
        diagonal_to_latent(model, proc)


# -- discordant construction -------------------------------------------------


def _spec(states, p=(0.5, 0.5), g=(0, 1), h=(1, 0), **kw):
    return DiscordantSpec(list(p), list(g), list(h), np.eye(2), [np.asarray(s) for s in states], **kw)


def test_discordant_with_plus_minus_reproduces_example():
    build = build_discordant(_spec([KET_PLUS, KET_MINUS]))
    model, proc, target = named_example("illex2")
    assert build.process == proc
    assert build.target == target
    np.testing.assert_allclose(build.model.state.matrix, model.state.matrix, atol=1e-15)
    assert verify_model(build.model, build.process, build.target).passed
    assert build.commutation < 1e-12
    assert build.off_diagonal == pytest.approx(0.5)


def test_discordant_reported_diagonal_in_declared_basis():
    hadamard = np.column_stack([KET_PLUS, KET_MINUS])
    build = build_discordant(_spec([KET_PLUS, KET_MINUS], declared_basis_b=hadamard))
    assert build.off_diagonal < 1e-15


def test_discordant_rejects_overlapping_states():
    with pytest.raises(ConstructionError) as err:
        build_discordant(_spec([KET0, KET_PLUS]))
    msg = str(err.value)
    assert "states_b[0]" in msg and "states_b[1]" in msg
    assert float(msg.split("overlap ")[1].split(";")[0]) == pytest.approx(1 / np.sqrt(2))


def test_discordant_shared_h_may_overlap():
    build = build_discordant(_spec([KET0, KET_PLUS], p=(0.25, 0.75), g=(0, 1), h=(0, 0), alphabet_sizes=(2, 2)))
    assert verify_model(build.model, build.process, build.target).passed
    assert build.commutation == pytest.approx(0.5, abs=1e-12)


def test_discordant_identity_readout():
    build = build_discordant(_spec([KET0, KET1], p=(0.25, 0.75), g=(0, 1), h=(0, 1)))
    np.testing.assert_allclose(build.target.probs, [0.25, 0, 0, 0.75])
    assert verify_model(build.model, build.process, build.target).passed
    assert build.off_diagonal == 0.0


def test_discordant_validates_inputs():
    with pytest.raises(ConstructionError, match="norm"):
        build_discordant(_spec([KET0, 2 * KET1]))
    with pytest.raises(ConstructionError, match="orthonormal"):
        build_discordant(DiscordantSpec([0.5, 0.5], [0, 1], [0, 1], np.ones((2, 2)), [KET0, KET1]))


def test_three_stage_state_is_classical_on_middle_subsystem():
    model, _, _ = named_example("three-stage")
    # reorder to (first, third) | second and measure the second subsystem
    rho = model.state.matrix.reshape([2] * 6).transpose(0, 2, 1, 3, 5, 4).reshape(8, 8)
    assert discord_one_sided(rho, (4, 2), "B", 256) < 1e-9


def test_interface_aliases():
    from qrecall import build_diag_universal, build_thm1, build_thm2, paper_example

    assert build_thm1 is build_latent_diagonal and build_diag_universal is build_universal
    assert paper_example is named_example
    q = build_thm2(_spec([KET_PLUS, KET_MINUS]))
    model, proc, target = named_example("illex2")
    assert verify_model(q, proc, target).passed

import numpy as np
import pytest

from qrecall import JointDistribution, LatentModel, LocalModel, ProcessSpec


@pytest.fixture
def anti():
    """P(0,1) = P(1,0) = 1/2."""
    return JointDistribution.from_mapping((2, 2), {(0, 1): 0.5, (1, 0): 0.5})


@pytest.fixture
def oblivious2():
    return ProcessSpec.oblivious((2, 2))


@pytest.fixture
def recall2():
    return ProcessSpec.perfect_recall((2, 2))


def random_process(rng, alphabets, max_labels=None):
    """Random info maps; some labels may be left unreached."""
    maps, counts = [], []
    n_prefix = 1
    for k, a in enumerate(alphabets):
        limit = n_prefix if max_labels is None else min(n_prefix, max_labels)
        count = int(rng.integers(1, limit + 1))
        maps.append(rng.integers(0, count, size=n_prefix))
        counts.append(count)
        n_prefix *= a
    return ProcessSpec(tuple(alphabets), tuple(maps), tuple(counts))


def random_rows(rng, shape, sparse=False):
    rows = rng.dirichlet(np.ones(shape[-1]), size=shape[:-1])
    if sparse:
        mask = rng.random(rows.shape) < 0.3
        mask[..., 0] = False
        rows = np.where(mask, 0.0, rows)
        rows /= rows.sum(axis=-1, keepdims=True)
    return rows


def random_local_model(rng, proc, sparse=False):
    return LocalModel(
        tuple(random_rows(rng, (c, a), sparse) for c, a in zip(proc.info_label_counts, proc.alphabet_sizes))
    )


def random_latent_model(rng, proc, n_latent):
    return LatentModel(
        rng.dirichlet(np.ones(n_latent)),
        tuple(random_rows(rng, (n_latent, c, a)) for c, a in zip(proc.info_label_counts, proc.alphabet_sizes)),
    )


def random_joint(rng, alphabets):
    return JointDistribution(tuple(alphabets), rng.dirichlet(np.ones(int(np.prod(alphabets)))))


def label_of(proc):
    return lambda k, prefix: proc.label(k + 1, prefix)


# one line per acceptance criterion, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

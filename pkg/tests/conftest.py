import numpy as np
import pytest

from dyce import CostModel, ExitConfig, ExitTrace


def make_t4():
    """Four-sample, two-position reference trace used throughout the suite.

    Early exit (1,1): confidences [0.9, 0.6, 0.8, 0.3], correct [1, 0, 1, 1].
    Final head (2,1): confidence 1 everywhere, correct [1, 1, 0, 1].
    S = [0.4, 0.6], delta = [[0, 0.05], [0, 0]], a_ori = 0.75.
    """
    trace = ExitTrace(
        sample_count=4,
        position_count=2,
        candidates=(1, 1),
        confidence=(
            np.array([[0.9], [0.6], [0.8], [0.3]]),
            np.ones((4, 1)),
        ),
        correct=(
            np.array([[1], [0], [1], [1]], dtype=np.uint8),
            np.array([[1], [1], [0], [1]], dtype=np.uint8),
        ),
    )
    costs = CostModel(
        segment_cost=np.array([0.4, 0.6]),
        exit_cost=(np.array([0.0, 0.05]), np.array([0.0, 0.0])),
        base_accuracy=0.75,
    )
    return trace, costs


@pytest.fixture(scope="session")
def t4():
    return make_t4()


@pytest.fixture()
def t4_dir(tmp_path, t4):
    from dyce import write_trace

    trace, costs = t4
    write_trace(trace, costs, tmp_path / "T4", name="t4")
    return tmp_path / "T4"


def random_config(rng: np.random.Generator, trace: ExitTrace) -> ExitConfig:
    """Random valid configuration: random candidate (possibly disabled) and a
    random threshold at every early position."""
    k = []
    t = []
    for pos0 in range(trace.position_count - 1):
        k_n = trace.candidates[pos0]
        choice = int(rng.integers(0, k_n + 1))
        k.append(choice)
        if choice == 0:
            t.append(1.0)
        elif rng.random() < 0.5 and trace.sample_count > 0:
            # use a recorded confidence so threshold ties get exercised
            sid = int(rng.integers(0, trace.sample_count))
            t.append(float(trace.confidence[pos0][sid, choice - 1]))
        else:
            t.append(float(rng.random()))
    k.append(1)
    t.append(0.0)
    return ExitConfig(k=tuple(k), t=tuple(t))

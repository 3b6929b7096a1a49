import copy

import pytest

from dyce_exporter import DESK_EXPERIMENT, Experiment, run_experiment


def reduced_experiment():
    """Small variant of the desk experiment for fast structural tests."""
    exp = copy.deepcopy(DESK_EXPERIMENT)
    exp["dataset"].update(train=800, val=240, eval=320)
    exp["backbone"]["pretrain_epochs"] = 2
    exp["recipe"]["epochs"] = 1
    exp["exits"]["positions"] = [2, 4]
    exp["exits"]["variants"] = [[1, 0], [3, 500]]
    return exp


@pytest.fixture(scope="session")
def reduced_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("reduced") / "trace"
    log = run_experiment(Experiment.from_dict(reduced_experiment()), out)
    return out, log


@pytest.fixture(scope="session")
def desk_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("desk") / "trace"
    log = run_experiment(Experiment.from_dict(DESK_EXPERIMENT), out)
    return out, log

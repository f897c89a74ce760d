import numpy as np
import pytest

from sillopt import dataset, objective, oracle, surrogate
from sillopt.design_space import default_space, reduced_space


@pytest.fixture(scope="session")
def space7():
    return default_space()


@pytest.fixture(scope="session")
def oracle7(space7):
    return oracle.calibrated_config(space7)


@pytest.fixture(scope="session")
def space3():
    return reduced_space()


@pytest.fixture(scope="session")
def oracle3(space3):
    return oracle.calibrated_config(space3)


@pytest.fixture(scope="session")
def db3(space3, oracle3):
    return dataset.generate(space3, oracle3, 310, seed=11)


@pytest.fixture(scope="session")
def split3(db3):
    return dataset.split(db3, 0.8, seed=12)


@pytest.fixture(scope="session")
def scaling3(split3):
    return objective.fit_scaling_reference(split3[0])


@pytest.fixture(scope="session")
def model3(split3):
    """Small accurate surrogate on the reduced space, shared across tests."""
    train_db, test_db = split3
    fit_db, val_db = dataset.split(train_db, 0.8, seed=99)
    return surrogate.train(
        fit_db,
        surrogate.Hyperparameters((64, 64, 64), 1e-2),
        epochs=1500,
        seed=5,
        val_db=val_db,
        patience=100,
    )

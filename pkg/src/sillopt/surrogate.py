"""Regression surrogate: thickness vector in, standardized objectives out.

The network (three hidden layers) trains on raw thicknesses in mm against
z-scored outputs, with mean-squared-error loss and Adam.  Hyperparameters
(hidden widths, learning rate) are chosen by random search within fixed
ranges, scoring each candidate by validation mean absolute error on a
carve-out of the training data, then retraining the winner on the full
training set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import dataset as ds
from .design_space import DesignSpace, ThicknessVector
from .nn import AdamState, DenseNetwork, adam_step
from .oracle import ObjectiveTriple

_FORMAT = "sillopt-surrogate"
_VERSION = 1


class SurrogateTrainingError(RuntimeError):
    """Training diverged or produced no usable model."""


@dataclass(frozen=True)
class HyperparameterSpace:
    """Search ranges: hidden widths sampled linearly, learning rate log-uniformly."""

    hidden_min: int = 32
    hidden_max: int = 512
    lr_min: float = 1e-4
    lr_max: float = 1e-2
    max_trials: int = 10
    executions_per_trial: int = 2

    def __post_init__(self):
        if self.hidden_min > self.hidden_max or self.lr_min > self.lr_max:
            raise ValueError("empty hyperparameter range")
        if self.max_trials < 1 or self.executions_per_trial < 1:
            raise ValueError("need at least one trial and one execution")

    def sample(self, rng) -> "Hyperparameters":
        hidden = tuple(int(rng.integers(self.hidden_min, self.hidden_max + 1)) for _ in range(3))
        lr = float(np.exp(rng.uniform(np.log(self.lr_min), np.log(self.lr_max))))
        return Hyperparameters(hidden, lr)


@dataclass(frozen=True)
class Hyperparameters:
    hidden: tuple[int, int, int]
    learning_rate: float

    def to_json_obj(self) -> dict:
        return {"hidden": list(self.hidden), "learning_rate": self.learning_rate}


@dataclass
class SurrogateModel:
    network: DenseNetwork
    standardizer: ds.StandardizationStats
    report: dict = field(default_factory=dict)

    def predict_standardized(self, x) -> np.ndarray:
        return self.network.forward(x)

    def predict(self, t: ThicknessVector) -> ObjectiveTriple:
        z = self.network.forward(t.as_array())
        y = self.standardizer.invert(z)
        return ObjectiveTriple(float(y[0]), float(y[1]), float(y[2]))


def predict(model: SurrogateModel, t: ThicknessVector) -> ObjectiveTriple:
    return model.predict(t)


def _epoch_loss(net, x, z) -> float:
    diff = net.forward(x) - z
    return float((diff * diff).mean())


def train(
    train_db: ds.Database,
    hp: Hyperparameters,
    epochs: int = 200,
    seed=0,
    val_db: ds.Database | None = None,
    patience: int = 20,
    batch_size: int = 32,
    standardizer: ds.StandardizationStats | None = None,
) -> SurrogateModel:
    """Train one configuration; deterministic in (data, hp, seed).

    Early-stops after ``patience`` epochs without improvement of the
    monitored metric (validation MAE when ``val_db`` is given, else the
    training loss) and keeps the best-so-far weights.
    """
    if len(train_db) == 0:
        raise SurrogateTrainingError("empty training database")
    rng = np.random.default_rng(seed)
    stats = standardizer or ds.fit_standardizer(train_db)
    x = train_db.thickness_matrix()
    z = stats.apply(train_db.output_matrix())
    sizes = (x.shape[1], *hp.hidden, 3)
    net = DenseNetwork.initialize(sizes, rng)
    state = AdamState.initialize(net.parameters(), hp.learning_rate)

    if val_db is not None:
        xv = val_db.thickness_matrix()
        zv = stats.apply(val_db.output_matrix())

    def monitored() -> float:
        if val_db is not None:
            return float(np.abs(net.forward(xv) - zv).mean())
        return _epoch_loss(net, x, z)

    n = x.shape[0]
    best_metric = np.inf
    best_params = [p.copy() for p in net.parameters()]
    best_epoch = 0
    epochs_run = 0
    for epoch in range(1, epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            xb, zb = x[idx], z[idx]
            pred = net.forward(xb)
            diff = pred - zb
            loss = float((diff * diff).mean())
            if not np.isfinite(loss):
                raise SurrogateTrainingError(f"training diverged at epoch {epoch}")
            upstream = 2.0 * diff / diff.size
            grads = net.backward(xb, upstream).parameter_grads()
            params, state = adam_step(net.parameters(), grads, state)
            net.load_parameters(params)
        epochs_run = epoch
        metric = monitored()
        if not np.isfinite(metric):
            raise SurrogateTrainingError(f"training diverged at epoch {epoch}")
        if metric < best_metric:
            best_metric = metric
            best_params = [p.copy() for p in net.parameters()]
            best_epoch = epoch
        elif epoch - best_epoch >= patience:
            break

    net.load_parameters(best_params)
    report = {
        "hyperparameters": hp.to_json_obj(),
        "epochs_run": epochs_run,
        "best_epoch": best_epoch,
        "monitor": "val_mae" if val_db is not None else "train_mse",
        "best_metric": best_metric,
        "final_train_mse": _epoch_loss(net, x, z),
    }
    return SurrogateModel(net, stats, report)


def tune(
    train_db: ds.Database,
    hp_space: HyperparameterSpace,
    seed=0,
    epochs: int = 200,
    patience: int = 20,
) -> SurrogateModel:
    """Random-search tuning; returns the winning configuration retrained
    on the whole training set.

    One fixed validation split (20% of ``train_db``) scores every trial;
    each trial runs ``executions_per_trial`` times with distinct seeds and is
    ranked by mean validation MAE.
    """
    rng = np.random.default_rng(seed)
    fit_seed, val_seed = rng.integers(2**31, size=2)
    tune_train, tune_val = ds.split(train_db, 0.8, val_seed)

    trials = []
    for trial_idx in range(hp_space.max_trials):
        hp = hp_space.sample(rng)
        exec_maes, exec_seeds = [], []
        for _ in range(hp_space.executions_per_trial):
            run_seed = int(rng.integers(2**31))
            exec_seeds.append(run_seed)
            try:
                model = train(
                    tune_train, hp, epochs=epochs, seed=run_seed,
                    val_db=tune_val, patience=patience,
                )
                exec_maes.append(model.report["best_metric"])
            except SurrogateTrainingError:
                exec_maes.append(float("inf"))
        trials.append(
            {
                "trial": trial_idx,
                "hyperparameters": hp.to_json_obj(),
                "seeds": exec_seeds,
                "val_maes": exec_maes,
                "mean_val_mae": float(np.mean(exec_maes)),
            }
        )

    means = [t["mean_val_mae"] for t in trials]
    best_idx = int(np.argmin(means))
    if not np.isfinite(means[best_idx]):
        raise SurrogateTrainingError("every tuning trial diverged")
    best_hp = Hyperparameters(
        tuple(trials[best_idx]["hyperparameters"]["hidden"]),
        trials[best_idx]["hyperparameters"]["learning_rate"],
    )

    model = train(train_db, best_hp, epochs=epochs, seed=int(fit_seed), patience=patience)
    model.report = {
        "chosen_trial": best_idx,
        "chosen_hyperparameters": best_hp.to_json_obj(),
        "trials": trials,
        "refit": model.report,
    }
    return model


@dataclass
class EvaluationReport:
    mae: float
    mse: float
    residuals: np.ndarray  # percent errors on physical scale, one row per usable entry
    residual_outputs: np.ndarray  # output index column matching ``residuals``
    excluded: int

    def to_json_obj(self) -> dict:
        return {
            "mae": self.mae,
            "mse": self.mse,
            "residuals_within_5pct": float((np.abs(self.residuals) <= 5.0).mean())
            if self.residuals.size
            else None,
            "excluded": self.excluded,
        }


def evaluate(model: SurrogateModel, test_db: ds.Database) -> EvaluationReport:
    """MAE/MSE on standardized outputs plus physical-scale percent residuals.

    Residuals are 100 * (true - predicted) / true; entries with a zero true
    value are excluded and counted.
    """
    if len(test_db) == 0:
        raise ValueError("empty test database")
    x = test_db.thickness_matrix()
    y_true = test_db.output_matrix()
    z_true = model.standardizer.apply(y_true)
    z_pred = model.network.forward(x)
    err = z_pred - z_true
    mae = float(np.abs(err).mean())
    mse = float((err * err).mean())

    y_pred = model.standardizer.invert(z_pred)
    mask = y_true != 0
    excluded = int((~mask).sum())
    residuals = 100.0 * (y_true[mask] - y_pred[mask]) / y_true[mask]
    out_idx = np.nonzero(mask)[1]
    return EvaluationReport(mae, mse, residuals, out_idx, excluded)


def save_model(model: SurrogateModel, path, extra: dict | None = None):
    """Persist network + standardizer (+ caller extras such as scaling anchors)."""
    obj = {
        "format": _FORMAT,
        "version": _VERSION,
        "network": model.network.to_json_obj(),
        "standardizer": model.standardizer.to_json_obj(),
        "report": model.report,
    }
    if extra:
        obj.update(extra)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f)
        f.write("\n")


def load_model(path) -> tuple[SurrogateModel, dict]:
    """Load a model file; returns (model, whole JSON object for extras)."""
    with open(path, encoding="utf-8") as f:
        obj = json.load(f)
    if obj.get("format") != _FORMAT or obj.get("version") != _VERSION:
        raise ValueError(f"{path}: not a {_FORMAT} v{_VERSION} file")
    model = SurrogateModel(
        DenseNetwork.from_json_obj(obj["network"]),
        ds.StandardizationStats.from_json_obj(obj["standardizer"]),
        obj.get("report", {}),
    )
    return model, obj

"""Input-space inversion of the trained surrogate.

Instead of searching designs directly, descend the surrogate's input space:
starting from a guess x0, repeatedly step against the gradient of

    E(x) = sum((F(x) - Y)^2)

where F is the network on standardized outputs and Y the standardized ideal
objective array, projecting back into the thickness bounds after every step.
Multiple networks inputs can produce the same output, so several restarts
run from distinct starting points and the best basin wins.  The continuous
minimizer is finally snapped to the thickness grid and re-scored, so the
reported design is one that can actually be built.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import StandardizationStats
from .design_space import DesignSpace, ThicknessVector
from .nn import DenseNetwork
from .objective import TargetSpec

MASS_MODES = ("target", "minimize")


class InversionError(RuntimeError):
    """Non-finite loss encountered during descent."""


@dataclass(frozen=True)
class InversionConfig:
    bounds: DesignSpace
    target: tuple[float, ...]  # standardized objective triple Y
    learning_rate: float = 0.01
    max_iterations: int = 2000
    tolerance: float = 1e-3
    seed: int | None = None
    # "target": mass is matched to Y[2] like the energies.
    # "minimize": the mass term becomes a descent direction weighted by
    # mass_weight instead of a squared distance.
    mass_mode: str = "target"
    mass_weight: float = 0.1

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.tolerance < 0:
            raise ValueError("tolerance must be nonnegative")
        if self.mass_mode not in MASS_MODES:
            raise ValueError(f"mass_mode must be one of {MASS_MODES}")


def build_target(target_spec: TargetSpec, standardizer: StandardizationStats) -> tuple[float, ...]:
    """Standardize the user's ideal array with the surrogate's training stats."""
    y = standardizer.apply(
        [target_spec.ideal_ea_ss, target_spec.ideal_ea_f, target_spec.mass_info]
    )
    return tuple(float(v) for v in y)


@dataclass
class InversionResult:
    x_best: ThicknessVector  # continuous best-so-far iterate
    best_loss: float
    snapped: ThicknessVector  # nearest grid design to x_best
    snapped_loss: float
    iterations: int
    trace: list = field(default_factory=list)  # loss per iteration, index 0 = at x0
    restart_index: int = 0


def _loss_and_upstream(net: DenseNetwork, config: InversionConfig, x: np.ndarray):
    y = net.forward(x)
    target = np.asarray(config.target)
    diff = y - target
    if config.mass_mode == "minimize" and net.output_size >= 3:
        loss = float(diff[0] ** 2 + diff[1] ** 2 + config.mass_weight * y[2])
        upstream = np.array([2 * diff[0], 2 * diff[1], config.mass_weight])
    else:
        loss = float((diff * diff).sum())
        upstream = 2 * diff
    return loss, upstream


def invert(net: DenseNetwork, config: InversionConfig, x0: ThicknessVector | None = None) -> InversionResult:
    """Projected gradient descent in the input box; returns the best iterate.

    Starts from ``x0`` (or a seeded grid sample), stops on the iteration cap
    or when the loss drops below the tolerance, and reports both the
    continuous best point and its grid snap with the snap's own loss.
    """
    space = config.bounds
    if x0 is None:
        x0 = space.random_grid_sample(config.seed)
    if not space.validate(x0):
        raise ValueError("starting point lies outside the bounds")
    lo = np.array([p.min for p in space.params])
    hi = np.array([p.max for p in space.params])

    x = x0.as_array()
    loss, upstream = _loss_and_upstream(net, config, x)
    if not np.isfinite(loss):
        raise InversionError("loss is non-finite at the starting point (iteration 0)")
    best_x, best_loss = x.copy(), loss
    trace = [loss]
    iterations = 0
    if loss >= config.tolerance:
        for it in range(1, config.max_iterations + 1):
            grad = net.backward(x, upstream).input_grad
            x = np.clip(x - config.learning_rate * grad, lo, hi)
            loss, upstream = _loss_and_upstream(net, config, x)
            if not np.isfinite(loss):
                raise InversionError(f"loss became non-finite at iteration {it}")
            trace.append(loss)
            iterations = it
            if loss < best_loss:
                best_loss = loss
                best_x = x.copy()
            if loss < config.tolerance:
                break

    best_vec = ThicknessVector.of(best_x)
    snapped = space.snap(best_vec)
    snapped_loss, _ = _loss_and_upstream(net, config, snapped.as_array())
    return InversionResult(best_vec, best_loss, snapped, snapped_loss, iterations, trace)


def multistart_invert(net: DenseNetwork, config: InversionConfig, restarts: int = 8) -> InversionResult:
    """Best of ``restarts`` seeded descents, judged by the snapped design's loss.

    Ties go to the lowest restart index; deterministic for a fixed seed.
    """
    if restarts < 1:
        raise ValueError("restarts must be at least 1")
    rng = np.random.default_rng(config.seed)
    best = None
    for i in range(restarts):
        x0 = config.bounds.random_grid_sample(rng)
        result = invert(net, config, x0=x0)
        result.restart_index = i
        if best is None or result.snapped_loss < best.snapped_loss:
            best = result
    return best

"""Scalarized optimization objective shared by every optimizer.

The three physical objectives (two absorbed energies and the mass) are
affinely mapped to a common [1, 100] band before being combined, so that the
large energy numbers cannot drown out the mass term.  The reward of a design

    R = w1 * (f1 - M1) - w2 * f2

uses f1 = scaled ea_ss + scaled ea_f, M1 = the same sum for the user's ideal
energies, and f2 = scaled mass.  Optimizers minimize O = -R; GA, network
inversion and the RL environment all share this one definition so their
results are comparable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .oracle import ObjectiveTriple

OBJECTIVE_NAMES = ("ea_ss", "ea_f", "mass")


class DegenerateScalingError(ValueError):
    """An objective's min and max coincide; no affine map to [1, 100] exists."""


@dataclass(frozen=True)
class ScalingReference:
    """Per-objective anchors for the affine map onto [1, 100].

    Values outside [min, max] extrapolate linearly rather than clipping, so
    rankings stay informative outside the anchor hull.
    """

    ea_ss: tuple[float, float]
    ea_f: tuple[float, float]
    mass: tuple[float, float]

    def __post_init__(self):
        for name in OBJECTIVE_NAMES:
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise DegenerateScalingError(f"{name}: min {lo} must be < max {hi}")

    def scale(self, objective_name: str, x: float) -> float:
        """Map ``x`` so the anchor min lands on 1 and the anchor max on 100."""
        lo, hi = getattr(self, objective_name)
        return 1.0 + 99.0 * (x - lo) / (hi - lo)

    def to_json_obj(self) -> dict:
        return {name: list(getattr(self, name)) for name in OBJECTIVE_NAMES}

    @classmethod
    def from_json_obj(cls, obj) -> "ScalingReference":
        return cls(*(tuple(float(v) for v in obj[name]) for name in OBJECTIVE_NAMES))


@dataclass(frozen=True)
class TargetSpec:
    """User's ideal objective array plus the fixed combination weights.

    ``mass_info`` is carried for reporting and as the network-inversion mass
    target, but does not enter the reward.
    """

    ideal_ea_ss: float
    ideal_ea_f: float
    mass_info: float
    w1: float = 1.0
    w2_magnitude: float = 0.5
    t2_threshold: float = 5.0
    t2_bonus: float = 10.0

    def __post_init__(self):
        if self.t2_threshold <= 0:
            raise ValueError("t2_threshold must be positive")

    @classmethod
    def parse(cls, text: str, **kwargs) -> "TargetSpec":
        """Parse a comma-separated triple such as "800,600,13"."""
        parts = text.split(",")
        if len(parts) != 3:
            raise ValueError(
                f"target must be 3 comma-separated numbers (ea_ss,ea_f,mass), got {text!r}"
            )
        ss, f, m = (float(p) for p in parts)
        return cls(ss, f, m, **kwargs)

    def to_json_obj(self) -> dict:
        return {
            "ideal_ea_ss": self.ideal_ea_ss,
            "ideal_ea_f": self.ideal_ea_f,
            "mass_info": self.mass_info,
            "w1": self.w1,
            "w2_magnitude": self.w2_magnitude,
            "t2_threshold": self.t2_threshold,
            "t2_bonus": self.t2_bonus,
        }

    @classmethod
    def from_json_obj(cls, obj) -> "TargetSpec":
        return cls(**{k: float(v) for k, v in obj.items()})


def scale(ref: ScalingReference, objective_name: str, x: float) -> float:
    return ref.scale(objective_name, x)


def reward(ref: ScalingReference, target: TargetSpec, current: ObjectiveTriple) -> float:
    """Scalar reward of a design; higher is better."""
    f1 = ref.scale("ea_ss", current.ea_ss) + ref.scale("ea_f", current.ea_f)
    m1 = ref.scale("ea_ss", target.ideal_ea_ss) + ref.scale("ea_f", target.ideal_ea_f)
    f2 = ref.scale("mass", current.mass)
    return target.w1 * (f1 - m1) - target.w2_magnitude * f2


def optimization_value(ref: ScalingReference, target: TargetSpec, current: ObjectiveTriple) -> float:
    """The quantity optimizers minimize; exact negative of the reward."""
    return -reward(ref, target, current)


def t2_satisfied(ref: ScalingReference, target: TargetSpec, current: ObjectiveTriple) -> bool:
    """Proximity test: mean absolute scaled-energy gap strictly below threshold."""
    d_ss = abs(ref.scale("ea_ss", current.ea_ss) - ref.scale("ea_ss", target.ideal_ea_ss))
    d_f = abs(ref.scale("ea_f", current.ea_f) - ref.scale("ea_f", target.ideal_ea_f))
    return (d_ss + d_f) / 2.0 < target.t2_threshold


def fit_scaling_reference(db) -> ScalingReference:
    """Anchor the scaling at the per-objective min/max observed in a database.

    Accepts a dataset.Database or any iterable of ObjectiveTriple.
    """
    records = getattr(db, "records", db)
    triples = [getattr(r, "objectives", r) for r in records]
    if not triples:
        raise DegenerateScalingError("cannot fit scaling on an empty database")
    anchors = {}
    for name in OBJECTIVE_NAMES:
        vals = [getattr(tr, name) for tr in triples]
        lo, hi = min(vals), max(vals)
        if not lo < hi:
            raise DegenerateScalingError(
                f"{name}: degenerate anchors (min == max == {lo})"
            )
        anchors[name] = (lo, hi)
    return ScalingReference(**anchors)


def save_json(obj, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj.to_json_obj(), f, indent=2)
        f.write("\n")

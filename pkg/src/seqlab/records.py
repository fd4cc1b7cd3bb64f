"""Shared result records and run configuration."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from .errors import InvalidSpec

# Method labels carried by every RateBracket.
MINIMAX_STAR = "MINIMAX_STAR"
EPSILON_MU = "EPSILON_MU"
WIDTH_CROSSING = "WIDTH_CROSSING"
RESTRICTED_WIDTH_CROSSING = "RESTRICTED_WIDTH_CROSSING"
WIDTH_GLOBAL = "WIDTH_GLOBAL"
ENTROPY_SUP_CROSSING = "ENTROPY_SUP_CROSSING"
GEOMETRIC_MEAN = "GEOMETRIC_MEAN"
WIDTH_GAP = "WIDTH_GAP"
INNER_MIN_GAP = "INNER_MIN_GAP"
PAIR_GAP_ENTROPY = "PAIR_GAP_ENTROPY"
LIPSCHITZ_SLOPE = "LIPSCHITZ_SLOPE"
LOCAL_PACK = "LOCAL_PACK"
GLOBAL_PACK = "GLOBAL_PACK"
DUDLEY = "DUDLEY"
CLOSED_FORM = "CLOSED_FORM"

SUFFICIENT = "SufficientForOptimal"
NECESSARY_VIOLATED = "NecessaryViolated"
INCONCLUSIVE = "Inconclusive"


def _num(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


@dataclass
class RateBracket:
    lower: float
    upper: float
    method: str
    sigma: float | None = None
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        self.lower = float(max(self.lower, 0.0))
        self.upper = float(self.upper)
        if self.upper < self.lower:
            # numeric noise only; callers pass lower <= upper by construction
            if self.upper < self.lower * (1 - 1e-9) - 1e-12:
                raise ValueError(f"bracket lower {self.lower} exceeds upper {self.upper}")
            self.upper = self.lower

    def contains(self, x, slack=1.0):
        return self.lower / slack <= x <= self.upper * slack

    def as_pair(self):
        return self.lower, self.upper

    def to_dict(self):
        return {"lower": _num(self.lower), "upper": _num(self.upper), "method": self.method,
                "sigma": self.sigma, "notes": self.notes}


@dataclass
class ConditionReport:
    condition_id: str
    eps_grid: list
    lhs: list
    rhs: list
    satisfied: list
    verdict: str
    notes: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


@dataclass
class ConstantsConfig:
    """Pinned values of every constant the rate statements leave unspecified."""
    c_star: float = 5.0
    L: float = 2.0
    C_char: float = 2.0
    c_char: float = 0.5
    sigma: float = 1.0
    seed: int = 0
    kappa: float = 2.0        # band factor for regime decisions
    C_hat: float = 0.25       # constant for the radius/risk regime check
    t_rel: float = 0.05       # width precision relative to the radius
    delta: float = 0.05       # width confidence
    r_eff: float | None = None  # effective radius for unbounded bodies

    def __post_init__(self):
        if not self.c_star > 4:
            raise InvalidSpec("c_star must exceed 4")
        if not self.C_char > 1 > self.c_char > 0:
            raise InvalidSpec("need C_char > 1 > c_char > 0")
        if not self.sigma > 0:
            raise InvalidSpec("sigma must be positive")

    def with_sigma(self, sigma):
        d = asdict(self)
        d["sigma"] = float(sigma)
        return ConstantsConfig(**d)

    def to_dict(self):
        return asdict(self)


@dataclass
class Budgets:
    probes: int = 16
    cloud: int = 20000
    reps: int = 2000
    width_samples: int | None = None   # cap on Monte-Carlo draws per width
    grid_per_decade: int = 25
    pairs: int = 16
    max_depth: int = 12
    max_children: int = 64
    max_nodes: int = 4096
    max_doublings: int = 20
    ascent_starts: int = 4
    ascent_steps: int = 30
    bisect_iters: int = 40

    def to_dict(self):
        return asdict(self)

"""Discrete-time Markov chain for hurricane intensity and location.

The joint chain is a product of independent per-attribute chains: intensity
``alpha``, landfall x-cell ``lx`` and (random landfall time only) the
y-cell ``ly`` that encodes the time to landfall.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Sequence

import numpy as np

RENORMALIZE_TOL = 1e-6

# stream tags, so training and evaluation never share draws
TAG_INSTANCE = 0
TAG_EVAL = 1
TAG_SDDP = 2
TAG_TWOSTAGE = 3
TAG_ROLL = 4


def rng_stream(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for the stream ``(seed, *keys)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, keys)])))


@dataclass(frozen=True)
class Interval:
    lower: float
    upper: float  # math.inf for an unbounded cell

    @property
    def width(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True, eq=False)
class AttributeChain:
    """One attribute's state labels and row-stochastic transition matrix."""

    labels: tuple
    matrix: np.ndarray

    def __post_init__(self):
        P = np.array(self.matrix, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValueError(f"transition matrix must be square, got shape {P.shape}")
        if P.shape[0] != len(self.labels):
            raise ValueError(f"{len(self.labels)} labels but matrix has {P.shape[0]} rows")
        if np.any(P < 0) or np.any(P > 1):
            raise ValueError("transition probabilities must lie in [0, 1]")
        sums = P.sum(axis=1)
        err = np.abs(sums - 1.0)
        if np.any(err > RENORMALIZE_TOL):
            bad = int(np.argmax(err))
            raise ValueError(f"row {bad} sums to {sums[bad]!r}, not 1")
        if np.any(err > 1e-12):
            warnings.warn("renormalizing transition rows with rounding error", stacklevel=3)
            P = P / sums[:, None]
        P.setflags(write=False)
        object.__setattr__(self, "matrix", P)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def size(self) -> int:
        return len(self.labels)

    def __eq__(self, other):
        return (
            isinstance(other, AttributeChain)
            and self.labels == other.labels
            and np.array_equal(self.matrix, other.matrix)
        )

    def __hash__(self):
        return hash((self.labels, self.matrix.tobytes()))

    @cached_property
    def cumulative(self) -> np.ndarray:
        C = np.cumsum(self.matrix, axis=1)
        C[:, -1] = 1.0
        return C

    def absorbing_states(self) -> list[int]:
        return [i for i in range(self.size) if self.matrix[i, i] == 1.0]


class StateClass(Enum):
    TRANSIENT = "transient"
    ABSORBING = "absorbing"
    NOT_APPLICABLE = "n/a"


@dataclass(frozen=True, order=True)
class HurricaneState:
    alpha: int
    lx: int
    ly: int | None = None


@dataclass(frozen=True, eq=False)
class MarkovModel:
    """Product chain over (alpha, lx[, ly]) with a fixed or maximal horizon.

    ``kind`` is ``"det"`` (deterministic landfall at ``horizon``) or
    ``"rand"`` (landfall time driven by ``ly``; ``horizon`` is T_max).
    """

    kind: str
    alpha: AttributeChain
    lx: AttributeChain
    ly: AttributeChain | None
    horizon: int
    _succ_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("det", "rand"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if (self.kind == "rand") != (self.ly is not None):
            raise ValueError("ly chain is required for kind 'rand' and forbidden for 'det'")
        if self.horizon < 2:
            raise ValueError("horizon must be at least 2")
        for lab in self.lx.labels:
            if not isinstance(lab, Interval):
                raise ValueError("lx labels must be intervals")
        if self.ly is not None:
            for lab in self.ly.labels:
                if not isinstance(lab, Interval):
                    raise ValueError("ly labels must be intervals")

    def __eq__(self, other):
        return (
            isinstance(other, MarkovModel)
            and (self.kind, self.alpha, self.lx, self.ly, self.horizon)
            == (other.kind, other.alpha, other.lx, other.ly, other.horizon)
        )

    __hash__ = None

    @property
    def chains(self) -> tuple[AttributeChain, ...]:
        if self.ly is None:
            return (self.alpha, self.lx)
        return (self.alpha, self.lx, self.ly)

    @property
    def n_intensity_levels(self) -> int:
        return self.alpha.size

    @property
    def n_states(self) -> int:
        return int(np.prod([c.size for c in self.chains]))

    def check(self, s: HurricaneState) -> None:
        if (s.ly is None) != (self.kind == "det"):
            raise ValueError(f"state {s} does not match model kind {self.kind!r}")
        if not 0 <= s.alpha < self.alpha.size or not 0 <= s.lx < self.lx.size:
            raise ValueError(f"state {s} out of range")
        if s.ly is not None and not 0 <= s.ly < self.ly.size:
            raise ValueError(f"state {s} out of range")

    def index(self, s: HurricaneState) -> int:
        k = s.alpha * self.lx.size + s.lx
        if self.ly is not None:
            k = k * self.ly.size + s.ly
        return k

    def state(self, k: int) -> HurricaneState:
        if self.ly is None:
            a, x = divmod(k, self.lx.size)
            return HurricaneState(a, x)
        rest, y = divmod(k, self.ly.size)
        a, x = divmod(rest, self.lx.size)
        return HurricaneState(a, x, y)

    def states(self) -> list[HurricaneState]:
        return [self.state(k) for k in range(self.n_states)]

    def joint_transition_prob(self, s: HurricaneState, s2: HurricaneState) -> float:
        self.check(s)
        self.check(s2)
        p = self.alpha.matrix[s.alpha, s2.alpha] * self.lx.matrix[s.lx, s2.lx]
        if self.ly is not None:
            p *= self.ly.matrix[s.ly, s2.ly]
        return float(p)

    def successors(self, s: HurricaneState) -> list[tuple[HurricaneState, float]]:
        """Successor states with positive probability, in index order."""
        hit = self._succ_cache.get(s)
        if hit is not None:
            return hit
        self.check(s)
        rows = [np.nonzero(c.matrix[i])[0] for c, i in zip(self.chains, self._coords(s))]
        out = []
        if self.ly is None:
            for a in rows[0]:
                for x in rows[1]:
                    s2 = HurricaneState(int(a), int(x))
                    out.append((s2, float(self.alpha.matrix[s.alpha, a] * self.lx.matrix[s.lx, x])))
        else:
            for a in rows[0]:
                for x in rows[1]:
                    for y in rows[2]:
                        s2 = HurricaneState(int(a), int(x), int(y))
                        p = self.alpha.matrix[s.alpha, a] * self.lx.matrix[s.lx, x] * self.ly.matrix[s.ly, y]
                        out.append((s2, float(p)))
        self._succ_cache[s] = out
        return out

    @staticmethod
    def _coords(s: HurricaneState):
        return (s.alpha, s.lx) if s.ly is None else (s.alpha, s.lx, s.ly)

    def classify(self, s: HurricaneState) -> StateClass:
        if self.kind == "det":
            return StateClass.NOT_APPLICABLE
        if s.alpha == 0 or self.ly.labels[s.ly].lower >= 0:
            return StateClass.ABSORBING
        return StateClass.TRANSIENT

    def is_absorbing(self, s: HurricaneState) -> bool:
        return self.classify(s) is StateClass.ABSORBING

    def is_landfall(self, s: HurricaneState, t: int | None = None) -> bool:
        """True when demand materializes in state ``s`` (at period ``t`` for det)."""
        if self.kind == "det":
            return t == self.horizon
        return not self.is_absorbing(s) and self.ly.labels[s.ly].upper == 0

    def sample_next(self, s: HurricaneState, rng: np.random.Generator) -> HurricaneState:
        # attributes are independent, so per-attribute draws realize the joint law
        coords = []
        for c, i in zip(self.chains, self._coords(s)):
            coords.append(int(np.searchsorted(c.cumulative[i], rng.random(), side="right")))
        return HurricaneState(*coords)

    def sample_path(self, s1: HurricaneState, seed: int | np.random.Generator, length: int | None = None):
        self.check(s1)
        rng = seed if isinstance(seed, np.random.Generator) else rng_stream(seed)
        path = [s1]
        for _ in range((length or self.horizon) - 1):
            path.append(self.sample_next(path[-1], rng))
        return path

    def n_step_distribution(self, s: HurricaneState, n: int) -> list[tuple[HurricaneState, float]]:
        """Distribution of the state ``n`` steps after ``s`` (positive mass only)."""
        rows = [n_step_matrix(c, n)[i] for c, i in zip(self.chains, self._coords(s))]
        joint = rows[0]
        for r in rows[1:]:
            joint = np.multiply.outer(joint, r)
        flat = joint.ravel()
        return [(self.state(k), float(flat[k])) for k in np.nonzero(flat > 0)[0]]


def joint_transition_prob(model: MarkovModel, s: HurricaneState, s2: HurricaneState) -> float:
    return model.joint_transition_prob(s, s2)


def classify(model: MarkovModel, s: HurricaneState) -> StateClass:
    return model.classify(s)


def sample_path(model: MarkovModel, s1: HurricaneState, seed: int) -> list[HurricaneState]:
    return model.sample_path(s1, seed)


def n_step_matrix(chain: AttributeChain, n: int) -> np.ndarray:
    if n < 0:
        raise ValueError("n must be nonnegative")
    return np.linalg.matrix_power(chain.matrix, n)


def expected_absorption_steps(chain: AttributeChain, start: int, absorbing: Sequence[int]) -> float:
    """Expected number of steps from ``start`` until the first hit of ``absorbing``.

    Solves E_i = 1 + sum_j P_ij E_j over the non-absorbing states.
    """
    absorbing = set(absorbing)
    if start in absorbing:
        return 0.0
    trans = [i for i in range(chain.size) if i not in absorbing]
    Q = chain.matrix[np.ix_(trans, trans)]
    lhs = np.eye(len(trans)) - Q
    if abs(np.linalg.det(lhs)) < 1e-12:
        raise ValueError("absorbing set is not reached with probability one")
    E = np.linalg.solve(lhs, np.ones(len(trans)))
    if np.any(E < 0) or not np.all(np.isfinite(E)):
        raise ValueError("absorbing set is not reached with probability one")
    return float(E[trans.index(start)])


def max_steps_to_absorption(chain: AttributeChain, start: int = 0) -> int:
    """Longest path, in periods counting the start, before the chain is surely absorbed."""
    P = chain.matrix
    absorbing = set(chain.absorbing_states())
    for i in range(chain.size):
        if i not in absorbing and np.any(P[i, : i + 1] > 0):
            raise ValueError(f"state {i} can move backward or stay; progress is not monotone")
    longest = {}
    for i in reversed(range(chain.size)):
        if i in absorbing:
            longest[i] = 1
        else:
            longest[i] = 1 + max(longest[j] for j in np.nonzero(P[i])[0])
    return longest[start]


# Built-in chains.
INTENSITY_MATRIX = [
    [1.00, 0.00, 0.00, 0.00, 0.00, 0.00],
    [0.11, 0.83, 0.06, 0.00, 0.00, 0.00],
    [0.00, 0.15, 0.60, 0.25, 0.00, 0.00],
    [0.00, 0.00, 0.04, 0.68, 0.28, 0.00],
    [0.00, 0.00, 0.00, 0.18, 0.79, 0.03],
    [0.00, 0.00, 0.00, 0.00, 0.50, 0.50],
]
LX_MATRIX = [
    [0.004, 0.300, 0.395, 0.198, 0.049, 0.038, 0.016],
    [0.150, 0.202, 0.249, 0.222, 0.117, 0.033, 0.027],
    [0.198, 0.249, 0.029, 0.168, 0.206, 0.099, 0.051],
    [0.099, 0.222, 0.169, 0.012, 0.150, 0.198, 0.150],
    [0.025, 0.117, 0.206, 0.150, 0.004, 0.150, 0.348],
    [0.019, 0.033, 0.098, 0.198, 0.150, 0.004, 0.498],
    [0.008, 0.019, 0.025, 0.098, 0.198, 0.150, 0.502],
]
LY_MATRIX = [
    [0.0, 0.6, 0.3, 0.1, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.6, 0.3, 0.1, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.6, 0.3, 0.1, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.6, 0.3, 0.1, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.6, 0.3, 0.1],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
]


def default_intensity_chain() -> AttributeChain:
    return AttributeChain(tuple(range(6)), INTENSITY_MATRIX)


def default_lx_chain() -> AttributeChain:
    return AttributeChain(tuple(Interval(100.0 * k, 100.0 * (k + 1)) for k in range(7)), LX_MATRIX)


def default_ly_chain() -> AttributeChain:
    cells = [Interval(-350.0 + 50.0 * k, -300.0 + 50.0 * k) for k in range(7)]
    cells.append(Interval(0.0, float("inf")))
    return AttributeChain(tuple(cells), LY_MATRIX)


def default_model(kind: str, ly_start: int = 0) -> MarkovModel:
    """Markov model with the built-in matrices; horizon derived from the ly chain."""
    ly = default_ly_chain()
    absorbing = [i for i, lab in enumerate(ly.labels) if lab.lower >= 0]
    if kind == "det":
        T = int(np.floor(expected_absorption_steps(ly, ly_start, absorbing)))
        return MarkovModel("det", default_intensity_chain(), default_lx_chain(), None, T)
    return MarkovModel("rand", default_intensity_chain(), default_lx_chain(), ly, max_steps_to_absorption(ly, ly_start))

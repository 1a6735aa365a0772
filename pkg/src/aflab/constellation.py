"""Constellation alphabets, their moments, and i.i.d. symbol sampling.

All constellations handled here are unit power, zero mean and proper
(zero pseudo-variance).  Alphabets that break any of the three conditions are
rejected at construction time because every closed form downstream relies on
them.  Kurtosis is ``E|s|^4`` under those conditions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import AssumptionViolationError, InvalidArgumentError
from .rng import substream

ASSUMPTION_TOL = 1e-12
GAUSSIAN_LABEL = "gaussian"


@dataclass(frozen=True)
class ConstellationStats:
    mean: complex
    power: float
    pseudo_variance: complex
    kurtosis: float

    @property
    def category(self) -> str:
        """``"sub-gaussian"``, ``"gaussian"`` or ``"super-gaussian"``."""
        if math.isclose(self.kurtosis, 2.0, rel_tol=0, abs_tol=1e-12):
            return "gaussian"
        return "sub-gaussian" if self.kurtosis < 2.0 else "super-gaussian"

    def to_dict(self) -> dict:
        return {
            "mean": [self.mean.real, self.mean.imag],
            "power": self.power,
            "pseudo_variance": [self.pseudo_variance.real, self.pseudo_variance.imag],
            "kurtosis": self.kurtosis,
            "category": self.category,
        }


@dataclass(frozen=True, eq=False)
class Constellation:
    """A finite alphabet with probabilities, or the complex Gaussian marker.

    The Gaussian constellation has empty ``points``; sampling draws from
    CN(0, 1) and its statistics are analytic.
    """

    points: np.ndarray
    probs: np.ndarray
    label: str
    tol: float = field(default=ASSUMPTION_TOL, compare=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex).ravel()
        object.__setattr__(self, "points", pts)
        if self.is_gaussian:
            object.__setattr__(self, "probs", np.zeros(0))
            return
        if pts.size == 0:
            raise InvalidArgumentError("a finite constellation needs at least one point")
        if self.probs is None or len(self.probs) == 0:
            probs = np.full(pts.size, 1.0 / pts.size)
        else:
            probs = np.asarray(self.probs, dtype=float).ravel()
        if probs.shape != pts.shape:
            raise InvalidArgumentError(
                f"{pts.size} points but {probs.size} probabilities")
        if np.any(probs < 0):
            raise InvalidArgumentError("probabilities must be nonnegative")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise InvalidArgumentError(f"probabilities sum to {probs.sum()!r}, not 1")
        object.__setattr__(self, "probs", probs)
        _check_assumption(pts, probs, self.label, self.tol)

    @property
    def is_gaussian(self) -> bool:
        return self.label == GAUSSIAN_LABEL and self.points.size == 0

    @property
    def size(self) -> int:
        return int(self.points.size)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "points": [[float(p.real), float(p.imag)] for p in self.points],
            "probs": [float(p) for p in self.probs],
        }

    @classmethod
    def from_dict(cls, obj: dict, tol: float = 1e-9) -> "Constellation":
        label = str(obj.get("label", "custom"))
        raw = obj.get("points", [])
        if not raw:
            if label != GAUSSIAN_LABEL:
                raise InvalidArgumentError("empty point list is only valid for the gaussian marker")
            return make_gaussian()
        try:
            pts = np.array([complex(float(re), float(im)) for re, im in raw])
        except (TypeError, ValueError) as exc:
            raise InvalidArgumentError(f"points must be [re, im] pairs: {exc}") from None
        return cls(pts, np.asarray(obj.get("probs") or [], dtype=float), label, tol)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path, tol: float = 1e-9) -> "Constellation":
        return cls.from_dict(json.loads(Path(path).read_text()), tol=tol)


@dataclass(frozen=True, eq=False)
class SymbolBlock:
    values: np.ndarray
    seed: int
    constellation_label: str


def _moments(points, probs):
    mean = complex(np.sum(probs * points))
    power = float(np.sum(probs * np.abs(points) ** 2))
    pseudo = complex(np.sum(probs * points**2))
    fourth = float(np.sum(probs * np.abs(points) ** 4))
    return mean, power, pseudo, fourth


def _check_assumption(points, probs, label, tol):
    mean, power, pseudo, _ = _moments(points, probs)
    problems = []
    if abs(power - 1.0) > tol:
        problems.append(f"power {power:.6g} != 1")
    if abs(mean) > tol:
        problems.append(f"|mean| = {abs(mean):.3g}")
    if abs(pseudo) > tol:
        problems.append(f"|pseudo-variance| = {abs(pseudo):.3g}")
    if problems:
        raise AssumptionViolationError(f"constellation {label!r}: " + ", ".join(problems))


def make_qam(order: int) -> Constellation:
    """Square QAM on the odd-integer grid, scaled to unit average power."""
    side = math.isqrt(order) if order > 0 else 0
    if order not in (4, 16, 64, 256) or side * side != order:
        raise InvalidArgumentError(
            f"QAM order {order} unsupported; use a square order in (4, 16, 64, 256)")
    levels = np.arange(-(side - 1), side, 2, dtype=float)
    grid = (levels[:, None] + 1j * levels[None, :]).ravel()
    # average power of the odd-integer square grid is 2(M-1)/3
    points = grid / math.sqrt(2.0 * (order - 1) / 3.0)
    return Constellation(points, None, "qpsk" if order == 4 else f"qam{order}")


def make_psk(order: int) -> Constellation:
    if order == 2:
        raise AssumptionViolationError(
            "BPSK has pseudo-variance 1 and is not a proper constellation")
    if order < 3:
        raise InvalidArgumentError(f"PSK order must be >= 3, got {order}")
    points = np.exp(2j * np.pi * np.arange(order) / order)
    return Constellation(points, None, f"psk{order}")


def make_gaussian() -> Constellation:
    return Constellation(np.zeros(0, dtype=complex), None, GAUSSIAN_LABEL)


def make_two_ring(inner_radius: float, outer_radius: float, inner_prob: float,
                  phases_per_ring: int) -> Constellation:
    """Two concentric PSK rings, rescaled so the average power is one.

    The achieved kurtosis is ``p r1^4 + (1-p) r2^4`` after rescaling, which
    can be pushed well above 2 with a sparse, large outer ring.
    """
    if inner_radius <= 0 or outer_radius <= 0:
        raise InvalidArgumentError("ring radii must be positive")
    if not 0.0 < inner_prob < 1.0:
        raise InvalidArgumentError("inner_prob must lie in (0, 1)")
    if phases_per_ring < 3:
        raise InvalidArgumentError("phases_per_ring must be >= 3 for zero pseudo-variance")
    p = float(inner_prob)
    scale = math.sqrt(p * inner_radius**2 + (1 - p) * outer_radius**2)
    r1, r2 = inner_radius / scale, outer_radius / scale
    ring = np.exp(2j * np.pi * np.arange(phases_per_ring) / phases_per_ring)
    points = np.concatenate([r1 * ring, r2 * ring])
    probs = np.concatenate([np.full(phases_per_ring, p / phases_per_ring),
                            np.full(phases_per_ring, (1 - p) / phases_per_ring)])
    label = f"two-ring:{inner_radius:g},{outer_radius:g},{inner_prob:g},{phases_per_ring}"
    # rescaling leaves O(eps) residue in the power; allow for it
    return Constellation(points, probs, label, tol=1e-12)


def stats(c: Constellation) -> ConstellationStats:
    if c.is_gaussian:
        return ConstellationStats(0j, 1.0, 0j, 2.0)
    mean, power, pseudo, fourth = _moments(c.points, c.probs)
    return ConstellationStats(mean, power, pseudo, fourth / power**2)


def kurtosis(c: Constellation) -> float:
    return stats(c).kurtosis


def draw(c: Constellation, rng: np.random.Generator, shape) -> np.ndarray:
    """Draw i.i.d. symbols of the given shape from an existing generator."""
    if c.is_gaussian:
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
    idx = rng.choice(c.size, size=shape, p=c.probs)
    return c.points[idx]


def sample(c: Constellation, shape, seed: int) -> SymbolBlock:
    """Deterministic i.i.d. block; ``shape`` is an int or a (rows, cols) pair."""
    shape = (shape,) if np.isscalar(shape) else tuple(shape)
    if math.prod(shape) < 1:
        raise InvalidArgumentError(f"empty sample shape {shape}")
    return SymbolBlock(draw(c, substream(seed), shape), seed, c.label)


def all_sequences(c: Constellation, length: int):
    """Every length-``length`` symbol sequence and its probability.

    Returns ``(sequences, weights)`` with shapes ``(|S|^length, length)`` and
    ``(|S|^length,)``.
    """
    if c.is_gaussian:
        raise InvalidArgumentError("exhaustive enumeration needs a finite alphabet")
    idx = np.indices((c.size,) * length).reshape(length, -1).T
    return c.points[idx], np.prod(c.probs[idx], axis=1)


@dataclass(frozen=True, eq=False)
class FourthMomentResult:
    matrix: np.ndarray
    analytic: np.ndarray
    deviation: float
    exhaustive: bool
    trials: int
    low_trials_warning: bool


def fourth_moment_structure(n: int, kappa: float) -> np.ndarray:
    """``I + S1 + S2`` for ``E[vec(ss^H) vec(ss^H)^H]`` with i.i.d. proper symbols.

    The diagonal positions of ``vec(ss^H)`` (column-major) are ``i (n + 1)``;
    S1 puts ``kappa - 2`` there and S2 is ``h h^T`` with ``h`` the indicator
    of the same positions.
    """
    h = np.zeros(n * n)
    h[np.arange(n) * (n + 1)] = 1.0
    return np.eye(n * n) + np.diag((kappa - 2.0) * h) + np.outer(h, h)


def fourth_moment_matrix(c: Constellation, n: int, trials: int | None = None,
                         seed: int = 0) -> FourthMomentResult:
    """Empirical or exact fourth-moment matrix of ``vec(ss^H)`` for length-``n`` blocks.

    ``trials=None`` enumerates every sequence (finite alphabets only); the
    result is then exact up to rounding.
    """
    if not 1 <= n <= 4:
        raise InvalidArgumentError(f"n must be in 1..4, got {n}")
    if trials is None:
        seqs, w = all_sequences(c, n)
        exhaustive = True
    else:
        if trials < 1:
            raise InvalidArgumentError("trials must be positive")
        seqs = draw(c, substream(seed), (trials, n))
        w = np.full(trials, 1.0 / trials)
        exhaustive = False
    # vec(ss^H) column-major: entry a + b*n = s_a conj(s_b)
    vecs = (seqs[:, :, None] * seqs[:, None, :].conj()).transpose(0, 2, 1).reshape(len(seqs), -1)
    mat = np.einsum("t,ti,tj->ij", w, vecs, vecs.conj())
    analytic = fourth_moment_structure(n, stats(c).kurtosis)
    dev = float(np.max(np.abs(mat - analytic)))
    n_trials = len(seqs) if exhaustive else int(trials)
    return FourthMomentResult(mat, analytic, dev, exhaustive, n_trials,
                              low_trials_warning=(not exhaustive and trials < 10_000))


def parse_constellation(text: str) -> Constellation:
    """Parse the CLI form ``qpsk|qam16|qam64|qam256|pskN|gaussian|two-ring:r1,r2,p,P|file:path``."""
    s = text.strip()
    low = s.lower()
    if low == "qpsk":
        return make_qam(4)
    if low.startswith("qam") and low[3:].isdigit():
        return make_qam(int(low[3:]))
    if low.startswith("psk") and low[3:].isdigit():
        return make_psk(int(low[3:]))
    if low == GAUSSIAN_LABEL:
        return make_gaussian()
    if low.startswith("two-ring:"):
        parts = s.split(":", 1)[1].split(",")
        if len(parts) != 4:
            raise InvalidArgumentError("two-ring needs r1,r2,p,phases")
        try:
            r1, r2, p = (float(v) for v in parts[:3])
            phases = int(parts[3])
        except ValueError:
            raise InvalidArgumentError(f"cannot parse two-ring parameters {parts}") from None
        return make_two_ring(r1, r2, p, phases)
    if low.startswith("file:"):
        return Constellation.load(s.split(":", 1)[1])
    raise InvalidArgumentError(f"unknown constellation {text!r}")

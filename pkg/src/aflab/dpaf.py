"""Discrete periodic ambiguity function (DP-AF) and its expected squared grids.

Grids are indexed ``[k, q]`` = (delay, Doppler), delay-major, both on Z_N.
The realized AF is

    A(k, q) = x^H J_k^T D_q^* x = sum_n x[n] conj(x[n - k]) exp(-2j*pi*q*n/N),

so each delay row is one length-N FFT of a lag product.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import whgroup
from .bases import ModulationBasis, afdm_slope
from .constellation import Constellation, all_sequences, draw, stats
from .errors import InvalidArgumentError, StateSpaceTooLargeError
from .rng import chunked_mean

EXPECTATION_MODES = ("mc", "enumerated", "closed-form")
MODES = ("realized",) + EXPECTATION_MODES
ENUMERATION_LIMIT = 10**6
_ENUM_BATCH = 8192


@dataclass(frozen=True, eq=False)
class AFGrid:
    """Real nonnegative grid of (expected) squared AF values.

    ``framing`` is ``"dp"`` (N x N) or ``"fst"`` (N x M).
    """

    values: np.ndarray
    mode: str
    meta: dict = field(default_factory=dict)
    framing: str = "dp"

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidArgumentError(f"unknown grid mode {self.mode!r}")
        v = np.asarray(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def mainlobe(self) -> float:
        return float(self.values[0, 0])

    @property
    def is_expectation(self) -> bool:
        return self.mode in EXPECTATION_MODES

    def sidelobes(self) -> np.ndarray:
        """Values with the origin masked out (flattened)."""
        mask = np.ones(self.values.shape, dtype=bool)
        mask[0, 0] = False
        return self.values[mask]


def _kappa_of(c) -> float:
    return stats(c).kurtosis if isinstance(c, Constellation) else float(c)


def _as_vector(x) -> np.ndarray:
    x = np.asarray(getattr(x, "values", x), dtype=complex)
    if x.ndim != 1:
        raise InvalidArgumentError(f"expected a 1D signal, got shape {x.shape}")
    return x


def _as_matrix(basis) -> np.ndarray:
    return np.asarray(getattr(basis, "matrix", basis), dtype=complex)


# -- realized AF --------------------------------------------------------------

def dpaf_value(x, k: int, q: int) -> complex:
    x = _as_vector(x)
    return complex(np.vdot(whgroup.apply_g(k, q, x), x))


def _lag_products(x: np.ndarray) -> np.ndarray:
    """``out[..., k, n] = x[..., n] * conj(x[..., n - k])`` for a batch of signals."""
    n = x.shape[-1]
    lag = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n
    return x[..., None, :] * x[..., lag].conj()


def dpaf_complex_grid(x) -> np.ndarray:
    """Complex ``A(k, q)`` for all delay/Doppler pairs."""
    return np.fft.fft(_lag_products(_as_vector(x)), axis=-1)


def dpaf_complex_grid_naive(x) -> np.ndarray:
    """Dense-matrix evaluation of every inner product; test oracle only."""
    x = _as_vector(x)
    n = x.size
    out = np.empty((n, n), dtype=complex)
    for k in range(n):
        for q in range(n):
            out[k, q] = x.conj() @ whgroup.g_matrix(n, k, q).conj().T @ x
    return out


def dpaf_squared_grid(x) -> AFGrid:
    a = dpaf_complex_grid(x)
    return AFGrid(np.abs(a) ** 2, "realized", {"n": a.shape[0]})


def _batch_squared_sum(signals: np.ndarray, weights: np.ndarray | None = None) -> np.ndarray:
    """Sum (or weighted sum) of squared DP-AF grids over the leading axis."""
    sq = np.abs(np.fft.fft(_lag_products(signals), axis=-1)) ** 2
    if weights is None:
        return sq.sum(axis=0)
    return np.tensordot(weights, sq, axes=1)


# -- expectations -------------------------------------------------------------

def mc_expected_dp_grid(basis, constellation: Constellation, trials: int, seed: int,
                        threads: int = 1) -> AFGrid:
    """Monte-Carlo average of ``|A|^2`` over i.i.d. symbol vectors ``s``, ``x = U s``.

    ``meta["stderr"]`` holds the per-bin standard error of the mean (zero when
    ``trials == 1``).
    """
    if trials < 1:
        raise InvalidArgumentError("trials must be >= 1")
    u = _as_matrix(basis)
    n = u.shape[0]

    def chunk(rng, size):
        s = draw(constellation, rng, (size, n))
        sq = np.abs(np.fft.fft(_lag_products(s @ u.T), axis=-1)) ** 2
        return np.stack([sq.sum(axis=0), (sq * sq).sum(axis=0)])

    first, second = chunked_mean(chunk, trials, seed, threads)
    meta = {"n": n, "waveform": getattr(basis, "label", "custom"),
            "constellation": constellation.label, "kappa": stats(constellation).kurtosis,
            "trials": int(trials), "seed": int(seed),
            "stderr": mc_standard_error(first, second, trials)}
    return AFGrid(first, "mc", meta)


def mc_standard_error(first: np.ndarray, second: np.ndarray, trials: int) -> np.ndarray:
    """Standard error of a sample mean from its first and second raw moments."""
    if trials < 2:
        return np.zeros_like(first)
    var = np.maximum(second - first**2, 0.0) * trials / (trials - 1)
    return np.sqrt(var / trials)


def enumeration_size(constellation: Constellation, n: int) -> int:
    if constellation.is_gaussian:
        raise InvalidArgumentError("exhaustive enumeration needs a finite alphabet, got gaussian")
    return constellation.size ** n


def enumerated_expected_dp_grid(basis, constellation: Constellation) -> AFGrid:
    """Exact expectation by summing over every symbol sequence with its probability."""
    u = _as_matrix(basis)
    n = u.shape[0]
    total = enumeration_size(constellation, n)
    if total > ENUMERATION_LIMIT:
        raise StateSpaceTooLargeError(
            f"{constellation.size}^{n} = {total} sequences exceeds the limit {ENUMERATION_LIMIT}")
    seqs, w = all_sequences(constellation, n)
    x = seqs @ u.T
    values = np.zeros((n, n))
    for start in range(0, total, _ENUM_BATCH):
        sl = slice(start, start + _ENUM_BATCH)
        values += _batch_squared_sum(x[sl], w[sl])
    meta = {"n": n, "waveform": getattr(basis, "label", "custom"),
            "constellation": constellation.label, "kappa": stats(constellation).kurtosis,
            "sequences": int(total)}
    return AFGrid(values, "enumerated", meta)


def diagonal_energy(basis) -> np.ndarray:
    """``T(k, q) = sum_n |u_n^H D_q J_k u_n|^2``: the squared DP-AF grids of the columns, summed."""
    u = _as_matrix(basis)
    return _batch_squared_sum(u.T)


def diagonal_energy_dense(basis) -> np.ndarray:
    """``T(k, q)`` from the diagonal of ``U^H G_{k,q} U``, one bin at a time; test oracle."""
    u = _as_matrix(basis)
    n = u.shape[0]
    out = np.empty((n, n))
    for k in range(n):
        for q in range(n):
            d = np.einsum("ij,ij->j", u.conj(), whgroup.apply_g(k, q, u))
            out[k, q] = float(np.sum(np.abs(d) ** 2))
    return out


def _closed_form_from_energy(t: np.ndarray, kappa: float) -> np.ndarray:
    n = t.shape[0]
    values = n + (kappa - 2.0) * t
    values[0, 0] += n * n
    return values


def closed_form_dp_grid(basis, kappa, dense: bool = False) -> AFGrid:
    """``E|A(k,q)|^2 = N + (kappa - 2) T(k, q) + N^2 [k = q = 0]`` for any unitary basis.

    ``kappa`` is a float or a :class:`Constellation`.  ``dense=True`` evaluates
    ``T`` bin by bin from ``U^H G U`` instead of via column AFs.
    """
    kap = _kappa_of(kappa)
    t = diagonal_energy_dense(basis) if dense else diagonal_energy(basis)
    meta = {"n": t.shape[0], "waveform": getattr(basis, "label", "custom"), "kappa": kap,
            "route": "dense" if dense else "column-af"}
    return AFGrid(_closed_form_from_energy(t, kap), "closed-form", meta)


def low_sidelobe_mask(kind: str, n: int, params: dict | None = None) -> np.ndarray:
    """Boolean N x N mask of the bins where the waveform's basis diagonalizes ``G_{k,q}``."""
    params = dict(params or {})
    k, q = np.indices((n, n))
    if kind == "ofdm":
        return q == 0
    if kind == "sc":
        return k == 0
    if kind == "otfs":
        n1, n2 = int(params["n1"]), int(params["n2"])
        if n1 * n2 != n:
            raise InvalidArgumentError(f"OTFS requires N1*N2 = N, got {n1}*{n2} != {n}")
        return (k % n2 == 0) & (q % n1 == 0)
    if kind == "afdm":
        slope = afdm_slope(n, params["c1"])
        return (slope * k - q) % n == 0
    raise InvalidArgumentError(f"unknown waveform kind {kind!r}")


def closed_form_dp_waveform(kind: str, n: int, kappa, params: dict | None = None) -> AFGrid:
    """Delta-pattern closed form: ``(kappa-1)N`` on the low set, ``N`` elsewhere."""
    kap = _kappa_of(kappa)
    low = low_sidelobe_mask(kind, n, params)
    values = np.where(low, (kap - 1.0) * n, float(n))
    values[0, 0] = n * n + (kap - 1.0) * n
    meta = {"n": n, "waveform": kind, "kappa": kap, "params": {k: str(v) for k, v in (params or {}).items()}}
    return AFGrid(values, "closed-form", meta)


def eisl_dp(grid: AFGrid) -> dict:
    """Expected integrated sidelobe level: grid sum minus mainlobe, and that over the mainlobe."""
    if not grid.is_expectation:
        raise InvalidArgumentError("EISL is defined for expectation grids, not a single realization")
    total = float(np.sum(grid.values))
    eisl = total - grid.mainlobe
    return {"mainlobe": grid.mainlobe, "eisl": eisl, "normalized_eisl": eisl / grid.mainlobe}


def eisl_dp_formula(n: int, kappa: float) -> float:
    """``(N^2 - N)(N + kappa - 1)``, the same for every unitary basis."""
    return (n * n - n) * (n + kappa - 1.0)


def mainlobe_formula(n: int, kappa: float) -> float:
    return n * n + (kappa - 1.0) * n

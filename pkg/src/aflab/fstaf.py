"""Fast-slow-time ambiguity function (FST-AF).

A frame ``X = U S V`` has N fast-time rows and M slow-time columns.  Under the
stop-and-go model the squared AF is indexed ``[k, q]`` with delay ``k`` on Z_N
and Doppler ``q`` on Z_M:

    A(k, q) = x^H (D_{M,q}^* kron J_k^T) x,    x = vec(X) (column-major),

which equals a 2D Fourier transform of ``|F_N X|^2``.
"""

from __future__ import annotations

import math

import numpy as np

from . import bases
from .bases import Scheme2D, afdm_slope, vec2d
from .constellation import Constellation, all_sequences, draw, stats
from .dpaf import AFGrid, _kappa_of, mc_standard_error
from .errors import InvalidArgumentError, StateSpaceTooLargeError
from .rng import chunked_mean

FstGrid = AFGrid
ENUMERATION_LIMIT = 10**6
_ENUM_BATCH = 4096


def _frame(x) -> np.ndarray:
    x = np.asarray(getattr(x, "values", x), dtype=complex)
    if x.ndim != 2:
        raise InvalidArgumentError(f"expected an N x M frame, got shape {x.shape}")
    return x


def _af_from_frames(frames: np.ndarray) -> np.ndarray:
    """FST-AF of a batch of frames ``(..., N, M)``."""
    n = frames.shape[-2]
    power = np.abs(np.fft.fft(frames, axis=-2)) ** 2 / n  # |F_N X|^2 with unitary F_N
    return n * np.fft.ifft(np.fft.fft(power, axis=-1), axis=-2)


def fst_af_matrix(x) -> np.ndarray:
    """Complex N x M FST-AF; entry ``[0, 0]`` is ``||X||_F^2``."""
    return _af_from_frames(_frame(x))


def fst_af_direct(x) -> np.ndarray:
    """Evaluate every ``x^H (D_q^* kron J_k^T) x`` by explicit shifts; test oracle."""
    frame = _frame(x)
    n, m = frame.shape
    out = np.empty((n, m), dtype=complex)
    slow = np.arange(m)
    for k in range(n):
        shifted = np.roll(frame, k, axis=0)
        for q in range(m):
            moved = shifted * np.exp(2j * np.pi * ((q * slow) % m) / m)[None, :]
            out[k, q] = np.vdot(vec2d(moved), vec2d(frame))
    return out


def fst_squared_grid(x) -> AFGrid:
    a = fst_af_matrix(x)
    return AFGrid(np.abs(a) ** 2, "realized", {"n": a.shape[0], "m": a.shape[1]}, framing="fst")


def fourth_norm(a) -> float:
    """Entrywise ``||A||_4^4``."""
    return float(np.sum(np.abs(np.asarray(a)) ** 4))


def fst_frame_fourth_norm(scheme: Scheme2D, symbols) -> float:
    """``||F_N U S V||_4^4``; times ``MN`` this equals ``||A||_F^2`` for every realization."""
    x = scheme.u_basis.matrix @ np.asarray(symbols) @ scheme.v_basis.matrix
    return fourth_norm(bases.dft_matrix(scheme.n) @ x)


# -- closed forms ---------------------------------------------------------------

def _dft_columns(n: int) -> np.ndarray:
    """Unit-norm DFT columns ``f_k[t] = exp(2j*pi*k*t/N)/sqrt(N)`` as the columns of the result."""
    return bases.dft_matrix(n).conj()


def _spread_terms(scheme: Scheme2D) -> tuple[np.ndarray, np.ndarray]:
    """``(delay_term[k], doppler_term[q])`` with ``delay_term[k] = || |U^H F^H|^2 f_k ||^2``
    and ``doppler_term[q] = || |V|^2 conj(f_q) ||^2``."""
    n, m = scheme.n, scheme.m
    w = bases.dft_matrix(n) @ scheme.u_basis.matrix  # F_N U
    delay_term = np.sum(np.abs((np.abs(w.conj().T) ** 2) @ _dft_columns(n)) ** 2, axis=0)
    doppler_term = np.sum(np.abs((np.abs(scheme.v_basis.matrix) ** 2) @ _dft_columns(m).conj()) ** 2, axis=0)
    return delay_term, doppler_term


def closed_form_fst_grid(scheme: Scheme2D, kappa) -> AFGrid:
    """``E|A(k,q)|^2 = MN + M^2 N^2 [k=q=0] + (kappa - 2) MN * delay_term[k] * doppler_term[q]``."""
    kap = _kappa_of(kappa)
    n, m = scheme.n, scheme.m
    delay_term, doppler_term = _spread_terms(scheme)
    values = m * n + (kap - 2.0) * m * n * np.outer(delay_term, doppler_term)
    values[0, 0] += (m * n) ** 2
    meta = {"n": n, "m": m, "scheme": scheme.label, "kappa": kap, "route": "general"}
    return AFGrid(values, "closed-form", meta, framing="fst")


def afdm_phi(n: int, c1) -> int:
    """``gcd(2 N c1, N)`` over nonnegative residues, with ``gcd(0, N) = N``."""
    return math.gcd(afdm_slope(n, c1) % n, n)


def fst_low_rows(kind: str, n: int, params: dict | None = None) -> np.ndarray | None:
    """Delay rows carrying ``(kappa-1)MN`` for row-structured waveforms (SC returns None)."""
    k = np.arange(n)
    if kind == "ofdm":
        return np.ones(n, dtype=bool)
    if kind == "otfs":
        return np.zeros(n, dtype=bool)
    if kind == "afdm":
        slope = afdm_slope(n, (params or {})["c1"])
        return (slope * k) % n == 0
    if kind == "sc":
        return None
    raise InvalidArgumentError(f"unknown waveform kind {kind!r}")


def closed_form_fst_waveform(kind: str, n: int, m: int, kappa, params: dict | None = None) -> AFGrid:
    """Delta-pattern closed forms of the four standard schemes."""
    kap = _kappa_of(kappa)
    low_value, high_value = (kap - 1.0) * m * n, float(m * n)
    rows = fst_low_rows(kind, n, params)
    if rows is None:
        low = np.zeros((n, m), dtype=bool)
        low[0, :] = True  # SC: zero-delay slice
    else:
        low = np.repeat(rows[:, None], m, axis=1)
    values = np.where(low, low_value, high_value)
    values[0, 0] = (m * n) ** 2 + (kap - 1.0) * m * n
    meta = {"n": n, "m": m, "scheme": kind, "kappa": kap, "route": "waveform"}
    if kind == "afdm":
        meta["phi"] = afdm_phi(n, params["c1"])
    return AFGrid(values, "closed-form", meta, framing="fst")


def kron_fourth_norm(scheme: Scheme2D) -> float:
    """``||V^T kron F_N U||_4^4`` as the product of the two factors' fourth norms."""
    w = bases.dft_matrix(scheme.n) @ scheme.u_basis.matrix
    return fourth_norm(scheme.v_basis.matrix) * fourth_norm(w)


def eisl_fst_formula(n: int, m: int, kappa: float, kron_norm: float) -> float:
    return (m * n) ** 2 - m * n + (kappa - 2.0) * m * n * (kron_norm - 1.0)


def eisl_fst_waveform(kind: str, n: int, m: int, kappa: float, params: dict | None = None) -> float:
    """Closed-form EISL of a standard scheme."""
    mn = m * n
    if kind == "ofdm":
        # same operation order as the AFDM branch at phi = N, so c1 = 0 reproduces it bit for bit
        return (mn - 1) * (kappa - 1.0) * mn
    if kind == "otfs":
        return float(mn * (mn - 1))
    if kind == "sc":
        return (m - 1) * (kappa - 1.0) * mn + (mn - m) * mn
    if kind == "afdm":
        phi = afdm_phi(n, (params or {})["c1"])
        return (m * phi - 1) * (kappa - 1.0) * mn + (n - phi) * m * m * n
    raise InvalidArgumentError(f"unknown waveform kind {kind!r}")


def eisl_fst(grid: AFGrid | None = None, scheme: Scheme2D | None = None, kappa=None,
             tol: float = 1e-9) -> dict:
    """EISL by summing the grid and by the fourth-norm formula.

    With only ``scheme`` and ``kappa`` the grid is the closed form.  Both
    routes are reported; ``agree`` compares them at relative ``tol``.
    """
    if grid is None:
        if scheme is None or kappa is None:
            raise InvalidArgumentError("need a grid or a scheme with kappa")
        grid = closed_form_fst_grid(scheme, kappa)
    if not grid.is_expectation:
        raise InvalidArgumentError("EISL is defined for expectation grids, not a single realization")
    out = {"mainlobe": grid.mainlobe, "eisl_grid_route": float(np.sum(grid.values)) - grid.mainlobe}
    if scheme is not None:
        kap = _kappa_of(kappa if kappa is not None else grid.meta["kappa"])
        q4 = kron_fourth_norm(scheme)
        formula = eisl_fst_formula(scheme.n, scheme.m, kap, q4)
        out.update(kron_fourth_norm=q4, eisl_formula_route=formula,
                   agree=bool(abs(formula - out["eisl_grid_route"]) <= tol * max(abs(formula), 1.0)))
    return out


# -- expectations -------------------------------------------------------------

def _frames(scheme: Scheme2D, symbols: np.ndarray) -> np.ndarray:
    return scheme.u_basis.matrix @ symbols @ scheme.v_basis.matrix


def mc_expected_fst_grid(scheme: Scheme2D, constellation: Constellation, trials: int, seed: int,
                         threads: int = 1) -> AFGrid:
    if trials < 1:
        raise InvalidArgumentError("trials must be >= 1")
    n, m = scheme.n, scheme.m

    def chunk(rng, size):
        sq = np.abs(_af_from_frames(_frames(scheme, draw(constellation, rng, (size, n, m))))) ** 2
        return np.stack([sq.sum(axis=0), (sq * sq).sum(axis=0)])

    first, second = chunked_mean(chunk, trials, seed, threads)
    meta = {"n": n, "m": m, "scheme": scheme.label, "constellation": constellation.label,
            "kappa": stats(constellation).kurtosis, "trials": int(trials), "seed": int(seed),
            "stderr": mc_standard_error(first, second, trials)}
    return AFGrid(first, "mc", meta, framing="fst")


def enumerated_expected_fst_grid(scheme: Scheme2D, constellation: Constellation) -> AFGrid:
    n, m = scheme.n, scheme.m
    if constellation.is_gaussian:
        raise InvalidArgumentError("exhaustive enumeration needs a finite alphabet, got gaussian")
    total = constellation.size ** (n * m)
    if total > ENUMERATION_LIMIT:
        raise StateSpaceTooLargeError(
            f"{constellation.size}^{n * m} = {total} sequences exceeds the limit {ENUMERATION_LIMIT}")
    seqs, w = all_sequences(constellation, n * m)
    symbols = seqs.reshape(-1, m, n).transpose(0, 2, 1)  # column-major unvec
    values = np.zeros((n, m))
    for start in range(0, total, _ENUM_BATCH):
        sl = slice(start, start + _ENUM_BATCH)
        sq = np.abs(_af_from_frames(_frames(scheme, symbols[sl]))) ** 2
        values += np.tensordot(w[sl], sq, axes=1)
    meta = {"n": n, "m": m, "scheme": scheme.label, "constellation": constellation.label,
            "kappa": stats(constellation).kurtosis, "sequences": int(total)}
    return AFGrid(values, "enumerated", meta, framing="fst")


# -- optimality probes --------------------------------------------------------------

def optimality_probe(n: int, m: int, kappa: float, num_random_schemes: int, seed: int) -> dict:
    """Compare Haar-random schemes against the expected minimizer, bin by bin and in EISL.

    For ``kappa < 2`` the reference is OFDM, for ``kappa > 2`` OTFS.  Margins
    are ``random - reference`` (off-origin bins); they should be nonnegative.
    At ``kappa == 2`` every scheme has the same grid and the report records the
    largest spread instead.
    """
    kappa = float(kappa)
    grids = [closed_form_fst_grid(bases.haar_scheme(n, m, seed, i), kappa) for i in range(num_random_schemes)]
    report = {"n": n, "m": m, "kappa": kappa, "schemes": num_random_schemes, "seed": seed}
    if kappa == 2.0:
        ref = closed_form_fst_grid(bases.scheme_ofdm(n, m), kappa).values
        spread = max((float(np.max(np.abs(g.values - ref))) for g in grids), default=0.0)
        report.update(reference="tie", max_spread=spread, passed=spread <= 1e-9 * ref[0, 0])
        return report
    reference = "ofdm" if kappa < 2 else "otfs"
    ref_scheme = bases.scheme_ofdm(n, m) if kappa < 2 else bases.scheme_otfs(n, m)
    ref = closed_form_fst_grid(ref_scheme, kappa)
    ref_eisl = eisl_fst(ref)["eisl_grid_route"]
    off = np.ones((n, m), dtype=bool)
    off[0, 0] = False
    bin_margins, eisl_margins = [], []
    for g in grids:
        bin_margins.append(float(np.min(g.values[off] - ref.values[off])))
        eisl_margins.append(eisl_fst(g)["eisl_grid_route"] - ref_eisl)
    min_bin = min(bin_margins, default=0.0)
    min_eisl = min(eisl_margins, default=0.0)
    report.update(reference=reference, min_bin_margin=min_bin, min_eisl_margin=min_eisl,
                  bin_margins=bin_margins, eisl_margins=eisl_margins,
                  passed=bool(min_bin >= -1e-9 and min_eisl >= -1e-9))
    return report


def contraction_norms(unitary, probes=None) -> np.ndarray:
    """Rows ``(||B Re f||, ||Re f||, ||B Im f||, ||Im f||)`` with ``B = |V|^2``.

    ``probes`` are columns; the default is every unit-norm DFT column.
    """
    v = np.asarray(getattr(unitary, "matrix", unitary))
    b = np.abs(v) ** 2
    f = _dft_columns(v.shape[0]) if probes is None else np.asarray(probes, dtype=complex)
    f = f.reshape(v.shape[0], -1)
    return np.stack([np.linalg.norm(b @ f.real, axis=0), np.linalg.norm(f.real, axis=0),
                     np.linalg.norm(b @ f.imag, axis=0), np.linalg.norm(f.imag, axis=0)], axis=1)


def bistochastic_contraction_check(unitary, probes=None, slack: float = 1e-12) -> bool:
    """Whether the doubly stochastic ``|V|^2`` does not increase the 2-norm of any probe part."""
    r = contraction_norms(unitary, probes)
    return bool(np.all(r[:, 0] <= r[:, 1] + slack) and np.all(r[:, 2] <= r[:, 3] + slack))


# -- stop-and-go ---------------------------------------------------------------------

def block_mean_phase(m: int, block_len: int, q: float) -> float:
    """Mean Doppler phase over the first block, used to align the two Doppler models."""
    return math.pi * q * (block_len - 1) / (m * block_len)


def stop_and_go_residual(n: int, m: int, n_cp: int, q: float, probe=None) -> float:
    """Max entrywise gap between exact serial Doppler and block-constant Doppler.

    The exact model multiplies sample ``t`` of the ``M (N + N_CP)`` stream by
    ``exp(2j*pi*q*t/(M(N+N_CP)))``; the approximation uses
    ``exp(2j*pi*q*m/M)`` for the whole block ``m``.  The approximation is
    rotated by the first block's mean phase before comparing, and the gap is
    applied to ``probe`` (all ones by default).
    """
    block = n + n_cp
    total = m * block
    t = np.arange(total)
    exact = np.exp(2j * np.pi * q * t / total)
    approx = np.repeat(np.exp(2j * np.pi * q * np.arange(m) / m), block)
    approx = approx * np.exp(1j * block_mean_phase(m, block, q))
    p = np.ones(total) if probe is None else np.asarray(probe, dtype=complex)
    if p.shape != (total,):
        raise InvalidArgumentError(f"probe must have length {total}")
    return float(np.max(np.abs((exact - approx) * p)))


def stop_and_go_bound(n: int, m: int, n_cp: int, q: float) -> float:
    """Phase-argument bound ``2 pi q N / (M (N + N_CP))``."""
    return 2 * math.pi * abs(q) * n / (m * (n + n_cp))

"""Matched-filter echo simulation for the DP and FST framings.

The DP chain is: add CP, aperiodic delay on the length ``N + N_CP`` block,
Doppler ramp on that block, remove CP.  Target Doppler ``q`` is given on the
post-CP grid Z_N; the physical per-sample ramp is ``exp(2j*pi*q*t/N)`` on the
CP'd block, i.e. ``q_phys = q (N + N_CP) / N`` bins of the longer block.
The target gain refers to the post-CP output, so a single noiseless target
returns exactly ``gain * D_q J_k x``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import dpaf, fstaf, whgroup
from .bases import vec2d
from .errors import InvalidArgumentError
from .rng import substream

_CHAIN_TOL = 1e-12


@dataclass(frozen=True)
class Target:
    delay_k: int
    doppler_q: int
    gain: complex = 1.0 + 0j


@dataclass(frozen=True)
class Scenario:
    targets: tuple = field(default_factory=tuple)
    noise_power: float = 0.0
    n_cp: int = 0

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        if self.noise_power < 0:
            raise InvalidArgumentError(f"noise power must be >= 0, got {self.noise_power}")
        if self.n_cp < 0:
            raise InvalidArgumentError(f"CP length must be >= 0, got {self.n_cp}")


def parse_targets(text: str) -> list[Target]:
    """``k:q:re:im[,k:q:re:im...]`` -> targets."""
    out = []
    for item in filter(None, (t.strip() for t in text.split(","))):
        parts = item.split(":")
        if len(parts) != 4:
            raise InvalidArgumentError(f"target {item!r} is not k:q:re:im")
        try:
            k, q = int(parts[0]), int(parts[1])
            gain = complex(float(parts[2]), float(parts[3]))
        except ValueError:
            raise InvalidArgumentError(f"target {item!r} is not k:q:re:im") from None
        out.append(Target(k, q, gain))
    if not out:
        raise InvalidArgumentError("no targets given")
    return out


def grid_doppler(q_phys, n: int, n_cp: int) -> int:
    """Map a Doppler index on the CP'd block grid to the post-CP grid Z_N.

    Raises unless ``N q_phys / (N + N_CP)`` is an integer.
    """
    q = Fraction(q_phys) * n / (n + n_cp)
    if q.denominator != 1:
        raise InvalidArgumentError(
            f"Doppler {q_phys} on the {n + n_cp}-sample block maps to {q} on Z_{n}, not an integer bin")
    return int(q)


def add_noise(y: np.ndarray, noise_power: float, seed: int) -> np.ndarray:
    """Add circularly-symmetric complex Gaussian noise of per-sample variance ``noise_power``."""
    if noise_power == 0:
        return y
    rng = substream(seed, 1)
    z = rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)
    return y + np.sqrt(noise_power / 2.0) * z


def snr(x, noise_power: float) -> float:
    """``||x||^2 / (len(x) * noise_power)``; infinite when noiseless."""
    x = np.asarray(x)
    if noise_power == 0:
        return float("inf")
    return float(np.sum(np.abs(x) ** 2) / (x.size * noise_power))


# -- DP framing --------------------------------------------------------------

def _dp_physical_echo(x: np.ndarray, target: Target, n_cp: int) -> np.ndarray:
    n = x.size
    block = whgroup.cp_add(x, n_cp)
    delayed = np.zeros_like(block)
    delayed[target.delay_k:] = block[: block.size - target.delay_k]
    t = np.arange(block.size)
    ramped = delayed * np.exp(2j * np.pi * ((target.doppler_q * t) % n) / n)
    # gain is referenced to the first post-CP sample
    ref = np.exp(-2j * np.pi * ((target.doppler_q * n_cp) % n) / n)
    return target.gain * ref * whgroup.cp_remove(ramped, n_cp)


def simulate_dp_echo(x, scenario: Scenario, seed: int = 0) -> np.ndarray:
    """Received block after CP removal, noise added last.

    Checks each target's physical chain against ``gain * D_q J_k x``.
    """
    x = np.asarray(x, dtype=complex)
    n = x.size
    y = np.zeros(n, dtype=complex)
    for tgt in scenario.targets:
        if not 0 <= tgt.delay_k <= scenario.n_cp:
            raise InvalidArgumentError(
                f"target delay {tgt.delay_k} exceeds the CP length {scenario.n_cp}; the periodic model does not hold")
        echo = _dp_physical_echo(x, tgt, scenario.n_cp)
        direct = tgt.gain * whgroup.apply_g(tgt.delay_k, tgt.doppler_q, x)
        scale = max(1.0, float(np.max(np.abs(direct))))
        if np.max(np.abs(echo - direct)) > _CHAIN_TOL * scale * n:
            raise AssertionError("CP chain disagrees with the periodic shift model")
        y += echo
    return add_noise(y, scenario.noise_power, seed)


def mf_dp_grid(x, y) -> np.ndarray:
    """``x^H J_k^T D_q^* y`` for all ``(k, q)``; rows are delays."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    n = x.size
    lag = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n
    return np.fft.fft(y[None, :] * x[lag].conj(), axis=-1)


def predicted_mf_dp(x, targets) -> np.ndarray:
    """Noiseless MF output as a sum of shifted DP-AFs.

    ``sum_l gain_l exp(-2j*pi*k_l*(q - q_l)/N) A(k - k_l, q - q_l)``.
    """
    x = np.asarray(x, dtype=complex)
    n = x.size
    a = dpaf.dpaf_complex_grid(x)
    q = np.arange(n)
    out = np.zeros((n, n), dtype=complex)
    for tgt in targets:
        shifted = np.roll(a, (tgt.delay_k, tgt.doppler_q), axis=(0, 1))
        phase = np.exp(-2j * np.pi * ((tgt.delay_k * (q - tgt.doppler_q)) % n) / n)
        out += tgt.gain * phase[None, :] * shifted
    return out


# -- FST framing -----------------------------------------------------------------

def _fst_approx_echo(frame: np.ndarray, target: Target) -> np.ndarray:
    m = frame.shape[1]
    slow = np.exp(2j * np.pi * ((target.doppler_q * np.arange(m)) % m) / m)
    return target.gain * np.roll(frame, target.delay_k, axis=0) * slow[None, :]


def _fst_exact_echo(frame: np.ndarray, target: Target, n_cp: int) -> np.ndarray:
    n, m = frame.shape
    block = n + n_cp
    stream = np.concatenate([whgroup.cp_add(frame[:, j], n_cp) for j in range(m)])
    delayed = np.zeros_like(stream)
    delayed[target.delay_k:] = stream[: stream.size - target.delay_k]
    t = np.arange(stream.size)
    ramped = delayed * np.exp(2j * np.pi * target.doppler_q * t / (m * block))
    ramped *= np.exp(-1j * fstaf.block_mean_phase(m, block, target.doppler_q))
    out = ramped.reshape(m, block).T[n_cp:]
    return target.gain * out


def simulate_fst_echo(frame, scenario: Scenario, seed: int = 0, mode: str = "approx") -> np.ndarray:
    """Received N x M frame (CP removed from every slow-time block).

    ``approx`` applies ``(D_{M,q} kron J_k)`` exactly; ``exact`` ramps the
    Doppler phase sample by sample over the serialized CP'd stream, with each
    target's gain absorbing the first block's mean phase.
    """
    frame = np.asarray(frame, dtype=complex)
    if frame.ndim != 2:
        raise InvalidArgumentError(f"expected an N x M frame, got shape {frame.shape}")
    if mode not in ("approx", "exact"):
        raise InvalidArgumentError(f"unknown mode {mode!r}; expected approx or exact")
    y = np.zeros_like(frame)
    for tgt in scenario.targets:
        # zero delay needs no CP
        if tgt.delay_k < 0 or (tgt.delay_k > 0 and tgt.delay_k >= scenario.n_cp):
            raise InvalidArgumentError(
                f"target delay {tgt.delay_k} must be below the CP length {scenario.n_cp}")
        if mode == "approx":
            y += _fst_approx_echo(frame, tgt)
        else:
            y += _fst_exact_echo(frame, tgt, scenario.n_cp)
    return add_noise(y, scenario.noise_power, seed)


def mf_fst_grid(frame, received) -> np.ndarray:
    """``x^H (D_{M,q}^* kron J_k^T) y`` over ``(k, q)`` in Z_N x Z_M."""
    frame = np.asarray(frame, dtype=complex)
    received = np.asarray(received, dtype=complex)
    n = frame.shape[0]
    cross = np.fft.fft(frame, axis=0).conj() * np.fft.fft(received, axis=0) / n
    return n * np.fft.ifft(np.fft.fft(cross, axis=1), axis=0)


def mf_fst_direct(frame, received) -> np.ndarray:
    """Shift-by-shift evaluation of :func:`mf_fst_grid`; test oracle."""
    frame = np.asarray(frame, dtype=complex)
    received = np.asarray(received, dtype=complex)
    n, m = frame.shape
    out = np.empty((n, m), dtype=complex)
    for k in range(n):
        for q in range(m):
            probe = _fst_approx_echo(frame, Target(k, q, 1.0))
            out[k, q] = np.vdot(vec2d(probe), vec2d(received))
    return out


def predicted_mf_fst(frame, targets) -> np.ndarray:
    """``sum_l gain_l A_FST(k - k_l, q - q_l)``."""
    a = fstaf.fst_af_matrix(frame)
    out = np.zeros(a.shape, dtype=complex)
    for tgt in targets:
        out += tgt.gain * np.roll(a, (tgt.delay_k, tgt.doppler_q), axis=(0, 1))
    return out


def fst_model_deviation(frame, scenario: Scenario) -> dict:
    """Noiseless ``exact`` vs ``approx`` output gap and its stop-and-go bound."""
    frame = np.asarray(frame, dtype=complex)
    n, m = frame.shape
    quiet = Scenario(scenario.targets, 0.0, scenario.n_cp)
    gap = np.max(np.abs(simulate_fst_echo(frame, quiet, mode="exact")
                        - simulate_fst_echo(frame, quiet, mode="approx")))
    peak = float(np.max(np.abs(frame)))
    residual = sum(abs(t.gain) * fstaf.stop_and_go_residual(n, m, scenario.n_cp, t.doppler_q)
                   for t in scenario.targets)
    bound = sum(abs(t.gain) * fstaf.stop_and_go_bound(n, m, scenario.n_cp, t.doppler_q)
                for t in scenario.targets)
    return {"deviation": float(gap), "residual_limit": peak * residual, "analytic_limit": peak * bound}


def reconstruction_error(measured: np.ndarray, predicted: np.ndarray) -> float:
    """Max abs difference relative to the largest predicted magnitude."""
    scale = float(np.max(np.abs(predicted)))
    return float(np.max(np.abs(measured - predicted)) / (scale if scale > 0 else 1.0))

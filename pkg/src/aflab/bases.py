"""Unitary modulation bases (1D) and fast/slow-time schemes (2D).

Indices are 0-based throughout: the DFT entry ``F[m, n]`` is
``exp(-2j*pi*m*n/N) / sqrt(N)`` for ``m, n`` in ``0..N-1``, i.e. the usual
1-based textbook entry at row ``m+1``, column ``n+1``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError
from .rng import substream

UNITARY_TOL = 1e-10
KINDS = ("sc", "ofdm", "otfs", "afdm", "custom")


def dft_matrix(n: int) -> np.ndarray:
    """Normalized DFT matrix built entry by entry from its closed form."""
    if n < 1:
        raise InvalidArgumentError(f"DFT size must be >= 1, got {n}")
    idx = np.arange(n)
    # reduce m*n mod N before the exponential so large N keeps full accuracy
    return np.exp(-2j * np.pi * ((idx[:, None] * idx[None, :]) % n) / n) / math.sqrt(n)


def chirp_diagonal(n: int, c: float) -> np.ndarray:
    """Diagonal of ``Lambda_c``: ``exp(-2j*pi*c*m^2)`` for ``m = 0..n-1``."""
    if isinstance(c, (int, Fraction)):
        # exact fractional part of c*m^2 keeps the phase accurate for long chirps
        frac = [float((Fraction(c) * m * m) % 1) for m in range(n)]
        return np.exp(-2j * np.pi * np.array(frac))
    m = np.arange(n, dtype=float)
    return np.exp(-2j * np.pi * c * m**2)


def unitarity_error(u: np.ndarray) -> float:
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


@dataclass(frozen=True, eq=False)
class ModulationBasis:
    """An N x N unitary matrix whose columns carry the N symbols."""

    n: int
    matrix: np.ndarray
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        u = np.asarray(self.matrix, dtype=complex)
        if u.shape != (self.n, self.n):
            raise InvalidArgumentError(f"basis matrix has shape {u.shape}, expected ({self.n}, {self.n})")
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"unknown basis kind {self.kind!r}")
        object.__setattr__(self, "matrix", u)
        tol = self.params.get("tol", UNITARY_TOL)
        err = unitarity_error(u)
        if err > tol:
            raise InvalidArgumentError(f"basis is not unitary: max|U^H U - I| = {err:.3g} > {tol:g}")

    @property
    def label(self) -> str:
        if self.kind == "otfs":
            return f"otfs:{self.params['n1']}x{self.params['n2']}"
        if self.kind == "afdm":
            return f"afdm:{_fmt(self.params['c1'])},{_fmt(self.params['c2'])}"
        return self.kind

    def to_dict(self) -> dict:
        params = {k: _jsonable(v) for k, v in self.params.items() if k != "tol"}
        return {"kind": self.kind, "n": self.n, "params": params}


@dataclass(frozen=True, eq=False)
class Scheme2D:
    """``X = U S V`` with fast-time basis ``U`` (N x N) and slow-time basis ``V`` (M x M)."""

    u_basis: ModulationBasis
    v_basis: ModulationBasis
    kind: str

    @property
    def n(self) -> int:
        return self.u_basis.n

    @property
    def m(self) -> int:
        return self.v_basis.n

    @property
    def label(self) -> str:
        if self.kind == "afdm":
            return self.u_basis.label
        return self.kind


@dataclass(frozen=True, eq=False)
class TimeDomainSignal:
    values: np.ndarray
    basis_kind: str
    constellation_label: str = ""
    seed: int | None = None


def _fmt(v) -> str:
    return str(v) if isinstance(v, Fraction) else f"{v:g}"


def _jsonable(v):
    if isinstance(v, Fraction):
        return str(v)
    return v


def sc_basis(n: int) -> ModulationBasis:
    return ModulationBasis(n, np.eye(n, dtype=complex), "sc")


def ofdm_basis(n: int) -> ModulationBasis:
    return ModulationBasis(n, dft_matrix(n).conj().T, "ofdm")


def otfs_basis(n1: int, n2: int, n: int | None = None) -> ModulationBasis:
    """``F_{N1}^H kron I_{N2}``; ``n`` (if given) must equal ``n1 * n2``."""
    if n1 < 1 or n2 < 1:
        raise InvalidArgumentError("OTFS factors must be positive")
    if n is not None and n1 * n2 != n:
        raise InvalidArgumentError(f"OTFS requires N1*N2 = N, got {n1}*{n2} = {n1 * n2} != {n}")
    mat = np.kron(dft_matrix(n1).conj().T, np.eye(n2))
    return ModulationBasis(n1 * n2, mat, "otfs", {"n1": n1, "n2": n2})


def afdm_basis(n: int, c1, c2=0) -> ModulationBasis:
    """``Lambda_{c1}^H F_N^H Lambda_{c2}^H``; requires ``2 N c1`` to be an integer."""
    c1 = parse_fraction(c1) if isinstance(c1, str) else c1
    c2 = parse_fraction(c2) if isinstance(c2, str) else c2
    slope = afdm_slope(n, c1)
    lam1 = chirp_diagonal(n, c1)
    lam2 = chirp_diagonal(n, c2)
    mat = lam1.conj()[:, None] * dft_matrix(n).conj().T * lam2.conj()[None, :]
    return ModulationBasis(n, mat, "afdm", {"c1": c1, "c2": c2, "slope": slope})


def afdm_slope(n: int, c1) -> int:
    """The integer ``2 N c1``; raises if it is not an integer."""
    if isinstance(c1, str):
        c1 = parse_fraction(c1)
    if isinstance(c1, (int, Fraction)):
        s = 2 * n * Fraction(c1)
        if s.denominator != 1:
            raise InvalidArgumentError(f"AFDM requires 2*N*c1 to be an integer, got 2*{n}*{c1} = {s}")
        return int(s)
    s = 2 * n * float(c1)
    if abs(s - round(s)) > 1e-9:
        raise InvalidArgumentError(f"AFDM requires 2*N*c1 to be an integer, got 2*{n}*{c1} = {s:g}")
    return int(round(s))


def custom_basis(matrix, tol: float = UNITARY_TOL, label: str = "custom") -> ModulationBasis:
    u = np.asarray(matrix, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise InvalidArgumentError(f"custom basis must be square, got shape {u.shape}")
    return ModulationBasis(u.shape[0], u, "custom", {"tol": tol, "source": label})


def haar_unitary(n: int, seed: int, stream: int = 0) -> np.ndarray:
    """Haar-distributed unitary: QR of a complex Gaussian matrix with R's diagonal made positive."""
    rng = substream(seed, stream)
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))[None, :]


def haar_basis(n: int, seed: int, stream: int = 0) -> ModulationBasis:
    return custom_basis(haar_unitary(n, seed, stream), label=f"haar:{seed}:{stream}")


def modulate(basis: ModulationBasis, symbols) -> TimeDomainSignal:
    s = np.asarray(getattr(symbols, "values", symbols), dtype=complex)
    if s.shape != (basis.n,):
        raise InvalidArgumentError(f"expected {basis.n} symbols, got shape {s.shape}")
    label = getattr(symbols, "constellation_label", "")
    seed = getattr(symbols, "seed", None)
    return TimeDomainSignal(basis.matrix @ s, basis.kind, label, seed)


def modulate2d(scheme: Scheme2D, symbol_matrix) -> TimeDomainSignal:
    s = np.asarray(getattr(symbol_matrix, "values", symbol_matrix), dtype=complex)
    if s.shape != (scheme.n, scheme.m):
        raise InvalidArgumentError(f"expected a {scheme.n}x{scheme.m} symbol matrix, got {s.shape}")
    label = getattr(symbol_matrix, "constellation_label", "")
    seed = getattr(symbol_matrix, "seed", None)
    x = scheme.u_basis.matrix @ s @ scheme.v_basis.matrix
    return TimeDomainSignal(x, scheme.kind, label, seed)


def vec2d(x) -> np.ndarray:
    """Column-major vectorization (stack the columns)."""
    return np.asarray(x).reshape(-1, order="F")


def unvec2d(v, n: int, m: int) -> np.ndarray:
    return np.asarray(v).reshape((n, m), order="F")


# -- 2D schemes -------------------------------------------------------------

def scheme_sc(n: int, m: int) -> Scheme2D:
    return Scheme2D(sc_basis(n), sc_basis(m), "sc")


def scheme_ofdm(n: int, m: int) -> Scheme2D:
    return Scheme2D(ofdm_basis(n), sc_basis(m), "ofdm")


def scheme_otfs(n: int, m: int) -> Scheme2D:
    """2D OTFS: identity across fast time, inverse DFT across slow time.

    Serialized with ``vec2d`` it is the 1D ``otfs_basis(m, n)``; the two
    framings still analyse it with different ambiguity functions.
    """
    return Scheme2D(sc_basis(n), ofdm_basis(m), "otfs")


def scheme_afdm(n: int, m: int, c1, c2=0) -> Scheme2D:
    return Scheme2D(afdm_basis(n, c1, c2), sc_basis(m), "afdm")


def scheme_custom(u, v) -> Scheme2D:
    ub = u if isinstance(u, ModulationBasis) else custom_basis(u)
    vb = v if isinstance(v, ModulationBasis) else custom_basis(v)
    return Scheme2D(ub, vb, "custom")


def haar_scheme(n: int, m: int, seed: int, index: int) -> Scheme2D:
    return Scheme2D(haar_basis(n, seed, 2 * index), haar_basis(m, seed, 2 * index + 1), "custom")


# -- parsing / files ----------------------------------------------------------

def parse_fraction(text: str):
    """``"1/32"`` -> Fraction(1, 32); ``"0.25"`` -> Fraction(1, 4)."""
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise InvalidArgumentError(f"cannot parse number {text!r}") from None


def parse_waveform(text: str, n: int) -> ModulationBasis:
    """Parse the CLI form ``sc|ofdm|otfs:N1xN2|afdm:c1[,c2]|file:path`` into an N x N basis."""
    s = text.strip()
    low = s.lower()
    if low == "sc":
        return sc_basis(n)
    if low == "ofdm":
        return ofdm_basis(n)
    if low.startswith("otfs"):
        if ":" not in low:
            raise InvalidArgumentError("1D OTFS needs factors: otfs:<N1>x<N2>")
        try:
            n1, n2 = (int(v) for v in low.split(":", 1)[1].split("x"))
        except ValueError:
            raise InvalidArgumentError(f"cannot parse OTFS factors in {text!r}") from None
        return otfs_basis(n1, n2, n)
    if low.startswith("afdm:"):
        parts = s.split(":", 1)[1].split(",")
        c1 = parse_fraction(parts[0])
        c2 = parse_fraction(parts[1]) if len(parts) > 1 else Fraction(0)
        return afdm_basis(n, c1, c2)
    if low.startswith("file:"):
        basis = load_basis(s.split(":", 1)[1])
        if basis.n != n:
            raise InvalidArgumentError(f"basis file has N={basis.n}, expected {n}")
        return basis
    raise InvalidArgumentError(f"unknown waveform {text!r}")


def parse_scheme(text: str, n: int, m: int) -> Scheme2D:
    """Parse ``sc|ofdm|otfs|afdm:c1[,c2]|file:U.csv,V.csv`` into a 2D scheme."""
    s = text.strip()
    low = s.lower()
    if low == "sc":
        return scheme_sc(n, m)
    if low == "ofdm":
        return scheme_ofdm(n, m)
    if low == "otfs":
        return scheme_otfs(n, m)
    if low.startswith("afdm:"):
        parts = s.split(":", 1)[1].split(",")
        c1 = parse_fraction(parts[0])
        c2 = parse_fraction(parts[1]) if len(parts) > 1 else Fraction(0)
        return scheme_afdm(n, m, c1, c2)
    if low.startswith("file:"):
        paths = s.split(":", 1)[1].split(",")
        if len(paths) != 2:
            raise InvalidArgumentError("2D file waveform needs two paths: file:U.csv,V.csv")
        u, v = load_basis(paths[0]), load_basis(paths[1])
        if (u.n, v.n) != (n, m):
            raise InvalidArgumentError(f"scheme files are {u.n}x{v.n}, expected {n}x{m}")
        return scheme_custom(u, v)
    raise InvalidArgumentError(f"unknown 2D waveform {text!r}")


def save_matrix_csv(matrix: np.ndarray, path) -> None:
    """Dense complex matrix as CSV, each row ``re0,im0,re1,im1,...``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in np.asarray(matrix):
            w.writerow([repr(float(v)) for z in row for v in (z.real, z.imag)])


def load_matrix_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    try:
        vals = np.array([[float(v) for v in r] for r in rows])
    except ValueError as exc:
        raise InvalidArgumentError(f"{path}: {exc}") from None
    if vals.ndim != 2 or vals.shape[1] % 2:
        raise InvalidArgumentError(f"{path}: rows must hold interleaved re,im pairs")
    return vals[:, 0::2] + 1j * vals[:, 1::2]


def basis_from_dict(obj: dict) -> ModulationBasis:
    kind, n, params = obj.get("kind"), int(obj.get("n", 0)), obj.get("params", {})
    if kind == "sc":
        return sc_basis(n)
    if kind == "ofdm":
        return ofdm_basis(n)
    if kind == "otfs":
        return otfs_basis(int(params["n1"]), int(params["n2"]), n)
    if kind == "afdm":
        return afdm_basis(n, parse_fraction(str(params["c1"])), parse_fraction(str(params.get("c2", 0))))
    raise InvalidArgumentError(f"JSON basis kind must be sc|ofdm|otfs|afdm, got {kind!r}")


def load_basis(path, tol: float = UNITARY_TOL) -> ModulationBasis:
    """Load a basis from ``.json`` ({kind, n, params}) or a dense interleaved CSV."""
    p = Path(path)
    if p.suffix.lower() == ".json":
        return basis_from_dict(json.loads(p.read_text()))
    return custom_basis(load_matrix_csv(p), tol=tol, label=str(p))

"""Finite Weyl-Heisenberg machinery on Z_N x Z_N.

Conventions (fixed everywhere in the package):

* ``J_k`` is the periodic downward shift, ``(J_k v)[n] = v[n - k mod N]``.
* ``D_q = diag(exp(2j*pi*q*n/N))``.
* ``G_{k,q} = D_q J_k``; a shift index is the pair ``(k, q)`` = (delay, Doppler).

Shifts are applied in O(N) without building matrices; the ``*_matrix``
helpers exist for cross-checking.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError

DIAG_TOL = 1e-9


@dataclass(frozen=True)
class ShiftIndex:
    k: int
    q: int
    n_mod: int
    q_mod: int | None = None

    def __post_init__(self):
        qm = self.n_mod if self.q_mod is None else self.q_mod
        object.__setattr__(self, "q_mod", qm)
        object.__setattr__(self, "k", self.k % self.n_mod)
        object.__setattr__(self, "q", self.q % qm)

    def pair(self) -> tuple[int, int]:
        return (self.k, self.q)


@dataclass(frozen=True)
class WHElement:
    """``exp(2j*pi*phase_index/N) * G_{k,q}``."""

    phase_index: int
    shift: ShiftIndex

    def matrix(self) -> np.ndarray:
        n = self.shift.n_mod
        return np.exp(2j * np.pi * self.phase_index / n) * g_matrix(n, self.shift.k, self.shift.q)

    def __matmul__(self, other: "WHElement") -> "WHElement":
        # D_a J_b D_c J_d = exp(-2j*pi*b*c/N) D_{a+c} J_{b+d}
        n = self.shift.n_mod
        b, a = self.shift.k, self.shift.q
        d, c = other.shift.k, other.shift.q
        ell = (self.phase_index + other.phase_index - b * c) % n
        return WHElement(ell, ShiftIndex(b + d, a + c, n))


@dataclass(frozen=True)
class IndexSet:
    n_mod: int
    members: frozenset = field(default_factory=frozenset)
    source: str = ""

    def __contains__(self, item) -> bool:
        return tuple(item) in self.members

    def __len__(self) -> int:
        return len(self.members)

    def sorted_members(self) -> list[tuple[int, int]]:
        return sorted(self.members)


# -- shift application -------------------------------------------------------

def apply_time_shift(k: int, v) -> np.ndarray:
    v = np.asarray(v)
    return np.roll(v, k % v.shape[0], axis=0)


def doppler_phases(n: int, q: int) -> np.ndarray:
    return np.exp(2j * np.pi * ((q * np.arange(n)) % n) / n)


def apply_freq_shift(q: int, v) -> np.ndarray:
    v = np.asarray(v)
    ph = doppler_phases(v.shape[0], q)
    return ph.reshape((-1,) + (1,) * (v.ndim - 1)) * v


def apply_g(k: int, q: int, v) -> np.ndarray:
    """``G_{k,q} v = D_q J_k v``."""
    return apply_freq_shift(q, apply_time_shift(k, v))


def time_shift_matrix(n: int, k: int) -> np.ndarray:
    return np.roll(np.eye(n), k % n, axis=0)


def freq_shift_matrix(n: int, q: int) -> np.ndarray:
    return np.diag(doppler_phases(n, q))


def g_matrix(n: int, k: int, q: int) -> np.ndarray:
    return freq_shift_matrix(n, q) @ time_shift_matrix(n, k)


def aperiodic_shift_matrix(n: int, k: int) -> np.ndarray:
    """Downward shift by ``k`` with zero fill (no wrap-around)."""
    return np.eye(n, k=-k)


# -- cyclic prefix -------------------------------------------------------------

def _check_cp(n: int, n_cp: int):
    if not 0 <= n_cp <= n:
        raise InvalidArgumentError(f"CP length must be in 0..{n}, got {n_cp}")


def cp_add(v, n_cp: int) -> np.ndarray:
    v = np.asarray(v)
    _check_cp(v.shape[0], n_cp)
    return np.concatenate([v[v.shape[0] - n_cp:], v], axis=0)


def cp_remove(v, n_cp: int) -> np.ndarray:
    v = np.asarray(v)
    if not 0 <= n_cp <= v.shape[0] // 2:
        raise InvalidArgumentError(f"CP length {n_cp} out of range for a length-{v.shape[0]} block")
    return v[n_cp:]


def cp_add_matrix(n: int, n_cp: int) -> np.ndarray:
    _check_cp(n, n_cp)
    return np.vstack([np.eye(n)[n - n_cp:], np.eye(n)])


def cp_remove_matrix(n: int, n_cp: int) -> np.ndarray:
    _check_cp(n, n_cp)
    return np.hstack([np.zeros((n, n_cp)), np.eye(n)])


def cp_shift_identity_check(n: int, n_cp: int, k: int) -> bool:
    """Whether CP removal after an aperiodic shift of the CP'd block equals ``J_k``.

    Holds exactly for ``k <= n_cp``; for longer delays it fails and this
    returns False rather than raising.
    """
    lhs = cp_remove_matrix(n, n_cp) @ aperiodic_shift_matrix(n + n_cp, k) @ cp_add_matrix(n, n_cp)
    return bool(np.max(np.abs(lhs - time_shift_matrix(n, k))) <= 1e-14)


# -- group structure -------------------------------------------------------------

def commutation_phase(k: int, q: int, n: int) -> complex:
    """``exp(-2j*pi*q*k/N)``, the phase with ``J_k D_q = phase * D_q J_k``."""
    return complex(np.exp(-2j * np.pi * ((q * k) % n) / n))


def omega(a, b, n: int) -> int:
    """Symplectic form of index pairs ``a = (m, n_)`` and ``b = (p, q)``: ``<n_ p - m q>_N``."""
    (m, nn), (p, q) = a, b
    return (nn * p - m * q) % n


def symplectic(a: ShiftIndex, b: ShiftIndex) -> int:
    if a.n_mod != b.n_mod or a.q_mod != b.q_mod:
        raise InvalidArgumentError(f"modulus mismatch: {a.n_mod} vs {b.n_mod}")
    return omega(a.pair(), b.pair(), a.n_mod)


# -- diagonalizability --------------------------------------------------------------

def diag_deviation(u, k: int, q: int) -> float:
    """Off-diagonal Frobenius norm of ``U^H G_{k,q} U`` divided by sqrt(N)."""
    u = np.asarray(getattr(u, "matrix", u))
    n = u.shape[0]
    t = u.conj().T @ apply_g(k, q, u)
    off = t - np.diag(np.diag(t))
    return float(np.linalg.norm(off) / math.sqrt(n))


def diag_deviation_grid(u) -> np.ndarray:
    """``diag_deviation`` for every ``(k, q)`` at once, shape ``(N, N)``.

    For fixed ``k`` the entries ``(U^H D_q J_k U)[a, b]`` over all ``q`` are a
    length-N inverse DFT of ``conj(U[m, a]) (J_k U)[m, b]`` over ``m``.
    """
    u = np.asarray(getattr(u, "matrix", u))
    n = u.shape[0]
    out = np.empty((n, n))
    offdiag = ~np.eye(n, dtype=bool)
    for k in range(n):
        prod = u.conj()[:, :, None] * np.roll(u, k, axis=0)[:, None, :]
        t = np.fft.ifft(prod, axis=0) * n  # t[q, a, b]
        out[k] = np.sqrt(np.sum(np.abs(t[:, offdiag]) ** 2, axis=1) / n)
    return out


def index_set(u, tol: float = DIAG_TOL) -> IndexSet:
    basis_label = getattr(u, "label", "custom")
    dev = diag_deviation_grid(u)
    n = dev.shape[0]
    members = frozenset((int(k), int(q)) for k, q in zip(*np.nonzero(dev <= tol)))
    return IndexSet(n, members, basis_label)


def check_no_2x2(s: IndexSet) -> bool:
    """True iff no ``(a,b), (a,b+1), (a+1,b)`` (mod N) all lie in the set."""
    n = s.n_mod
    for a, b in s.members:
        if (a, (b + 1) % n) in s.members and ((a + 1) % n, b) in s.members:
            return False
    return True


def is_closed(s: IndexSet) -> bool:
    """Closed under addition and negation mod N (subgroup of Z_N^2)."""
    n = s.n_mod
    for (a, b), (c, d) in itertools.product(s.members, repeat=2):
        if ((a + c) % n, (b + d) % n) not in s.members:
            return False
    return all(((-a) % n, (-b) % n) in s.members for a, b in s.members)


def pairwise_commuting(s: IndexSet) -> bool:
    return all(omega(a, b, s.n_mod) == 0 for a, b in itertools.combinations(s.members, 2))


# -- geometry --------------------------------------------------------------------

def _lift(v: int, n: int) -> int:
    """Representative of ``v mod n`` in ``(-n/2, n/2]``."""
    v %= n
    return v - n if v > n // 2 else v


def _order(v, n: int) -> int:
    return n // math.gcd(v[0], v[1], n)


def collinear_mod_n(a, b, c, n: int) -> bool:
    """Whether three points of Z_N^2 lie on one cyclic line ``{p + t d mod N}``.

    Equivalent to the subgroup generated by ``b - a`` and ``c - a`` being
    cyclic, i.e. its order equals its exponent.
    """
    u = ((b[0] - a[0]) % n, (b[1] - a[1]) % n)
    v = ((c[0] - a[0]) % n, (c[1] - a[1]) % n)
    ou, ov = _order(u, n), _order(v, n)
    multiples_u = {((t * u[0]) % n, (t * u[1]) % n) for t in range(ou)}
    common = sum(((t * v[0]) % n, (t * v[1]) % n) in multiples_u for t in range(ov))
    size = ou * ov // common
    return size == ou * ov // math.gcd(ou, ov)


def lifted_area(a, b, c, n: int) -> float:
    """Euclidean triangle area using minimal-magnitude lifts of ``b - a`` and ``c - a``."""
    ux, uy = _lift(b[0] - a[0], n), _lift(b[1] - a[1], n)
    vx, vy = _lift(c[0] - a[0], n), _lift(c[1] - a[1], n)
    return abs(ux * vy - uy * vx) / 2.0


@dataclass(frozen=True)
class GeometryReport:
    n_mod: int
    cardinality: int
    cardinality_ok: bool
    no_2x2: bool
    triples: int
    collinear_triples: int
    min_triangle_area: float | None
    min_lifted_area_nonzero: float | None
    min_half_symplectic: float | None
    area_ok: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def geometry_report(s: IndexSet) -> GeometryReport:
    """Cardinality, no-2x2 and triangle-area summary of an index set.

    ``min_triangle_area`` is the smallest lifted area over triples that are
    not collinear mod N; ``min_lifted_area_nonzero`` is the smallest nonzero
    lifted area over all triples; ``min_half_symplectic`` is the smallest
    ``<omega(b-a, c-a)>_N / 2`` (zero for any commuting set).  ``area_ok``
    holds when every triple is collinear mod N or has lifted area >= N/2.
    """
    n = s.n_mod
    pts = s.sorted_members()
    min_area = None
    min_nonzero = None
    min_half_omega = None
    collinear = 0
    area_ok = True
    cache: dict = {}
    count = 0
    for a, b, c in itertools.combinations(pts, 3):
        count += 1
        area = lifted_area(a, b, c, n)
        if area > 0:
            min_nonzero = area if min_nonzero is None else min(min_nonzero, area)
        half = omega((b[0] - a[0], b[1] - a[1]), (c[0] - a[0], c[1] - a[1]), n) / 2.0
        min_half_omega = half if min_half_omega is None else min(min_half_omega, half)
        key = (((b[0] - a[0]) % n, (b[1] - a[1]) % n), ((c[0] - a[0]) % n, (c[1] - a[1]) % n))
        if key not in cache:
            cache[key] = collinear_mod_n((0, 0), key[0], key[1], n)
        if cache[key]:
            collinear += 1
            continue
        min_area = area if min_area is None else min(min_area, area)
        if area < n / 2:
            area_ok = False
    return GeometryReport(
        n_mod=n,
        cardinality=len(pts),
        cardinality_ok=len(pts) <= n,
        no_2x2=check_no_2x2(s),
        triples=count,
        collinear_triples=collinear,
        min_triangle_area=min_area,
        min_lifted_area_nonzero=min_nonzero,
        min_half_symplectic=min_half_omega,
        area_ok=area_ok,
    )

"""Truncated Fourier fields on the periodic unit square.

Scalars are stored as coefficients c_k of exp(2*pi*i k.x) over the square
lattice 0 < max(|k1|,|k2|) <= K with conj(c_k) = c_{-k}, so values are real.
Divergence-free velocities are stored as one complex amplitude per mode
multiplying the unit vector perp(k)/|k|, with conj(v_k) = -v_{-k}; the
divergence then vanishes identically because k.perp(k) = 0.

Sobolev norms are weighted coefficient sums: |u|_{H^s}^2 = sum |k|^{2s} |c_k|^2
with |k| the Euclidean norm of the integer pair.  Factors of 2*pi belong to
the differential operators, not to the norms.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError, LatticeMismatchError, NumericsError

TWO_PI = 2.0 * np.pi

# residue bound for real-valued synthesis from symmetrized coefficients
IMAG_RESIDUE_TOL = 1e-12


@dataclass(frozen=True)
class RegularityIndices:
    """Smoothness exponents used across the package.

    m is the parameter-space exponent, m_star the stronger exponent whose
    balls carry the prior, s_ic the initial-condition exponent.
    """

    m: float = 2.0
    m_star: float = 3.0
    s_ic: float = 2.0

    def __post_init__(self):
        if not self.m > 1:
            raise ConfigError(f"m must exceed 1, got {self.m}")
        if not self.m_star > self.m:
            raise ConfigError(f"m_star must exceed m, got {self.m_star} <= {self.m}")
        if not 1 < self.s_ic <= self.m:
            raise ConfigError(f"s_ic must lie in (1, m], got {self.s_ic}")


DEFAULT_REGULARITY = RegularityIndices()


@dataclass(frozen=True)
class ModeLattice:
    """Square truncation 0 < max(|k1|,|k2|) <= K with a fixed enumeration.

    Modes are listed row-major in k1, then k2, skipping the origin, so the
    ordering is stable across runs and serialization round-trips.
    """

    K: int

    def __post_init__(self):
        if self.K < 0:
            raise ConfigError(f"truncation K must be nonnegative, got {self.K}")

    @cached_property
    def modes(self) -> np.ndarray:
        ks = []
        for k1 in range(-self.K, self.K + 1):
            for k2 in range(-self.K, self.K + 1):
                if k1 == 0 and k2 == 0:
                    continue
                ks.append((k1, k2))
        out = np.array(ks, dtype=np.int64).reshape(-1, 2)
        out.setflags(write=False)
        return out

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @cached_property
    def _index(self) -> dict:
        return {(int(k1), int(k2)): i for i, (k1, k2) in enumerate(self.modes)}

    def index_of(self, k) -> int:
        try:
            return self._index[(int(k[0]), int(k[1]))]
        except KeyError:
            raise ConfigError(f"mode {tuple(k)} is outside the K={self.K} lattice") from None

    @cached_property
    def conj_index(self) -> np.ndarray:
        """Position of -k for each mode position."""
        out = np.array([self._index[(-int(k1), -int(k2))] for k1, k2 in self.modes],
                       dtype=np.int64)
        out.setflags(write=False)
        return out

    @cached_property
    def norms(self) -> np.ndarray:
        """Euclidean norm |k| per mode."""
        out = np.sqrt((self.modes.astype(float) ** 2).sum(axis=1))
        out.setflags(write=False)
        return out

    @cached_property
    def half_mask(self) -> np.ndarray:
        """One representative per conjugate pair: k1 > 0, or k1 == 0 and k2 > 0."""
        k1, k2 = self.modes[:, 0], self.modes[:, 1]
        out = (k1 > 0) | ((k1 == 0) & (k2 > 0))
        out.setflags(write=False)
        return out

    def embedding_into(self, other: "ModeLattice") -> np.ndarray:
        """Index array placing my modes inside a lattice with other.K >= K."""
        if other.K < self.K:
            raise LatticeMismatchError(
                f"cannot embed K={self.K} lattice into smaller K={other.K}")
        return np.array([other.index_of(k) for k in self.modes], dtype=np.int64)


def _symmetrize(lattice: ModeLattice, coeffs: np.ndarray, sign: float) -> np.ndarray:
    """Project onto the reality constraint conj(c_k) = sign * c_{-k}.

    The projection (c + sign*conj(c[-k]))/2 satisfies the constraint exactly
    in floating point, not merely to rounding.
    """
    c = np.asarray(coeffs, dtype=np.complex128)
    if c.shape != (lattice.n_modes,):
        raise ConfigError(
            f"expected {lattice.n_modes} coefficients for K={lattice.K}, got shape {c.shape}")
    out = 0.5 * (c + sign * np.conj(c[lattice.conj_index]))
    out.setflags(write=False)
    return out


class _FourierField:
    """Shared coefficient-array mechanics for scalar and velocity fields."""

    _conj_sign = 1.0

    def __init__(self, lattice: ModeLattice, coeffs):
        self.lattice = lattice
        self.coeffs = _symmetrize(lattice, coeffs, self._conj_sign)

    @classmethod
    def zeros(cls, lattice: ModeLattice):
        return cls(lattice, np.zeros(lattice.n_modes, dtype=np.complex128))

    @classmethod
    def from_mode_dict(cls, lattice: ModeLattice, entries: dict):
        """Build from {(k1, k2): value}; conjugate partners are filled in."""
        c = np.zeros(lattice.n_modes, dtype=np.complex128)
        for k, val in entries.items():
            i = lattice.index_of(k)
            c[i] = val
            c[lattice.conj_index[i]] = cls._conj_sign * np.conj(val)
        return cls(lattice, c)

    def with_coeffs(self, coeffs):
        return type(self)(self.lattice, coeffs)

    def __add__(self, other):
        self._check_same_lattice(other)
        return type(self)(self.lattice, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check_same_lattice(other)
        return type(self)(self.lattice, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return type(self)(self.lattice, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def _check_same_lattice(self, other):
        if not isinstance(other, type(self)):
            raise TypeError(f"cannot combine {type(self).__name__} with {type(other).__name__}")
        if other.lattice.K != self.lattice.K:
            raise LatticeMismatchError(
                f"field arithmetic needs matching lattices, got K={self.lattice.K} "
                f"and K={other.lattice.K}; embed first")

    def embed(self, lattice: ModeLattice):
        """Copy of this field on a finer (larger-K) lattice."""
        if lattice.K == self.lattice.K:
            return self
        idx = self.lattice.embedding_into(lattice)
        c = np.zeros(lattice.n_modes, dtype=np.complex128)
        c[idx] = self.coeffs
        return type(self)(lattice, c)

    def reality_defect(self) -> float:
        """Max violation of the stored conjugate-pair constraint (0 by construction)."""
        return float(np.max(np.abs(np.conj(self.coeffs)
                                   - self._conj_sign * self.coeffs[self.lattice.conj_index]),
                            initial=0.0))


class FourierScalarField(_FourierField):
    """Real scalar on the torus, theta(x) = sum c_k exp(2*pi*i k.x)."""

    _conj_sign = 1.0

    def evaluate(self, points) -> np.ndarray:
        """Values at points (n, 2); coordinates wrap modulo 1."""
        return _evaluate_sum(self.lattice, self.coeffs, points)

    def grid_values(self, n: int) -> np.ndarray:
        """Values on the n x n collocation grid x_j = j/n (FFT synthesis)."""
        return _grid_synthesis(self.lattice, self.coeffs, n)

    def gradient_coeffs(self):
        """Coefficient arrays of (d theta/dx1, d theta/dx2)."""
        k = self.lattice.modes
        d1 = TWO_PI * 1j * k[:, 0] * self.coeffs
        d2 = TWO_PI * 1j * k[:, 1] * self.coeffs
        return d1, d2

    def sup_abs(self, n: int = 0) -> float:
        """Grid sup of |theta|; n defaults to a dealiased synthesis size."""
        if n <= 0:
            n = max(3 * self.lattice.K + 1, 8)
        return float(np.max(np.abs(self.grid_values(n)), initial=0.0))


class FourierVelocityField(_FourierField):
    """Divergence-free velocity u(x) = sum v_k perp(k)/|k| exp(2*pi*i k.x)."""

    _conj_sign = -1.0

    def component_coeffs(self):
        """Coefficient arrays (c1_k, c2_k) of the two Cartesian components."""
        if self.lattice.n_modes == 0:
            z = np.zeros(0, dtype=np.complex128)
            return z, z
        k = self.lattice.modes.astype(float)
        nrm = self.lattice.norms
        c1 = self.coeffs * (-k[:, 1] / nrm)
        c2 = self.coeffs * (k[:, 0] / nrm)
        return c1, c2

    def velocity_at(self, points) -> np.ndarray:
        """Velocity vectors at points (n, 2), shape (n, 2)."""
        c1, c2 = self.component_coeffs()
        u1 = _evaluate_sum(self.lattice, c1, points)
        u2 = _evaluate_sum(self.lattice, c2, points)
        return np.stack([u1, u2], axis=-1)

    def grid_values(self, n: int) -> np.ndarray:
        """Velocity on the n x n collocation grid, shape (n, n, 2)."""
        c1, c2 = self.component_coeffs()
        return np.stack([_grid_synthesis(self.lattice, c1, n),
                         _grid_synthesis(self.lattice, c2, n)], axis=-1)

    def divergence_sup(self, n: int = 0) -> float:
        """Grid sup of the spectrally evaluated divergence (identically ~0)."""
        if n <= 0:
            n = max(3 * self.lattice.K + 1, 8)
        c1, c2 = self.component_coeffs()
        k = self.lattice.modes
        div = TWO_PI * 1j * (k[:, 0] * c1 + k[:, 1] * c2)
        vals = _grid_synthesis(self.lattice, div, n, check_real=False)
        return float(np.max(np.abs(vals), initial=0.0))

    def sup_speed(self, n: int = 0) -> float:
        if n <= 0:
            n = max(3 * self.lattice.K + 1, 8)
        g = self.grid_values(n)
        if g.size == 0:
            return 0.0
        return float(np.max(np.sqrt((g ** 2).sum(axis=-1))))


def sobolev_norm(field, s: float) -> float:
    """H^s coefficient norm sqrt(sum |k|^{2s} |c_k|^2)."""
    c = field.coeffs
    if len(c) == 0:
        return 0.0
    w = field.lattice.norms ** (2.0 * s)
    return float(np.sqrt(np.sum(w * (c.real ** 2 + c.imag ** 2))))


def distance_H(a, b, s: float) -> float:
    """H^s distance between two fields of the same kind; lattices may nest."""
    if type(a) is not type(b):
        raise TypeError("distance_H needs two fields of the same kind")
    K = max(a.lattice.K, b.lattice.K)
    if K > a.lattice.K or K > b.lattice.K:
        big = ModeLattice(K)
        a, b = a.embed(big), b.embed(big)
    return sobolev_norm(a - b, s)


def _evaluate_sum(lattice: ModeLattice, coeffs, points, check_real=True) -> np.ndarray:
    """Direct Fourier sum at arbitrary points, vectorized over points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float)) % 1.0
    if pts.shape[-1] != 2:
        raise ConfigError(f"points must have two coordinates, got shape {pts.shape}")
    if lattice.n_modes == 0:
        out = np.zeros(pts.shape[0])
        return out
    phase = np.exp((TWO_PI * 1j) * (pts @ lattice.modes.T.astype(float)))
    vals = phase @ coeffs
    if check_real:
        scale = max(1.0, float(np.max(np.abs(vals.real), initial=0.0)))
        residue = float(np.max(np.abs(vals.imag), initial=0.0))
        if residue > IMAG_RESIDUE_TOL * scale:
            raise NumericsError(f"imaginary residue {residue:.3e} exceeds tolerance")
        return vals.real
    return vals


def _grid_scatter(lattice: ModeLattice, coeffs, n: int) -> np.ndarray:
    """Place lattice coefficients into an n x n FFT array (wavenumber layout)."""
    if n < 2 * lattice.K + 1:
        raise ConfigError(f"grid size {n} cannot hold modes up to K={lattice.K}")
    buf = np.zeros((n, n), dtype=np.complex128)
    k = lattice.modes
    buf[k[:, 0] % n, k[:, 1] % n] = coeffs
    return buf

def _grid_synthesis(lattice: ModeLattice, coeffs, n: int, check_real=True) -> np.ndarray:
    buf = _grid_scatter(lattice, coeffs, n)
    vals = np.fft.ifft2(buf) * (n * n)
    if check_real:
        scale = max(1.0, float(np.max(np.abs(vals.real))))
        residue = float(np.max(np.abs(vals.imag)))
        if residue > IMAG_RESIDUE_TOL * scale:
            raise NumericsError(f"imaginary residue {residue:.3e} exceeds tolerance")
        return vals.real
    return vals


# ---------------------------------------------------------------------------
# serialization: one CSV record per mode, float repr round-trips bit-exactly

def save_field_csv(field, path):
    kind = "velocity" if isinstance(field, FourierVelocityField) else "scalar"
    lines = [f"lattice_K={field.lattice.K},kind={kind}", "k1,k2,re,im"]
    for (k1, k2), c in zip(field.lattice.modes, field.coeffs):
        lines.append(f"{k1},{k2},{float(c.real)!r},{float(c.imag)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_field_csv(path):
    with open(path) as fh:
        header = fh.readline().strip()
        try:
            kv = dict(item.split("=", 1) for item in header.split(","))
            K = int(kv["lattice_K"])
            kind = kv["kind"]
        except (ValueError, KeyError):
            raise ConfigError(f"malformed field header {header!r} in {path}") from None
        if kind not in ("scalar", "velocity"):
            raise ConfigError(f"unknown field kind {kind!r} in {path}")
        cols = fh.readline().strip()
        if cols != "k1,k2,re,im":
            raise ConfigError(f"unexpected column header {cols!r} in {path}")
        lattice = ModeLattice(K)
        coeffs = np.zeros(lattice.n_modes, dtype=np.complex128)
        for line in fh:
            line = line.strip()
            if not line:
                continue
            k1, k2, re, im = line.split(",")
            coeffs[lattice.index_of((int(k1), int(k2)))] = float(re) + 1j * float(im)
    cls = FourierVelocityField if kind == "velocity" else FourierScalarField
    return cls(lattice, coeffs)

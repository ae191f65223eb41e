"""Periodic grids, real/spectral fields, transforms, norms and quadrature.

The box is ``[-L, L)^n`` sampled at ``x_j = -L + j h`` with ``h = 2L/N``.
Spectral coefficients are referenced to the physical coordinate, i.e.

    c(m) = h^n * sum_j f(x_j) exp(-i xi_m . x_j),   xi_m = (pi/L) m,

so the ``m = 0`` coefficient is the box integral of ``f``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import GridMismatch, NonFiniteField


@dataclass(frozen=True)
class Grid:
    dimension: int
    points_per_axis: int
    half_width: float

    def __post_init__(self):
        if self.dimension not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.dimension}")
        n = self.points_per_axis
        if n < 16 or n % 2:
            raise ValueError(f"points_per_axis must be even and >= 16, got {n}")
        if not self.half_width > 0:
            raise ValueError(f"half_width must be positive, got {self.half_width}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.points_per_axis

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dimension

    @property
    def volume(self) -> float:
        return (2.0 * self.half_width) ** self.dimension

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dimension

    @cached_property
    def axis(self) -> np.ndarray:
        return -self.half_width + self.spacing * np.arange(self.points_per_axis)

    @cached_property
    def modes(self) -> np.ndarray:
        """Signed integer alias ``m_k`` for each FFT index ``k``."""
        n = self.points_per_axis
        k = np.arange(n)
        return np.where(k < n // 2, k, k - n)

    @cached_property
    def frequencies(self) -> np.ndarray:
        return (np.pi / self.half_width) * self.modes

    def coordinates(self) -> list[np.ndarray]:
        return np.meshgrid(*([self.axis] * self.dimension), indexing="ij")

    def radius(self) -> np.ndarray:
        return np.sqrt(sum(c * c for c in self.coordinates()))

    def wavevectors(self) -> list[np.ndarray]:
        return np.meshgrid(*([self.frequencies] * self.dimension), indexing="ij")

    @cached_property
    def xi_abs(self) -> np.ndarray:
        return np.sqrt(sum(k * k for k in self.wavevectors()))

    @cached_property
    def _phase(self) -> np.ndarray:
        # exp(-i xi_m (-L)) = (-1)^m per axis since xi_m L = pi m
        sign = np.where(self.modes % 2 == 0, 1.0, -1.0)
        out = sign
        for _ in range(self.dimension - 1):
            out = np.multiply.outer(out, sign)
        return out

    def sample(self, func) -> "RealField":
        """Sample ``func(*coords)`` on the grid."""
        return RealField(self, np.asarray(func(*self.coordinates()), dtype=float))

    def to_dict(self) -> dict:
        return {"dimension": self.dimension, "N": self.points_per_axis, "L": self.half_width}


def _check_finite(values):
    if not np.all(np.isfinite(values)):
        raise NonFiniteField("field contains NaN or infinite values")


@dataclass(frozen=True, eq=False)
class RealField:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size != self.grid.points_per_axis**self.grid.dimension:
            raise ValueError("values length must equal N^n")
        v = v.reshape(self.grid.shape)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel(order="C")

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def _other(self, other):
        if isinstance(other, RealField):
            if other.grid != self.grid:
                raise GridMismatch("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return RealField(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return RealField(self.grid, self.values - self._other(other))

    def __mul__(self, other):
        return RealField(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __neg__(self):
        return RealField(self.grid, -self.values)


@dataclass(frozen=True, eq=False)
class SpectralField:
    grid: Grid
    coefficients: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex).reshape(self.grid.shape)
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    def symmetry_defect(self) -> float:
        """Relative violation of ``c(-m) = conj(c(m))``."""
        c = self.coefficients
        flipped = c
        for ax in range(c.ndim):
            flipped = np.roll(np.flip(flipped, axis=ax), 1, axis=ax)
        scale = max(float(np.max(np.abs(c))), 1e-300)
        return float(np.max(np.abs(flipped - np.conj(c)))) / scale


def forward_transform(f: RealField) -> SpectralField:
    _check_finite(f.values)
    g = f.grid
    return SpectralField(g, g.cell_volume * g._phase * np.fft.fftn(f.values))


def _inverse_raw(s: SpectralField) -> np.ndarray:
    g = s.grid
    return np.fft.ifftn(s.coefficients * g._phase) / g.cell_volume


def inverse_transform(s: SpectralField) -> RealField:
    return RealField(s.grid, _inverse_raw(s).real)


def imaginary_residue(s: SpectralField) -> float:
    """Max imaginary part of the inverse transform relative to its max real part."""
    raw = _inverse_raw(s)
    return float(np.max(np.abs(raw.imag)) / max(float(np.max(np.abs(raw.real))), 1e-300))


def integrate(f: RealField) -> float:
    _check_finite(f.values)
    return float(f.grid.cell_volume * np.sum(f.values))


def inner(f: RealField, g: RealField) -> float:
    if f.grid != g.grid:
        raise GridMismatch("fields live on different grids")
    return integrate(f * g)


def spectral_inner(f: RealField, g: RealField) -> float:
    """``(2L)^{-n} sum_m c_f(m) conj(c_g(m))``; equals ``integrate(f g)``."""
    if f.grid != g.grid:
        raise GridMismatch("fields live on different grids")
    cf = forward_transform(f).coefficients
    cg = forward_transform(g).coefficients
    return float(np.real(np.sum(cf * np.conj(cg)))) / f.grid.volume


def gradient(f: RealField) -> list[RealField]:
    _check_finite(f.values)
    g = f.grid
    hat = np.fft.fftn(f.values)
    out = []
    for axis, k in enumerate(g.wavevectors()):
        k = k.copy()
        # the Nyquist mode has no odd-derivative partner
        nyq = g.points_per_axis // 2
        idx = [slice(None)] * g.dimension
        idx[axis] = nyq
        k[tuple(idx)] = 0.0
        out.append(RealField(g, np.fft.ifftn(1j * k * hat).real))
    return out


def norm(f: RealField, kind: str = "L2") -> float:
    _check_finite(f.values)
    dv = f.grid.cell_volume
    kind = kind.upper()
    if kind == "L1":
        return float(dv * np.sum(np.abs(f.values)))
    if kind == "L2":
        return float(np.sqrt(dv * np.sum(f.values**2)))
    if kind == "LINF":
        return float(np.max(np.abs(f.values)))
    if kind == "H1":
        total = dv * np.sum(f.values**2)
        for d in gradient(f):
            total += dv * np.sum(d.values**2)
        return float(np.sqrt(total))
    raise ValueError(f"unknown norm kind {kind!r}")


# ---------------------------------------------------------------------------
# serialization: values as CSV or raw float64, plus a JSON header sidecar


def save_field(f: RealField, path, fmt: str = "csv", extra: dict | None = None) -> Path:
    path = Path(path)
    header = {**f.grid.to_dict(), "order": "row-major", "format": fmt}
    if extra:
        header.update(extra)
    if fmt == "csv":
        np.savetxt(path, f.flat, delimiter=",", fmt="%.17g")
    elif fmt == "bin":
        f.flat.astype("<f8").tofile(path)
    else:
        raise ValueError(f"unknown field format {fmt!r}")
    path.with_name(path.name + ".json").write_text(json.dumps(header, indent=2))
    return path


def load_field(path) -> RealField:
    path = Path(path)
    header = json.loads(path.with_name(path.name + ".json").read_text())
    grid = Grid(header["dimension"], header["N"], header["L"])
    if header["format"] == "csv":
        values = np.loadtxt(path, delimiter=",")
    else:
        values = np.fromfile(path, dtype="<f8")
    return RealField(grid, values)

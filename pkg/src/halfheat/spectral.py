"""Grids, physical/spectral fields, unitary 2-d Fourier transforms, and free
heat propagation.

Conventions.  Grids are uniform and cell-centered, so x1 = 0 is never sampled
and odd fields are represented without a redundant zero row.  The transform is
the unitary symmetric-constant convention (1/sqrt(2*pi) per axis), discretized
so that Parseval holds between sum(|W|^2 h1 h2) and sum(|V|^2 dsig1 dsig2) to
rounding accuracy.  Spectral values are stored in FFT frequency order.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "GridSpec",
    "HalfPlaneField",
    "PhysicalField",
    "SpectralField",
    "boundary_trace",
    "field_section",
    "fourier_forward_1d",
    "fourier_inverse_1d",
    "freq_coords_1d",
    "grid_coords_1d",
    "l2_norm",
    "odd_extend",
    "propagate_free",
    "read_field",
    "restrict_half",
    "sample_field",
    "smoothing_derivative_bound_check",
    "transform_forward",
    "transform_inverse",
    "write_field",
]

FIELD_FORMAT_VERSION = 1


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def grid_coords_1d(halfwidth: float, n: int) -> np.ndarray:
    """Cell-centered coordinates -hw + (i + 1/2) * h, i = 0..n-1."""
    h = 2.0 * halfwidth / n
    return -halfwidth + (np.arange(n) + 0.5) * h


def freq_coords_1d(halfwidth: float, n: int) -> np.ndarray:
    """Angular frequencies in FFT order for the grid above."""
    h = 2.0 * halfwidth / n
    return 2.0 * math.pi * np.fft.fftfreq(n, d=h)


@dataclass(frozen=True)
class GridSpec:
    """Uniform 2-d cell-centered grid on [-hw1, hw1] x [-hw2, hw2]."""

    halfwidth_x1: float
    halfwidth_x2: float
    n1: int
    n2: int

    def __post_init__(self):
        if not (self.halfwidth_x1 > 0 and self.halfwidth_x2 > 0):
            raise ValueError("grid halfwidths must be positive")
        for n in (self.n1, self.n2):
            if n < 16 or not _is_power_of_two(n):
                raise ValueError("sample counts must be powers of two, at least 16")

    @classmethod
    def default(cls) -> "GridSpec":
        return cls(40.0, 40.0, 512, 512)

    @property
    def h1(self) -> float:
        return 2.0 * self.halfwidth_x1 / self.n1

    @property
    def h2(self) -> float:
        return 2.0 * self.halfwidth_x2 / self.n2

    def x1(self) -> np.ndarray:
        return grid_coords_1d(self.halfwidth_x1, self.n1)

    def x2(self) -> np.ndarray:
        return grid_coords_1d(self.halfwidth_x2, self.n2)

    def sigma1(self) -> np.ndarray:
        return freq_coords_1d(self.halfwidth_x1, self.n1)

    def sigma2(self) -> np.ndarray:
        return freq_coords_1d(self.halfwidth_x2, self.n2)

    def spectral_cell(self) -> float:
        return (2.0 * math.pi / (self.n1 * self.h1)) * (2.0 * math.pi / (self.n2 * self.h2))

    def to_dict(self) -> dict:
        return {
            "halfwidth_x1": self.halfwidth_x1,
            "halfwidth_x2": self.halfwidth_x2,
            "n1": self.n1,
            "n2": self.n2,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(
            float(d["halfwidth_x1"]), float(d["halfwidth_x2"]), int(d["n1"]), int(d["n2"])
        )


def _freeze(values: np.ndarray) -> np.ndarray:
    out = np.array(values)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class PhysicalField:
    """Real samples of a field W(x) at the cell centers of a grid."""

    grid: GridSpec
    values: np.ndarray
    time_tag: float = 0.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n1, self.grid.n2):
            raise ValueError(
                f"field shape {vals.shape} does not match grid ({self.grid.n1}, {self.grid.n2})"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        if self.time_tag < 0:
            raise ValueError("time_tag must be nonnegative")
        object.__setattr__(self, "values", _freeze(vals))


@dataclass(frozen=True)
class SpectralField:
    """Complex samples of a transform V(sigma) in FFT frequency order."""

    grid: GridSpec
    values: np.ndarray
    time_tag: float = 0.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (self.grid.n1, self.grid.n2):
            raise ValueError(
                f"field shape {vals.shape} does not match grid ({self.grid.n1}, {self.grid.n2})"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", _freeze(vals))


@dataclass(frozen=True)
class HalfPlaneField:
    """Real samples on the x1 > 0 half of a grid, ascending in x1."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n1 // 2, self.grid.n2):
            raise ValueError(
                f"half-plane shape {vals.shape} does not match grid "
                f"({self.grid.n1 // 2}, {self.grid.n2})"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", _freeze(vals))

    def x1(self) -> np.ndarray:
        return self.grid.x1()[self.grid.n1 // 2 :]


def sample_field(grid: GridSpec, func, time_tag: float = 0.0) -> PhysicalField:
    """Sample func(x1, x2) on the grid (broadcast over a meshgrid)."""
    X1, X2 = np.meshgrid(grid.x1(), grid.x2(), indexing="ij")
    return PhysicalField(grid, func(X1, X2), time_tag)


def odd_extend(half: HalfPlaneField, boundary_trace=None) -> PhysicalField:
    """Antisymmetric extension across x1 = 0.

    The dipole line source that the extension of the second x1 derivative
    carries at x1 = 0 is never sampled here; the control response that
    generates it is always assembled in closed spectral form.  The optional
    per-x2 boundary trace is validated for finiteness only.
    """
    if boundary_trace is not None:
        trace = np.asarray(boundary_trace, dtype=float)
        if not np.all(np.isfinite(trace)):
            raise ValueError("boundary trace must be finite")
    nhalf = half.grid.n1 // 2
    full = np.empty((half.grid.n1, half.grid.n2), dtype=float)
    full[nhalf:, :] = half.values
    full[:nhalf, :] = -half.values[::-1, :]
    return PhysicalField(half.grid, full, 0.0)


def restrict_half(field: PhysicalField) -> HalfPlaneField:
    """Samples of a full-plane field on x1 > 0."""
    return HalfPlaneField(field.grid, field.values[field.grid.n1 // 2 :, :])


def transform_forward(field: PhysicalField) -> SpectralField:
    """Unitary 2-d Fourier transform of a sampled field.

    Discretizes (2*pi)^(-1) * integral W(x) exp(-i sigma.x) dx with the
    midpoint rule, which for smooth decaying fields is accurate to roundoff.
    """
    g = field.grid
    x10, x20 = g.x1()[0], g.x2()[0]
    F = np.fft.fft2(field.values)
    F *= np.exp(-1j * g.sigma1() * x10)[:, None]
    F *= np.exp(-1j * g.sigma2() * x20)[None, :]
    F *= g.h1 * g.h2 / (2.0 * math.pi)
    return SpectralField(g, F, field.time_tag)


def transform_inverse(spec: SpectralField) -> PhysicalField:
    """Inverse of transform_forward; returns the real part.

    A large imaginary residue means the input was not conjugate-symmetric and
    is reported as a warning.
    """
    g = spec.grid
    x10, x20 = g.x1()[0], g.x2()[0]
    V = spec.values * np.exp(1j * g.sigma1() * x10)[:, None]
    V *= np.exp(1j * g.sigma2() * x20)[None, :]
    W = np.fft.ifft2(V) * (2.0 * math.pi / (g.h1 * g.h2))
    imag_max = float(np.max(np.abs(W.imag)))
    real_scale = float(np.max(np.abs(W.real)))
    if imag_max > 1e-8 * (real_scale + 1e-300) and imag_max > 1e-12:
        warnings.warn(
            f"inverse transform dropped imaginary part of size {imag_max:.3e}",
            stacklevel=2,
        )
    return PhysicalField(g, W.real, spec.time_tag)


def fourier_forward_1d(values: np.ndarray, halfwidth: float) -> np.ndarray:
    """1-d analogue of transform_forward on a cell-centered grid."""
    values = np.asarray(values)
    n = values.shape[-1]
    h = 2.0 * halfwidth / n
    x0 = -halfwidth + 0.5 * h
    sig = freq_coords_1d(halfwidth, n)
    return np.fft.fft(values) * np.exp(-1j * sig * x0) * (h / math.sqrt(2.0 * math.pi))


def fourier_inverse_1d(values: np.ndarray, halfwidth: float) -> np.ndarray:
    values = np.asarray(values)
    n = values.shape[-1]
    h = 2.0 * halfwidth / n
    x0 = -halfwidth + 0.5 * h
    sig = freq_coords_1d(halfwidth, n)
    return np.fft.ifft(values * np.exp(1j * sig * x0)) * (math.sqrt(2.0 * math.pi) / h)


def propagate_free(spec: SpectralField, t: float) -> SpectralField:
    """Free heat evolution in the spectral domain: multiply by exp(-t*|sigma|^2)."""
    if t < 0:
        raise ValueError("propagation time must be nonnegative")
    g = spec.grid
    s1 = g.sigma1()
    s2 = g.sigma2()
    mult = np.exp(-t * (s1[:, None] ** 2 + s2[None, :] ** 2))
    return SpectralField(g, spec.values * mult, t)


def l2_norm(field) -> float:
    """Discrete L2 norm with the cell measure of the field's domain."""
    if isinstance(field, PhysicalField):
        measure = field.grid.h1 * field.grid.h2
    elif isinstance(field, SpectralField):
        measure = field.grid.spectral_cell()
    elif isinstance(field, HalfPlaneField):
        measure = field.grid.h1 * field.grid.h2
    else:
        raise TypeError(f"unsupported field type {type(field)!r}")
    return float(np.sqrt(np.sum(np.abs(field.values) ** 2) * measure))


def boundary_trace(field: PhysicalField, epsilon: float) -> np.ndarray:
    """Per-x2 values of the field at x1 = epsilon by linear interpolation."""
    g = field.grid
    if epsilon < g.h1 / 2:
        raise ValueError(f"epsilon must be at least half a cell ({g.h1 / 2:g})")
    x1 = g.x1()
    if epsilon > x1[-1]:
        raise ValueError(f"epsilon {epsilon:g} is beyond the grid ({x1[-1]:g})")
    i = int(np.searchsorted(x1, epsilon)) - 1
    if i < 0:
        i = 0
    if x1[i + 1] == epsilon:
        i += 1
        return field.values[i, :].copy()
    w = (epsilon - x1[i]) / (x1[i + 1] - x1[i])
    return (1.0 - w) * field.values[i, :] + w * field.values[i + 1, :]


def smoothing_derivative_bound_check(
    initial: PhysicalField, t: float, alpha_multi: "tuple[int, int]"
) -> "tuple[float, float]":
    """Measured vs guaranteed size of a derivative of the free evolution.

    Returns (lhs, rhs) where lhs is the discrete norm of the multi-index
    derivative D^alpha of the free evolution at time t, computed spectrally as
    the norm of sigma1^a1 * sigma2^a2 times the propagated transform, and rhs
    is exp(t) * ((1 + a1 + a2) / (2*t*e))^((1 + a1 + a2)/2) times the norm of
    the initial state.  The inequality lhs <= rhs is the smoothing estimate.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    a1, a2 = alpha_multi
    if a1 < 0 or a2 < 0:
        raise ValueError("multi-index entries must be nonnegative")
    g = initial.grid
    spec = propagate_free(transform_forward(initial), t)
    s1 = g.sigma1()
    s2 = g.sigma2()
    weighted = spec.values * (s1[:, None] ** a1) * (s2[None, :] ** a2)
    lhs = l2_norm(SpectralField(g, weighted, t))
    order = 1 + a1 + a2
    rhs = math.exp(t) * (order / (2.0 * t * math.e)) ** (order / 2.0) * l2_norm(initial)
    return lhs, rhs


def field_section(field: PhysicalField, *, x1: float = None, x2: float = None):
    """1-d section of a field at a fixed coordinate (linear interpolation).

    Exactly one of x1, x2 must be given.  Returns (coords, values) along the
    free axis.
    """
    if (x1 is None) == (x2 is None):
        raise ValueError("give exactly one of x1, x2")
    g = field.grid
    if x2 is not None:
        axis_coords, fixed, data = g.x2(), x2, field.values
    else:
        axis_coords, fixed, data = g.x1(), x1, field.values.T
    if not (axis_coords[0] <= fixed <= axis_coords[-1]):
        raise ValueError(f"section coordinate {fixed:g} outside the grid")
    j = int(np.searchsorted(axis_coords, fixed)) - 1
    j = max(0, min(j, axis_coords.size - 2))
    w = (fixed - axis_coords[j]) / (axis_coords[j + 1] - axis_coords[j])
    section = (1.0 - w) * data[:, j] + w * data[:, j + 1]
    free_coords = g.x1() if x2 is not None else g.x2()
    return free_coords, section


# ---------------------------------------------------------------------------
# Serialization: CSV sample tables plus a JSON manifest with the grid.
# ---------------------------------------------------------------------------

def _csv_rows(x1: np.ndarray, x2: np.ndarray, values: np.ndarray) -> "list[str]":
    rows = ["x1,x2,value"]
    for i, a in enumerate(x1):
        for j, b in enumerate(x2):
            rows.append(f"{a:.17g},{b:.17g},{values[i, j]:.17g}")
    return rows


def write_field(field, csv_path) -> None:
    """Write a field as CSV rows (x1, x2, value, row-major) plus a manifest.

    The manifest is written next to the CSV with a .json suffix and records
    the grid, the kind (full plane or half plane), the time tag, and the
    discrete norm.
    """
    csv_path = Path(csv_path)
    if isinstance(field, PhysicalField):
        kind, x1, time_tag = "physical", field.grid.x1(), field.time_tag
    elif isinstance(field, HalfPlaneField):
        kind, x1, time_tag = "half", field.x1(), 0.0
    else:
        raise TypeError("write_field supports PhysicalField and HalfPlaneField")
    rows = _csv_rows(x1, field.grid.x2(), field.values)
    csv_path.write_text("\n".join(rows) + "\n")
    manifest = {
        "format_version": FIELD_FORMAT_VERSION,
        "kind": kind,
        "grid": field.grid.to_dict(),
        "time_tag": time_tag,
        "norm": l2_norm(field),
    }
    csv_path.with_suffix(".json").write_text(json.dumps(manifest, indent=2) + "\n")


def read_field(csv_path):
    """Read a field written by write_field; returns the matching field type."""
    csv_path = Path(csv_path)
    manifest = json.loads(csv_path.with_suffix(".json").read_text())
    if manifest.get("format_version") != FIELD_FORMAT_VERSION:
        raise ValueError("unsupported field format version")
    grid = GridSpec.from_dict(manifest["grid"])
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1)
    values = data[:, 2]
    if manifest["kind"] == "physical":
        values = values.reshape(grid.n1, grid.n2)
        return PhysicalField(grid, values, float(manifest.get("time_tag", 0.0)))
    if manifest["kind"] == "half":
        values = values.reshape(grid.n1 // 2, grid.n2)
        return HalfPlaneField(grid, values)
    raise ValueError(f"unknown field kind {manifest['kind']!r}")

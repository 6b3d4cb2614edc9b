"""Transverse optical modes used for projective measurements.

Laguerre-Gaussian and Bessel-Gauss vortex modes, Bloch-sphere superpositions
of opposite-helicity modes, angular-sector ("slice") holograms and arbitrary
user-supplied fields.  All modes evaluate a complex amplitude on the
transverse plane and can carry a lateral offset that models a misaligned
measurement hologram.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .numerics import PolarGrid, bessel_j, integrate_polar, laguerre


@dataclass(frozen=True)
class BeamGeometry:
    """Wavelength, beam waist and evaluation plane of a paraxial beam."""

    wavelength: float = 710e-9
    waist: float = 1.0
    z: float = 0.0

    def __post_init__(self):
        if self.wavelength <= 0:
            raise ValueError("wavelength must be positive")
        if self.waist <= 0:
            raise ValueError("waist must be positive")

    @property
    def rayleigh_range(self) -> float:
        return math.pi * self.waist**2 / self.wavelength

    @property
    def spot_size(self) -> float:
        """1/e beam radius w(z)."""
        zr = self.rayleigh_range
        return self.waist * math.sqrt(1.0 + (self.z / zr) ** 2)

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.wavelength


def default_grid(*waists: float, n_r: int = 256, n_phi: int = 256) -> PolarGrid:
    """Quadrature grid sized for Gaussian tails: r_max = 6x the largest waist."""
    if not waists:
        raise ValueError("at least one waist is required")
    return PolarGrid(r_max=6.0 * max(waists), n_r=n_r, n_phi=n_phi)


class TransverseMode:
    """Base class: complex field on the transverse plane, with lateral offset.

    Subclasses implement ``_centered_field(r, phi)``; ``field`` shifts the
    evaluation point by the mode's (dx, dy) offset.
    """

    geometry: BeamGeometry
    offset: tuple[float, float]

    def field(self, r, phi):
        r = np.asarray(r, dtype=float)
        phi = np.asarray(phi, dtype=float)
        dx, dy = self.offset
        if dx == 0.0 and dy == 0.0:
            return self._centered_field(r, phi)
        x = r * np.cos(phi) - dx
        y = r * np.sin(phi) - dy
        return self._centered_field(np.hypot(x, y), np.arctan2(y, x))

    def _centered_field(self, r, phi):
        raise NotImplementedError

    def sample(self, grid: PolarGrid) -> np.ndarray:
        r, phi = grid.mesh()
        return np.asarray(self.field(r, phi), dtype=complex)


@dataclass(frozen=True)
class LGMode(TransverseMode):
    """Laguerre-Gaussian mode with azimuthal index ell and radial index p.

    Normalized so the transverse intensity integrates to one.  Includes the
    wavefront-curvature and Gouy phases away from the waist plane.
    """

    ell: int
    p: int = 0
    geometry: BeamGeometry = BeamGeometry()
    offset: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.p < 0:
            raise ValueError("radial index p must be non-negative")

    def _centered_field(self, r, phi):
        geo = self.geometry
        al = abs(self.ell)
        w = geo.spot_size
        norm = math.sqrt(2.0 * math.factorial(self.p) / (math.pi * math.factorial(self.p + al))) / w
        rho = np.sqrt(2.0) * r / w
        # radial profile: (sqrt(2) r / w)^|ell| L_p^|ell|(2 r^2 / w^2) exp(-r^2/w^2)
        amp = norm * rho**al * laguerre(self.p, float(al), 2.0 * r**2 / w**2) * np.exp(-(r**2) / w**2)
        out = amp * np.exp(1j * self.ell * phi)
        if geo.z != 0.0:
            zr = geo.rayleigh_range
            curvature = geo.wavenumber * r**2 * geo.z / (2.0 * (geo.z**2 + zr**2))
            gouy = (2 * self.p + al + 1) * math.atan2(geo.z, zr)
            out = out * np.exp(1j * (curvature - gouy))
        return out


@dataclass(frozen=True)
class BGMode(TransverseMode):
    """Bessel-Gauss mode: J_ell(k_r r) e^{i ell phi} under a Gaussian envelope.

    The Gaussian-apodized Bessel profile has no simple closed-form norm, so
    normalization is computed numerically on a default quadrature grid.
    """

    ell: int
    radial_wavenumber: float
    geometry: BeamGeometry = BeamGeometry()
    offset: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.radial_wavenumber <= 0:
            raise ValueError("radial_wavenumber must be positive")

    @cached_property
    def _norm(self) -> float:
        grid = default_grid(self.geometry.spot_size)
        r, _ = grid.mesh()
        profile = bessel_j(self.ell, self.radial_wavenumber * r) * np.exp(-(r**2) / self.geometry.spot_size**2)
        power = integrate_polar(np.abs(profile) ** 2, grid).real
        return 1.0 / math.sqrt(power)

    def _centered_field(self, r, phi):
        w = self.geometry.spot_size
        radial = bessel_j(self.ell, self.radial_wavenumber * r) * np.exp(-(r**2) / w**2)
        return self._norm * radial * np.exp(1j * self.ell * phi)


@dataclass(frozen=True)
class SuperpositionMode(TransverseMode):
    """Bloch-sphere superposition of opposite-helicity LG modes (p = 0).

    cos(theta/2) |+ell> + e^{i phase} sin(theta/2) |-ell>, with the north and
    south poles mapping to |+ell> and |-ell>.  theta = pi/2 gives the
    equal-weight petal modes used for the rotated analyzer holograms.
    """

    ell: int
    theta: float = math.pi / 2.0
    phase: float = 0.0
    geometry: BeamGeometry = BeamGeometry()
    offset: tuple[float, float] = (0.0, 0.0)

    def _components(self):
        plus = LGMode(ell=self.ell, p=0, geometry=self.geometry)
        minus = LGMode(ell=-self.ell, p=0, geometry=self.geometry)
        return plus, minus

    def _centered_field(self, r, phi):
        plus, minus = self._components()
        c_plus = math.cos(self.theta / 2.0)
        c_minus = math.sin(self.theta / 2.0) * np.exp(1j * self.phase)
        return c_plus * plus._centered_field(r, phi) + c_minus * minus._centered_field(r, phi)


@dataclass(frozen=True)
class SectorMode(TransverseMode):
    """Angular-sector ("slice") hologram used for angular-position projections.

    Wedge of angular width ``width`` centered on orientation ``beta``, with a
    Gaussian radial envelope matching the fiber-coupled fundamental mode.
    Analytic normalization: the wedge carries width * w^2 / 4 of envelope
    power.
    """

    beta: float
    width: float
    geometry: BeamGeometry = BeamGeometry()
    offset: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not 0.0 < self.width <= 2.0 * math.pi:
            raise ValueError("sector width must lie in (0, 2*pi]")

    def _centered_field(self, r, phi):
        w = self.geometry.spot_size
        delta = np.mod(phi - self.beta + math.pi, 2.0 * math.pi) - math.pi
        inside = np.abs(delta) <= self.width / 2.0
        norm = 1.0 / math.sqrt(self.width * w**2 / 4.0)
        return norm * np.exp(-(r**2) / w**2) * inside.astype(complex)


@dataclass(frozen=True)
class CustomMode(TransverseMode):
    """Arbitrary user-supplied field, e.g. a structured pump."""

    fn: object
    geometry: BeamGeometry = BeamGeometry()
    offset: tuple[float, float] = (0.0, 0.0)

    def _centered_field(self, r, phi):
        return np.asarray(self.fn(r, phi), dtype=complex)


def sector_coefficients(beta: float, width: float, ells) -> np.ndarray:
    """Azimuthal Fourier coefficients of a sector hologram.

    c_ell = (width / 2pi) * sinc(ell * width / 2) * exp(-i ell beta), the
    projection of the wedge indicator onto e^{i ell phi}.  The ell-independent
    radial envelope is factored out.
    """
    if not 0.0 < width <= 2.0 * math.pi:
        raise ValueError("sector width must lie in (0, 2*pi]")
    ells = np.asarray(ells, dtype=int)
    x = ells * width / 2.0
    sinc = np.ones_like(x, dtype=float)
    nz = x != 0
    sinc[nz] = np.sin(x[nz]) / x[nz]
    return (width / (2.0 * math.pi)) * sinc * np.exp(-1j * ells * beta)


def mode_overlap(a: TransverseMode, b: TransverseMode, grid: PolarGrid | None = None) -> complex:
    """Inner product <a|b> over the transverse plane, including offsets."""
    if abs(a.geometry.wavelength - b.geometry.wavelength) > 1e-15 * a.geometry.wavelength:
        raise ValueError("modes must share a wavelength")
    if grid is None:
        grid = default_grid(a.geometry.spot_size, b.geometry.spot_size)
    return integrate_polar(np.conj(a.sample(grid)) * b.sample(grid), grid)

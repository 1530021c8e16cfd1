"""Periodic grid descriptors with cached Fourier-space machinery.

A :class:`Grid` describes a uniform lattice on the periodic box ``(0, L)^dim``
with the same number of points ``n`` on every axis.  All spectral symbol
arrays used by the operators in :mod:`spfc.spectral` are precomputed here and
cached on the (immutable, hashable) grid instance.

Wavenumber convention
---------------------
Physical wavenumbers are ``2*pi*m / L`` for integer modes ``m``.  On grids
with even ``n`` the unmatched Nyquist mode ``m = -n/2`` is folded to zero in
every derivative symbol (odd and even order alike).  This keeps the discrete
calculus self-adjoint: ``div(grad(f)) == laplacian(f)`` and the
summation-by-parts identities hold to round-off on any grid, at the price of
differential operators annihilating pure-Nyquist content.  On odd ``n`` the
mode set is the balanced ``{-K, ..., K}`` and the folding is a no-op.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = ["Grid"]


@dataclass(frozen=True)
class Grid:
    """Uniform periodic lattice on ``(0, L)^dim``.

    Parameters
    ----------
    dim : int
        Spatial dimension, 2 or 3.
    n : int
        Points per axis (identical on all axes), at least 3.
    length : float
        Edge length ``L`` of the box ``(0, L)^dim``.
    """

    dim: int
    n: int
    length: float = 1.0

    def __post_init__(self) -> None:
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if self.n < 3:
            raise ValueError(f"n must be at least 3, got {self.n}")
        if not self.length > 0:
            raise ValueError(f"length must be positive, got {self.length}")

    # ------------------------------------------------------------------
    # basic geometry
    # ------------------------------------------------------------------
    @property
    def spacing(self) -> float:
        """Mesh width ``h = L / n``."""
        return self.length / self.n

    @property
    def half_modes(self) -> int:
        """``K = floor((n - 1) / 2)``; on odd grids the modes are {-K..K}."""
        return (self.n - 1) // 2

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n**self.dim

    @property
    def volume(self) -> float:
        """Box measure ``L^dim``."""
        return self.length**self.dim

    @property
    def cell_volume(self) -> float:
        """Quadrature weight ``h^dim`` of one grid cell."""
        return self.spacing**self.dim

    def axis_coords(self) -> np.ndarray:
        """Node coordinates ``0, h, ..., (n-1) h`` along one axis."""
        return np.arange(self.n) * self.spacing

    def coords(self) -> tuple[np.ndarray, ...]:
        """Full ``ij``-indexed coordinate arrays, one per axis."""
        x = self.axis_coords()
        return tuple(np.meshgrid(*([x] * self.dim), indexing="ij"))

    # ------------------------------------------------------------------
    # mode bookkeeping (full complex-FFT layout)
    # ------------------------------------------------------------------
    @cached_property
    def mode_numbers(self) -> np.ndarray:
        """Signed integer modes in numpy FFT order (Nyquist kept as ``-n/2``)."""
        return np.rint(np.fft.fftfreq(self.n) * self.n).astype(np.int64)

    @cached_property
    def balanced_modes(self) -> np.ndarray:
        """Integer modes with the unmatched Nyquist mode folded to zero."""
        m = self.mode_numbers.copy()
        if self.n % 2 == 0:
            m[self.n // 2] = 0
        return m

    def mode_grids(self) -> tuple[np.ndarray, ...]:
        """Broadcastable balanced-mode arrays, one per axis (full layout)."""
        return tuple(
            self.balanced_modes.reshape((1,) * a + (-1,) + (1,) * (self.dim - 1 - a))
            for a in range(self.dim)
        )

    # ------------------------------------------------------------------
    # rfft-layout caches (last axis halved); used by the operator kernels
    # ------------------------------------------------------------------
    @property
    def rshape(self) -> tuple[int, ...]:
        return (self.n,) * (self.dim - 1) + (self.n // 2 + 1,)

    @cached_property
    def _rmodes(self) -> tuple[np.ndarray, ...]:
        """Balanced modes per axis, broadcastable over the rfft layout."""
        full = self.balanced_modes.astype(np.float64)
        half = np.rint(np.fft.rfftfreq(self.n) * self.n)
        if self.n % 2 == 0:
            half[-1] = 0.0
        axes = [full] * (self.dim - 1) + [half]
        return tuple(
            ax.reshape((1,) * a + (-1,) + (1,) * (self.dim - 1 - a))
            for a, ax in enumerate(axes)
        )

    @cached_property
    def ik(self) -> tuple[np.ndarray, ...]:
        """First-derivative symbols ``2*pi*i*m / L`` per axis (rfft layout)."""
        return tuple(2j * np.pi / self.length * m for m in self._rmodes)

    @cached_property
    def lam(self) -> np.ndarray:
        """Symbol of ``-laplacian``: ``4 pi^2 |m|^2 / L^2 >= 0`` (rfft layout)."""
        out = np.zeros(self.rshape)
        for m in self._rmodes:
            out = out + m**2
        return (2.0 * np.pi / self.length) ** 2 * out

    @cached_property
    def kernel_mask(self) -> np.ndarray:
        """Modes annihilated by the derivative calculus (zero mode; Nyquist)."""
        return self.lam == 0.0

    @cached_property
    def lam_inv(self) -> np.ndarray:
        """Symbol of ``(-laplacian)^(-1)`` with kernel modes mapped to zero."""
        with np.errstate(divide="ignore"):
            inv = np.where(self.kernel_mask, 0.0, 1.0 / np.where(self.kernel_mask, 1.0, self.lam))
        return inv

    @cached_property
    def parseval_weight(self) -> np.ndarray:
        """Multiplicity of each rfft-layout mode in the full spectrum (1 or 2)."""
        w_last = np.full(self.n // 2 + 1, 2.0)
        w_last[0] = 1.0
        if self.n % 2 == 0:
            w_last[-1] = 1.0
        return np.broadcast_to(
            w_last.reshape((1,) * (self.dim - 1) + (-1,)), self.rshape
        )

    @property
    def spectral_norm_factor(self) -> float:
        """``||f||_2^2 = factor * sum(weight * |rfftn(f)|^2)``."""
        return self.volume / self.size**2

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule truncation mask on the rfft layout (True = keep)."""
        cut = self.n // 3
        keep = np.ones(self.rshape, dtype=bool)
        for m in self._rmodes:
            keep &= np.abs(m) <= cut
        return keep

    # ------------------------------------------------------------------
    # transforms on raw arrays (module-internal plumbing)
    # ------------------------------------------------------------------
    def rfft(self, values: np.ndarray) -> np.ndarray:
        return np.fft.rfftn(values)

    def irfft(self, spec: np.ndarray) -> np.ndarray:
        return np.fft.irfftn(spec, s=self.shape, axes=tuple(range(self.dim)))

    def spectral_norm2_sq(self, spec: np.ndarray) -> float:
        """Squared L2 norm from raw rfft coefficients (Parseval)."""
        return self.spectral_norm_factor * float(
            np.sum(self.parseval_weight * (spec.real**2 + spec.imag**2))
        )

    def spectral_dot(self, spec_a: np.ndarray, spec_b: np.ndarray) -> float:
        """L2 inner product of two real fields from raw rfft coefficients."""
        prod = spec_a.real * spec_b.real + spec_a.imag * spec_b.imag
        return self.spectral_norm_factor * float(np.sum(self.parseval_weight * prod))

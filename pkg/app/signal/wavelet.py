# app/signal/wavelet.py
"""
Continuous wavelet transform scalograms.

For a window x of h hourly values and scales a_j the scalogram is

    grid[b, j] = | Σ_t x[t] · ψ((t − b) / a_j) / √a_j |

with the real Morlet mother wavelet ψ(u) = exp(−u²/2)·cos(ω₀u). The window is
zero-extended: only t = 0..h−1 contribute.
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from app.core.exceptions import ContractError, DomainError
from app.utils import constants

logger = logging.getLogger(__name__)


def morlet(u: np.ndarray, omega0: float = constants.MORLET_OMEGA0) -> np.ndarray:
    return np.exp(-0.5 * u * u) * np.cos(omega0 * u)


WAVELETS: Dict[str, Callable[..., np.ndarray]] = {"morlet": morlet}


@dataclass(frozen=True)
class Scalogram:
    """h×s magnitudes: rows are time positions, columns are scales."""
    grid: np.ndarray
    scales: np.ndarray
    wavelet: str = "morlet"

    @property
    def shape(self) -> Tuple[int, int]:
        return self.grid.shape


def pseudo_period(scale, omega0: float = constants.MORLET_OMEGA0):
    """Period (hours) whose frequency ω₀/(2π·a) matches ``scale``."""
    return 2.0 * math.pi * np.asarray(scale, dtype=np.float64) / omega0


def scale_for_period(period, omega0: float = constants.MORLET_OMEGA0):
    return np.asarray(period, dtype=np.float64) * omega0 / (2.0 * math.pi)


def default_scales(s: int = constants.N_SCALES, h: int = constants.WINDOW_HOURS,
                   omega0: float = constants.MORLET_OMEGA0) -> np.ndarray:
    """Geometric scales whose pseudo-periods run from 2 to 2·h hours."""
    if s < 1:
        raise ContractError(f"default_scales: need at least one scale, got {s}")
    a_min = float(scale_for_period(2.0, omega0))
    if s == 1:
        return np.array([a_min])
    a_max = float(scale_for_period(2.0 * h, omega0))
    ratio = (a_max / a_min) ** (1.0 / (s - 1))
    return a_min * ratio ** np.arange(s, dtype=np.float64)


def _validate_scales(scales: Sequence[float]) -> np.ndarray:
    scales = np.asarray(scales, dtype=np.float64).reshape(-1)
    if scales.size == 0:
        raise ContractError("cwt: empty scale list")
    if np.any(~np.isfinite(scales)) or np.any(scales <= 0):
        raise DomainError(f"cwt: scales must be positive and finite, got min {np.min(scales)}")
    if np.any(np.diff(scales) <= 0):
        raise DomainError("cwt: scales must be strictly increasing")
    return scales


@lru_cache(maxsize=32)
def _kernel(h: int, scales: Tuple[float, ...], wavelet: str, omega0: float) -> np.ndarray:
    """K[j, b, t] = ψ((t − b)/a_j) / √a_j, read-only."""
    psi = WAVELETS[wavelet]
    a = np.asarray(scales)[:, None, None]
    offsets = (np.arange(h)[None, None, :] - np.arange(h)[None, :, None]).astype(np.float64)
    kernel = psi(offsets / a, omega0) / np.sqrt(a)
    kernel.setflags(write=False)
    return kernel


def _resolve(wavelet: str, scales: Optional[Sequence[float]], h: int) -> np.ndarray:
    if wavelet not in WAVELETS:
        raise DomainError(f"cwt: unknown wavelet '{wavelet}' (available: {sorted(WAVELETS)})")
    return default_scales(constants.N_SCALES, h) if scales is None else _validate_scales(scales)


def cwt_scalogram(window: Sequence[float], scales: Optional[Sequence[float]] = None,
                  wavelet: str = "morlet", omega0: float = constants.MORLET_OMEGA0) -> Scalogram:
    """Scalogram of one window; ``scales`` defaults to default_scales(24, len(window))."""
    x = np.asarray(window, dtype=np.float64).reshape(-1)
    if x.size == 0:
        raise ContractError("cwt: empty window")
    if np.any(np.isnan(x)):
        raise ContractError("cwt: window contains NaN")
    scales = _resolve(wavelet, scales, x.size)
    kernel = _kernel(x.size, tuple(scales.tolist()), wavelet, float(omega0))
    grid = np.abs(np.einsum("jbt,t->bj", kernel, x))
    return Scalogram(grid, scales, wavelet)


def scalogram_stack(windows: np.ndarray, scales: Optional[Sequence[float]] = None,
                    wavelet: str = "morlet", omega0: float = constants.MORLET_OMEGA0) -> np.ndarray:
    """
    Scalogram grids for many windows at once.

    Args:
        windows: (M, h) array.

    Returns:
        (M, h, s) array of magnitudes.
    """
    windows = np.asarray(windows, dtype=np.float64)
    if windows.ndim != 2:
        raise ContractError(f"scalogram_stack: expected (M, h) windows, got {windows.shape}")
    if np.any(np.isnan(windows)):
        raise ContractError("scalogram_stack: windows contain NaN")
    scales = _resolve(wavelet, scales, windows.shape[1])
    kernel = _kernel(windows.shape[1], tuple(scales.tolist()), wavelet, float(omega0))
    return np.abs(np.einsum("jbt,mt->mbj", kernel, windows))

"""Time-correlated Rayleigh multipath MIMO channels (ITU PedB by default).

Taps are zero-mean circular Gaussian, independent across delays and
antenna pairs (uncorrelated scattering, spatially independent MIMO), and
evolve across OFDM symbols with the isotropic-scattering autocorrelation
J0(2*pi*fd*lag*to).  The channel is block-constant within one symbol.
"""

from dataclasses import dataclass

import numpy as np

from . import numerics


@dataclass(frozen=True)
class PowerDelayProfile:
    delays_us: np.ndarray    # tap delays, microseconds
    powers_db: np.ndarray    # average tap powers, dB
    tap_indices: np.ndarray  # integer sample positions
    gamma: np.ndarray        # linear tap powers, normalized to sum 1

    @property
    def length(self) -> int:
        """Channel length L in samples (largest tap index + 1)."""
        return int(self.tap_indices[-1]) + 1


def profile_from_lists(delays_us, powers_db, ts: float) -> PowerDelayProfile:
    """Build a PDP from delay/power lists, rounding delays to samples.

    Fractional delays are rounded to the nearest sample so the tap model
    matches the integer-lag channel the estimator assumes; colliding
    rounded indices are an error rather than silently merged.
    """
    if ts <= 0:
        raise ValueError("ts must be positive")
    delays = np.asarray(delays_us, dtype=float)
    powers = np.asarray(powers_db, dtype=float)
    idx = np.round(delays * 1e-6 / ts).astype(int)
    if np.unique(idx).size != idx.size:
        raise ValueError(f"tap delays collide after rounding to samples: {idx}")
    if idx[0] != 0 or np.any(np.diff(idx) <= 0):
        raise ValueError("tap indices must start at 0 and increase")
    lin = 10.0 ** (powers / 10.0)
    return PowerDelayProfile(
        delays_us=delays, powers_db=powers, tap_indices=idx, gamma=lin / lin.sum()
    )


def pedb_profile(ts: float) -> PowerDelayProfile:
    """The six-tap ITU Pedestrian B profile at sample period ``ts``."""
    from .config import PEDB_DELAYS_US, PEDB_POWERS_DB

    return profile_from_lists(PEDB_DELAYS_US, PEDB_POWERS_DB, ts)


@dataclass
class ChannelRealization:
    """Per-symbol multipath taps and (after freq_response) tone responses.

    ``taps`` is (nr, nt, no, L); ``freq`` is (nr, nt, no, nc) or None until
    :func:`freq_response` fills it.  Treat as immutable once built.
    """

    pdp: PowerDelayProfile
    taps: np.ndarray
    freq: np.ndarray | None = None

    @property
    def length(self) -> int:
        return self.taps.shape[-1]


def generate(
    pdp: PowerDelayProfile,
    fd: float,
    to: float,
    no: int,
    nt: int,
    nr: int,
    rng: np.random.Generator,
    freeze: bool = False,
) -> ChannelRealization:
    """Draw one subframe of channel taps.

    Each (rx, tx, delay) tap follows a stationary complex Gaussian process
    over the ``no`` symbols with covariance gamma_i * J0(2*pi*fd*lag*to),
    realized by factoring the temporal correlation matrix (eigen fallback
    covers the PSD-singular fd = 0 case).  ``freeze`` holds the symbol-0
    draw for the whole subframe.
    """
    if fd < 0 or no < 1:
        raise ValueError("fd >= 0 and no >= 1 required")
    lags = np.arange(no)
    corr = numerics.bessel_j0(2.0 * np.pi * fd * to * np.abs(lags[:, None] - lags[None, :]))
    factor = numerics.cholesky_psd(corr)

    n_taps = pdp.tap_indices.size
    g = (
        rng.standard_normal((nr, nt, n_taps, no))
        + 1j * rng.standard_normal((nr, nt, n_taps, no))
    ) / np.sqrt(2.0)
    series = g @ factor.T  # correlate along the symbol axis
    if freeze:
        series = np.repeat(series[..., :1], no, axis=-1)
    series = series * np.sqrt(pdp.gamma)[None, None, :, None]

    taps = np.zeros((nr, nt, no, pdp.length), dtype=complex)
    taps[:, :, :, pdp.tap_indices] = np.moveaxis(series, 3, 2)
    return ChannelRealization(pdp=pdp, taps=taps)


def freq_response(real: ChannelRealization, nc: int) -> ChannelRealization:
    """Fill per-tone responses: the nc-point DFT of the zero-padded taps."""
    if real.length > nc:
        raise ValueError(f"channel length {real.length} exceeds tone count {nc}")
    real.freq = np.fft.fft(real.taps, n=nc, axis=-1)
    return real

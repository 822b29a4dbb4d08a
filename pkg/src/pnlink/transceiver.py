"""Frequency-domain assembly of the phase-noise-contaminated MIMO link.

Reception is computed directly in the frequency domain through the
circulant phase-noise model: for symbol l the received stack is

    y = (cir(a_l) kron I_nr) H_l x_l + w,

which is exactly equivalent to time-domain synthesis without a cyclic
prefix and much simpler to test.  Vectors are stacked tone-major, i.e.
entry k*nr + j belongs to tone k, receive antenna j.
"""

from dataclasses import dataclass

import numpy as np

from . import numerics
from .fading import ChannelRealization
from .lte_grid import ResourceGrid
from .phase_noise import PnRealization


def snr_to_noise_var(snr_db: float, config) -> float:
    """Per-element noise variance for the configured SNR definition.

    SNR is defined pre-receiver, per receive antenna: with the unit-power
    delay profile and unit-energy constellation every occupied tone
    carries average signal power nt per receive element, so
    sigma_w^2 = nt / 10^(snr_db/10).  This definition is recorded in the
    header of every results file.
    """
    return config.nt / 10.0 ** (snr_db / 10.0)


@dataclass
class RxSubframe:
    """Received subframe plus the truth references needed for scoring."""

    y: np.ndarray                 # (no, nc*nr), tone-major stacks
    grid: ResourceGrid
    channel: ChannelRealization
    pn: PnRealization
    noise_var: float
    config: object

    def symbol(self, l: int) -> np.ndarray:
        return self.y[l]


def clean_symbol(channel_freq_l: np.ndarray, x_l: np.ndarray) -> np.ndarray:
    """Per-tone channel output H[k] x[k] as an (nc, nr) array."""
    return np.einsum("krt,kt->kr", channel_freq_l, x_l)


def split_cpe_ici(spectral_l: np.ndarray, channel_freq_l: np.ndarray, x_l: np.ndarray):
    """Decompose the noiseless output into its CPE and ICI parts.

    Returns (cpe, ici), each flat of length nc*nr, with
    cpe + ici = (cir(a) kron I) H x.
    """
    z = clean_symbol(channel_freq_l, x_l)
    full = numerics.circulant(spectral_l) @ z
    cpe = spectral_l[0] * z
    return cpe.reshape(-1), (full - cpe).reshape(-1)


def assemble(
    grid: ResourceGrid,
    channel: ChannelRealization,
    pn: PnRealization,
    noise_var: float,
    unit_noise: np.ndarray,
    config,
) -> RxSubframe:
    """Deterministic receive path given pre-drawn unit-variance noise.

    ``unit_noise`` is (no, nc*nr) complex with unit per-element variance;
    it is scaled by sqrt(noise_var) here so Monte-Carlo sweeps can reuse
    one draw across SNR points.
    """
    nc, nr, no = config.nc, config.nr, config.no
    if channel.freq is None:
        raise ValueError("channel realization has no frequency response")
    if unit_noise.shape != (no, nc * nr):
        raise ValueError(f"unit noise must be (no, nc*nr), got {unit_noise.shape}")
    y = np.empty((no, nc * nr), dtype=complex)
    for l in range(no):
        h_l = np.moveaxis(channel.freq[:, :, l, :], -1, 0)  # (nc, nr, nt)
        z = clean_symbol(h_l, grid.tx_symbol(l))
        a_mat = numerics.circulant(pn.spectral[l])
        y[l] = (a_mat @ z).reshape(-1) + np.sqrt(noise_var) * unit_noise[l]
    return RxSubframe(
        y=y, grid=grid, channel=channel, pn=pn, noise_var=noise_var, config=config
    )


def receive(
    grid: ResourceGrid,
    channel: ChannelRealization,
    pn: PnRealization,
    config,
    rng: np.random.Generator,
) -> RxSubframe:
    """Receive one subframe, drawing the additive noise from ``rng``."""
    noise_var = snr_to_noise_var(config.snr_db, config)
    unit = (
        rng.standard_normal((config.no, config.nc * config.nr))
        + 1j * rng.standard_normal((config.no, config.nc * config.nr))
    ) / np.sqrt(2.0)
    return assemble(grid, channel, pn, noise_var, unit, config)

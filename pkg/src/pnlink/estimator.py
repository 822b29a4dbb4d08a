"""2D time-frequency MMSE estimation of the CPE-lumped effective channel.

The quantity estimated per antenna pair is the effective channel
h'_l = a_l[0] * h_l on the used tones of all symbols: the per-symbol CPE
is deliberately lumped into the channel and the ICI is treated as part of
the noise.  The grid is unrolled frequency-axis first, so the full
correlation matrix factors as kron(r_t, r_f): block (l, m) equals
r_t[l, m] * r_f.

The pilot-to-grid interpolation matrix is deterministic per (config, PDP,
beta, noise level), so sweeps build it once and reuse it across trials.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import phase_noise
from .lte_grid import PILOT_SYMBOLS, pilot_inband_indices, used_tone_indices
from .numerics import bessel_j0
from .phase_noise import PnParams

# Pilots are constant-modulus corner points, |x_p|^2 = 1.8, so the
# constellation average E{1/|x_p|^2} is exactly 1/1.8.
PILOT_MU = 1.0 / 1.8


@dataclass(frozen=True)
class CorrelationModel:
    r_f: np.ndarray        # (n_used, n_used) frequency correlation
    r_t: np.ndarray        # (no, no) temporal correlation
    use_cpe_stats: bool
    mu: float              # E{1/|x_p|^2}
    sigma2: float          # lumped noise variance seen by pilot LS


def build_correlation_model(
    config, pdp, use_cpe_stats: bool, sigma2_override: float | None = None
) -> CorrelationModel:
    """Second-order statistics of the effective channel on the used grid.

    r_f comes from the delay profile (DFT-sandwiched tap powers);
    r_t is the Doppler factor J0(2*pi*fd*lag*to), multiplied when
    ``use_cpe_stats`` by the CPE correlation (closed form off the
    diagonal, small-deviation power on it).  sigma2 is the noise variance
    entering the pilot regularizer: thermal only when CPE-blind, thermal
    plus ICI when CPE-aware; ``sigma2_override`` substitutes a measured
    value (e.g. from the guard band).
    """
    used = used_tone_indices(config.nc, config.n_used)
    phases = np.exp(
        -2j * np.pi * np.outer(used, pdp.tap_indices) / config.nc
    )  # (n_used, taps)
    r_f = (phases * pdp.gamma) @ phases.conj().T

    lags = np.abs(np.subtract.outer(np.arange(config.no), np.arange(config.no)))
    r_t = bessel_j0(2.0 * np.pi * config.fd * config.to * lags)
    params = PnParams(beta=config.beta, ts=config.ts, nc=config.nc, no=config.no)
    if use_cpe_stats and config.beta > 0:
        cpe = np.empty_like(r_t)
        for lag in range(config.no):
            if lag == 0:
                val = phase_noise.cpe_self_power(
                    params, config.cpe_formula, nt=config.nt
                )
            else:
                val = phase_noise.cpe_cross_correlation(0, lag, params)
            cpe[lags == lag] = val
        r_t = r_t * cpe

    from .transceiver import snr_to_noise_var

    if sigma2_override is not None:
        sigma2 = float(sigma2_override)
    else:
        sigma2 = snr_to_noise_var(config.snr_db, config)
        if use_cpe_stats:
            sigma2 += phase_noise.ici_variance(params, config.nt, config.cpe_formula)
    return CorrelationModel(
        r_f=r_f, r_t=r_t, use_cpe_stats=use_cpe_stats, mu=PILOT_MU, sigma2=sigma2
    )


def ls_pilot_estimates(rx, grid, port: int) -> np.ndarray:
    """Per-pilot ratios y/x for one port, shape (nr, n_pilots).

    Pilot order is the frequency-first unrolling of the used grid.  The
    other port is muted on these REs, so each ratio is a clean look at
    a_l[0] * H_(j,port) plus ICI and noise.
    """
    unrolled, symbols, inband, values = grid.pilot_positions(port)
    if unrolled.size == 0:
        raise ValueError(f"no pilots present on port {port}")
    if np.any(np.abs(values) == 0):
        raise ValueError("zero-valued pilot symbol")
    nr = rx.config.nr
    tones = grid.used_tones[inband]
    out = np.empty((nr, unrolled.size), dtype=complex)
    for j in range(nr):
        out[j] = rx.y[symbols, tones * nr + j] / values
    return out


@dataclass
class EffectiveChannelEstimate:
    """Estimates of a_l[0]*H on the used tones, shape (nr, nt, no, n_used)."""

    values: np.ndarray
    used_tones: np.ndarray
    nc: int

    def symbol_matrix(self, l: int) -> np.ndarray:
        """Per-tone matrices for one symbol, (nc, nr, nt), zeros off-band."""
        nr, nt = self.values.shape[:2]
        h = np.zeros((self.nc, nr, nt), dtype=complex)
        h[self.used_tones] = np.moveaxis(self.values[:, :, l, :], -1, 0)
        return h


class MmseInterpolator:
    """Precomputed pilot-to-grid MMSE operator for one port's pilot set.

    W = R_cp (R_pp + mu sigma2 I)^-1, where the blocks are selected from
    kron(r_t, r_f) at the pilot slots.  With sigma2 = 0 and a singular
    pilot correlation (degenerate priors such as a frozen single-tap
    channel) the inverse falls back to a pseudo-inverse, which still
    realizes the conditional mean for priors consistent with the data.
    """

    def __init__(self, model: CorrelationModel, pilot_unrolled: np.ndarray):
        no = model.r_t.shape[0]
        n_used = model.r_f.shape[0]
        mp = pilot_unrolled // n_used
        gp = pilot_unrolled % n_used
        r_cp = (
            model.r_t[:, mp][:, None, :] * model.r_f[:, gp][None, :, :]
        ).reshape(no * n_used, mp.size)
        r_pp = model.r_t[np.ix_(mp, mp)] * model.r_f[np.ix_(gp, gp)]
        a = r_pp + model.mu * model.sigma2 * np.eye(mp.size)
        try:
            cho = sla.cho_factor(a, check_finite=False)
            self.weights = sla.cho_solve(cho, r_cp.conj().T, check_finite=False).conj().T
        except np.linalg.LinAlgError:
            self.weights = r_cp @ np.linalg.pinv(a, rcond=1e-12, hermitian=True)
        if not np.all(np.isfinite(self.weights)):
            raise np.linalg.LinAlgError("MMSE operator is not finite")
        self.no = no
        self.n_used = n_used

    def apply(self, pilot_ls: np.ndarray) -> np.ndarray:
        """Map pilot LS values (..., n_pilots) to the grid (..., no, n_used)."""
        out = pilot_ls @ self.weights.T
        return out.reshape(pilot_ls.shape[:-1] + (self.no, self.n_used))


def mmse_estimate(
    pilot_ls: np.ndarray, model: CorrelationModel, pilot_unrolled: np.ndarray
) -> np.ndarray:
    """One-shot MMSE interpolation (builds the operator; see MmseInterpolator)."""
    return MmseInterpolator(model, pilot_unrolled).apply(pilot_ls)


class SubframeEstimator:
    """Applies per-port MMSE interpolators to a received subframe."""

    def __init__(self, config, model: CorrelationModel):
        self.config = config
        self.model = model
        n_used = config.n_used
        self._ports = []
        for port in range(config.nt):
            symbols, inband = [], []
            for s in PILOT_SYMBOLS:
                if s >= config.no:
                    continue
                f = pilot_inband_indices(n_used, s, port)
                symbols.append(np.full(f.size, s))
                inband.append(f)
            sym = np.concatenate(symbols)
            inb = np.concatenate(inband)
            order = np.lexsort((inb, sym))
            unrolled = sym[order] * n_used + inb[order]
            self._ports.append(MmseInterpolator(model, unrolled))

    def estimate(self, rx, grid) -> EffectiveChannelEstimate:
        cfg = self.config
        values = np.empty((cfg.nr, cfg.nt, cfg.no, cfg.n_used), dtype=complex)
        for port in range(cfg.nt):
            ls = ls_pilot_estimates(rx, grid, port)  # (nr, P)
            values[:, port] = self._ports[port].apply(ls)
        return EffectiveChannelEstimate(
            values=values, used_tones=grid.used_tones, nc=cfg.nc
        )


def guard_noise_estimate(rx) -> float:
    """Average received power on the guard tones: noise plus ICI leakage.

    This is the measurement-based substitute for the analytic lumped
    noise variance (config.noise_estimate == "guard").
    """
    cfg = rx.config
    used = set(rx.grid.used_tones.tolist())
    guard = np.array([k for k in range(cfg.nc) if k not in used and k != 0])
    cols = (guard[:, None] * cfg.nr + np.arange(cfg.nr)[None, :]).reshape(-1)
    return float(np.mean(np.abs(rx.y[:, cols]) ** 2))


def effective_channel_truth(rx) -> np.ndarray:
    """True a_l[0] * H on the used tones, (nr, nt, no, n_used); for scoring."""
    cfg = rx.config
    used = rx.grid.used_tones
    h = rx.channel.freq[:, :, :, used]  # (nr, nt, no, n_used)
    cpe = rx.pn.spectral[:, 0]          # (no,)
    return h * cpe[None, None, :, None]

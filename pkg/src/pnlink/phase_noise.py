"""Wiener oscillator phase noise and its per-symbol spectral statistics.

A free-running oscillator is modelled as a random-walk phase ``phi[n]``
whose increments are zero-mean Gaussian with variance ``4*pi*beta*ts``.
Each OFDM symbol sees one contiguous block of ``nc`` samples, with no
cyclic-prefix gap between blocks: the index arithmetic of the closed-form
inter-symbol correlation below assumes sample ``nc*l + p`` belongs to
symbol ``l``, and inserting CP samples would change those statistics.

The spectral coefficients ``a[k]`` of a symbol are the unnormalized DFT of
``exp(j*phi)`` scaled by 1/nc; ``a[0]`` is the common phase error (CPE)
rotating every tone of the symbol identically, the remaining coefficients
produce inter-carrier interference (ICI).
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PnParams:
    beta: float   # single-sided 3 dB Lorentzian bandwidth, Hz
    ts: float     # sample period, s
    nc: int       # tones (samples) per OFDM symbol
    no: int       # OFDM symbols per subframe

    def __post_init__(self):
        if self.beta < 0 or self.ts <= 0 or self.nc < 2 or self.no < 1:
            raise ValueError("require beta >= 0, ts > 0, nc >= 2, no >= 1")

    @property
    def step_variance(self) -> float:
        """Variance of one phase increment, 4*pi*beta*ts."""
        return 4.0 * np.pi * self.beta * self.ts


@dataclass(frozen=True)
class PnRealization:
    """One subframe of phase trajectory plus per-symbol spectra.

    ``phi`` has length no*nc; ``spectral`` is (no, nc) with row l holding
    the coefficients a_l[k] of symbol l.  Immutable; safe to share.
    """

    params: PnParams
    phi: np.ndarray
    spectral: np.ndarray

    def cpe(self, symbol: int) -> complex:
        """The common phase error a_l[0] of one symbol."""
        return complex(self.spectral[symbol, 0])


def realize(params: PnParams, phi0: float, unit_steps: np.ndarray) -> PnRealization:
    """Build a realization from a start phase and standard-normal steps.

    Splitting the randomness out of :func:`generate` lets Monte-Carlo
    sweeps reuse one set of draws across different beta values.
    """
    n = params.no * params.nc
    if unit_steps.shape != (n - 1,):
        raise ValueError(f"need {n - 1} unit steps, got {unit_steps.shape}")
    phi = np.empty(n)
    phi[0] = phi0
    np.cumsum(np.sqrt(params.step_variance) * unit_steps, out=phi[1:])
    phi[1:] += phi0
    carrier = np.exp(1j * phi).reshape(params.no, params.nc)
    spectral = np.fft.fft(carrier, axis=1) / params.nc
    return PnRealization(params=params, phi=phi, spectral=spectral)


def generate(params: PnParams, rng: np.random.Generator) -> PnRealization:
    """Draw one subframe-long phase-noise realization.

    phi[0] is uniform on [0, 2*pi); the trajectory then diffuses over all
    no*nc samples of the subframe.
    """
    phi0 = rng.uniform(0.0, 2.0 * np.pi)
    steps = rng.standard_normal(params.no * params.nc - 1)
    return realize(params, phi0, steps)


def cpe_cross_correlation(l: int, m: int, params: PnParams) -> float:
    """E{a_l[0] a_m[0]*} between the CPEs of two distinct symbols.

    Closed form of the double sum over the carrier autocorrelation
    exp(-2*pi*beta*ts*|dn|).  The two inner geometric sums combine to
    sinh(x*nc/2)^2 / sinh(x/2)^2 with x = 2*pi*beta*ts, evaluated through
    sinh for numerical stability at small x.  (Summing real exponentials
    yields this cosh/sinh form; a cosine in its place only agrees to
    O((beta*ts*nc)^2).)  Real-valued, so symmetric in (l, m).
    """
    if l == m:
        raise ValueError("l == m is the CPE self power; use cpe_self_power")
    if params.beta == 0.0:
        return 1.0
    x = 2.0 * np.pi * params.beta * params.ts
    ratio = (np.sinh(0.5 * x * params.nc) / np.sinh(0.5 * x)) ** 2
    return float(np.exp(-x * params.nc * abs(m - l)) * ratio / params.nc**2)


def cpe_cross_correlation_brute(l: int, m: int, params: PnParams) -> float:
    """Brute-force double sum for E{a_l[0] a_m[0]*}; oracle for the closed form."""
    if l == m:
        raise ValueError("l == m is the CPE self power")
    x = 2.0 * np.pi * params.beta * params.ts
    p = np.arange(params.nc)
    dn = params.nc * (m - l) + p[None, :] - p[:, None]  # q varies along axis 1
    return float(np.exp(-x * np.abs(dn)).sum() / params.nc**2)


def cpe_self_power(params: PnParams, variant: str = "nc", nt: int | None = None) -> float:
    """Small-deviation approximation of E{|a[0]|^2}.

    variant "nc" returns 1 - 2*pi*beta*ts*nc/3 (the form the Monte-Carlo
    oracle confirms); variant "nt" returns the antenna-count form
    1 - 2*pi*beta*ts*nt/3.  Valid while the subtracted term is small.
    """
    if variant == "nc":
        factor = params.nc
    elif variant == "nt":
        if nt is None:
            raise ValueError("variant 'nt' needs the transmit antenna count")
        factor = nt
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return 1.0 - 2.0 * np.pi * params.beta * params.ts * factor / 3.0


def ici_variance(params: PnParams, nt: int, variant: str = "nc") -> float:
    """Lumped per-receive-element ICI variance for nt unit-energy streams.

    variant "nc": nt * 2*pi*beta*ts*nc/3, i.e. nt streams each leaking the
    CPE power deficit; variant "nt": the literal 2*pi*beta*ts*nt/3.
    """
    if variant == "nc":
        return nt * (1.0 - cpe_self_power(params, "nc"))
    if variant == "nt":
        return 1.0 - cpe_self_power(params, "nt", nt=nt)
    raise ValueError(f"unknown variant {variant!r}")

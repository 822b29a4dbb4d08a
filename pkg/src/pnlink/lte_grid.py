"""LTE-downlink subframe resource grid, 16-QAM mapping and slicing.

Grid geometry follows the downlink convention for a 256-tone symbol with
180 occupied tones: the used tones sit symmetrically around a nulled DC
tone (90 per side), the remaining 75 tones form the guard band.  Two-port
cell-specific reference symbols occupy symbols {0, 4, 7, 11}; a pilot
resource element on one port is muted on the other so the ports stay
orthogonal.  The cell-specific frequency shift is fixed to 0.
"""

import csv
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

PILOT_SYMBOLS = (0, 4, 7, 11)
_PILOT_BASE_OFFSET = {0: 0, 4: 3, 7: 0, 11: 3}  # in-band index mod 6, port 0


class ReKind(IntEnum):
    DATA = 0
    PILOT = 1
    MUTED = 2
    GUARD = 3
    DC = 4


# 16-QAM, Gray labelled per axis, unit average energy.  The first two bits
# select the real level, the last two the imaginary level:
#   00 -> -3,  01 -> -1,  11 -> +1,  10 -> +3   (all scaled by 1/sqrt(10))
QAM16_SCALE = 1.0 / np.sqrt(10.0)
_LEVELS = np.array([-3.0, -1.0, 1.0, 3.0])
_BITS_TO_LEVEL = np.array([-3.0, -1.0, 3.0, 1.0])  # index = 2*b_first + b_second
_LEVEL_TO_BITS = {-3.0: (0, 0), -1.0: (0, 1), 1.0: (1, 1), 3.0: (1, 0)}
QAM16_CORNERS = np.array([(3 + 3j), (3 - 3j), (-3 + 3j), (-3 - 3j)]) * QAM16_SCALE


def qam16_constellation():
    """All 16 points and their 4-bit Gray labels, for docs and tests."""
    points = np.empty(16, dtype=complex)
    labels = np.empty((16, 4), dtype=np.int8)
    for idx in range(16):
        b = [(idx >> s) & 1 for s in (3, 2, 1, 0)]
        points[idx] = (
            _BITS_TO_LEVEL[2 * b[0] + b[1]] + 1j * _BITS_TO_LEVEL[2 * b[2] + b[3]]
        ) * QAM16_SCALE
        labels[idx] = b
    return points, labels


def qam16_map(bits) -> complex:
    """Map 4 bits to a unit-average-energy 16-QAM point."""
    b = np.asarray(bits, dtype=int)
    if b.shape != (4,):
        raise ValueError(f"expected 4 bits, got shape {b.shape}")
    re = _BITS_TO_LEVEL[2 * b[0] + b[1]]
    im = _BITS_TO_LEVEL[2 * b[2] + b[3]]
    return complex((re + 1j * im) * QAM16_SCALE)


def qam16_map_array(bits: np.ndarray) -> np.ndarray:
    """Vectorized qam16_map over a (..., 4) bit array."""
    b = np.asarray(bits, dtype=int)
    re = _BITS_TO_LEVEL[2 * b[..., 0] + b[..., 1]]
    im = _BITS_TO_LEVEL[2 * b[..., 2] + b[..., 3]]
    return (re + 1j * im) * QAM16_SCALE


def _slice_axis(x: np.ndarray) -> np.ndarray:
    """Nearest level per axis; exact ties resolve toward the smaller level."""
    edges = np.array([-2.0, 0.0, 2.0]) * QAM16_SCALE
    return _LEVELS[np.digitize(x, edges, right=True)]


def qam16_slice(z):
    """Hard-decide to the nearest 16-QAM point; returns (point, bits).

    Euclidean ties break toward smaller real part, then smaller imaginary
    part (so the origin slices to (-1-1j)/sqrt(10)).  Accepts a scalar or
    an array; for arrays, bits come back with a trailing axis of 4.
    """
    z = np.asarray(z, dtype=complex)
    re = _slice_axis(z.real)
    im = _slice_axis(z.imag)
    points = (re + 1j * im) * QAM16_SCALE
    bits = np.empty(z.shape + (4,), dtype=np.int8)
    for level, (b0, b1) in _LEVEL_TO_BITS.items():
        bits[..., 0][re == level] = b0
        bits[..., 1][re == level] = b1
        bits[..., 2][im == level] = b0
        bits[..., 3][im == level] = b1
    if z.ndim == 0:
        return complex(points), bits.reshape(4).copy()
    return points, bits


def used_tone_indices(nc: int, n_used: int) -> np.ndarray:
    """FFT bins of the occupied tones in spectral order (negative first).

    n_used must be even; half the tones sit below DC (bins nc-half .. nc-1)
    and half above (bins 1 .. half).  Bin 0 is the nulled DC tone.
    """
    if n_used % 2:
        raise ValueError("n_used must be even for a symmetric layout")
    half = n_used // 2
    if half >= nc - half:
        raise ValueError(f"{n_used} used tones do not fit in {nc} with DC nulled")
    return np.concatenate([np.arange(nc - half, nc), np.arange(1, half + 1)])


def pilot_inband_indices(n_used: int, symbol: int, port: int) -> np.ndarray:
    """In-band indices of the pilot tones for one port on one symbol."""
    if symbol not in PILOT_SYMBOLS:
        return np.empty(0, dtype=int)
    offset = (_PILOT_BASE_OFFSET[symbol] + 3 * port) % 6
    return np.arange(offset, n_used, 6)


@dataclass
class ResourceGrid:
    """One subframe of per-port resource elements.

    ``values`` and ``kinds`` are (nt, no, nc); ``used_tones`` holds the
    occupied FFT bins in spectral order, and in-band index f refers to
    ``used_tones[f]``.  Immutable after construction.
    """

    nc: int
    no: int
    nt: int
    used_tones: np.ndarray
    values: np.ndarray
    kinds: np.ndarray
    payload_bits: np.ndarray

    def data_mask(self) -> np.ndarray:
        return self.kinds == ReKind.DATA

    def tx_symbol(self, symbol: int) -> np.ndarray:
        """Transmit vector of one symbol as an (nc, nt) array."""
        return self.values[:, symbol, :].T

    def known_symbol(self, symbol: int) -> tuple[np.ndarray, np.ndarray]:
        """(known values, data mask) for one symbol, both (nc, nt).

        Known values carry pilots and zeros for muted/guard/DC entries;
        data entries are zero in the known array.
        """
        kinds = self.kinds[:, symbol, :].T
        vals = self.values[:, symbol, :].T.copy()
        mask = kinds == ReKind.DATA
        vals[mask] = 0.0
        return vals, mask

    def pilot_positions(self, port: int):
        """Pilot REs of one port in unrolled order (frequency first).

        Returns (unrolled, symbols, inband, values): ``unrolled`` indexes
        the length no*n_used vector obtained by stacking the used tones of
        symbol 0, then symbol 1, and so on.
        """
        n_used = self.used_tones.size
        symbols, inband = [], []
        for s in PILOT_SYMBOLS:
            if s >= self.no:
                continue
            f = pilot_inband_indices(n_used, s, port)
            symbols.append(np.full(f.size, s))
            inband.append(f)
        symbols = np.concatenate(symbols)
        inband = np.concatenate(inband)
        order = np.lexsort((inband, symbols))
        symbols, inband = symbols[order], inband[order]
        unrolled = symbols * n_used + inband
        values = self.values[port, symbols, self.used_tones[inband]]
        return unrolled, symbols, inband, values

    def demap_data(self, detected: np.ndarray) -> np.ndarray:
        """Hard bits for every data RE of ``detected`` (same shape as values).

        Scan order matches the payload order used at build time: port,
        then symbol, then tone.
        """
        mask = self.data_mask()
        _, bits = qam16_slice(detected[mask])
        return bits.reshape(-1)

    def data_truth_bits(self) -> np.ndarray:
        """Payload bits actually carried, in demap_data scan order."""
        mask = self.data_mask()
        _, bits = qam16_slice(self.values[mask])
        return bits.reshape(-1)

    def dump_csv(self, path) -> None:
        """Debug dump, one row per RE: tone, symbol, port, kind, re, im."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["tone", "symbol", "port", "kind", "re", "im"])
            for port in range(self.nt):
                for symbol in range(self.no):
                    for tone in range(self.nc):
                        v = self.values[port, symbol, tone]
                        writer.writerow(
                            [tone, symbol, port,
                             ReKind(self.kinds[port, symbol, tone]).name.lower(),
                             f"{v.real:.9g}", f"{v.imag:.9g}"]
                        )


def build_subframe(config, payload_bits, rng=None) -> ResourceGrid:
    """Assemble the per-port subframe grid from a payload bit stream.

    Pilot values are a pseudo-random corner sequence seeded by
    ``config.pilot_seed`` (known to the receiver); ``rng`` is accepted for
    interface symmetry but unused.  Raises ValueError when fewer than
    4 bits per data RE are supplied.
    """
    del rng
    nc, no, nt = config.nc, config.no, config.nt
    if nt > 2:
        raise ValueError("the two-port reference-symbol layout supports nt <= 2")
    used = used_tone_indices(nc, config.n_used)

    kinds = np.full((nt, no, nc), ReKind.GUARD, dtype=np.int8)
    kinds[:, :, 0] = ReKind.DC
    kinds[:, :, used] = ReKind.DATA
    for s in PILOT_SYMBOLS:
        if s >= no:
            continue
        for port in range(nt):
            tones = used[pilot_inband_indices(config.n_used, s, port)]
            kinds[port, s, tones] = ReKind.PILOT
            for other in range(nt):
                if other != port:
                    kinds[other, s, tones] = ReKind.MUTED

    values = np.zeros((nt, no, nc), dtype=complex)
    pilot_rng = np.random.default_rng(config.pilot_seed)
    for port in range(nt):
        for s in PILOT_SYMBOLS:
            if s >= no:
                continue
            tones = used[pilot_inband_indices(config.n_used, s, port)]
            values[port, s, tones] = QAM16_CORNERS[pilot_rng.integers(0, 4, tones.size)]

    bits = np.asarray(payload_bits, dtype=np.int8).reshape(-1)
    data_mask = kinds == ReKind.DATA
    n_data = int(data_mask.sum())
    if bits.size < 4 * n_data:
        raise ValueError(f"need {4 * n_data} payload bits, got {bits.size}")
    bits = bits[: 4 * n_data]
    values[data_mask] = qam16_map_array(bits.reshape(n_data, 4))

    return ResourceGrid(
        nc=nc, no=no, nt=nt, used_tones=used,
        values=values, kinds=kinds, payload_bits=bits.copy(),
    )


def payload_size(config) -> int:
    """Payload bits one subframe carries across all ports."""
    used = used_tone_indices(config.nc, config.n_used)
    per_port = config.no * used.size
    n_pilot_res = 0
    for s in PILOT_SYMBOLS:
        if s >= config.no:
            continue
        n_pilot_res += pilot_inband_indices(config.n_used, s, 0).size * min(config.nt, 2)
    # each pilot RE also mutes the other port on two-port layouts
    overhead = n_pilot_res * (2 if config.nt == 2 else 1)
    return 4 * (config.nt * per_port - overhead)

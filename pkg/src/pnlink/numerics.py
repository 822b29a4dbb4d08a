"""Dense complex linear-algebra kernels shared by the whole simulator.

Everything here is a pure function of its inputs; arrays are never mutated,
so results are safe to share across threads.  Dense storage is used
throughout: at 256 tones the cubic-cost solves are trivially tractable and
keep the code close to the matrix equations they implement.
"""

import numpy as np
import scipy.linalg as sla


class SingularMatrixError(ValueError):
    """Raised when a least-squares system is numerically rank deficient."""


class NotPsdError(ValueError):
    """Raised when a matrix expected to be positive semi-definite is not."""


def dft_matrix(n: int) -> np.ndarray:
    """Unnormalized n-point DFT matrix, entry (k, m) = exp(-2j*pi*k*m/n).

    No 1/sqrt(n) factor is applied; callers that need the 1/n scaling of
    the spectral phase-noise transform apply it themselves.
    """
    if n < 1:
        raise ValueError(f"DFT size must be >= 1, got {n}")
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n)


def circulant(v: np.ndarray) -> np.ndarray:
    """Circulant matrix whose column r is ``v`` cyclically shifted down by r.

    Entry (k, r) equals ``v[(k - r) mod n]``, so multiplying by a vector
    performs the cyclic convolution with ``v``.
    """
    v = np.asarray(v)
    if v.size == 0:
        raise ValueError("cannot build a circulant matrix from an empty vector")
    n = v.size
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return v[idx]


def solve_ls(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Least-squares solution of ``a @ x = b`` via Householder QR.

    ``a`` must have at least as many rows as columns and full column rank;
    a rank tolerance of 1e-12 relative on the diagonal of R is enforced.

    Raises:
        SingularMatrixError: if the smallest |R_ii| falls below
            1e-12 times the largest.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    m, n = a.shape
    if m < n:
        raise ValueError(f"system is underdetermined: {m} rows < {n} cols")
    q, r = sla.qr(a, mode="economic", check_finite=False)
    diag = np.abs(np.diagonal(r))
    if diag.size and diag.min() <= 1e-12 * diag.max():
        raise SingularMatrixError(
            f"rank-deficient least-squares matrix (min |R_ii| = {diag.min():.3e})"
        )
    return sla.solve_triangular(r, q.conj().T @ b, check_finite=False)


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product; block (i, j) of the result is a[i, j] * b."""
    return np.kron(np.asarray(a), np.asarray(b))


def cholesky_psd(a: np.ndarray) -> np.ndarray:
    """Factor a Hermitian PSD matrix as L @ L^H.

    Positive-definite inputs return the lower-triangular Cholesky factor.
    PSD-but-singular inputs fall back to an eigendecomposition factor
    (L = V sqrt(w), not triangular) that still satisfies L @ L^H = a.

    Raises:
        NotPsdError: on asymmetry beyond 1e-10 or an eigenvalue below -1e-8
            (both relative to the matrix scale).
    """
    a = np.asarray(a)
    scale = max(1.0, np.abs(a).max()) if a.size else 1.0
    if np.abs(a - a.conj().T).max() > 1e-10 * scale:
        raise NotPsdError("matrix is not Hermitian within tolerance 1e-10")
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        pass
    w, v = np.linalg.eigh(a)
    if w.min() < -1e-8 * max(1.0, w.max()):
        raise NotPsdError(f"matrix has negative eigenvalue {w.min():.3e}")
    w = np.clip(w, 0.0, None)
    w[w < 1e-12 * w.max()] = 0.0  # drop numerically-zero modes entirely
    return v * np.sqrt(w)


# Hankel asymptotic coefficients for J0, Abramowitz & Stegun 9.2.9/9.2.10.
_J0_P = (1.0, -9.0 / 128.0, 3675.0 / 32768.0, -2401245.0 / 4194304.0)
_J0_Q = (-1.0 / 8.0, 75.0 / 1024.0, -59535.0 / 262144.0, 57972915.0 / 33554432.0)

_J0_SERIES_CUTOFF = 20.0


def bessel_j0(x):
    """Zero-order Bessel function of the first kind.

    Power series below |x| = 20, Hankel asymptotic expansion beyond;
    absolute accuracy better than 1e-8 on |x| <= 50.  Accepts scalars or
    arrays.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(np.abs(x))
    out = np.empty_like(x)

    small = x <= _J0_SERIES_CUTOFF
    if small.any():
        xs = x[small]
        term = np.ones_like(xs)
        acc = np.ones_like(xs)
        q = -(xs * xs) / 4.0
        for k in range(1, 60):
            term = term * q / (k * k)
            acc += term
            if np.abs(term).max() < 1e-17:
                break
        out[small] = acc
    if (~small).any():
        xl = x[~small]
        z = 1.0 / (xl * xl)
        p = _J0_P[0] + z * (_J0_P[1] + z * (_J0_P[2] + z * _J0_P[3]))
        q = (_J0_Q[0] + z * (_J0_Q[1] + z * (_J0_Q[2] + z * _J0_Q[3]))) / xl
        chi = xl - np.pi / 4.0
        out[~small] = np.sqrt(2.0 / (np.pi * xl)) * (
            p * np.cos(chi) - q * np.sin(chi)
        )
    return float(out[0]) if scalar else out

"""Iterative detection and estimation with alternating least squares.

Each OFDM symbol is processed independently.  The objective is the
squared residual of the circulant link model,

    || y - (cir(a') kron I_nr) H' x ||^2,

where the phase-noise spectrum is normalized to a'[0] = 1 and the CPE sits
inside the effective channel H'.  One iteration performs three LS updates
in turn: data symbols (with known REs clamped and slicing afterwards),
decimated time-domain phase-noise samples, and time-domain channel taps.
Each LS step optimizes over a set containing the previous iterate, so the
objective cannot increase across a step before slicing; the slicer and
numerically degenerate steps may, which run_ide tolerates by keeping the
previous iterate and recording the event.

The first iteration starts from cir(a') = I, so its detection is plain
per-tone LS on the MMSE channel estimate: that output is the standalone
CPE-compensation baseline.
"""

from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .lte_grid import qam16_slice
from .numerics import SingularMatrixError


@dataclass(frozen=True)
class InterpolationMatrix:
    """Cyclic piecewise-linear interpolation from M anchors to nc samples."""

    p: np.ndarray              # (nc, M), rows sum to 1, <= 2 nonzeros each
    anchor_indices: np.ndarray  # (M,)


def build_interp_matrix(nc: int, m: int) -> InterpolationMatrix:
    """Linear interpolation matrix over a cyclic sample index.

    Anchors sit at floor(i*nc/m); sample n between consecutive anchors
    takes convex weights (1-alpha, alpha), wrapping from the last anchor
    back to the first so the within-symbol index stays cyclic, matching
    the DFT model of the phase-noise spectrum.
    """
    if not 2 <= m <= nc:
        raise ValueError(f"need 2 <= M <= nc, got M={m}, nc={nc}")
    anchors = (np.arange(m) * nc) // m
    p = np.zeros((nc, m))
    for i in range(m):
        left = anchors[i]
        right = anchors[i + 1] if i + 1 < m else nc + anchors[0]
        for n in range(left, right):
            alpha = (n - left) / (right - left)
            p[n % nc, i] = 1.0 - alpha
            p[n % nc, (i + 1) % m] += alpha
    return InterpolationMatrix(p=p, anchor_indices=anchors)


@dataclass
class IdeWorkspace:
    """Per-configuration constants shared by every symbol and trial."""

    nc: int
    nr: int
    nt: int
    chan_len: int
    q_interp: np.ndarray   # (nc, M): dft_matrix(nc) @ P / nc
    f_h: np.ndarray        # (nc, L): first L DFT columns
    interp: InterpolationMatrix

    @classmethod
    def build(cls, config) -> "IdeWorkspace":
        interp = build_interp_matrix(config.nc, config.m_anchors)
        f_a = numerics.dft_matrix(config.nc)
        return cls(
            nc=config.nc,
            nr=config.nr,
            nt=config.nt,
            chan_len=config.chan_len,
            q_interp=f_a @ interp.p / config.nc,
            f_h=f_a[:, : config.chan_len].copy(),
            interp=interp,
        )

    def identity_pn(self) -> np.ndarray:
        e0 = np.zeros(self.nc, dtype=complex)
        e0[0] = 1.0
        return e0


def objective(y: np.ndarray, a_hat: np.ndarray, h_hat: np.ndarray, x: np.ndarray) -> float:
    """Squared residual of the circulant link model for one symbol."""
    z = np.einsum("krt,kt->kr", h_hat, x)
    model = numerics.circulant(a_hat) @ z
    return float(np.sum(np.abs(y - model.reshape(-1)) ** 2))


def _is_identity_pn(a_hat: np.ndarray) -> bool:
    return a_hat[0] == 1.0 and not np.any(a_hat[1:])


def detect(
    y: np.ndarray,
    a_hat: np.ndarray,
    h_hat: np.ndarray,
    known: np.ndarray,
    data_mask: np.ndarray,
    force_path: str | None = None,
    slice_decisions: bool = True,
):
    """LS data detection with known REs clamped, then slicing.

    known: (nc, nt) pilot values with zeros elsewhere; data_mask: (nc, nt)
    marking the unknowns.  Known contributions are subtracted from y and
    the remaining system is solved jointly; when cir(a') is the identity
    the system is block diagonal and an equivalent per-tone path is used.
    ``slice_decisions=False`` returns the raw LS solution (the quantity
    whose objective is guaranteed not to increase).

    Returns (x_full, erased_tones): x_full carries known values plus the
    sliced data decisions; erased_tones lists tones whose local solve was
    rank deficient (their data entries stay 0 and count as bit errors).
    """
    nc, nr, nt = h_hat.shape
    path = force_path or ("per_tone" if _is_identity_pn(a_hat) else "global")
    x_full = known.astype(complex).copy()
    erased: list[int] = []

    if path == "per_tone":
        y_res = y.reshape(nc, nr) - np.einsum("krt,kt->kr", h_hat, known)
        # group tones by their data-port pattern and batch each group
        patterns = {}
        for k in range(nc):
            ports = tuple(np.nonzero(data_mask[k])[0])
            if ports:
                patterns.setdefault(ports, []).append(k)
        for ports, tones in patterns.items():
            tones = np.asarray(tones)
            cols = np.asarray(ports)
            h_sub = h_hat[np.ix_(tones, np.arange(nr), cols)]  # (g, nr, u)
            rhs = y_res[tones]                                 # (g, nr)
            svals = np.linalg.svd(h_sub, compute_uv=False)
            bad = svals[:, -1] <= 1e-12 * svals[:, 0]
            erased.extend(int(t) for t in tones[bad])
            good = ~bad
            if not good.any():
                continue
            if cols.size == nr:
                sol = np.linalg.solve(h_sub[good], rhs[good][..., None])[..., 0]
            else:
                hh = h_sub[good]
                g = np.einsum("gru,grv->guv", hh.conj(), hh)
                c = np.einsum("gru,gr->gu", hh.conj(), rhs[good])
                sol = np.linalg.solve(g, c[..., None])[..., 0]
            rows = tones[good]
            for ci, port in enumerate(cols):
                x_full[rows, port] = sol[:, ci]
    elif path == "global":
        z_known = np.einsum("krt,kt->kr", h_hat, known)
        a_mat = numerics.circulant(a_hat)
        y_eff = y - (a_mat @ z_known).reshape(-1)
        r_idx, p_idx = np.nonzero(data_mask)
        if r_idx.size:
            a_cols = a_mat[:, r_idx]                       # (nc, nd)
            h_vals = h_hat[r_idx, :, p_idx]                # (nd, nr)
            b = (a_cols[:, None, :] * h_vals.T[None, :, :]).reshape(nc * nr, r_idx.size)
            try:
                sol = numerics.solve_ls(b, y_eff)
                x_full[r_idx, p_idx] = sol
            except SingularMatrixError:
                erased = sorted(set(int(t) for t in r_idx))
    else:
        raise ValueError(f"unknown detection path {path!r}")

    if slice_decisions:
        points, _ = qam16_slice(x_full[data_mask])
        x_full[data_mask] = points
    if erased:
        for k in erased:
            x_full[k, data_mask[k]] = 0.0
    return x_full, erased


def estimate_pn(
    y: np.ndarray,
    h_hat: np.ndarray,
    x_hat: np.ndarray,
    ws: IdeWorkspace,
    prev_a: np.ndarray,
):
    """LS update of the decimated phase-noise samples.

    Stacks cyclic nr-block shifts of H'x into an (nc*nr, nc) matrix, fits
    the M anchor samples through the DFT-interpolation map, and normalizes
    the result to a'[0] = 1.  Returns (a_hat, scale, event): ``scale`` is
    the pre-normalization a'[0]; multiplying the channel estimate by it
    keeps the composite operator at the LS optimum, so the objective
    cannot increase across this step.  On a degenerate fit the previous
    spectrum is kept (scale 1) and the event is reported.
    """
    nc, nr, _ = h_hat.shape
    v = np.einsum("krt,kt->kr", h_hat, x_hat).reshape(-1)
    rows = (np.arange(nc * nr)[:, None] - nr * np.arange(nc)[None, :]) % (nc * nr)
    c_mat = v[rows]
    g = c_mat @ ws.q_interp
    try:
        c_anchor = numerics.solve_ls(g, y)
    except SingularMatrixError:
        return prev_a, 1.0, "pn_rank_deficient"
    a = ws.q_interp @ c_anchor
    scale = complex(a[0])
    if abs(scale) < 1e-6:
        return prev_a, 1.0, "pn_degenerate_cpe"
    return a / scale, scale, None


def update_channel(
    y: np.ndarray,
    a_hat: np.ndarray,
    x_hat: np.ndarray,
    ws: IdeWorkspace,
    prev_h: np.ndarray,
):
    """LS update of the time-domain effective channel taps.

    The regressor stacks, for each (rx j, tx i) pair, the per-tone symbol
    x_i[k] against the first-L DFT columns, then mixes rows with the
    current circulant phase-noise estimate.  Solves for L*nt*nr taps and
    reconstructs per-tone matrices; rank deficiency keeps the previous
    estimate and reports the event.
    """
    nc, nr, nt = prev_h.shape
    length = ws.chan_len
    m = np.zeros((nc * nr, length * nr * nt), dtype=complex)
    for j in range(nr):
        for i in range(nt):
            seg = j * nt + i
            m[j::nr, seg * length : (seg + 1) * length] = x_hat[:, i, None] * ws.f_h
    a_mat = numerics.circulant(a_hat)
    g = np.empty_like(m)
    for j in range(nr):
        g[j::nr] = a_mat @ m[j::nr]
    try:
        h_t = numerics.solve_ls(g, y)
    except SingularMatrixError:
        return None, prev_h, "channel_rank_deficient"
    h_freq = ws.f_h @ h_t.reshape(nr * nt, length).T  # (nc, nr*nt)
    return h_t, h_freq.reshape(nc, nr, nt), None


@dataclass
class SymbolDiagnostics:
    iterations: int = 0
    objective_history: list = field(default_factory=list)
    erased_tones: list = field(default_factory=list)
    events: list = field(default_factory=list)
    converged: bool = False


@dataclass
class IdeState:
    """Current iterates for one OFDM symbol."""

    x_hat: np.ndarray          # (nc, nt), known REs clamped
    a_hat_prime: np.ndarray    # (nc,), a_hat_prime[0] == 1
    h_hat_prime: np.ndarray    # (nc, nr, nt) per-tone effective channel
    h_hat_prime_t: np.ndarray | None
    diagnostics: SymbolDiagnostics


def run_ide_symbol(
    y: np.ndarray,
    known: np.ndarray,
    data_mask: np.ndarray,
    h_init: np.ndarray,
    ws: IdeWorkspace,
    max_iter: int,
    tol: float,
    record_iterations: bool = False,
):
    """Run the alternating loop on one symbol.

    Returns (state, per_iteration): ``per_iteration`` holds the detected
    symbol vector after each iteration's detection when requested (the
    trailing statistic updates of the final iteration are skipped since
    they cannot change the reported decisions).
    """
    diag = SymbolDiagnostics()
    a_hat = ws.identity_pn()
    h_hat = h_init.astype(complex).copy()
    x_hat = known.astype(complex).copy()
    h_t = None
    per_iteration = []
    prev_obj = None

    for it in range(1, max_iter + 1):
        diag.iterations = it
        x_hat, erased = detect(y, a_hat, h_hat, known, data_mask)
        diag.erased_tones = erased
        if record_iterations:
            per_iteration.append(x_hat.copy())
        if it == max_iter:
            diag.objective_history.append(objective(y, a_hat, h_hat, x_hat))
            break

        a_new, scale, ev = estimate_pn(y, h_hat, x_hat, ws, prev_a=a_hat)
        if ev is None:
            h_hat = scale * h_hat
        else:
            diag.events.append((it, ev))
        a_hat = a_new

        h_t_new, h_hat, ev = update_channel(y, a_hat, x_hat, ws, prev_h=h_hat)
        if ev is None:
            h_t = h_t_new
        else:
            diag.events.append((it, ev))

        obj = objective(y, a_hat, h_hat, x_hat)
        diag.objective_history.append(obj)
        if prev_obj is not None and prev_obj - obj < tol * prev_obj:
            diag.converged = True
            break
        if obj == 0.0:
            diag.converged = True
            break
        prev_obj = obj

    state = IdeState(
        x_hat=x_hat, a_hat_prime=a_hat, h_hat_prime=h_hat,
        h_hat_prime_t=h_t, diagnostics=diag,
    )
    return state, per_iteration


def run_ide(rx, initial, config, record_iterations: bool = False, ws: IdeWorkspace | None = None):
    """IDE over a whole received subframe.

    ``initial`` is the 2D MMSE effective-channel estimate.  Symbols are
    processed independently; per-symbol failures degrade to erasures and
    recorded events, never exceptions.

    Returns (detected, erased, diagnostics, per_iteration_detected):
    detected is (nt, no, nc); erased is an (no, nc) tone mask;
    per_iteration_detected (when requested) carries the running decisions
    after each iteration with converged symbols carried forward.
    """
    if ws is None:
        ws = IdeWorkspace.build(config)
    no, nc, nt = config.no, config.nc, config.nt
    detected = np.zeros((nt, no, nc), dtype=complex)
    erased = np.zeros((no, nc), dtype=bool)
    diags = []
    per_iter = (
        [np.zeros((nt, no, nc), dtype=complex) for _ in range(config.max_iter)]
        if record_iterations
        else None
    )
    for l in range(no):
        known, mask = rx.grid.known_symbol(l)
        state, iters = run_ide_symbol(
            rx.y[l], known, mask, initial.symbol_matrix(l), ws,
            max_iter=config.max_iter, tol=config.ide_tol,
            record_iterations=record_iterations,
        )
        detected[:, l, :] = state.x_hat.T
        for k in state.diagnostics.erased_tones:
            erased[l, k] = True
        diags.append(state.diagnostics)
        if record_iterations:
            for it in range(config.max_iter):
                x_it = iters[min(it, len(iters) - 1)]  # carry converged forward
                per_iter[it][:, l, :] = x_it.T
    return detected, erased, diags, per_iter

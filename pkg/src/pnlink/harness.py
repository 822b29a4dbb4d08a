"""Monte-Carlo BER experiments: sweep driver, scoring, CSV emission.

Reproducibility contract: every random draw derives from the master seed
through counter-based child streams keyed by trial index, so records are
bit-identical across runs and across worker counts.  All algorithms at a
sweep point see the same subframe realizations (paired comparison), and
sweep points reuse the same underlying standard-normal draws with
parameter-dependent scaling, which smooths BER curves without biasing
any single point.
"""

import time
from dataclasses import dataclass, replace

import numpy as np

from . import estimator, fading, ide, lte_grid, numerics, phase_noise, transceiver
from .config import SimConfig
from .estimator import SubframeEstimator, build_correlation_model
from .ide import IdeWorkspace
from .lte_grid import PILOT_SYMBOLS

ALGORITHMS = ("no_comp", "cpe_plain", "cpe_a0", "ide", "no_pn")

CSV_COLUMNS = (
    "sweep_name", "sweep_value", "algorithm", "bits", "errors", "ber",
    "subframes", "erasures", "seed", "config_hash", "walltime_s",
)


@dataclass(frozen=True)
class ExperimentSpec:
    sweep_name: str            # "snr_db" | "beta" | "iterations"
    sweep_values: tuple
    config: SimConfig
    n_subframes: int
    algorithms: tuple = ALGORITHMS
    master_seed: int = 1
    workers: int = 1

    def __post_init__(self):
        if self.n_subframes < 1:
            raise ValueError("n_subframes must be >= 1")
        if not self.algorithms:
            raise ValueError("at least one algorithm must be selected")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise ValueError(f"unknown algorithms: {sorted(unknown)}")
        if self.sweep_name not in ("snr_db", "beta", "iterations"):
            raise ValueError(f"unknown sweep {self.sweep_name!r}")
        if self.sweep_name == "iterations" and set(self.algorithms) != {"ide"}:
            raise ValueError("the iteration sweep applies to the ide algorithm only")


@dataclass
class BerRecord:
    sweep_name: str
    sweep_value: float
    algorithm: str
    bits: int
    errors: int
    ber: float
    subframes: int
    erasures: int
    seed: int
    config_hash: str
    walltime_s: float

    @property
    def std_error(self) -> float:
        """Binomial standard error sqrt(p(1-p)/bits) of the BER estimate."""
        if self.bits == 0:
            return 0.0
        p = min(max(self.ber, 1.0 / self.bits), 1.0 - 1.0 / self.bits)
        return float(np.sqrt(p * (1.0 - p) / self.bits))


# ---------------------------------------------------------------------------
# per-trial randomness

def trial_streams(master_seed: int, trial: int):
    """Independent child generators for one trial's random quantities."""
    root = np.random.SeedSequence(entropy=master_seed, spawn_key=(trial,))
    payload, channel, pn, noise = (np.random.default_rng(s) for s in root.spawn(4))
    return payload, channel, pn, noise


@dataclass
class TrialDraws:
    """Parameter-independent randomness of one trial.

    Stored as standard-normal / uniform draws so a single trial can be
    re-materialized at any (beta, snr) sweep point.
    """

    payload_bits: np.ndarray
    channel: fading.ChannelRealization
    pn_phi0: float
    pn_steps: np.ndarray
    unit_noise: np.ndarray


def draw_trial(config: SimConfig, pdp, master_seed: int, trial: int) -> TrialDraws:
    rng_pay, rng_ch, rng_pn, rng_n = trial_streams(master_seed, trial)
    payload = rng_pay.integers(0, 2, lte_grid.payload_size(config), dtype=np.int8)
    chan = fading.generate(
        pdp, config.fd, config.to, config.no, config.nt, config.nr,
        rng_ch, freeze=config.freeze_channel,
    )
    fading.freq_response(chan, config.nc)
    phi0 = rng_pn.uniform(0.0, 2.0 * np.pi)
    steps = rng_pn.standard_normal(config.no * config.nc - 1)
    unit = (
        rng_n.standard_normal((config.no, config.nc * config.nr))
        + 1j * rng_n.standard_normal((config.no, config.nc * config.nr))
    ) / np.sqrt(2.0)
    return TrialDraws(
        payload_bits=payload, channel=chan, pn_phi0=phi0, pn_steps=steps,
        unit_noise=unit,
    )


# ---------------------------------------------------------------------------
# scoring

def score_detection(grid, detected, erased_mask):
    """Bit accounting for one subframe.

    Erased data REs contribute all 4 of their bits as errors and are not
    compared against the slicer output.  Returns (errors, bits, erased_res).
    """
    truth = grid.payload_bits.reshape(-1, 4)
    det_bits = grid.demap_data(detected).reshape(-1, 4)
    ports, symbols, tones = np.nonzero(grid.data_mask())
    erased_re = np.asarray(erased_mask, dtype=bool)[symbols, tones]
    errors = int(np.sum(truth[~erased_re] != det_bits[~erased_re]))
    errors += 4 * int(erased_re.sum())
    return errors, truth.size, int(erased_re.sum())


# ---------------------------------------------------------------------------
# receiver chains

def detect_per_tone_subframe(rx, estimate, config):
    """Per-tone LS detection of every symbol against a channel estimate."""
    detected = np.zeros((config.nt, config.no, config.nc), dtype=complex)
    erased = np.zeros((config.no, config.nc), dtype=bool)
    e0 = np.zeros(config.nc, dtype=complex)
    e0[0] = 1.0
    for l in range(config.no):
        known, mask = rx.grid.known_symbol(l)
        h_l = estimate.symbol_matrix(l) if hasattr(estimate, "symbol_matrix") else estimate[l]
        x_full, er = ide.detect(rx.y[l], e0, h_l, known, mask)
        detected[:, l, :] = x_full.T
        for k in er:
            erased[l, k] = True
    return detected, erased


def residual_cpe_rotations(rx, estimate, config) -> np.ndarray:
    """Per-symbol common rotation left over by a CPE-blind channel estimate.

    On pilot-bearing symbols the rotation is fit from all pilot REs
    against the estimate; between them the phase is interpolated linearly
    (the conditional mean of a random-walk bridge) and held constant
    beyond the last pilot symbol (the random-walk conditional mean).
    """
    pilot_syms = [s for s in PILOT_SYMBOLS if s < config.no]
    g = np.ones(len(pilot_syms), dtype=complex)
    for si, s in enumerate(pilot_syms):
        num = 0.0 + 0.0j
        den = 0.0
        for port in range(config.nt):
            inband = lte_grid.pilot_inband_indices(config.n_used, s, port)
            tones = rx.grid.used_tones[inband]
            xp = rx.grid.values[port, s, tones]
            for j in range(config.nr):
                ref = estimate.values[j, port, s, inband] * xp
                yv = rx.y[s, tones * config.nr + j]
                num += np.vdot(ref, yv)
                den += float(np.sum(np.abs(ref) ** 2))
        g[si] = num / den if den > 0 else 1.0
    theta = np.unwrap(np.angle(g))
    mag = np.abs(g)
    symbols = np.arange(config.no, dtype=float)
    phase_all = np.interp(symbols, np.asarray(pilot_syms, float), theta)
    mag_all = np.interp(symbols, np.asarray(pilot_syms, float), mag)
    return mag_all * np.exp(1j * phase_all)


class _RotatedEstimate:
    """Channel-estimate view with a per-symbol scalar rotation applied."""

    def __init__(self, base, rotations):
        self._base = base
        self._rot = rotations

    def symbol_matrix(self, l: int):
        return self._rot[l] * self._base.symbol_matrix(l)


def run_algorithms(rx_pn, rx_nopn, config, operators, algorithms, ws,
                   record_ide_iterations=False):
    """Run the selected receiver chains on one trial's subframes.

    Returns {algorithm: (errors, bits, erasures, seconds)} plus, when
    requested, {"ide_iterations": [(errors, bits, erasures), ...]}.
    """
    out = {}
    cache = {}

    def est(kind, rx):
        key = (kind, id(rx))
        if key not in cache:
            cache[key] = operators[kind].estimate(rx, rx.grid)
        return cache[key]

    for alg in algorithms:
        t0 = time.perf_counter()
        if alg == "no_pn":
            detected, erased = detect_per_tone_subframe(rx_nopn, est("off", rx_nopn), config)
            errors, bits, erasures = score_detection(rx_nopn.grid, detected, erased)
        elif alg == "no_comp":
            detected, erased = detect_per_tone_subframe(rx_pn, est("off", rx_pn), config)
            errors, bits, erasures = score_detection(rx_pn.grid, detected, erased)
        elif alg == "cpe_plain":
            base = est("off", rx_pn)
            rot = residual_cpe_rotations(rx_pn, base, config)
            detected, erased = detect_per_tone_subframe(
                rx_pn, _RotatedEstimate(base, rot), config
            )
            errors, bits, erasures = score_detection(rx_pn.grid, detected, erased)
        elif alg == "cpe_a0":
            one_iter = replace(config, max_iter=1)
            detected, erased, _, _ = ide.run_ide(rx_pn, est("on", rx_pn), one_iter, ws=ws)
            errors, bits, erasures = score_detection(rx_pn.grid, detected, erased)
        elif alg == "ide":
            detected, erased, diags, per_iter = ide.run_ide(
                rx_pn, est("on", rx_pn), config,
                record_iterations=record_ide_iterations, ws=ws,
            )
            errors, bits, erasures = score_detection(rx_pn.grid, detected, erased)
            if record_ide_iterations:
                out["ide_iterations"] = [
                    score_detection(rx_pn.grid, det_it, erased) for det_it in per_iter
                ]
        else:
            raise ValueError(f"unknown algorithm {alg!r}")
        out[alg] = (errors, bits, erasures, time.perf_counter() - t0)
    return out


# ---------------------------------------------------------------------------
# experiment driver

def _point_config(spec: ExperimentSpec, value) -> SimConfig:
    if spec.sweep_name == "snr_db":
        return replace(spec.config, snr_db=float(value))
    if spec.sweep_name == "beta":
        return replace(spec.config, beta=float(value))
    return spec.config  # iterations: per-iteration bits from one run


def _run_point_trials(spec: ExperimentSpec, cfg: SimConfig, trials):
    """Accumulate (errors, bits, erasures, seconds) per algorithm over trials."""
    pdp = fading.profile_from_lists(cfg.pdp_delays_us, cfg.pdp_powers_db, cfg.ts)
    operators = {
        "off": SubframeEstimator(cfg, build_correlation_model(cfg, pdp, False)),
        "on": SubframeEstimator(cfg, build_correlation_model(cfg, pdp, True)),
    }
    ws = IdeWorkspace.build(cfg)
    iter_sweep = spec.sweep_name == "iterations"
    params = phase_noise.PnParams(beta=cfg.beta, ts=cfg.ts, nc=cfg.nc, no=cfg.no)
    params0 = phase_noise.PnParams(beta=0.0, ts=cfg.ts, nc=cfg.nc, no=cfg.no)
    noise_var = transceiver.snr_to_noise_var(cfg.snr_db, cfg)

    totals = {}
    iter_totals = [np.zeros(3, dtype=np.int64) for _ in range(cfg.max_iter)]
    for trial in trials:
        draws = draw_trial(cfg, pdp, spec.master_seed, trial)
        grid = lte_grid.build_subframe(cfg, draws.payload_bits)
        pn = phase_noise.realize(params, draws.pn_phi0, draws.pn_steps)
        if cfg.noise_estimate == "guard":
            # rebuild the operators against the measured guard power once
            rx_probe = transceiver.assemble(
                grid, draws.channel, pn, noise_var, draws.unit_noise, cfg
            )
            sigma2 = estimator.guard_noise_estimate(rx_probe)
            operators = {
                "off": SubframeEstimator(
                    cfg, build_correlation_model(cfg, pdp, False, sigma2_override=sigma2)
                ),
                "on": SubframeEstimator(
                    cfg, build_correlation_model(cfg, pdp, True, sigma2_override=sigma2)
                ),
            }
        rx_pn = transceiver.assemble(
            grid, draws.channel, pn, noise_var, draws.unit_noise, cfg
        )
        rx_nopn = None
        if "no_pn" in spec.algorithms:
            pn0 = phase_noise.realize(params0, draws.pn_phi0, draws.pn_steps)
            rx_nopn = transceiver.assemble(
                grid, draws.channel, pn0, noise_var, draws.unit_noise, cfg
            )
        result = run_algorithms(
            rx_pn, rx_nopn, cfg, operators, spec.algorithms, ws,
            record_ide_iterations=iter_sweep,
        )
        for alg in spec.algorithms:
            errors, bits, erasures, secs = result[alg]
            acc = totals.setdefault(alg, [0, 0, 0, 0.0])
            acc[0] += errors
            acc[1] += bits
            acc[2] += erasures
            acc[3] += secs
        if iter_sweep:
            for it, (errors, bits, erasures) in enumerate(result["ide_iterations"]):
                iter_totals[it] += (errors, bits, erasures)
    return totals, iter_totals


def _merge_totals(parts):
    totals = {}
    n_iters = max(len(p[1]) for p in parts)
    iter_totals = [np.zeros(3, dtype=np.int64) for _ in range(n_iters)]
    for part_totals, part_iters in parts:
        for alg, acc in part_totals.items():
            tgt = totals.setdefault(alg, [0, 0, 0, 0.0])
            for i in range(4):
                tgt[i] += acc[i]
        for it, row in enumerate(part_iters):
            iter_totals[it] += row
    return totals, iter_totals


def _point_worker(args):
    spec, cfg, trials = args
    return _run_point_trials(spec, cfg, trials)


def _run_point(spec: ExperimentSpec, cfg: SimConfig):
    trials = list(range(spec.n_subframes))
    if spec.workers > 1 and spec.n_subframes > 1:
        from concurrent.futures import ProcessPoolExecutor

        chunks = np.array_split(trials, min(spec.workers, len(trials)))
        args = [(spec, cfg, list(chunk)) for chunk in chunks if len(chunk)]
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            parts = list(pool.map(_point_worker, args))
        return _merge_totals(parts)
    return _run_point_trials(spec, cfg, trials)


def run_experiment(spec: ExperimentSpec) -> list:
    """Run the full sweep and return records sorted by (value, algorithm)."""
    records = []
    if spec.sweep_name == "iterations":
        # one pass over the trials yields every iteration count
        cfg = spec.config
        for value in spec.sweep_values:
            if not 1 <= int(value) <= cfg.max_iter:
                raise ValueError(
                    f"iteration sweep value {value} outside 1..{cfg.max_iter}"
                )
        totals, iter_totals = _run_point(spec, cfg)
        walltime = totals["ide"][3]
        for value in spec.sweep_values:
            errors, bits, erasures = (int(v) for v in iter_totals[int(value) - 1])
            records.append(
                BerRecord(
                    sweep_name="iterations", sweep_value=float(int(value)),
                    algorithm="ide", bits=bits, errors=errors,
                    ber=errors / bits if bits else 0.0,
                    subframes=spec.n_subframes, erasures=erasures,
                    seed=spec.master_seed, config_hash=cfg.hash(),
                    walltime_s=walltime,
                )
            )
    else:
        for value in spec.sweep_values:
            cfg = _point_config(spec, value)
            totals, _ = _run_point(spec, cfg)
            for alg in spec.algorithms:
                errors, bits, erasures, secs = totals[alg]
                records.append(
                    BerRecord(
                        sweep_name=spec.sweep_name, sweep_value=float(value),
                        algorithm=alg, bits=int(bits), errors=int(errors),
                        ber=errors / bits if bits else 0.0,
                        subframes=spec.n_subframes, erasures=int(erasures),
                        seed=spec.master_seed, config_hash=cfg.hash(),
                        walltime_s=secs,
                    )
                )
    records.sort(key=lambda r: (r.sweep_value, r.algorithm))
    return records


# ---------------------------------------------------------------------------
# CSV emission

def _variant_comment(config: SimConfig) -> list:
    if config.cpe_formula == "nc":
        ici = "nt*2*pi*beta*ts*nc/3"
        cpe = "1 - 2*pi*beta*ts*nc/3"
    else:
        ici = "2*pi*beta*ts*nt/3"
        cpe = "1 - 2*pi*beta*ts*nt/3"
    return [
        f"# sigma_ici_formula: variant={config.cpe_formula} ({ici})",
        f"# cpe_self_power_formula: variant={config.cpe_formula} ({cpe})",
    ]


def csv_header_comments(spec: ExperimentSpec) -> list:
    cfg = spec.config
    fixed = (
        f"nc={cfg.nc} n_used={cfg.n_used} no={cfg.no} nt={cfg.nt} nr={cfg.nr} "
        f"beta={cfg.beta} snr_db={cfg.snr_db} fd={cfg.fd:.6g} M={cfg.m_anchors} "
        f"L={cfg.chan_len} max_iter={cfg.max_iter} subframes={spec.n_subframes} "
        f"seed={spec.master_seed} sweep={spec.sweep_name}"
    )
    return [
        "# snr_definition: snr_db = 10*log10(nt / sigma_w^2); per-receive-antenna"
        " in-band signal power (nt under the unit-power profile and unit-energy"
        " constellation) over per-element noise variance",
        *_variant_comment(cfg),
        f"# fixed: {fixed}",
    ]


def write_csv(records, path, spec: ExperimentSpec | None = None) -> None:
    """Write records with the documented column set and header comments."""
    if not records:
        raise ValueError("no records to write")
    lines = []
    if spec is not None:
        lines.extend(csv_header_comments(spec))
    lines.append(",".join(CSV_COLUMNS))
    for r in records:
        lines.append(
            f"{r.sweep_name},{r.sweep_value:.10g},{r.algorithm},{r.bits},{r.errors},"
            f"{r.ber:.10e},{r.subframes},{r.erasures},{r.seed},{r.config_hash},"
            f"{r.walltime_s:.3f}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path):
    """Parse a results file back into (records, comment_lines)."""
    comments, records = [], []
    with open(path, "r", encoding="utf-8") as fh:
        rows = [line.rstrip("\n") for line in fh if line.strip()]
    body = []
    for line in rows:
        (comments if line.startswith("#") else body).append(line)
    if not body:
        raise ValueError(f"{path}: no header row")
    header = body[0].split(",")
    if tuple(header) != CSV_COLUMNS:
        missing = set(CSV_COLUMNS) - set(header)
        raise ValueError(f"{path}: unexpected columns; missing {sorted(missing)}")
    for line in body[1:]:
        f = line.split(",")
        records.append(
            BerRecord(
                sweep_name=f[0], sweep_value=float(f[1]), algorithm=f[2],
                bits=int(f[3]), errors=int(f[4]), ber=float(f[5]),
                subframes=int(f[6]), erasures=int(f[7]), seed=int(f[8]),
                config_hash=f[9], walltime_s=float(f[10]),
            )
        )
    return records, comments


# ---------------------------------------------------------------------------
# selftest: which closed-form variant matches measurement

@dataclass
class VariantCheck:
    beta: float
    empirical_ici: float
    empirical_cpe_deficit: float
    ici_by_variant: dict
    cpe_by_variant: dict
    ici_pass: dict
    cpe_pass: dict


@dataclass
class SelftestReport:
    checks: list
    selected_variant: str
    selected_ok: bool
    any_variant_ok: bool

    @property
    def ok(self) -> bool:
        return self.any_variant_ok and self.selected_ok


def _measure_pn_powers(config: SimConfig, beta: float, n_symbols: int, seed: int):
    """Empirical E{|a0|^2} deficit and per-element ICI power.

    Uses a flat unit channel with unit-energy 16-QAM on every tone, the
    setting in which the lumped ICI variance is exactly nt times the CPE
    power deficit.
    """
    rng = np.random.default_rng(seed)
    params = phase_noise.PnParams(beta=beta, ts=config.ts, nc=config.nc, no=n_symbols)
    pn = phase_noise.generate(params, rng)
    cpe_deficit = float(1.0 - np.mean(np.abs(pn.spectral[:, 0]) ** 2))

    points, _ = lte_grid.qam16_constellation()
    ici_acc = 0.0
    count = 0
    for l in range(n_symbols):
        x = points[rng.integers(0, 16, (config.nc, config.nt))]
        z = x.sum(axis=1, keepdims=True) * np.ones((1, config.nr))  # flat unit channel
        a_mat = numerics.circulant(pn.spectral[l])
        ici = a_mat @ z - pn.spectral[l, 0] * z
        ici_acc += float(np.sum(np.abs(ici) ** 2))
        count += ici.size
    return cpe_deficit, ici_acc / count


def run_selftest(config: SimConfig, betas=(25.0, 100.0), n_symbols=1000,
                 seed=20240901) -> SelftestReport:
    """Check both closed-form variants against measurement.

    The ICI variance must match within 20% and the CPE power deficit
    within 10% of the measured deficit, at every beta.  The report fails
    if no variant passes everywhere or the configured variant misses.
    """
    checks = []
    variant_ok = {"nc": True, "nt": True}
    for beta in betas:
        params = phase_noise.PnParams(beta=beta, ts=config.ts, nc=config.nc, no=config.no)
        deficit_emp, ici_emp = _measure_pn_powers(config, beta, n_symbols, seed)
        ici_v = {
            v: phase_noise.ici_variance(params, config.nt, v) for v in ("nc", "nt")
        }
        cpe_v = {
            v: 1.0 - phase_noise.cpe_self_power(params, v, nt=config.nt)
            for v in ("nc", "nt")
        }
        ici_pass = {v: abs(ici_v[v] - ici_emp) <= 0.20 * ici_emp for v in ici_v}
        cpe_pass = {
            v: abs(cpe_v[v] - deficit_emp) <= 0.10 * deficit_emp for v in cpe_v
        }
        for v in ("nc", "nt"):
            variant_ok[v] = variant_ok[v] and ici_pass[v] and cpe_pass[v]
        checks.append(
            VariantCheck(
                beta=beta, empirical_ici=ici_emp, empirical_cpe_deficit=deficit_emp,
                ici_by_variant=ici_v, cpe_by_variant=cpe_v,
                ici_pass=ici_pass, cpe_pass=cpe_pass,
            )
        )
    return SelftestReport(
        checks=checks,
        selected_variant=config.cpe_formula,
        selected_ok=variant_ok[config.cpe_formula],
        any_variant_ok=any(variant_ok.values()),
    )

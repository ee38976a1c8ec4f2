"""Monte Carlo harness: threshold calibration, Pfa/Pd estimation, traces.

Trials are simulated in fixed 512-trial blocks, each drawing its bursts from
per-trial streams keyed by (seed, trial index).  Aggregation concatenates
blocks in index order, so results are bit-identical for any worker count and
any scheduling; the sequential path runs the very same block function.

Thresholds are upper order statistics of the simulated null distribution
(rank ceil((1 - pfa) * trials), ascending), tested with strict exceedance.
Confidence intervals are Wilson score at 95%.
"""

from __future__ import annotations

import dataclasses
import enum
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .detectors import DetectorKind, statistics_batch
from .estimation import (
    EstimationConfig,
    cyclic_em_batch,
    cyclic_ml_batch,
    em_mean_batch,
    em_sigma_batch,
)
from .scenario import Burst, Hypothesis, ScenarioConfig, gen_block

BLOCK_SIZE = 512
_WILSON_Z = 1.96

__all__ = [
    "AlgorithmTag",
    "BLOCK_SIZE",
    "CalibratedThreshold",
    "CurvePoint",
    "calibrate_threshold",
    "calibrate_thresholds",
    "convergence_trace",
    "curve_point",
    "estimate_pfa",
    "pd_curve",
    "pd_curves",
    "pfa_sweep",
    "sample_statistics",
    "statistics_for_bursts",
    "wilson_interval",
    "write_curves_csv",
    "write_manifest",
    "write_trace_csv",
]


@dataclass(frozen=True)
class CalibratedThreshold:
    """A threshold with the provenance needed to reproduce it."""

    detector: DetectorKind
    eta: float
    nominal_pfa: float
    trials: int
    seed: int
    calibration_scenario: ScenarioConfig

    def __post_init__(self):
        if not isinstance(self.detector, DetectorKind):
            raise ValueError("detector must be a DetectorKind")
        if not np.isfinite(self.eta):
            raise ValueError("eta must be finite")
        if not (0.0 < self.nominal_pfa < 1.0):
            raise ValueError("nominal_pfa must lie in (0, 1)")
        if self.trials < 1:
            raise ValueError("trials must be positive")


@dataclass(frozen=True)
class CurvePoint:
    """One estimated probability with its 95% confidence interval."""

    abscissa: float
    estimate: float
    ci_low: float
    ci_high: float
    trials: int

    def __post_init__(self):
        if not (0.0 <= self.estimate <= 1.0):
            raise ValueError("estimate must lie in [0, 1]")
        if not (self.ci_low <= self.estimate <= self.ci_high):
            raise ValueError("estimate must lie inside its interval")
        if self.trials < 1:
            raise ValueError("trials must be positive")


class AlgorithmTag(enum.Enum):
    """Which iterative procedure a convergence trace follows."""

    ALG1 = "alg1"
    EM_M = "em-m"
    EM_SIGMA = "em-sigma"
    CYCLIC_EM = "cyclic-em"

    @classmethod
    def parse(cls, token: str) -> "AlgorithmTag":
        try:
            return cls(token)
        except ValueError:
            valid = ", ".join(t.value for t in cls)
            raise ValueError(f"unknown algorithm {token!r}; expected one of: {valid}") from None


def wilson_interval(successes: int, trials: int) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if trials < 1 or not (0 <= successes <= trials):
        raise ValueError("need 0 <= successes <= trials with trials >= 1")
    z2 = _WILSON_Z * _WILSON_Z
    phat = successes / trials
    denom = 1.0 + z2 / trials
    center = (phat + z2 / (2.0 * trials)) / denom
    half = _WILSON_Z * np.sqrt(phat * (1.0 - phat) / trials + z2 / (4.0 * trials * trials)) / denom
    # Rounding can push a bound past [0, 1] or just inside the point estimate
    # at phat = 0 or 1; the interval must always cover phat.
    low = min(max(0.0, center - half), phat)
    high = max(min(1.0, center + half), phat)
    return float(low), float(high)


def curve_point(abscissa: float, successes: int, trials: int) -> CurvePoint:
    """Wrap an exceedance count into a CurvePoint with its Wilson interval."""
    low, high = wilson_interval(successes, trials)
    return CurvePoint(float(abscissa), successes / trials, low, high, trials)


def _sample_block(args):
    kinds, cfg, scen, hypothesis, seed, start, count = args
    x, sigma2 = gen_block(scen, hypothesis, seed, start, count)
    if DetectorKind.CD in kinds:
        return statistics_batch(x, kinds, cfg, true_mean=scen.target_mean, true_sigma2=sigma2)
    return statistics_batch(x, kinds, cfg)


def sample_statistics(
    kinds,
    cfg: EstimationConfig | None,
    scen: ScenarioConfig,
    hypothesis: Hypothesis,
    trials: int,
    seed: int,
    workers: int = 1,
) -> dict:
    """Simulate `trials` bursts and return {kind: (trials,) statistic array}.

    The clairvoyant statistic is evaluated at the scenario's target signature
    and each trial's realized variances, under either hypothesis.
    """
    kinds = list(kinds)
    if trials < 1:
        raise ValueError("trials must be positive")
    if workers < 1:
        raise ValueError("workers must be positive")
    if not isinstance(hypothesis, Hypothesis):
        raise ValueError("hypothesis must be a Hypothesis value")
    starts = list(range(0, trials, BLOCK_SIZE))
    blocks = [
        (tuple(kinds), cfg, scen, hypothesis, seed, start, min(BLOCK_SIZE, trials - start))
        for start in starts
    ]
    if workers == 1 or len(blocks) == 1:
        results = [_sample_block(b) for b in blocks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sample_block, blocks))
    return {kind: np.concatenate([r[kind] for r in results]) for kind in kinds}


def statistics_for_bursts(bursts, kinds, cfg: EstimationConfig | None = None) -> dict:
    """Requested statistics over a list of equal-length bursts."""
    bursts = list(bursts)
    if not bursts:
        raise ValueError("at least one burst is required")
    lengths = {b.k for b in bursts}
    if len(lengths) != 1:
        raise ValueError("all bursts must have the same length")
    x = np.stack([b.samples for b in bursts])
    return statistics_batch(x, kinds, cfg)


def _rank_threshold(stats: np.ndarray, nominal_pfa: float) -> float:
    rank = int(np.ceil((1.0 - nominal_pfa) * stats.size))
    return float(np.sort(stats)[rank - 1])


def _check_calibration_size(trials: int, nominal_pfa: float):
    if not (0.0 < nominal_pfa < 1.0):
        raise ValueError("nominal_pfa must lie in (0, 1)")
    floor = int(np.ceil(100.0 / nominal_pfa))
    if trials < floor:
        raise ValueError(
            f"calibration needs at least ceil(100/pfa) = {floor} trials, got {trials}"
        )


def calibrate_thresholds(
    kinds,
    cfg: EstimationConfig | None,
    scen: ScenarioConfig,
    nominal_pfa: float,
    trials: int,
    seed: int,
    workers: int = 1,
) -> dict:
    """Calibrate each requested detector from one shared null simulation."""
    kinds = list(kinds)
    _check_calibration_size(trials, nominal_pfa)
    stats = sample_statistics(kinds, cfg, scen, Hypothesis.H0, trials, seed, workers)
    return {
        kind: CalibratedThreshold(
            kind, _rank_threshold(stats[kind], nominal_pfa), nominal_pfa, trials, seed, scen
        )
        for kind in kinds
    }


def calibrate_threshold(
    detector: DetectorKind,
    cfg: EstimationConfig | None,
    scen: ScenarioConfig,
    nominal_pfa: float,
    trials: int,
    seed: int,
    workers: int = 1,
) -> CalibratedThreshold:
    """Set a detector's threshold to the empirical null quantile."""
    return calibrate_thresholds([detector], cfg, scen, nominal_pfa, trials, seed, workers)[detector]


def _h0_abscissa(scen: ScenarioConfig) -> float:
    return float(scen.delta if scen.delta is not None else scen.texture_shape)


def estimate_pfa(
    detector: DetectorKind,
    cfg: EstimationConfig | None,
    scen_mismatched: ScenarioConfig,
    threshold: CalibratedThreshold,
    trials: int,
    seed: int,
    workers: int = 1,
) -> CurvePoint:
    """Estimated false-alarm rate of a calibrated detector at one scenario."""
    if threshold.detector is not detector:
        raise ValueError("threshold was calibrated for a different detector")
    stats = sample_statistics([detector], cfg, scen_mismatched, Hypothesis.H0, trials, seed, workers)
    exceed = int(np.count_nonzero(stats[detector] > threshold.eta))
    return curve_point(_h0_abscissa(scen_mismatched), exceed, trials)


def pfa_sweep(
    kinds,
    cfg: EstimationConfig | None,
    thresholds: dict,
    scens,
    trials: int,
    seed: int,
    workers: int = 1,
) -> dict:
    """Estimated Pfa for several detectors across mismatched scenarios.

    One shared simulation per scenario; returns {kind: [CurvePoint, ...]}.
    """
    kinds = list(kinds)
    scens = list(scens)
    if not scens:
        raise ValueError("at least one scenario is required")
    for kind in kinds:
        if kind not in thresholds:
            raise ValueError(f"missing threshold for {kind.value}")
    curves = {kind: [] for kind in kinds}
    for scen in scens:
        stats = sample_statistics(kinds, cfg, scen, Hypothesis.H0, trials, seed, workers)
        for kind in kinds:
            exceed = int(np.count_nonzero(stats[kind] > thresholds[kind].eta))
            curves[kind].append(curve_point(_h0_abscissa(scen), exceed, trials))
    return curves


def pd_curve(
    detector: DetectorKind,
    cfg: EstimationConfig | None,
    scen: ScenarioConfig,
    threshold: CalibratedThreshold,
    snr_grid,
    trials: int,
    seed: int,
    workers: int = 1,
) -> list:
    """Detection probability along an SNR grid, one fixed threshold.

    The clairvoyant detector's null distribution moves with the target
    signature, so it needs a per-SNR threshold; use `pd_curves` for it.
    """
    if detector is DetectorKind.CD:
        raise ValueError("cd needs per-SNR thresholds; use pd_curves")
    if threshold.detector is not detector:
        raise ValueError("threshold was calibrated for a different detector")
    snr_grid = _check_grid(snr_grid)
    points = []
    for snr in snr_grid:
        stats = sample_statistics(
            [detector], cfg, replace(scen, snr_db=snr), Hypothesis.H1, trials, seed, workers
        )
        exceed = int(np.count_nonzero(stats[detector] > threshold.eta))
        points.append(curve_point(snr, exceed, trials))
    return points


def _check_grid(grid) -> list:
    grid = [float(g) for g in grid]
    if not grid:
        raise ValueError("grid must be non-empty")
    if any(np.isnan(g) or g == np.inf for g in grid):
        raise ValueError("grid values must not be NaN or +inf")
    return grid


def pd_curves(
    kinds,
    cfg: EstimationConfig | None,
    scen: ScenarioConfig,
    snr_grid,
    nominal_pfa: float,
    cal_trials: int,
    trials: int,
    seed: int,
    cal_seed: int | None = None,
    cal_scenario: ScenarioConfig | None = None,
    workers: int = 1,
):
    """Pd-versus-SNR curves for several detectors with shared simulations.

    Thresholds are calibrated under the null of `cal_scenario` (the matched
    scenario by default) from a stream separate from the detection trials.
    At each SNR every requested statistic sees the same bursts, so
    comparisons across detectors and along the grid are paired.  Returns
    (curves, thresholds): {kind: [CurvePoint, ...]} and {kind:
    CalibratedThreshold} (a tuple of them, one per SNR, for the clairvoyant
    detector).
    """
    kinds = list(kinds)
    if len(set(kinds)) != len(kinds) or not kinds:
        raise ValueError("kinds must be non-empty and unique")
    snr_grid = _check_grid(snr_grid)
    _check_calibration_size(cal_trials, nominal_pfa)
    if cal_seed is None:
        cal_seed = seed + 1
    if cal_scenario is None:
        cal_scenario = scen

    thresholds = {}
    fixed = [k for k in kinds if k is not DetectorKind.CD]
    if fixed:
        thresholds.update(
            calibrate_thresholds(fixed, cfg, cal_scenario, nominal_pfa, cal_trials, cal_seed, workers)
        )
    if DetectorKind.CD in kinds:
        per_snr = []
        for snr in snr_grid:
            scen_s = replace(cal_scenario, snr_db=snr)
            stats = sample_statistics(
                [DetectorKind.CD], cfg, scen_s, Hypothesis.H0, cal_trials, cal_seed, workers
            )
            per_snr.append(
                CalibratedThreshold(
                    DetectorKind.CD,
                    _rank_threshold(stats[DetectorKind.CD], nominal_pfa),
                    nominal_pfa,
                    cal_trials,
                    cal_seed,
                    scen_s,
                )
            )
        thresholds[DetectorKind.CD] = tuple(per_snr)

    curves = {kind: [] for kind in kinds}
    for i, snr in enumerate(snr_grid):
        stats = sample_statistics(kinds, cfg, replace(scen, snr_db=snr), Hypothesis.H1, trials, seed, workers)
        for kind in kinds:
            eta = thresholds[kind][i].eta if kind is DetectorKind.CD else thresholds[kind].eta
            exceed = int(np.count_nonzero(stats[kind] > eta))
            curves[kind].append(curve_point(snr, exceed, trials))
    return curves, thresholds


def convergence_trace(
    algorithm: AlgorithmTag,
    scen: ScenarioConfig,
    snr_db: float,
    trials: int,
    seed: int,
    cfg: EstimationConfig | None = None,
) -> list:
    """Mean absolute log-likelihood change per iteration, averaged over trials.

    Stopping tolerances are disabled so every trial runs to the configured
    iteration cap; the trace is then well defined at every index.  The
    cyclic-ML trace starts at iteration 2 (the first iteration has no
    predecessor), the EM traces at iteration 1 against their initialization.
    """
    if not isinstance(algorithm, AlgorithmTag):
        raise ValueError("algorithm must be an AlgorithmTag")
    if trials < 1:
        raise ValueError("trials must be positive")
    if cfg is None:
        cfg = EstimationConfig()
    scen = replace(scen, snr_db=float(snr_db))
    sums = None
    for start in range(0, trials, BLOCK_SIZE):
        count = min(BLOCK_SIZE, trials - start)
        x, _ = gen_block(scen, Hypothesis.H1, seed, start, count)
        if algorithm is AlgorithmTag.ALG1:
            init = np.maximum(np.sum(x * x, axis=-1), cfg.c0)
            _, _, trace, _ = cyclic_ml_batch(x, init, cfg.c0, cfg.n_co1, 0.0)
        else:
            norms = np.sqrt(np.sum(x * x, axis=-1))
            if np.any(norms == 0.0):
                raise ValueError("cannot normalize a zero-norm sample")
            z = x / norms[..., None]
            if cfg.paper_init:
                m0 = x.mean(axis=1)
                s20 = np.maximum(0.5 * np.sum((x - m0[:, None, :]) ** 2, axis=-1), cfg.c0)
            else:
                m0 = z.mean(axis=1)
                s20 = np.maximum(0.5 * np.sum((z - m0[:, None, :]) ** 2, axis=-1), cfg.c0)
            if algorithm is AlgorithmTag.EM_M:
                _, trace, _ = em_mean_batch(z, m0, s20, cfg.n_em_m, 0.0)
            elif algorithm is AlgorithmTag.EM_SIGMA:
                _, trace, _ = em_sigma_batch(z, m0, s20, cfg.c0, cfg.n_em_sigma, 0.0)
            else:
                _, _, trace, _ = cyclic_em_batch(
                    z, m0, s20, cfg.c0, cfg.n_co2, cfg.n_em_m, cfg.n_em_sigma, 0.0, 0.0, 0.0
                )
        changes = np.abs(np.diff(trace, axis=1))
        block_sum = np.sum(changes, axis=0)
        sums = block_sum if sums is None else sums + block_sum
    first = 2 if algorithm is AlgorithmTag.ALG1 else 1
    return [(first + j, float(s / trials)) for j, s in enumerate(sums)]


def write_curves_csv(path, curves: dict) -> None:
    """Write {kind: [CurvePoint, ...]} as long-format CSV.

    Float fields use shortest round-trip formatting, so equal results give
    byte-identical files.
    """
    lines = ["detector,abscissa,estimate,ci_low,ci_high,trials"]
    for kind, points in curves.items():
        for pt in points:
            lines.append(
                f"{kind.value},{float(pt.abscissa)!r},{float(pt.estimate)!r},"
                f"{float(pt.ci_low)!r},{float(pt.ci_high)!r},{pt.trials}"
            )
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def write_trace_csv(path, algorithm: AlgorithmTag, trace, trials: int) -> None:
    """Write a convergence trace as long-format CSV."""
    lines = ["algorithm,iteration,mean_abs_change,trials"]
    for iteration, change in trace:
        lines.append(f"{algorithm.value},{iteration},{float(change)!r},{trials}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def _jsonable(value):
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: _jsonable(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, dict):
        return {str(_jsonable(k)): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def write_manifest(path, payload: dict) -> None:
    """Write a reproducibility manifest as pretty-printed JSON."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")

"""Seeded Monte Carlo BER sweeps with deterministic, worker-count-independent output.

Every trial derives its random streams from
``SeedSequence(master_seed, spawn_key=(snr_index, trial_index, stream_id))``
with fixed stream ids for channel, symbols, noise, thresholds, and CSI error.
Streams are separate, so a ztq and a prq run with the same seed consume
identical channel/symbol/noise sequences (paired comparisons), and per-trial
integer error counts make aggregation independent of execution order.
"""

from __future__ import annotations

import json
import math
import os
import sys
from dataclasses import dataclass, field, replace
from multiprocessing import get_context

import numpy as np

from .bnd import BndConfig, BndResult, DetectorFailureError, bnd_detect
from .constellation import Constellation, build_constellation
from .likelihood import (
    EXHAUSTIVE_CAP,
    LikelihoodContext,
    exhaustive_candidates,
    ml_detect,
)
from .linear_detect import (
    bmrc_detect,
    bussgang_decompose,
    bzf_detect,
    mrc_detect,
    quantization_label,
    zf_detect,
)
from .ncd import NcdConfig, ncd_detect
from .system_model import (
    ThresholdVector,
    draw_rayleigh_channel,
    generate_thresholds,
    perturb_csi,
    prq_threshold_snr_db,
    prq_threshold_variance,
    quantize,
    real_vector,
    transmit,
)

__all__ = [
    "ConfigError",
    "SweepConfig",
    "SweepRecord",
    "DETECTORS",
    "QUANTIZERS",
    "WORKERS_ENV_VAR",
    "trial_rng",
    "run_sweep",
    "emit",
    "CSV_FIELDS",
]

DETECTORS = ("mrc", "zf", "bmrc", "bzf", "bnd", "bnd_ncd", "ml")
QUANTIZERS = ("ztq", "prq")
WORKERS_ENV_VAR = "ONEBIT_MIMO_WORKERS"

_STREAM_IDS = {"channel": 0, "symbols": 1, "noise": 2, "thresholds": 3, "csi": 4}


class ConfigError(ValueError):
    """Invalid sweep configuration; the CLI maps this to exit code 2."""


def default_workers() -> int:
    value = os.environ.get(WORKERS_ENV_VAR, "1")
    try:
        return max(1, int(value))
    except ValueError:
        return 1


def trial_rng(master_seed: int, snr_index: int, trial_index: int, stream: str) -> np.random.Generator:
    """Independent generator for one (snr, trial, stream) cell of the sweep."""
    seq = np.random.SeedSequence(
        master_seed, spawn_key=(snr_index, trial_index, _STREAM_IDS[stream])
    )
    return np.random.default_rng(seq)


@dataclass(frozen=True)
class SweepConfig:
    """Full description of one BER sweep."""

    n_antennas: int
    n_users: int
    mod_order: int
    snr_db_list: tuple
    quantizer: str = "ztq"
    detectors: tuple = ("bnd_ncd",)
    trials: int = 10000
    master_seed: int = 1
    csi_error_var: float = 0.0
    bnd_theta: float | None = None
    bnd_epsilon: float | None = None
    bnd_t_max: int | None = None
    ncd_p: int | None = None
    ncd_u_max: int | None = None
    ncd_gamma_scale: float | None = None
    output_format: str = "csv"
    workers: int = field(default_factory=default_workers)

    def validate(self) -> None:
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if len(self.snr_db_list) == 0:
            raise ConfigError("snr_db_list must be non-empty")
        if not 1 <= self.n_users <= self.n_antennas:
            raise ConfigError("need n_antennas >= n_users >= 1")
        try:
            build_constellation(self.mod_order)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.quantizer not in QUANTIZERS:
            raise ConfigError(f"quantizer must be one of {QUANTIZERS}")
        if not self.detectors:
            raise ConfigError("at least one detector is required")
        for det in self.detectors:
            if det not in DETECTORS:
                raise ConfigError(f"unknown detector {det!r}; choose from {DETECTORS}")
        if "ml" in self.detectors and self.mod_order**self.n_users > EXHAUSTIVE_CAP:
            raise ConfigError(
                f"ml needs M**K <= {EXHAUSTIVE_CAP}, got {self.mod_order**self.n_users}"
            )
        if self.csi_error_var < 0:
            raise ConfigError("csi_error_var must be nonnegative")
        if self.output_format not in ("csv", "json"):
            raise ConfigError("output_format must be csv or json")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def bnd_config(self, constellation: Constellation) -> BndConfig:
        cfg = BndConfig.defaults(constellation, self.n_users, self.n_antennas)
        if self.bnd_theta is not None:
            cfg = replace(cfg, theta=self.bnd_theta)
        if self.bnd_epsilon is not None:
            cfg = replace(cfg, epsilon=self.bnd_epsilon)
        if self.bnd_t_max is not None:
            cfg = replace(cfg, t_max=self.bnd_t_max)
        return cfg

    def ncd_config(self, constellation: Constellation) -> NcdConfig:
        cfg = NcdConfig.defaults(constellation, self.n_users)
        if self.ncd_p is not None:
            cfg = replace(cfg, max_candidates=self.ncd_p)
        if self.ncd_u_max is not None:
            cfg = replace(cfg, u_max=self.ncd_u_max)
        if self.ncd_gamma_scale is not None:
            cfg = replace(
                cfg, gamma=self.ncd_gamma_scale * constellation.half_spacing
            )
        return cfg

    def sigma_tau_sq(self, n0: float) -> float:
        if self.quantizer != "prq":
            return 0.0
        return prq_threshold_variance(
            prq_threshold_snr_db(self.n_users, self.n_antennas), n0
        )


@dataclass(frozen=True)
class SweepRecord:
    """Aggregated results for one (snr, detector) cell."""

    snr_db: float
    detector: str
    quantizer: str
    ber: float
    ser: float
    trials: int
    bit_errors: int
    symbol_errors: int
    avg_iterations: float | None
    avg_candidate_set_size: float | None
    sigma_tau_sq: float
    master_seed: int


# Per-detector accumulator slots: bit errors, symbol errors, BND iterations,
# final candidate-set sizes.  All integers, so merge order cannot matter.
_SLOTS = 4


def _count_errors(estimate_real, true_levels, constellation, popcount):
    det_levels = constellation.level_index(estimate_real)
    labels_det = constellation.level_labels[det_levels]
    labels_true = constellation.level_labels[true_levels]
    bit_errors = int(popcount[labels_det ^ labels_true].sum())
    k = true_levels.size // 2
    symbol_errors = int(
        np.count_nonzero(
            (det_levels[:k] != true_levels[:k]) | (det_levels[k:] != true_levels[k:])
        )
    )
    return bit_errors, symbol_errors


def _run_block(config: SweepConfig, snr_index: int, lo: int, hi: int):
    """Run trials [lo, hi) at one SNR point; returns per-detector count arrays."""
    constellation = build_constellation(config.mod_order)
    popcount = np.array(
        [bin(v).count("1") for v in range(constellation.levels_per_dim**2)],
        dtype=np.int64,
    )
    bnd_cfg = config.bnd_config(constellation)
    ncd_cfg = config.ncd_config(constellation)
    snr_db = config.snr_db_list[snr_index]
    n0 = 10.0 ** (-snr_db / 10.0)
    sigma_tau_sq = config.sigma_tau_sq(n0)
    label = quantization_label(config.n_users, n0, sigma_tau_sq)
    ml_candidates = (
        exhaustive_candidates(constellation, config.n_users)
        if "ml" in config.detectors
        else None
    )
    need_bnd = "bnd" in config.detectors or "bnd_ncd" in config.detectors
    need_bussgang = "bmrc" in config.detectors or "bzf" in config.detectors

    counts = {det: np.zeros(_SLOTS, dtype=np.int64) for det in config.detectors}
    k = config.n_users
    half_bits = constellation.bits_per_dim

    for trial in range(lo, hi):
        channel = draw_rayleigh_channel(
            config.n_antennas, k, trial_rng(config.master_seed, snr_index, trial, "channel")
        )
        sym_rng = trial_rng(config.master_seed, snr_index, trial, "symbols")
        labels = sym_rng.integers(0, constellation.levels_per_dim, size=2 * k)
        true_levels = constellation.label_to_level[labels]
        x_real = constellation.pam_set[true_levels]
        x_complex = x_real[:k] + 1j * x_real[k:]

        y = transmit(
            channel, x_complex, n0, trial_rng(config.master_seed, snr_index, trial, "noise")
        )
        if sigma_tau_sq > 0:
            thresholds = generate_thresholds(
                config.n_antennas,
                sigma_tau_sq,
                trial_rng(config.master_seed, snr_index, trial, "thresholds"),
            )
        else:
            thresholds = ThresholdVector.zeros(config.n_antennas)
        r = quantize(y, thresholds)

        rx_channel = channel
        if config.csi_error_var > 0:
            rx_channel = perturb_csi(
                channel,
                config.csi_error_var,
                trial_rng(config.master_seed, snr_index, trial, "csi"),
            )

        decomp = (
            bussgang_decompose(rx_channel, thresholds, n0) if need_bussgang else None
        )
        bnd_result: BndResult | None = None
        if need_bnd:
            try:
                bnd_result = bnd_detect(r, rx_channel, thresholds, n0, bnd_cfg)
            except DetectorFailureError as exc:
                bnd_result = BndResult(exc.fallback, bnd_cfg.t_max, False, math.inf)

        for det in config.detectors:
            extra_iter = 0
            extra_cand = 0
            if det == "mrc":
                est = real_vector(mrc_detect(r, rx_channel, label))
            elif det == "zf":
                est = real_vector(zf_detect(r, rx_channel, label))
            elif det == "bmrc":
                est = real_vector(bmrc_detect(r, decomp))
            elif det == "bzf":
                est = real_vector(bzf_detect(r, decomp))
            elif det == "bnd":
                est = bnd_result.estimate
                extra_iter = bnd_result.iterations
            elif det == "bnd_ncd":
                ncd_result = ncd_detect(
                    bnd_result.estimate, r, rx_channel, thresholds, n0, ncd_cfg, constellation
                )
                est = ncd_result.estimate
                extra_iter = bnd_result.iterations
                extra_cand = ncd_result.candidate_set_size
            else:  # ml
                ctx = LikelihoodContext.from_channel(rx_channel, r, thresholds, n0)
                est = ml_detect(ctx, ml_candidates)

            bit_err, sym_err = _count_errors(est, true_levels, constellation, popcount)
            counts[det] += np.array([bit_err, sym_err, extra_iter, extra_cand])

    return counts


def _merge(into: dict, part: dict) -> None:
    for det, arr in part.items():
        into[det] += arr


def run_sweep(config: SweepConfig) -> list:
    """Run the configured sweep and aggregate one record per (snr, detector)."""
    config.validate()
    records = []
    bits_per_trial = config.n_users * build_constellation(config.mod_order).bits_per_symbol

    for snr_index, snr_db in enumerate(config.snr_db_list):
        counts = {det: np.zeros(_SLOTS, dtype=np.int64) for det in config.detectors}
        if config.workers == 1:
            _merge(counts, _run_block(config, snr_index, 0, config.trials))
        else:
            chunk = max(1, math.ceil(config.trials / (config.workers * 4)))
            tasks = [
                (config, snr_index, lo, min(lo + chunk, config.trials))
                for lo in range(0, config.trials, chunk)
            ]
            with get_context("fork").Pool(config.workers) as pool:
                for part in pool.starmap(_run_block, tasks):
                    _merge(counts, part)

        n0 = 10.0 ** (-snr_db / 10.0)
        sigma_tau_sq = config.sigma_tau_sq(n0)
        for det in config.detectors:
            bit_err, sym_err, iters, cands = (int(v) for v in counts[det])
            records.append(
                SweepRecord(
                    snr_db=float(snr_db),
                    detector=det,
                    quantizer=config.quantizer,
                    ber=bit_err / (config.trials * bits_per_trial),
                    ser=sym_err / (config.trials * config.n_users),
                    trials=config.trials,
                    bit_errors=bit_err,
                    symbol_errors=sym_err,
                    avg_iterations=(
                        iters / config.trials if det in ("bnd", "bnd_ncd") else None
                    ),
                    avg_candidate_set_size=(
                        cands / config.trials if det == "bnd_ncd" else None
                    ),
                    sigma_tau_sq=sigma_tau_sq,
                    master_seed=config.master_seed,
                )
            )
    return records


CSV_FIELDS = (
    "snr_db",
    "detector",
    "quantizer",
    "ber",
    "ser",
    "trials",
    "bit_errors",
    "symbol_errors",
    "avg_iterations",
    "avg_candidate_set_size",
    "sigma_tau_sq",
    "master_seed",
)


def _format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def emit(records, output_format: str = "csv") -> str:
    """Serialize sweep records as CSV (fixed 12-column schema) or JSON."""
    if not records:
        raise ValueError("no records to emit")
    if output_format == "csv":
        lines = [",".join(CSV_FIELDS)]
        for rec in records:
            lines.append(
                ",".join(_format_value(getattr(rec, name)) for name in CSV_FIELDS)
            )
        return "\n".join(lines) + "\n"
    if output_format == "json":
        payload = []
        for rec in records:
            row = {}
            for name in CSV_FIELDS:
                value = getattr(rec, name)
                if isinstance(value, float):
                    value = float(f"{value:.6g}")
                row[name] = value
            payload.append(row)
        return json.dumps(payload, indent=2) + "\n"
    raise ValueError("output_format must be csv or json")


def write_output(text: str, out_file: str | None) -> None:
    """Write serialized records to a file or stdout, surfacing the path on failure."""
    if out_file is None:
        sys.stdout.write(text)
        return
    try:
        with open(out_file, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write results to {out_file}: {exc}") from exc

"""Command-line front end: ber / rate / dmin sweeps and a quick selftest.

Options may come from a flat ``key = value`` config file (``--config``); any
flag given explicitly on the command line overrides the file.  Exit code 0 on
success, 2 on configuration refusal.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import analysis, harness
from .harness import ConfigError, SweepConfig
from .likelihood import DEFAULT_CUTOFF, psi, safe_ln_phi, varphi
from .system_model import (
    ChannelRealization,
    ThresholdVector,
    complex_vector,
    draw_rayleigh_channel,
    generate_thresholds,
    quantize,
    real_matrix,
    real_vector,
)

_EXIT_OK = 0
_EXIT_FAIL = 1
_EXIT_CONFIG = 2


def _csv_floats(text: str):
    return tuple(float(v) for v in text.split(",") if v.strip() != "")


def _csv_names(text: str):
    return tuple(v.strip() for v in text.split(",") if v.strip() != "")


# (flag, converter, built-in default) for the ber subcommand; None defaults
# defer to SweepConfig.
_BER_OPTIONS = [
    ("antennas", int, 128),
    ("users", int, 4),
    ("mod_order", int, 16),
    ("snr_db", _csv_floats, (10.0,)),
    ("quantizer", str, "ztq"),
    ("detectors", _csv_names, ("bnd_ncd",)),
    ("trials", int, 10000),
    ("seed", int, 1),
    ("csi_error_var", float, 0.0),
    ("output", str, "csv"),
    ("out_file", str, None),
    ("workers", int, None),
    ("bnd_theta", float, None),
    ("bnd_epsilon", float, None),
    ("bnd_tmax", int, None),
    ("ncd_p", int, None),
    ("ncd_umax", int, None),
    ("ncd_gamma_scale", float, None),
]


def _load_config_file(path: str) -> dict:
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for raw in fh:
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"config line without '=': {raw.strip()!r}")
                key, _, value = line.partition("=")
                values[key.strip().replace("-", "_")] = value.strip()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return values


def _resolve_ber_options(args) -> dict:
    file_values = _load_config_file(args.config) if args.config else {}
    known = {name for name, _, _ in _BER_OPTIONS}
    for key in file_values:
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
    resolved = {}
    for name, conv, default in _BER_OPTIONS:
        cli_value = getattr(args, name)
        if cli_value is not None:
            resolved[name] = cli_value
        elif name in file_values:
            try:
                resolved[name] = conv(file_values[name])
            except ValueError as exc:
                raise ConfigError(f"bad value for {name}: {exc}") from exc
        else:
            resolved[name] = default
    return resolved


def _ber_command(args) -> int:
    opts = _resolve_ber_options(args)
    kwargs = dict(
        n_antennas=opts["antennas"],
        n_users=opts["users"],
        mod_order=opts["mod_order"],
        snr_db_list=tuple(opts["snr_db"]),
        quantizer=opts["quantizer"],
        detectors=tuple(opts["detectors"]),
        trials=opts["trials"],
        master_seed=opts["seed"],
        csi_error_var=opts["csi_error_var"],
        bnd_theta=opts["bnd_theta"],
        bnd_epsilon=opts["bnd_epsilon"],
        bnd_t_max=opts["bnd_tmax"],
        ncd_p=opts["ncd_p"],
        ncd_u_max=opts["ncd_umax"],
        ncd_gamma_scale=opts["ncd_gamma_scale"],
        output_format=opts["output"],
    )
    if opts["workers"] is not None:
        kwargs["workers"] = opts["workers"]
    config = SweepConfig(**kwargs)
    records = harness.run_sweep(config)
    harness.write_output(harness.emit(records, config.output_format), opts["out_file"])
    return _EXIT_OK


def _rows_to_text(rows, fields, output_format: str) -> str:
    if output_format == "csv":
        lines = [",".join(fields)]
        for row in rows:
            lines.append(
                ",".join(
                    f"{row[name]:.6g}" if isinstance(row[name], float) else str(row[name])
                    for name in fields
                )
            )
        return "\n".join(lines) + "\n"
    return json.dumps(rows, indent=2) + "\n"


def _rate_command(args) -> int:
    rng = np.random.default_rng(args.seed)
    _, summaries = analysis.rate_survey(
        args.antennas,
        args.users,
        args.mod_order,
        10.0 ** (args.snr_db / 10.0),
        args.thresholds,
        args.channels,
        args.quantizer,
        rng,
    )
    fields = ("channel_id", "snr_db", "quantizer", "mean_rate", "max_rate", "n_samples")
    rows = [
        {
            "channel_id": s.channel_id,
            "snr_db": args.snr_db,
            "quantizer": args.quantizer,
            "mean_rate": s.mean_rate,
            "max_rate": s.max_rate,
            "n_samples": s.n_samples,
        }
        for s in summaries
    ]
    harness.write_output(_rows_to_text(rows, fields, args.output), args.out_file)
    return _EXIT_OK


def _dmin_command(args) -> int:
    rng = np.random.default_rng(args.seed)
    avg = analysis.avg_min_hamming(
        args.antennas, args.users, args.mod_order, args.quantizer, args.realizations, rng
    )
    fields = ("antennas", "users", "mod_order", "quantizer", "avg_d_min", "realizations")
    rows = [
        {
            "antennas": args.antennas,
            "users": args.users,
            "mod_order": args.mod_order,
            "quantizer": args.quantizer,
            "avg_d_min": avg,
            "realizations": args.realizations,
        }
    ]
    harness.write_output(_rows_to_text(rows, fields, args.output), args.out_file)
    return _EXIT_OK


def _selftest_command(_args) -> int:
    rng = np.random.default_rng(7)
    checks = []

    h = (rng.standard_normal((6, 2)) + 1j * rng.standard_normal((6, 2))) / np.sqrt(2)
    x = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    checks.append(
        (
            "real stacking matches complex product",
            np.allclose(real_matrix(h) @ real_vector(x), real_vector(h @ x), atol=1e-12),
        )
    )
    z = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    checks.append(
        ("real/complex round trip", np.allclose(complex_vector(real_vector(z)), z))
    )

    tau = generate_thresholds(6, 0.5, rng)
    checks.append(
        (
            "threshold rescaling",
            abs(np.sum(np.abs(tau.complex_thresholds) ** 2) - 6 * 0.5) < 1e-9,
        )
    )
    y = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    r = quantize(y, tau)
    checks.append(("quantizer outputs are signs", set(np.unique(r)) <= {-1.0, 1.0}))

    c = DEFAULT_CUTOFF
    eps = 1e-9
    cont = max(
        abs(safe_ln_phi(c - eps) - safe_ln_phi(c)),
        abs(varphi(c - eps) - varphi(c)),
        abs(psi(c - eps) - psi(c)),
    )
    checks.append(("log-CDF family continuous at cutoff", cont < 1e-6))
    grid = np.concatenate([-np.logspace(6, 0, 40), np.linspace(-1, 40, 60)])
    pv = psi(grid)
    checks.append(
        ("psi in [-1, 0) and varphi > 0 on grid", bool((pv >= -1).all() and (pv < 0).all() and (varphi(grid) > 0).all()))
    )

    from .constellation import build_constellation

    const = build_constellation(16)
    channel = draw_rayleigh_channel(3, 1, rng)
    p = analysis.outcome_distribution(channel, ThresholdVector.zeros(3), 10.0, const)
    checks.append(("outcome probabilities sum to one", abs(p.sum() - 1.0) < 1e-9))

    config = SweepConfig(
        n_antennas=8,
        n_users=2,
        mod_order=4,
        snr_db_list=(5.0,),
        detectors=("mrc", "bnd"),
        trials=3,
        master_seed=11,
        workers=1,
    )
    out1 = harness.emit(harness.run_sweep(config), "csv")
    out2 = harness.emit(harness.run_sweep(config), "csv")
    checks.append(("repeated sweep is byte identical", out1 == out2))

    failed = 0
    for name, ok in checks:
        print(f"{'ok  ' if ok else 'FAIL'} - {name}")
        if not ok:
            failed += 1
    return _EXIT_OK if failed == 0 else _EXIT_FAIL


def _add_ber_parser(sub) -> None:
    p = sub.add_parser("ber", help="Monte Carlo bit-error-rate sweep")
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--antennas", type=int)
    p.add_argument("--users", type=int)
    p.add_argument("--mod-order", dest="mod_order", type=int)
    p.add_argument("--snr-db", dest="snr_db", type=_csv_floats, help="comma-separated dB list")
    p.add_argument("--quantizer", choices=harness.QUANTIZERS)
    p.add_argument("--detectors", type=_csv_names, help="comma-separated detector names")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--csi-error-var", dest="csi_error_var", type=float)
    p.add_argument("--output", choices=("csv", "json"))
    p.add_argument("--out-file", dest="out_file")
    p.add_argument("--workers", type=int)
    p.add_argument("--bnd-theta", dest="bnd_theta", type=float)
    p.add_argument("--bnd-epsilon", dest="bnd_epsilon", type=float)
    p.add_argument("--bnd-tmax", dest="bnd_tmax", type=int)
    p.add_argument("--ncd-p", dest="ncd_p", type=int)
    p.add_argument("--ncd-umax", dest="ncd_umax", type=int)
    p.add_argument("--ncd-gamma-scale", dest="ncd_gamma_scale", type=float)
    p.set_defaults(func=_ber_command)


def _add_rate_parser(sub) -> None:
    p = sub.add_parser("rate", help="mutual information survey over random channels")
    p.add_argument("--antennas", type=int, default=4)
    p.add_argument("--users", type=int, default=1)
    p.add_argument("--mod-order", dest="mod_order", type=int, default=16)
    p.add_argument("--snr-db", dest="snr_db", type=float, default=20.0)
    p.add_argument("--quantizer", choices=harness.QUANTIZERS, default="prq")
    p.add_argument("--channels", type=int, default=100)
    p.add_argument("--thresholds", type=int, default=100)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--output", choices=("csv", "json"), default="csv")
    p.add_argument("--out-file", dest="out_file")
    p.set_defaults(func=_rate_command)


def _add_dmin_parser(sub) -> None:
    p = sub.add_parser("dmin", help="average minimum Hamming distance of the space code")
    p.add_argument("--antennas", type=int, default=64)
    p.add_argument("--users", type=int, default=1)
    p.add_argument("--mod-order", dest="mod_order", type=int, default=16)
    p.add_argument("--quantizer", choices=harness.QUANTIZERS, default="prq")
    p.add_argument("--realizations", type=int, default=500)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--output", choices=("csv", "json"), default="csv")
    p.add_argument("--out-file", dest="out_file")
    p.set_defaults(func=_dmin_command)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="onebit-mimo",
        description="One-bit massive MIMO uplink detection simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_ber_parser(sub)
    _add_rate_parser(sub)
    _add_dmin_parser(sub)
    p = sub.add_parser("selftest", help="run quick invariant checks")
    p.set_defaults(func=_selftest_command)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())

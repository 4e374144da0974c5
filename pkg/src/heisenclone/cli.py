"""Command-line interface.

Subcommands::

    replicate    fidelity and success probability of one N -> M replication
    sweep        CSV/JSON datasets over N (or over M at fixed N)
    bounds       lower/exact/upper fidelity sandwich at one (N, M)
    metrology    QFI, post-selected QFI, averaged bounds, twirl, instruments
    validate     parse and echo a spectrum file

Exit codes: 0 success, 2 validation error, 3 resource-cap error, 4 numeric
error.  Every failure writes a single JSON error object to stderr.  All
floating-point output is printed with 12 significant digits, and runs with
equal inputs and equal ``--seed`` produce byte-identical output.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .errors import HeisencloneError, ValidationError
from .filters import build_super_filter, build_windowed_filter, identity_filter, success_probability
from .qcore import (
    FilterOperator,
    avg_qfi_uniform,
    decompose_instrument,
    gaussian_twirl,
    hl_variance_bound,
    kraus_to_choi,
    noon_filter,
    pointwise_filter,
    prob_qfi,
    qfi,
    system_from_dict,
    system_from_spectrum,
)
from .replication import (
    deterministic_fidelity,
    exact_fidelity,
    full_bound_report,
    max_e_delta,
    pyes_decay_rate,
)
from .scaling import (
    SweepSpec,
    default_window_growth,
    fit_exponent,
    rows_to_csv,
    run_sweep,
    sweep_to_json,
)
from .spectra import DEFAULT_SUPPORT_CAP, normalize_spectrum, spectrum_from_dict

DEFAULT_N_VALUES = tuple(range(20, 121, 10))


@dataclass
class RunConfig:
    """Resolved global options shared by all subcommands."""

    spectrum_path: str | None = None
    output_format: str | None = None
    seed: int = 0
    support_cap: int = DEFAULT_SUPPORT_CAP
    tolerances: dict = field(default_factory=dict)


class _Parser(argparse.ArgumentParser):
    # argparse's default error handling prints usage text; route everything
    # through the JSON error contract instead.
    def error(self, message):
        raise ValidationError(f"invalid arguments: {message}")


def _round12(value):
    """Round floats to 12 significant digits, recursively."""
    if isinstance(value, float):
        return float(f"{value:.12g}")
    if isinstance(value, dict):
        return {k: _round12(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round12(v) for v in value]
    return value


def _emit_json(obj) -> None:
    print(json.dumps(_round12(obj), sort_keys=True))


def _load_spectrum(config: RunConfig):
    if config.spectrum_path is None:
        # Built-in default: the equal-weight two-level clock on {0, 1}.
        return normalize_spectrum([(0, 0.5), (1, 0.5)])
    try:
        with open(config.spectrum_path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read spectrum file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"spectrum file is not valid JSON: {exc}") from exc
    return spectrum_from_dict(data)


def _load_system(config: RunConfig, path: str | None):
    if path is None:
        return system_from_spectrum(_load_spectrum(config))
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read system file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"system file is not valid JSON: {exc}") from exc
    return system_from_dict(data)


def _parse_int_list(text: str, what: str) -> tuple[int, ...]:
    try:
        values = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise ValidationError(f"could not parse {what}: {exc}") from exc
    if not values:
        raise ValidationError(f"{what} must be a non-empty comma-separated list")
    return values


def _parse_range(text: str, what: str) -> tuple[int, ...]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ValidationError(f"{what} must look like start:stop:step")
    try:
        start, stop, step = (int(p) for p in parts)
    except ValueError as exc:
        raise ValidationError(f"could not parse {what}: {exc}") from exc
    if step <= 0 or stop < start:
        raise ValidationError(f"{what} must have positive step and stop >= start")
    return tuple(range(start, stop + 1, step))


def _default_xi(s, n: int, m: int) -> float:
    # Canonical window scale for M <= c2 N replication: xi = 2 p_min / (K (c2 - 1))
    # with c2 = M / N.  Requires M > N.
    if m <= n:
        raise ValidationError(
            "windowed filter needs --xi when M <= N (no default window scale)"
        )
    return 2.0 * s.p_min / (s.k * (m / n - 1.0))


def _build_filter(s, args, config: RunConfig):
    if args.filter == "super":
        return build_super_filter(s, args.n, args.m, support_cap=config.support_cap)
    if args.filter == "identity":
        return identity_filter(s, args.n, support_cap=config.support_cap)
    f_value = args.f_value if args.f_value is not None else default_window_growth(args.n)
    xi = args.xi if args.xi is not None else _default_xi(s, args.n, args.m)
    return build_windowed_filter(
        s, args.n, args.m, f_value, xi, support_cap=config.support_cap
    )


def _cmd_replicate(args, config: RunConfig) -> int:
    s = _load_spectrum(config)
    flt = _build_filter(s, args, config)
    result = exact_fidelity(s, args.n, args.m, flt, support_cap=config.support_cap)
    record = result.to_dict()
    if args.emit_filter:
        record["filter"] = flt.to_dict()
    if (config.output_format or "json") == "csv":
        print("n,m,fidelity,p_yes,filter_kind,delta_e0")
        print(
            f"{result.n},{result.m},{result.fidelity:.12g},{result.p_yes:.12g},"
            f"{result.filter_kind},{result.delta_e0}"
        )
    else:
        _emit_json(record)
    return 0


def _cmd_sweep(args, config: RunConfig) -> int:
    s = _load_spectrum(config)
    if args.fig2:
        n_values: tuple[int, ...] = (20,)
        m_values: tuple[int, ...] | None = tuple(range(20, 401, 20))
    elif args.m_range or args.m_values:
        if args.n is None:
            raise ValidationError("fixed-N sweeps need --n")
        n_values = (args.n,)
        m_values = (
            _parse_range(args.m_range, "--m-range")
            if args.m_range
            else _parse_int_list(args.m_values, "--m-values")
        )
    else:
        n_values = (
            _parse_int_list(args.n_values, "--n-values")
            if args.n_values
            else DEFAULT_N_VALUES
        )
        m_values = None

    xi = args.xi
    if args.policy == "windowed" and xi is None:
        pairs_preview = [(n, int(math.ceil(args.c * n**args.alpha))) for n in n_values]
        xi = min(_default_xi(s, n, m) for n, m in pairs_preview)
    spec = SweepSpec(
        spectrum=s,
        n_values=n_values,
        alpha=args.alpha,
        c=args.c,
        m_values=m_values,
        policy=args.policy,
        xi=xi,
        support_cap=config.support_cap,
    )
    rows = run_sweep(spec)

    fit = None
    if args.fit:
        column = "neg_log_pyes" if args.fit == "pyes" else "neg_log_infidelity"
        transform = args.fit_transform
        if transform is None:
            transform = "vs_n" if args.fit == "pyes" else "vs_log_n"
        else:
            transform = transform.replace("-", "_")
        fit = fit_exponent(rows, column=column, transform=transform)

    if (config.output_format or "csv") == "json":
        payload = sweep_to_json(spec, rows)
        if fit is not None:
            payload["fit"] = fit.to_dict()
        _emit_json(payload)
    else:
        sys.stdout.write(rows_to_csv(rows))
        if fit is not None:
            sys.stdout.write(
                f"# fit slope={fit.slope:.12g} intercept={fit.intercept:.12g} "
                f"r2={fit.r2:.12g}\n"
            )
    return 0


def _cmd_bounds(args, config: RunConfig) -> int:
    s = _load_spectrum(config)
    limit = max_e_delta(s, args.n)
    if args.e_delta is not None:
        e_deltas = [args.e_delta]
    else:
        points = max(1, args.grid)
        e_deltas = [limit * i / (points - 1) for i in range(points)] if points > 1 else [limit]
    reports = [
        full_bound_report(s, args.n, args.m, e, support_cap=config.support_cap)
        for e in e_deltas
    ]
    if (config.output_format or "json") == "csv":
        print("e_delta,lower,exact,upper,p_yes_used")
        for r in reports:
            print(
                f"{r.e_delta:.12g},{r.lower:.12g},{r.exact:.12g},"
                f"{r.upper:.12g},{r.p_yes_used:.12g}"
            )
    else:
        _emit_json(
            {
                "n": args.n,
                "m": args.m,
                "decay_rate": pyes_decay_rate(s),
                "reports": [r.to_dict() for r in reports],
            }
        )
    return 0


def _metrology_period(s) -> float:
    ints = s.int_energies
    g = 0
    for e in ints[1:]:
        g = math.gcd(g, e - ints[0])
    return 2.0 * math.pi / (float(s.grid_unit) * g)


def _cmd_metrology(args, config: RunConfig) -> int:
    rng = np.random.default_rng(config.seed)
    s = _load_spectrum(config)

    if args.subaction == "hl":
        _emit_json({"n": args.n, "variance_bound": hl_variance_bound(s, args.n)})
        return 0

    if args.subaction == "qfi":
        sys_ = _load_system(config, args.system)
        _emit_json({"t": args.t, "qfi": qfi(sys_, args.t)})
        return 0

    if args.subaction == "prob-qfi":
        sys_ = _load_system(config, args.system)
        flt = pointwise_filter(sys_, args.t0, args.epsilon)
        base = qfi(sys_, args.t0)
        boosted = prob_qfi(sys_, flt, args.t0)
        _emit_json(
            {
                "t0": args.t0,
                "epsilon": args.epsilon,
                "qfi": base,
                "prob_qfi": boosted,
                "boost_times_eps2": boosted * args.epsilon**2 / base,
            }
        )
        return 0

    if args.subaction == "avg-bound":
        sys_ = _load_system(config, args.system)
        period = _metrology_period(s) if args.system is None else args.period
        if period is None:
            raise ValidationError("avg-bound on a custom system needs --period")
        span_sq = (s.e_max - s.e_min) ** 2
        evals, vecs = np.linalg.eigh(sys_.hamiltonian)
        worst = 0.0
        for _ in range(args.samples):
            diag = rng.uniform(0.05, 1.0, size=sys_.dim).astype(complex)
            flt = FilterOperator(vecs @ np.diag(diag) @ vecs.conj().T)
            worst = max(
                worst, avg_qfi_uniform(sys_, flt, period, args.points)
            )
        noon = avg_qfi_uniform(sys_, noon_filter(sys_), period, args.points)
        _emit_json(
            {
                "samples": args.samples,
                "max_avg_qfi": worst,
                "noon_avg_qfi": noon,
                "bound_span_sq": span_sq,
                "holds": bool(worst <= span_sq + 1e-9),
            }
        )
        return 0

    if args.subaction == "twirl":
        sys_ = _load_system(config, args.system)
        d = sys_.dim
        a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        p = a @ a.conj().T
        twirled = gaussian_twirl(p, sys_, args.sigma)
        evals, vecs = np.linalg.eigh(sys_.hamiltonian)
        p_eig = vecs.conj().T @ p @ vecs
        t_eig = vecs.conj().T @ twirled @ vecs
        expected = np.exp(
            -0.5 * (args.sigma * (evals[:, None] - evals[None, :])) ** 2
        )
        err = float(np.max(np.abs(t_eig - expected * p_eig)))
        dist = float(np.max(np.abs(twirled - vecs @ np.diag(np.diag(p_eig)) @ vecs.conj().T)))
        _emit_json(
            {
                "sigma": args.sigma,
                "max_offdiag_error": err,
                "distance_to_diag": dist,
            }
        )
        return 0

    if args.subaction == "decompose":
        d = args.dim
        ks = [
            rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
            for _ in range(args.kraus)
        ]
        total = sum(k.conj().T @ k for k in ks)
        scale = 1.0 / math.sqrt(np.linalg.eigvalsh(total).max())
        ks = [k * scale for k in ks]
        deco = decompose_instrument(ks)
        reconstructed = [k @ deco.m_op for k in deco.channel_kraus]
        choi_err = float(
            np.max(np.abs(kraus_to_choi(ks) - kraus_to_choi(reconstructed)))
        )
        tp = sum(k.conj().T @ k for k in deco.channel_kraus)
        tp_err = float(np.max(np.abs(tp - np.eye(d))))
        _emit_json(
            {
                "dim": d,
                "kraus": args.kraus,
                "choi_reconstruction_error": choi_err,
                "trace_preservation_error": tp_err,
            }
        )
        return 0

    raise ValidationError(f"unknown metrology subaction {args.subaction!r}")


def _cmd_validate(args, config: RunConfig) -> int:
    s = _load_spectrum(config)
    _emit_json(
        {
            "spectrum": s.to_dict(),
            "grid_unit": str(s.grid_unit),
            "int_energies": list(s.int_energies),
            "k": s.k,
            "p_min": s.p_min,
        }
    )
    return 0


def _parse_tolerances(items) -> dict:
    tols = {}
    for item in items or []:
        if "=" not in item:
            raise ValidationError(f"--tol expects NAME=VALUE, got {item!r}")
        name, _, value = item.partition("=")
        try:
            tols[name.strip()] = float(value)
        except ValueError as exc:
            raise ValidationError(f"could not parse tolerance {item!r}") from exc
    return tols


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--spectrum", metavar="PATH", help="spectrum JSON file")
    common.add_argument("--format", choices=("json", "csv"), dest="output_format")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized runs")
    common.add_argument(
        "--support-cap",
        type=int,
        default=None,
        help="max grid points per distribution (env HEISENCLONE_CAP overrides default)",
    )
    common.add_argument(
        "--tol", action="append", metavar="NAME=VALUE", help="tolerance overrides"
    )

    parser = _Parser(prog="heisenclone", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    rep = sub.add_parser("replicate", parents=[common], help="one N -> M replication")
    rep.add_argument("--n", type=int, required=True)
    rep.add_argument("--m", type=int, required=True)
    rep.add_argument("--filter", choices=("super", "windowed", "identity"), default="super")
    rep.add_argument("--f-value", type=float, default=None, help="windowed: growth value f(N)")
    rep.add_argument("--xi", type=float, default=None, help="windowed: window scale")
    rep.add_argument(
        "--emit-filter", action="store_true", help="include the filter JSON in the record"
    )
    rep.set_defaults(func=_cmd_replicate)

    sw = sub.add_parser("sweep", parents=[common], help="datasets over N or M")
    sw.add_argument("--alpha", type=float, default=1.5)
    sw.add_argument("--c", type=float, default=1.0)
    sw.add_argument("--n-values", help="comma-separated N grid")
    sw.add_argument("--n", type=int, help="fixed N (with --m-range/--m-values)")
    sw.add_argument("--m-range", help="start:stop:step list of M values")
    sw.add_argument("--m-values", help="comma-separated M values")
    sw.add_argument("--fig2", action="store_true", help="preset: N=20, M=20:400:20")
    sw.add_argument("--policy", choices=("super", "windowed", "identity"), default="super")
    sw.add_argument("--xi", type=float, default=None)
    sw.add_argument("--fit", choices=("pyes", "infidelity"), help="append a regression summary")
    sw.add_argument("--fit-transform", choices=("vs-n", "vs-log-n"), default=None)
    sw.add_argument(
        "--bound",
        default="upper",
        help="upper-bound column selector (always emitted; kept for script compatibility)",
    )
    sw.set_defaults(func=_cmd_sweep)

    bnd = sub.add_parser("bounds", parents=[common], help="fidelity sandwich at one point")
    bnd.add_argument("--n", type=int, required=True)
    bnd.add_argument("--m", type=int, required=True)
    bnd.add_argument("--e-delta", type=float, default=None, help="window half-width (grid units)")
    bnd.add_argument("--grid", type=int, default=5, help="number of e_delta grid points")
    bnd.set_defaults(func=_cmd_bounds)

    met = sub.add_parser("metrology", parents=[common], help="QFI and bound computations")
    met.add_argument(
        "subaction",
        choices=("qfi", "prob-qfi", "avg-bound", "hl", "twirl", "decompose"),
    )
    met.add_argument("--system", metavar="PATH", help="system JSON file")
    met.add_argument("--n", type=int, default=1)
    met.add_argument("--t", type=float, default=0.0)
    met.add_argument("--t0", type=float, default=0.3)
    met.add_argument("--epsilon", type=float, default=0.01)
    met.add_argument("--samples", type=int, default=100)
    met.add_argument("--points", type=int, default=128)
    met.add_argument("--period", type=float, default=None)
    met.add_argument("--sigma", type=float, default=1000.0)
    met.add_argument("--dim", type=int, default=3)
    met.add_argument("--kraus", type=int, default=4)
    met.set_defaults(func=_cmd_metrology)

    val = sub.add_parser("validate", parents=[common], help="parse and echo a spectrum")
    val.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cap = args.support_cap
        if cap is None:
            cap = int(os.environ.get("HEISENCLONE_CAP", DEFAULT_SUPPORT_CAP))
        if cap <= 0:
            raise ValidationError(f"support cap must be positive, got {cap}")
        config = RunConfig(
            spectrum_path=args.spectrum,
            output_format=args.output_format,
            seed=args.seed,
            support_cap=cap,
            tolerances=_parse_tolerances(args.tol),
        )
        return args.func(args, config)
    except HeisencloneError as exc:
        print(json.dumps(exc.to_json(), sort_keys=True), file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())

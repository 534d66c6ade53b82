"""Command-line interface.

Subcommands expose the algebra (``bracket``, ``star``, ``ast``), the
consistency checks (``check``, ``certify``, ``kappa``, ``nogo-scan``) and
the simulator (``simulate``).  Nonzero residuals are results, not failures:
exit status 0 means the computation ran, 1 is a computational error, 2 an
input error.  Simulation output (CSV rows, JSON summary) is byte-stable for
a fixed configuration.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__
from .consistency import (
    ClosureEscape,
    DegenerateScheme,
    InexactSquareRoot,
    WitnessNotFound,
    associativity_products,
    certify_subalgebra,
    check_reduction,
    jacobi_residual,
    kappa_linear,
    leibniz_pointwise_residual,
    leibniz_residual,
    minimal_membership,
    nogo_scan,
)
from .dynamics import (
    DegreeBlowup,
    GaussianState,
    HybridSystem,
    NonlinearSystem,
    NotConserved,
    StepRejected,
    backreaction_report,
    canonical_audit,
    expectation,
    propagate,
)
from .expr import NonQuantizedResidual
from .grammar import ParseError, format_expression, parse, parse_coefficient
from .products import (
    BRACKET_FORMS,
    ProductSpec,
    SigmaSpec,
    composition_product,
    hybrid_bracket,
    star_product,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INPUT = 2


class ConfigError(ValueError):
    """A run configuration failed validation before any computation."""


_INPUT_ERRORS = (ParseError, ConfigError)
_COMPUTE_ERRORS = (
    WitnessNotFound,
    ClosureEscape,
    DegenerateScheme,
    InexactSquareRoot,
    NonlinearSystem,
    DegreeBlowup,
    StepRejected,
    NotConserved,
    NonQuantizedResidual,
)


def _sigma_option(text: str) -> SigmaSpec:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("sigma must be three comma-separated values")
    try:
        return SigmaSpec.of(tuple(parse_coefficient(p) for p in parts))
    except ParseError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _spec_from(args) -> ProductSpec:
    return ProductSpec(
        sigma_c=getattr(args, "sigma", None) or SigmaSpec(),
        sigma_q=getattr(args, "sigma_q", None) or SigmaSpec(),
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qcphase",
        description="Hybrid quantum-classical brackets, consistency checks "
        "and Heisenberg-picture simulation on phase space.",
    )
    parser.add_argument("--version", action="version", version=f"qcphase {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_sigma(p, q_sector=True):
        p.add_argument(
            "--sigma",
            type=_sigma_option,
            default=None,
            metavar="a,b,c",
            help="C-sector scheme constants (default 0,0,0)",
        )
        if q_sector:
            p.add_argument(
                "--sigma-q",
                dest="sigma_q",
                type=_sigma_option,
                default=None,
                metavar="a,b,c",
                help="Q-sector star scheme constants (default 0,0,0)",
            )

    p = sub.add_parser("bracket", help="hybrid bracket of two expressions, all forms")
    p.add_argument("u")
    p.add_argument("v")
    add_sigma(p)
    p.set_defaults(func=cmd_bracket)

    p = sub.add_parser("star", help="Q-sector star product")
    p.add_argument("u")
    p.add_argument("v")
    add_sigma(p)
    p.set_defaults(func=cmd_star)

    p = sub.add_parser("ast", help="C-sector composition product")
    p.add_argument("u")
    p.add_argument("v")
    add_sigma(p, q_sector=False)
    p.set_defaults(func=cmd_ast)

    p = sub.add_parser("check", help="consistency checks")
    p.add_argument("what", choices=("jacobi", "leibniz", "assoc", "reduction"))
    p.add_argument("exprs", nargs="*", metavar="expr")
    add_sigma(p)
    p.add_argument("--product", default="ast", choices=sorted(associativity_products()),
                   help="product for assoc checks (default ast)")
    p.add_argument("--trials", type=int, default=25)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("certify", help="certify a C-sector span as associative")
    p.add_argument("--generators", nargs="+", required=True, metavar="expr")
    p.add_argument("--sigma", type=_sigma_option, default=None, metavar="a,b,c")
    p.add_argument("--max-degree", type=int, default=4)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("kappa", help="closed-form minimal-subalgebra members")
    p.add_argument("--sigma", type=_sigma_option, required=True, metavar="a,b,c")
    p.set_defaults(func=cmd_kappa)

    p = sub.add_parser("nogo-scan", help="associator witnesses over a scheme grid")
    p.add_argument(
        "--grid",
        default="cube",
        help="'cube' for {-1,0,1}^3 or semicolon-separated triples 'a,b,c;a,b,c'",
    )
    p.add_argument("--degree", type=int, default=4)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_nogo)

    p = sub.add_parser("simulate", help="run a configured simulation")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir", default=None)
    p.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    p.set_defaults(func=cmd_simulate)
    return parser


def cmd_bracket(args) -> int:
    spec = _spec_from(args)
    u, v = parse(args.u), parse(args.v)
    forms = {name: hybrid_bracket(u, v, spec, form=name) for name in ("F1", "F2", "F3")}
    decomposition = v.sector_decompose()
    if len(decomposition) == 1:
        forms["F4"] = hybrid_bracket(u, decomposition[0], spec, form="F4")
    print(f"result: {format_expression(forms['F3'])}")
    for name in BRACKET_FORMS:
        value = forms.get(name)
        line = "n/a (v is not a single pure product)" if value is None else format_expression(value)
        print(f"{name}: {line}")
    agree = len({format_expression(e) for e in forms.values()}) == 1
    print(f"forms agree: {'true' if agree else 'false'}")
    return EXIT_OK


def cmd_star(args) -> int:
    spec = _spec_from(args)
    print(format_expression(star_product(parse(args.u), parse(args.v), spec)))
    return EXIT_OK


def cmd_ast(args) -> int:
    sigma = args.sigma or SigmaSpec()
    print(format_expression(composition_product(parse(args.u), parse(args.v), sigma)))
    return EXIT_OK


def _need_exprs(args, count: int) -> list:
    if len(args.exprs) != count:
        raise ConfigError(
            f"check {args.what} needs exactly {count} expression argument(s), "
            f"got {len(args.exprs)}"
        )
    return [parse(text) for text in args.exprs]


def cmd_check(args) -> int:
    spec = _spec_from(args)
    sigma = spec.sigma_c
    if args.what == "reduction":
        if args.exprs:
            raise ConfigError("check reduction takes no expression arguments")
        report = check_reduction(spec, trials=args.trials, seed=args.seed)
        print(f"sigma: {sigma}")
        print(f"identities hold: {'true' if report.is_zero else 'false'}")
        if not report.is_zero:
            print(f"witness: {report.witness}")
            print(f"residual: {format_expression(report.residual)}")
        return EXIT_OK
    u, v, w = _need_exprs(args, 3)
    if args.what == "assoc":
        product = associativity_products()[args.product]
        residual = product(u, v, w, spec)
        print(f"product: {args.product}")
        print(f"sigma: {sigma}")
        print(f"residual: {format_expression(residual)}")
        print(f"verdict: {'zero' if residual.is_zero else 'nonzero'}")
        return EXIT_OK
    if args.what == "jacobi":
        report = jacobi_residual(u, v, w, spec)
        print(f"sigma: {sigma}")
        print(f"residual: {format_expression(report.residual)}")
        print(f"verdict: {'zero' if report.is_zero else 'nonzero'}")
        return EXIT_OK
    hybrid = leibniz_residual(u, v, w, spec)
    pointwise = leibniz_pointwise_residual(u, v, w, spec)
    print(f"sigma: {sigma}")
    print(f"hybrid-product rule residual: {format_expression(hybrid.residual)}")
    print(f"hybrid-product rule verdict: {'zero' if hybrid.is_zero else 'nonzero'}")
    print(f"pointwise rule residual: {format_expression(pointwise.residual)}")
    print(f"pointwise rule verdict: {'zero' if pointwise.is_zero else 'nonzero'}")
    return EXIT_OK


def cmd_certify(args) -> int:
    sigma = args.sigma or SigmaSpec()
    generators = [parse(text) for text in args.generators]
    cert = certify_subalgebra(generators, sigma, args.max_degree)
    print(f"sigma: {sigma}")
    print(f"max degree: {cert.max_degree}")
    print(f"basis size: {len(cert.basis)}")
    print(f"verdict: {cert.verdict}")
    if cert.witness is not None:
        u, v, w = cert.witness
        print(
            "witness: ("
            f"{format_expression(u)}, {format_expression(v)}, {format_expression(w)})"
        )
    return EXIT_OK


def cmd_kappa(args) -> int:
    candidates = kappa_linear(args.sigma)
    print(f"sigma: {args.sigma}")
    for k in candidates:
        report = minimal_membership(k, args.sigma)
        status = "zero" if report.is_zero else "nonzero"
        print(f"kappa: {format_expression(k)} (membership residual {status})")
    return EXIT_OK


def cmd_nogo(args) -> int:
    if args.grid == "cube":
        grid = None
    else:
        try:
            grid = [_sigma_option(part) for part in args.grid.split(";") if part]
        except argparse.ArgumentTypeError as exc:
            raise ConfigError(f"bad --grid value: {exc}") from exc
        if not grid:
            raise ConfigError("--grid lists no schemes")
    try:
        results = nogo_scan(grid, trial_degree=args.degree, trials=args.trials, seed=args.seed)
    except WitnessNotFound as exc:
        for sigma, (u, v, w), a in exc.found:
            _print_witness(sigma, u, v, w, a)
        for sigma in exc.missing:
            print(f"sigma {sigma}: no witness found within budget")
        raise
    for sigma, (u, v, w), a in results:
        _print_witness(sigma, u, v, w, a)
    print(f"witnesses found: {len(results)}/{len(results)}")
    return EXIT_OK


def _print_witness(sigma, u, v, w, a) -> None:
    print(
        f"sigma {sigma}: witness ({format_expression(u)}, {format_expression(v)}, "
        f"{format_expression(w)}) associator {format_expression(a)}"
    )


# -- simulate -----------------------------------------------------------------

_TOLERANCE_KEYS = {
    "rk4_dt": 1e-3,
    "rk4_check_tol": None,
    "taylor_order": 8,
    "degree_cap": 12,
    "squaring_threshold": 0.5,
    "audit_tol": 1e-9,
    "energy_tol": 1e-8,
}

_OUTPUT_KEYS = {
    "csv": "timeseries.csv",
    "summary": "summary.json",
    "figures_dir": "figures",
    "backreaction_csv": "backreaction.csv",
}


def _reject_unknown(section: dict, allowed, where: str) -> None:
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _exact_triple(value, where: str) -> SigmaSpec:
    if not isinstance(value, list) or len(value) != 3:
        raise ConfigError(f"{where} must be a list of three values")
    out = []
    for item in value:
        if isinstance(item, bool) or isinstance(item, float):
            raise ConfigError(
                f"{where} entries must be integers or exact strings like '1/2'"
            )
        if isinstance(item, int):
            out.append(item)
        elif isinstance(item, str):
            out.append(parse_coefficient(item))
        else:
            raise ConfigError(f"{where} entry {item!r} is not an exact constant")
    return SigmaSpec.of(tuple(out))


def load_config(path: str) -> dict:
    """Load and validate a run configuration; unknown keys are rejected."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    allowed = {
        "sigma_c", "sigma_q", "system", "state", "time", "method", "hbar",
        "observables", "seed", "tolerances", "output", "backreaction",
    }
    _reject_unknown(raw, allowed, "config")
    for key in ("sigma_c", "system", "state", "time", "method", "observables"):
        if key not in raw:
            raise ConfigError(f"config is missing required key {key!r}")

    cfg: dict = {"raw": raw}
    cfg["spec"] = ProductSpec(
        _exact_triple(raw["sigma_c"], "sigma_c"),
        _exact_triple(raw["sigma_q"], "sigma_q") if "sigma_q" in raw else SigmaSpec(),
    )

    system = raw["system"]
    _reject_unknown(system, ("h_q", "h_c", "h_i"), "system")
    try:
        parts = {key: parse(system.get(key, "0")) for key in ("h_q", "h_c", "h_i")}
    except ParseError as exc:
        raise ConfigError(f"bad Hamiltonian expression: {exc}") from exc
    try:
        cfg["system"] = HybridSystem(parts["h_q"], parts["h_c"], parts["h_i"], cfg["spec"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    state = raw["state"]
    _reject_unknown(state, ("mean_q", "cov_q", "mean_c", "cov_c"), "state")
    try:
        cfg["state"] = GaussianState(
            state["mean_q"], state["cov_q"], state["mean_c"], state["cov_c"]
        )
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad state block: {exc}") from exc

    time = raw["time"]
    _reject_unknown(time, ("t_max", "steps"), "time")
    t_max = float(time.get("t_max", 0.0))
    steps = int(time.get("steps", 0))
    if t_max <= 0 or steps < 1:
        raise ConfigError("time block needs t_max > 0 and steps >= 1")
    cfg["t_grid"] = np.linspace(0.0, t_max, steps + 1)

    method = raw["method"]
    if method not in ("matrix_exponential", "rk4", "taylor"):
        raise ConfigError(f"unknown method {method!r}")
    cfg["method"] = method

    hbar = raw.get("hbar", 1.0)
    if not isinstance(hbar, (int, float)) or isinstance(hbar, bool) or hbar <= 0:
        raise ConfigError("hbar must be a positive number")
    cfg["hbar"] = float(hbar)

    observables = raw["observables"]
    if not isinstance(observables, list) or not observables:
        raise ConfigError("observables must be a non-empty list of expressions")
    try:
        cfg["observables"] = [(text, parse(text)) for text in observables]
    except ParseError as exc:
        raise ConfigError(f"bad observable: {exc}") from exc
    known = set(cfg["system"].canonical_variables)
    for text, obs in cfg["observables"]:
        stray = sorted(v.name for v in obs.variables() if v not in known)
        if stray:
            raise ConfigError(
                f"observable {text!r} uses variable(s) {', '.join(stray)} "
                "absent from the Hamiltonian"
            )

    cfg["seed"] = int(raw.get("seed", 0))

    tolerances = dict(_TOLERANCE_KEYS)
    got = raw.get("tolerances", {})
    _reject_unknown(got, _TOLERANCE_KEYS, "tolerances")
    tolerances.update(got)
    cfg["tolerances"] = tolerances

    output = dict(_OUTPUT_KEYS)
    got = raw.get("output", {})
    _reject_unknown(got, _OUTPUT_KEYS, "output")
    output.update(got)
    cfg["output"] = output

    backreaction = raw.get("backreaction", False)
    if not isinstance(backreaction, bool):
        raise ConfigError("backreaction must be a boolean")
    cfg["backreaction"] = backreaction
    return cfg


def _format_float(x: float) -> str:
    return repr(float(x))


def _format_cell(value: complex, force_real: bool) -> str:
    if force_real or value.imag == 0.0:
        return _format_float(value.real)
    sign = "+" if value.imag >= 0 else "-"
    return f"{_format_float(value.real)}{sign}{_format_float(abs(value.imag))}i"


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    out_dir = args.output_dir or "."
    os.makedirs(out_dir, exist_ok=True)

    sys_ = cfg["system"]
    state = cfg["state"]
    hbar = cfg["hbar"]
    tol = cfg["tolerances"]
    warnings_list = state.uncertainty_warnings(hbar)

    traj = propagate(
        sys_,
        cfg["t_grid"],
        cfg["method"],
        rk4_dt=tol["rk4_dt"],
        rk4_check_tol=tol["rk4_check_tol"],
        taylor_order=int(tol["taylor_order"]),
        degree_cap=int(tol["degree_cap"]),
        squaring_threshold=tol["squaring_threshold"],
    )

    real_traj = traj.maps is None or not np.iscomplexobj(traj.maps)
    obs_real = {
        text: obs.split_re_im()[1].is_zero and real_traj
        for text, obs in cfg["observables"]
    }

    energy = []
    audits = []
    columns: dict = {text: [] for text, _obs in cfg["observables"]}
    for t in traj.times:
        for text, obs in cfg["observables"]:
            columns[text].append(expectation(obs, traj, state, t, hbar))
        audits.append(canonical_audit(traj, sys_, t, hbar))
        energy.append(expectation(sys_.hamiltonian, traj, state, t, hbar).real)
    energy = np.array(energy)
    hybrid_dev = np.array([a.hybrid for a in audits])
    poisson_dev = np.array([a.poisson_only for a in audits])
    moyal_dev = np.array([a.moyal_only for a in audits])

    csv_path = os.path.join(out_dir, cfg["output"]["csv"])
    headers = ["t", *columns.keys(), "audit_max_abs_dev", "energy"]
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(headers)
        for k, t in enumerate(traj.times):
            row = [_format_float(t)]
            for text in columns:
                row.append(_format_cell(columns[text][k], obs_real[text]))
            row.append(_format_float(hybrid_dev[k]))
            row.append(_format_float(energy[k]))
            writer.writerow(row)

    energy_drift = float(np.max(np.abs(energy - energy[0])))
    summary = {
        "command": "simulate",
        "config": cfg["raw"],
        "versions": {"qcphase": __version__, "numpy": np.__version__},
        "tolerances": {k: v for k, v in tol.items()},
        "verdicts": {
            "unconsistent_hybrid": sys_.unconsistent_hybrid,
            "hybrid_audit_max": float(hybrid_dev.max()),
            "hybrid_audit_within_tol": bool(hybrid_dev.max() <= tol["audit_tol"]),
            "poisson_audit_max": float(poisson_dev.max()),
            "moyal_audit_max": float(moyal_dev.max()),
            "energy_drift": energy_drift,
            "energy_within_tol": bool(energy_drift <= tol["energy_tol"]),
        },
        "uncertainty_warnings": warnings_list,
    }

    backreaction = None
    if cfg["backreaction"]:
        backreaction = backreaction_report(
            sys_, state, cfg["t_grid"], cfg["method"], hbar,
            rk4_dt=tol["rk4_dt"],
            taylor_order=int(tol["taylor_order"]),
            degree_cap=int(tol["degree_cap"]),
            squaring_threshold=tol["squaring_threshold"],
        )
        br_path = os.path.join(out_dir, cfg["output"]["backreaction_csv"])
        br_columns = [
            "t", "mean_qC", "mean_pC", "var_qC", "var_pC", "cov_qCpC",
            "baseline_mean_qC", "baseline_mean_pC", "baseline_var_qC",
            "baseline_var_pC", "energy_q", "energy_c", "energy_i",
            "energy_total", "dHI_dt_bracket", "dHI_dt_fd",
        ]
        with open(br_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(br_columns)
            for k, t in enumerate(backreaction["times"]):
                writer.writerow(
                    [_format_float(t)]
                    + [_format_float(backreaction[c][k]) for c in br_columns[1:]]
                )
        summary["verdicts"]["backreaction_energy_drift"] = backreaction["energy_drift"]
        print(f"wrote {br_path}")

    summary_path = os.path.join(out_dir, cfg["output"]["summary"])
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")

    print(f"wrote {csv_path}")
    print(f"wrote {summary_path}")

    if not args.no_figures:
        from . import plotting

        figures_dir = os.path.join(out_dir, cfg["output"]["figures_dir"])
        os.makedirs(figures_dir, exist_ok=True)
        paths = [
            plotting.render_observables(
                traj.times,
                {text: np.array([v.real for v in values]) for text, values in columns.items()},
                figures_dir,
            ),
            plotting.render_audits(traj.times, hybrid_dev, poisson_dev, moyal_dev, figures_dir),
            plotting.render_energy(traj.times, {"<H>": energy}, figures_dir),
        ]
        if backreaction is not None:
            paths.append(
                plotting.render_backreaction(backreaction["times"], backreaction, figures_dir)
            )
        for path in paths:
            print(f"wrote {path}")

    print(f"hybrid audit max deviation: {_format_float(hybrid_dev.max())}")
    print(f"energy drift: {_format_float(energy_drift)}")
    print(f"unconsistent_hybrid: {'true' if sys_.unconsistent_hybrid else 'false'}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _INPUT_ERRORS as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except _COMPUTE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())

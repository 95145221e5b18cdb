"""Command-line front end: ``superrad <experiment> [--config FILE] [overrides]``.

Exit codes: 0 success, 2 configuration error, 3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import records
from .config import ConfigError, EXPERIMENTS, load_file, resolve
from .dynamics import (AmplitudeState, DynamicsError, IntegratorSettings, markov_deviation,
                       solve_exact, solve_markov)
from .geometry import LatticeSpec, PairGeometry, build_lattice, separations
from .hamiltonian import Model, build_single_excitation, export_matrix
from .kernel import PhysicalParams, QuadratureError, QuadratureSettings, asymptotic_element, km_element
from .scaling import fit_power_law, lattice_for_side, norm_scan, rate_scan
from .spectra import SpectrumError, eigen_spectrum, rate_histogram

log = logging.getLogger("superrad")

RATE_UNITS = "rates and norms in units of gamma; lengths in cm; times in 1/gamma"


def _params(cfg):
    p = cfg["physics"]
    return PhysicalParams(gamma=p["gamma"], lambda_a=p["lambda_a"])


def _quadrature(cfg):
    return QuadratureSettings(**cfg["quadrature"])


def _template(cfg):
    lat = cfg["lattice"]
    return LatticeSpec(tuple(lat["dims"]), cfg["physics"]["d"], tuple(lat["dipole_dir"]))


def _models(cfg):
    if cfg["model"] == "both":
        return [Model.KM, Model.MEMORY_KERNEL]
    return [Model.parse(cfg["model"])]


def _comments(cfg, units=RATE_UNITS):
    return records.header_lines(cfg["experiment"], cfg, units)


def _fit_summary(label, fit):
    return {f"exponent_{label}": fit.exponent,
            f"exponent_stderr_{label}": fit.exponent_stderr,
            f"log_prefactor_{label}": fit.log_prefactor,
            f"rms_residual_{label}": fit.rms_residual,
            f"n_points_{label}": fit.n_points}


def run_norms(cfg):
    out = Path(cfg["output_dir"])
    params, q, template = _params(cfg), _quadrature(cfg), _template(cfg)
    planar = cfg["lattice"]["planar"]
    opts = cfg["norms"]
    series, summary = {}, {}
    for model in _models(cfg):
        sides = cfg["sweep"]
        cap = opts["kernel_cap"] if model is Model.MEMORY_KERNEL else None
        if cap is not None:
            kept = [s for s in sides if lattice_for_side(s, template, planar).n_qubits <= cap]
            if len(kept) < len(sides):
                log.info("kernel model: sweep truncated to N <= %d (sides %s)", cap, kept)
            sides = kept
        if not sides:
            raise ConfigError("norms.kernel_cap", "no side length fits under the kernel cap")
        s = norm_scan(sides, template, params, model, corner_only=opts["corner_only"],
                      planar=planar, include_diagonal=opts["include_diagonal"], q=q,
                      jobs=cfg["jobs"])
        series[model.value] = s
        if len(s) >= 3:
            summary.update(_fit_summary(model.value, fit_power_law(s)))
            # the other choice for the single-qubit term, reported for comparison
            shift = (-0.5 if opts["include_diagonal"] else 0.5) * params.gamma
            alt = type(s).from_arrays(s.n_qubits, s.values + shift, s.quantity)
            key = "without_diagonal" if opts["include_diagonal"] else "with_diagonal"
            summary[f"exponent_{key}_{model.value}"] = fit_power_law(alt).exponent
    records.write_series(out / "norms.csv", series, _comments(cfg), value_name="norm_sum")
    records.write_json(out / "fit.json", summary, cfg)
    return summary


def run_spectrum(cfg):
    out = Path(cfg["output_dir"])
    params, q, template = _params(cfg), _quadrature(cfg), _template(cfg)
    summary = {}
    for model in _models(cfg):
        for side in cfg["sweep"]:
            array = build_lattice(lattice_for_side(side, template, cfg["lattice"]["planar"]))
            h = build_single_excitation(array, params, model, q)
            spec = eigen_spectrum(h)
            hist = rate_histogram(spec, cfg["spectrum"]["n_bins"])
            tag = f"{model.value}_N{array.n_qubits}"
            records.write_spectrum(out / f"spectrum_{tag}.csv", spec, _comments(cfg))
            records.write_histogram(out / f"histogram_{tag}.csv", hist, _comments(cfg))
            if cfg["spectrum"]["export_matrix"]:
                export_matrix(h, out / f"matrix_{tag}.txt")
            total = math.fsum(spec.collective_rates.tolist())
            summary.update({
                f"largest_rate_{tag}": spec.largest_rate,
                f"min_abs_rate_{tag}": spec.min_abs_rate,
                f"superradiant_fraction_{tag}": spec.superradiant_fraction,
                f"width_{tag}": spec.width,
                f"rate_sum_relative_{tag}": abs(total) / (0.5 * params.gamma * array.n_qubits),
            })
    records.write_json(out / "summary.json", summary, cfg)
    return summary


def run_rates(cfg):
    out = Path(cfg["output_dir"])
    params, q, template = _params(cfg), _quadrature(cfg), _template(cfg)
    series, summary = {}, {}
    for model in _models(cfg):
        s = rate_scan(cfg["sweep"], template, params, model, q, max_n=cfg["rates"]["max_n"],
                      planar=cfg["lattice"]["planar"], jobs=cfg["jobs"])
        series[model.value] = s
        if len(s) >= 3:
            summary.update(_fit_summary(model.value, fit_power_law(s)))
    records.write_series(out / "rates.csv", series, _comments(cfg), value_name="largest_rate")
    records.write_json(out / "fit.json", summary, cfg)
    return summary


def _markov_settings(cfg, array, params):
    mk = cfg["markov"]
    dt = mk["dt"]
    if dt is None:
        limit = 1e-3
        if array.n_qubits > 1:
            r, _ = separations(array)
            limit = min(limit, 0.1 * params.gamma * float(r[r > 0].min()) / params.c_light)
        dt = mk["t_end"] / math.ceil(mk["t_end"] / limit * (1 - 1e-12))
    return IntegratorSettings(dt=dt, t_end=mk["t_end"], scheme_order=mk["scheme_order"])


def run_markov_check(cfg):
    out = Path(cfg["output_dir"])
    params, q = _params(cfg), _quadrature(cfg)
    array = build_lattice(_template(cfg))
    n = array.n_qubits
    init = cfg["markov"]["initial"]
    amps = np.zeros(n, dtype=complex) if init is None else np.asarray(init, dtype=complex)
    if init is None:
        amps[0] = 1.0
    initial = AmplitudeState(amps / np.linalg.norm(amps))
    settings = _markov_settings(cfg, array, params)
    try:
        exact = solve_exact(array, params, initial, settings, q)
    except DynamicsError as exc:
        raise ConfigError("markov", str(exc)) from None
    records.write_trajectory(out / "trajectory_exact.csv", exact, _comments(cfg))
    summary = {"dt": settings.dt, "n_steps": settings.n_steps}
    for i, model in enumerate(_models(cfg)):
        td = cfg["markov"]["time_dependent"] and model is Model.MEMORY_KERNEL
        markov = solve_markov(array, params, model, initial, settings, q, time_dependent=td)
        dev = markov_deviation(exact, markov)
        suffix = "" if len(_models(cfg)) == 1 or model is Model.MEMORY_KERNEL else f"_{model.value}"
        records.write_trajectory(out / f"trajectory_markov{suffix}.csv", markov, _comments(cfg))
        records.write_deviation(out / f"deviation{suffix}.csv", dev, _comments(cfg))
        summary[f"max_deviation_{model.value}"] = dev.peak
        summary[f"final_deviation_{model.value}"] = dev.final
    summary["final_norm_exact"] = float(exact.norms[-1])
    records.write_json(out / "summary.json", summary, cfg)
    return summary


def run_km_compare(cfg):
    out = Path(cfg["output_dir"])
    params, q = _params(cfg), _quadrature(cfg)
    rows = []
    for x in cfg["compare"]["x_values"]:
        for theta in cfg["compare"]["theta_deg"]:
            geom = PairGeometry(r=x / params.k_a, cos_theta=math.cos(math.radians(theta)))
            mem = asymptotic_element(geom, params, q)
            km = km_element(geom, params)
            ratio = abs(mem) / abs(km) if km != 0 else math.nan
            rows.append([x, theta, mem.real, mem.imag, km.real, km.imag, ratio])
    records.write_csv(out / "compare.csv",
                      ["x", "theta_deg", "re_kernel", "im_kernel", "re_km", "im_km", "ratio"],
                      rows, _comments(cfg, "elements in units of gamma; x = k_a r"))
    return {"rows": len(rows)}


RUNNERS = {
    "norms": run_norms,
    "spectrum": run_spectrum,
    "rates": run_rates,
    "markov-check": run_markov_check,
    "km-compare": run_km_compare,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="superrad", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", "-c", help="YAML or JSON experiment config")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config field, e.g. physics.d=15")
        p.add_argument("--model", choices=["kernel", "km", "both"])
        p.add_argument("--sides", help="side lengths, e.g. 2..20 or 2,4,8")
        p.add_argument("--d", type=float, help="qubit spacing (cm)")
        p.add_argument("--lambda-a", type=float, help="wavelength (cm)")
        p.add_argument("--gamma", type=float, help="single-atom decay rate (1/s)")
        p.add_argument("--planar", action="store_true", default=None, help="n x n x 1 lattices")
        p.add_argument("--output-dir", "-o")
        p.add_argument("--jobs", type=int, help="worker threads for sweep points")
        p.add_argument("--seed", type=int)
        p.add_argument("--verbose", "-v", action="store_true")
    return parser


def _flag_overrides(args):
    pairs = [("model", args.model), ("sweep", args.sides), ("physics.d", args.d),
             ("physics.lambda_a", args.lambda_a), ("physics.gamma", args.gamma),
             ("lattice.planar", args.planar), ("output_dir", args.output_dir),
             ("jobs", args.jobs), ("seed", args.seed)]
    out = []
    for key, value in pairs:
        if value is None:
            continue
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif key in ("sweep", "output_dir", "model"):
            value = json.dumps(value)
        out.append(f"{key}={value}")
    return out


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        data = load_file(args.config) if args.config else {}
        cfg = resolve(data, list(args.overrides) + _flag_overrides(args), args.experiment)
        summary = RUNNERS[args.experiment](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (QuadratureError, SpectrumError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    for key in sorted(summary):
        if key.startswith(("exponent_", "largest_rate_", "superradiant_fraction_", "max_deviation_")):
            print(f"{key} = {records.fmt(summary[key])}")
    print(f"wrote outputs to {cfg['output_dir']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

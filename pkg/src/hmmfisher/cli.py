"""Command-line entry point.

Subcommands map one-to-one onto the analyses: ``check`` (model assumptions
and constants), ``fisher`` (information scan and asymptotic estimate),
``prop1`` (conditional-information convergence sweep), ``forgetting``
(geometric bound suite), ``mle`` (asymptotic-normality experiment), and
``report`` (bundle an output directory into one index).

Every report carries the sha256 of the config file, the seed, and a
payload hash computed over everything except the timestamp, so reruns with
the same config and seed are byte-identical modulo that one field.

Exit codes: 0 success, 2 assumption failure, 3 capability mismatch,
4 precondition refusal, 64 usage or config errors.
"""

from __future__ import annotations

import argparse
import csv

import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import ergodicity, fisher, model as modelmod
from .errors import (AssumptionError, CapabilityError, HmmError,
                     ObservationError, ParameterBoxError, PreconditionError,
                     UnknownModelError)
from .estimation import normality_experiment, simulate_stationary_batch

EXIT_OK = 0
EXIT_ASSUMPTION = 2
EXIT_CAPABILITY = 3
EXIT_PRECONDITION = 4
EXIT_USAGE = 64

_FORGETTING_WINDOW_KEY = 8


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit(2); remap to 64
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="hmmfisher", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("check", "evaluate model assumptions and constants"),
        ("fisher", "information-matrix scan and asymptotic estimate"),
        ("prop1", "conditional-information convergence sweep"),
        ("forgetting", "geometric forgetting bound suite"),
        ("mle", "maximum-likelihood asymptotic-normality experiment"),
        ("report", "bundle reports in an output directory into one index"),
    ):
        cmd = sub.add_parser(name, help=helptext)
        if name != "report":
            cmd.add_argument("--config", required=True, help="JSON config path")
        cmd.add_argument("--out", default=".", help="output directory")
        cmd.add_argument("--seed", type=int, default=None,
                         help="RNG seed (required for stochastic commands)")
        cmd.add_argument("--workers", type=int, default=1,
                         help="max Monte Carlo worker threads")
    return parser


def _load_config(path: str) -> tuple[dict, bytes]:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    try:
        config = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        where = (f" at line {exc.lineno} column {exc.colno}"
                 if isinstance(exc, json.JSONDecodeError) else "")
        raise UsageError(f"config {path} is not valid JSON{where}: {exc}") from exc
    if not isinstance(config, dict):
        raise UsageError(f"config {path} must be a JSON object")
    return config, raw


def _model_section(config: dict) -> dict:
    section = config.get("model", {})
    if isinstance(section, str):
        section = {"name": section}
    if not isinstance(section, dict) or "name" not in section:
        raise UsageError('config needs a "model" section with a "name"')
    return section


def _model_from_config(config: dict):
    section = _model_section(config)
    theta = section.get("theta")
    hmm = modelmod.build_catalog_model(section["name"], theta=None)
    if theta is not None:
        hmm = hmm.with_theta(np.asarray(theta, dtype=float))
    return hmm


def _box_from_config(section: dict, center: np.ndarray):
    """Box for constants evaluation: explicit intervals, a radius, or the point."""
    spec = section.get("box")
    if spec is None:
        return modelmod.box_around(center, 0.0)
    if "intervals" in spec:
        return tuple((float(lo), float(hi)) for lo, hi in spec["intervals"])
    return modelmod.box_around(center, float(spec.get("radius", 0.0)))


def _require_seed(args) -> int:
    if args.seed is None:
        raise UsageError(f"--seed is required for the stochastic command "
                         f"{args.command!r}")
    if not (0 <= args.seed < 2 ** 64):
        raise UsageError("--seed must fit in an unsigned 64-bit integer")
    return int(args.seed)


def _canonical(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"),
                      allow_nan=False)


def _sanitize(obj):
    """Make payloads JSON-safe: finite floats, native types."""
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if np.isfinite(value) else repr(value)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _sanitize(obj.tolist())
    return obj


def _write_report(out_dir: Path, command: str, config_raw: bytes,
                  args, payload: dict, extra_files: dict | None = None) -> Path:
    payload = _sanitize(payload)
    doc = {
        "command": command,
        "config_sha256": hashlib.sha256(config_raw).hexdigest(),
        "seed": args.seed,
        "workers": args.workers,
        "payload": payload,
        "payload_sha256": hashlib.sha256(_canonical(payload).encode()).hexdigest(),
    }
    if extra_files:
        doc["files"] = sorted(extra_files)
    doc["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{command}_report.json"
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    return path


def _write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


# -- subcommands -----------------------------------------------------------------


def cmd_check(args) -> int:
    config, raw = _load_config(args.config)
    section_model = _model_section(config)
    # the check command diagnoses arbitrary parameter points (boundary or
    # worse), so the model stays at its catalog default and the requested
    # point only defines where the constants are evaluated
    hmm = modelmod.build_catalog_model(section_model["name"], theta=None)
    requested = np.asarray(section_model.get("theta", hmm.theta), dtype=float)
    section = config.get("check", {})
    grid = int(section.get("grid_per_dim", 3))
    box = _box_from_config(section_model, requested)
    report = modelmod.check_assumptions(hmm, box=box, grid_per_dim=grid)
    payload = {
        "model": hmm.name,
        "theta": requested.tolist(),
        "constants": {
            "sigma_minus": report.constants.sigma_minus,
            "sigma_plus": report.constants.sigma_plus,
            "rho": report.constants.rho,
            "b_plus": report.constants.b_plus,
        },
        "assumptions": report.assumptions,
        "passed": report.checked_pass,
    }
    _write_report(Path(args.out), "check", raw, args, payload)
    if not report.checked_pass:
        failed = [name for name, rec in report.assumptions.items()
                  if rec["holds"] is False]
        raise AssumptionError(
            f"model {hmm.name} fails checked assumptions: {', '.join(failed)}")
    return EXIT_OK


def cmd_fisher(args) -> int:
    config, raw = _load_config(args.config)
    hmm = _model_from_config(config)
    seed = _require_seed(args)
    section = config.get("fisher", {})
    estimator = section.get("estimator", "auto")
    if estimator not in ("auto", "exact", "monte-carlo"):
        raise UsageError(f"unknown fisher estimator {estimator!r}")
    if estimator == "exact":
        hmm.require_alphabet("exact information by enumeration")
    n_max = int(section.get("n_max", 6))
    scan = fisher.equivalence_scan(
        hmm, n_max=n_max, seed=seed,
        tau_rel=float(section.get("tau_rel", fisher.TAU_REL)),
        tau_abs=float(section.get("tau_abs", fisher.TAU_ABS)),
        mc_replicates=int(section.get("mc_replicates", 50_000)),
        asymptotic_horizon=int(section.get("asymptotic_horizon", 50_000)),
        workers=args.workers,
        max_sequences=(0 if estimator == "monte-carlo"
                       else int(section.get("max_sequences", fisher.MAX_SEQUENCES))))
    payload = scan.to_dict()
    payload["verdict"] = ("singular throughout" if scan.first_nonsingular is None
                          else f"nonsingular from horizon {scan.first_nonsingular}")
    payload["asymptotic_lambda_min"] = float(scan.asymptotic_report.eigenvalues[0])
    payload["terminal_null_basis"] = scan.reports[-1].null_basis.tolist()
    _write_report(Path(args.out), "fisher", raw, args, payload)
    return EXIT_OK


def cmd_prop1(args) -> int:
    config, raw = _load_config(args.config)
    hmm = _model_from_config(config)
    seed = _require_seed(args)
    section = config.get("prop1", {})
    sweep = fisher.proposition1_sweep(
        hmm,
        n=int(section.get("n", 2)),
        k_grid=section.get("k_grid", (1, 2, 4, 8, 16, 32)),
        m_grid=section.get("m_grid", (0, 5, 20)),
        replicates=int(section.get("replicates", 50_000)),
        seed=seed, workers=args.workers)
    out = Path(args.out)
    csv_path = out / "prop1_cells.csv"
    _write_csv(csv_path, ["k", "m", "gap", "stderr"],
               [(c.k, c.m, c.gap, c.stderr) for c in sweep.cells])
    _write_report(out, "prop1", raw, args, sweep.to_dict(),
                  extra_files={csv_path.name})
    return EXIT_OK


def cmd_forgetting(args) -> int:
    config, raw = _load_config(args.config)
    hmm = _model_from_config(config)
    seed = _require_seed(args)
    section = config.get("forgetting", {})
    windows = int(section.get("windows", 20))
    length = int(section.get("window_length", 25))
    k_max = int(section.get("k_max", min(20, length - 1)))
    grad_len = int(section.get("grad_window_length", 6))
    grad_kmax = int(section.get("grad_k_max", 15))
    trials = int(section.get("trials", 200))

    Y = simulate_stationary_batch(hmm, length, seed, first_replicate=0,
                                  count=windows,
                                  key_prefix=(_FORGETTING_WINDOW_KEY,))
    post_lhs = np.zeros(k_max + 1)
    lik_lhs = np.zeros(k_max + 1)
    post_rhs = lik_rhs = None
    post_pass = lik_pass = True
    for i in range(windows):
        post = ergodicity.posterior_forgetting_check(hmm, Y[i], k_max=k_max)
        lik = ergodicity.likelihood_forgetting_check(hmm, Y[i], k_max=k_max)
        post_lhs = np.maximum(post_lhs, post.lhs)
        lik_lhs = np.maximum(lik_lhs, lik.lhs)
        post_rhs, lik_rhs = post.rhs, lik.rhs
        post_pass &= post.passed
        lik_pass &= lik.passed
    grad = ergodicity.gradient_forgetting_fit(
        hmm, Y[0][:grad_len], k_grid=range(grad_kmax + 1))
    static = ergodicity.static_bounds_check(hmm, trials=trials, seed=seed)

    out = Path(args.out)
    files = {}
    for stem, ks, lhs, envelope in (
        ("forgetting_posterior", np.arange(k_max + 1), post_lhs, post_rhs),
        ("forgetting_likelihood", np.arange(k_max + 1), lik_lhs, lik_rhs),
        ("forgetting_gradient", grad.k_values, grad.lhs,
         grad.lhs[0] * grad.envelope_rate ** grad.k_values.astype(float)),
    ):
        path = out / f"{stem}.csv"
        _write_csv(path, ["k", "lhs", "envelope"], zip(ks.tolist(), lhs, envelope))
        files[path.name] = path
    static_path = out / "bounds_static.csv"
    _write_csv(static_path, ["bound", "trial", "lhs", "rhs"],
               [(res.bound_name, int(t), l, r)
                for res in static
                for t, l, r in zip(res.k_values, res.lhs, res.rhs)])
    files[static_path.name] = static_path

    payload = {
        "model": hmm.name,
        "windows": windows,
        "window_length": length,
        "posterior": {"max_lhs": post_lhs.tolist(), "envelope": post_rhs.tolist(),
                      "passed": bool(post_pass)},
        "likelihood": {"max_lhs": lik_lhs.tolist(), "envelope": lik_rhs.tolist(),
                       "passed": bool(lik_pass)},
        "gradient": grad.to_dict(),
        "static": [res.to_dict() for res in static],
        "passed": bool(post_pass and lik_pass and grad.passed
                       and all(res.passed for res in static)),
    }
    _write_report(out, "forgetting", raw, args, payload, extra_files=set(files))
    return EXIT_OK


def cmd_mle(args) -> int:
    config, raw = _load_config(args.config)
    hmm = _model_from_config(config)
    seed = _require_seed(args)
    section = config.get("mle", {})
    report = normality_experiment(
        hmm,
        n=int(section.get("n", 2000)),
        replicates=int(section.get("replicates", 500)),
        seed=seed, workers=args.workers)
    out = Path(args.out)
    csv_path = out / "mle_replicates.csv"
    _write_csv(csv_path,
               ["replicate"] + [f"theta_hat_{i}" for i in range(hmm.param_dim)]
               + ["converged"],
               [(r, *report.theta_hats[r].tolist(), bool(report.converged[r]))
                for r in range(report.replicates)])
    payload = {
        "model": hmm.name,
        "n_obs": report.n_obs,
        "replicates": report.replicates,
        "excluded": report.excluded,
        "excluded_fraction": report.excluded_fraction,
        "theta_star": report.theta_star.tolist(),
        "covariance_empirical": report.covariance_empirical.tolist(),
        "covariance_reference": report.covariance_reference.tolist(),
        "frobenius_rel_error": report.frobenius_rel_error,
        "coverage": report.coverage.tolist(),
        "theta_hats": report.theta_hats.tolist(),
    }
    _write_report(out, "mle", raw, args, payload, extra_files={csv_path.name})
    return EXIT_OK


def cmd_report(args) -> int:
    out = Path(args.out)
    if not out.is_dir():
        raise UsageError(f"--out {out} is not a directory")
    index = {}
    for path in sorted(out.glob("*_report.json")):
        doc = json.loads(path.read_text())
        index[doc.get("command", path.stem)] = {
            "file": path.name,
            "config_sha256": doc.get("config_sha256"),
            "seed": doc.get("seed"),
            "payload_sha256": doc.get("payload_sha256"),
        }
    if not index:
        raise UsageError(f"no *_report.json files found in {out}")
    doc = {"reports": index,
           "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())}
    (out / "report_index.json").write_text(
        json.dumps(doc, sort_keys=True, indent=2) + "\n")
    return EXIT_OK


_COMMANDS = {
    "check": cmd_check,
    "fisher": cmd_fisher,
    "prop1": cmd_prop1,
    "forgetting": cmd_forgetting,
    "mle": cmd_mle,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.workers < 1:
            raise UsageError("--workers must be >= 1")
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UnknownModelError,) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (AssumptionError, ParameterBoxError) as exc:
        print(f"assumption failure: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except CapabilityError as exc:
        print(f"capability mismatch: {exc}", file=sys.stderr)
        return EXIT_CAPABILITY
    except (PreconditionError, ObservationError) as exc:
        print(f"precondition refusal: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except HmmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION


if __name__ == "__main__":
    sys.exit(main())

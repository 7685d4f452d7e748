"""
obsvkit command-line interface

Commands:
- analyze:  observability, decomposition and functional-observability report (JSON)
- design:   certified sampling schedule for a target (sampling JSON + certificate)
- estimate: sliding-window least-squares run written as CSV, summary JSON on stdout
- repro:    end-to-end reproduction of the reference counterexample and example

Exit codes:
    0  success
    1  reproduction mismatch
    2  schema or input error
    3  numerical inconsistency
    4  design failure
    5  missing certificate
    6  rank-deficient regressor
    64 usage error
"""

import argparse
import json
import logging
import os
import sys
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

import core_linalg as la
import obsvkit_config as config
import reference_systems as refs
from functional_observability import (
    StructuredQ,
    condition_ii,
    condition_iii,
    find_structured_Q,
    functional_report,
    is_sample_based_functionally_observable,
    jordan_data,
    structured_q_residual,
    verify_structured_Q,
)
from least_squares_estimator import simulate_run, steady_state_error, write_run_csv
from obsvkit_errors import (
    DesignFailure,
    MissingCertificate,
    NumericalInconsistency,
    ObsvkitError,
    RankDeficientRegressor,
)
from observability import (
    check_null_space_guarantee,
    is_sample_based_observable,
    observability_matrix,
    observable_decomposition,
    sampled_observability_matrix,
)
from sampling_design import TARGETS, design_for_target, pathological_periods, uniform_rank_loss
from system_model import LtiSystem, SamplingSequence, parse_sampling, parse_system

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_REPRO_MISMATCH = 1
EXIT_SCHEMA = 2
EXIT_NUMERICAL = 3
EXIT_DESIGN = 4
EXIT_CERTIFICATE = 5
EXIT_REGRESSOR = 6
EXIT_USAGE = 64


class UsageErrorParser(argparse.ArgumentParser):
    """ArgumentParser that exits with 64 on usage errors."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# I/O helpers
# ---------------------------------------------------------------------------

def _jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        if np.iscomplexobj(value):
            return [[_jsonable(x) for x in row] for row in np.atleast_2d(value)]
        return value.tolist()
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    raise TypeError(f"not JSON serialisable: {type(value).__name__}")


def dumps(document: Any) -> str:
    """Deterministic JSON: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(document, default=_jsonable, sort_keys=True, indent=2) + "\n"


def _write_text(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)


def _read_json(path: str) -> Any:
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)


def load_system(path: str) -> LtiSystem:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_system(handle.read())


def load_sampling(path: str, sys_: LtiSystem) -> SamplingSequence:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_sampling(handle.read(), sys_.domain)


def _parse_vector(text: Optional[str], n: int, name: str) -> Optional[np.ndarray]:
    if text is None:
        return None
    try:
        values = json.loads(text) if text.strip().startswith("[") else [float(x) for x in text.split(",")]
        vector = np.asarray(values, dtype=float).reshape(-1)
    except (ValueError, TypeError) as e:
        raise ValueError(f"{name}: cannot parse {text!r} ({e})")
    if vector.shape != (n,) or not np.all(np.isfinite(vector)):
        raise ValueError(f"{name}: expected {n} finite numbers")
    return vector


def certificate_from_report(report: Dict[str, Any], target: str) -> Any:
    """Pull the certificate a relaxed target needs out of an analyze report."""
    try:
        certificates = (report.get("functional") or {}).get("certificates") or {}
        if target == "functional_via_C":
            alpha = certificates.get("rowspace_alpha")
            return None if alpha is None else np.asarray(alpha, dtype=float)
        structured = certificates.get("structured_q")
        if structured is None:
            return None
        q_doc = structured["Q"]
        Q = StructuredQ(tuple(q_doc["block_sizes"]),
                        tuple(tuple(complex(re, im) for re, im in block) for block in q_doc["coefficients"]))
        return np.asarray(structured["alpha"], dtype=float), Q
    except (AttributeError, KeyError, TypeError, ValueError) as e:
        raise MissingCertificate(f"cannot read a certificate from the report ({e})")


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

def _counterexample_style_ranks(sys_: LtiSystem, seq: SamplingSequence, tol: Optional[float]) -> Dict[str, Any]:
    F = sys_.F
    O_s = sampled_observability_matrix(sys_, sys_.C, seq)
    ranks = {"O_s": la.rank_of(O_s, tol=tol).to_dict()}
    if F is not None:
        ranks["O_s|F"] = la.rank_of(np.vstack([O_s, F]), tol=tol).to_dict()
        ranks["O_s|O_s(A,F)"] = la.rank_of(np.vstack([O_s, sampled_observability_matrix(sys_, F, seq)]), tol=tol).to_dict()
        ranks["O_s|O(A,F)"] = la.rank_of(np.vstack([O_s, observability_matrix(sys_.A, F)]), tol=tol).to_dict()
    return ranks


def analyze(sys_: LtiSystem, seq: Optional[SamplingSequence] = None, tol: Optional[float] = None,
            seed: int = config.DEFAULT_SEED) -> Tuple[Dict[str, Any], bool]:
    """
    Build the analyze report.

    Returns:
        (report, consistent) where consistent is False when two tests that
        must agree disagreed numerically
    """
    decomp = observable_decomposition(sys_.A, sys_.C, tol=tol)
    rtol = config.rank_rtol_override()
    report: Dict[str, Any] = {
        "system": {"domain": sys_.domain.value, "n": sys_.n, "m": sys_.m, "q": sys_.q, "r": sys_.r},
        "tolerance": {
            "absolute": tol,
            "relative_override": rtol,
            "note": "rank thresholds are numerical choices; each rank carries its singular values and threshold",
        },
        "eigenstructure": la.eigenstructure(sys_.A).to_dict(),
        "classical": {
            "observability_rank": decomp.rank_result.to_dict(),
            "observable": decomp.p == 0,
            "decomposition": decomp.summary(),
        },
    }
    consistent = True
    if sys_.F is not None:
        functional = functional_report(sys_, seq=seq, tol=tol, seed=seed)
        report["functional"] = functional.to_dict()
        consistent = functional.consistent
    if seq is not None:
        observable, rank = is_sample_based_observable(sys_, seq, tol=tol)
        sampled: Dict[str, Any] = {
            "times": list(seq.times),
            "sample_based_observable": observable,
            "observability_rank": rank.to_dict(),
            "null_space_guarantee": check_null_space_guarantee(sys_, seq, tol=tol).to_dict(),
            "ranks": _counterexample_style_ranks(sys_, seq, tol),
        }
        if sys_.F is not None:
            holds = report["functional"]["sampled"]["functionally_observable"]
            sampled["verdict"] = ("sample-based functionally observable" if holds
                                  else "not sample-based functionally observable")
        report["sampled"] = sampled
    return report, consistent


def cmd_analyze(args: argparse.Namespace) -> int:
    sys_ = load_system(args.system)
    seq = load_sampling(args.sampling, sys_) if args.sampling else None
    report, consistent = analyze(sys_, seq, tol=args.tol, seed=args.seed)
    _write_text(args.out, dumps(report))
    if not consistent:
        print("numerical inconsistency: see diagnostics in the report", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


# ---------------------------------------------------------------------------
# design / estimate
# ---------------------------------------------------------------------------

def cmd_design(args: argparse.Namespace) -> int:
    sys_ = load_system(args.system)
    certificate = None
    if args.certificate:
        certificate = certificate_from_report(_read_json(args.certificate), args.target)
    design = design_for_target(sys_, target=args.target, T=args.T, k=args.k, seed=args.seed,
                               strategy=args.strategy, s_max=args.s_max, certificate=certificate,
                               tol=args.tol)
    _write_text(args.out, dumps(design.to_dict()))
    return EXIT_OK


def cmd_estimate(args: argparse.Namespace) -> int:
    sys_ = load_system(args.system)
    seq = load_sampling(args.sampling, sys_)
    x0 = _parse_vector(args.x0, sys_.n, "--x0")
    x0 = config.default_initial_state(sys_.n) if x0 is None else x0
    prior = _parse_vector(args.prior, sys_.n, "--prior")
    certificate = None
    if args.mode == "reduced":
        if not args.certificate:
            raise MissingCertificate("reduced mode needs --certificate (an analyze report); run analyze first")
        report = _read_json(args.certificate)
        certificate = certificate_from_report(report, "functional_via_C")
        if certificate is None:
            certificate = certificate_from_report(report, "functional_via_Q")
        if certificate is None:
            raise MissingCertificate("the analyze report carries no certificate for the reduced estimator")
    window = args.window
    if window is None:
        F = sys_.require_F()
        decomp = observable_decomposition(sys_.A, F if args.mode == "reduced" else sys_.C)
        window = max(1, decomp.n_ob)
    run = simulate_run(sys_, x0, seq, window, noise_bound=args.noise, seed=args.seed, horizon=args.horizon,
                       mode=args.mode, certificate=certificate, prior=prior)
    write_run_csv(run, args.out)
    summary = run.summary()
    summary["steady_state_error"] = steady_state_error(run) if run.post_window_errors().size else None
    sys.stdout.write(dumps(summary))
    return EXIT_OK


# ---------------------------------------------------------------------------
# repro
# ---------------------------------------------------------------------------

def _check(checks: List[Dict[str, Any]], name: str, passed: bool, **details: Any) -> None:
    checks.append({"check": name, "passed": bool(passed), **details})
    if not passed:
        logger.warning("Reproduction check failed: %s %s", name, details)


def repro_counterexample(out_dir: str) -> bool:
    sys_ = refs.counterexample_system()
    checks: List[Dict[str, Any]] = []
    for name, times in refs.COUNTEREXAMPLE_SCHEDULES.items():
        seq = refs.counterexample_schedule(name)
        ranks = {key: value["rank"] for key, value in _counterexample_style_ranks(sys_, seq, None).items()}
        expected = refs.COUNTEREXAMPLE_RANKS[name]
        _check(checks, f"ranks {list(times)}", ranks == expected, expected=expected, actual=ranks)

    irregular = refs.counterexample_schedule("irregular")
    pathological = refs.counterexample_schedule("pathological")
    _check(checks, "condition iii holds without condition ii on the irregular schedule",
           condition_iii(sys_, None, irregular)[0] and not condition_ii(sys_, None, irregular)[0])
    _check(checks, "condition ii holds without condition iii on the pathological schedule",
           condition_ii(sys_, None, pathological)[0] and not condition_iii(sys_, None, pathological)[0])
    _check(checks, "neither schedule is sample-based functionally observable",
           not is_sample_based_functionally_observable(sys_, None, irregular)[0]
           and not is_sample_based_functionally_observable(sys_, None, pathological)[0])

    periods = pathological_periods(sys_.A, 16)
    _check(checks, "pathological periods", periods == [4, 8, 12, 16], actual=periods)
    lost, rank = uniform_rank_loss(sys_.A, sys_.C, refs.COUNTEREXAMPLE_PERIOD)
    _check(checks, "uniform period-4 sampling has rank 2", lost and rank.rank == 2, rank=rank.rank)

    passed = all(c["passed"] for c in checks)
    _write_text(os.path.join(out_dir, "counterexample.json"), dumps({"case": "counterexample", "passed": passed,
                                                                       "checks": checks}))
    return passed


def repro_example(out_dir: str, seed: int = 7, noise_bound: float = 0.1, window: int = 4) -> bool:
    sys_ = refs.example_system()
    checks: List[Dict[str, Any]] = []

    jd = jordan_data(sys_)
    alpha, Q = refs.example_certificate()
    residual = structured_q_residual(jd, alpha, Q)
    _check(checks, "published certificate verifies", verify_structured_Q(jd, alpha, Q), residual=residual)
    product = alpha @ jd.C_J @ Q.assembled
    _check(checks, "alpha C_J Q matches the published row",
           np.allclose(product, refs.EXAMPLE_ALPHA_C_J_Q, atol=1e-8), actual=product)

    found = find_structured_Q(jd, seed=seed)
    _check(checks, "certificate search succeeds", found is not None,
           alpha=None if found is None else found[0])

    design = design_for_target(sys_, target="functional_via_Q", certificate=(alpha, Q), seed=seed)
    _check(checks, "reduced design is certified on a 2-dimensional pair",
           design.dimension == 2 and design.certificate.rank == 2, times=list(design.sequence.times))
    _write_text(os.path.join(out_dir, "example_design.json"), dumps(design.to_dict()))

    schedule = refs.example_schedule()
    x0 = np.ones(sys_.n)
    nominal = simulate_run(sys_, x0, schedule, window, noise_bound=0.0, seed=seed,
                           mode="reduced", certificate=(alpha, Q))
    full = simulate_run(sys_, x0, schedule, window, noise_bound=0.0, seed=seed, mode="full")
    noisy = simulate_run(sys_, x0, schedule, window, noise_bound=noise_bound, seed=seed,
                         mode="reduced", certificate=(alpha, Q))
    write_run_csv(nominal, os.path.join(out_dir, "nominal.csv"))
    write_run_csv(noisy, os.path.join(out_dir, "noisy.csv"))

    post = nominal.post_window_errors()
    _check(checks, "nominal estimate is exact after the first window", float(post.max()) < 1e-6,
           max_error=float(post.max()))
    gap = float(np.max(np.abs(nominal.estimates - full.estimates)[nominal.query_times >= nominal.first_window_time]))
    _check(checks, "reduced and full estimators agree", gap < 1e-8, max_gap=gap)
    noisy_error = steady_state_error(noisy)
    _check(checks, "noisy steady-state error is small but nonzero",
           0.0 < noisy_error < float(noisy.error_trace[0]), steady_state_error=noisy_error,
           initial_error=float(noisy.error_trace[0]))

    passed = all(c["passed"] for c in checks)
    _write_text(os.path.join(out_dir, "example.json"), dumps({
        "case": "example", "passed": passed, "checks": checks,
        "schedule": list(schedule.times), "window": window, "noise_bound": noise_bound, "seed": seed,
    }))
    return passed


def cmd_repro(args: argparse.Namespace) -> int:
    os.makedirs(args.out, exist_ok=True)
    passed = repro_counterexample(args.out) if args.case == "counterexample" else repro_example(args.out)
    print(dumps({"case": args.case, "passed": passed}), end="")
    return EXIT_OK if passed else EXIT_REPRO_MISMATCH


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = UsageErrorParser(prog="obsvkit", description="Sample-based functional observability toolkit")
    parser.add_argument("--log-level", default=None, help="logging level (default from OBSVKIT_LOG_LEVEL)")
    commands = parser.add_subparsers(dest="command", parser_class=UsageErrorParser)
    commands.required = True

    analyze_parser = commands.add_parser("analyze", help="observability and functional-observability report")
    analyze_parser.add_argument("system")
    analyze_parser.add_argument("sampling", nargs="?")
    analyze_parser.add_argument("--tol", type=float, help="absolute rank tolerance")
    analyze_parser.add_argument("--seed", type=int, default=config.DEFAULT_SEED)
    analyze_parser.add_argument("--out", required=True)
    analyze_parser.set_defaults(handler=cmd_analyze)

    design_parser = commands.add_parser("design", help="certified sampling schedule")
    design_parser.add_argument("system")
    design_parser.add_argument("--target", required=True, choices=TARGETS)
    window = design_parser.add_mutually_exclusive_group()
    window.add_argument("--T", type=float, help="window length (continuous time)")
    window.add_argument("--k", type=int, help="sample count (discrete time)")
    design_parser.add_argument("--seed", type=int, default=config.DEFAULT_SEED)
    design_parser.add_argument("--strategy", choices=("uniform", "random"), default="uniform")
    design_parser.add_argument("--s-max", dest="s_max", type=int)
    design_parser.add_argument("--certificate", help="analyze report carrying the certificate")
    design_parser.add_argument("--tol", type=float, help="absolute rank tolerance")
    design_parser.add_argument("--out", required=True)
    design_parser.set_defaults(handler=cmd_design)

    estimate_parser = commands.add_parser("estimate", help="sliding-window least-squares run")
    estimate_parser.add_argument("system")
    estimate_parser.add_argument("sampling")
    estimate_parser.add_argument("--x0", help="initial state, comma-separated (default ones(n) / sqrt(n))")
    estimate_parser.add_argument("--prior", help="prior estimate, comma-separated (default zero)")
    estimate_parser.add_argument("--noise", type=float, default=config.DEFAULT_NOISE_BOUND)
    estimate_parser.add_argument("--seed", type=int, default=config.DEFAULT_SEED)
    estimate_parser.add_argument("--window", type=int)
    estimate_parser.add_argument("--horizon", type=float)
    estimate_parser.add_argument("--mode", choices=("full", "reduced"), default="full")
    estimate_parser.add_argument("--certificate", help="analyze report (reduced mode)")
    estimate_parser.add_argument("--out", required=True)
    estimate_parser.set_defaults(handler=cmd_estimate)

    repro_parser = commands.add_parser("repro", help="reproduce the reference cases")
    repro_parser.add_argument("--case", required=True, choices=("counterexample", "example"))
    repro_parser.add_argument("--out", required=True)
    repro_parser.set_defaults(handler=cmd_repro)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config.configure_logging(args.log_level)
    try:
        return args.handler(args)
    except RankDeficientRegressor as e:
        print(f"rank-deficient regressor at window {e.window}: {e}", file=sys.stderr)
        return EXIT_REGRESSOR
    except MissingCertificate as e:
        print(f"missing certificate: {e} (run analyze first and pass its report with --certificate)",
              file=sys.stderr)
        return EXIT_CERTIFICATE
    except DesignFailure as e:
        print(f"design failure: {e}", file=sys.stderr)
        if e.diagnostics:
            print(dumps(e.diagnostics), file=sys.stderr, end="")
        return EXIT_DESIGN
    except NumericalInconsistency as e:
        print(f"numerical inconsistency: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ObsvkitError, ValueError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as e:
        print(f"file error: {e}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())

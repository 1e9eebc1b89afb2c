"""Command-line interface: ``bpre-compare {moments,simulate,ci,ci-sigma,test,verify}``.

Exit codes: 0 success, 1 usage or configuration error, 2 verification
failure, 3 I/O error.  Data files start with a comment line
``# format_version=1 config_digest=<sha256>``; JSON outputs carry the same
two fields.
"""

import argparse
import csv
import hashlib
import json
import sys
import warnings

from .config import FORMAT_VERSION, RunConfig
from .environment import env_moments, pair_correlation
from .exceptions import BPREError, ValidityWarning
from .inference import ci_mu_diff, ci_sigma_sq, test_mu_equal
from .simulation import WORKERS_ENV, default_workers, replicate, simulate_endpoints, \
    simulate_pair, trajectory_rows, TRAJECTORY_COLUMNS
from .statistic import r_values
from .verify import CSV_COLUMNS, run_suite, true_parameters

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_IO = 0, 1, 2, 3
SIMULATE_COLUMNS = ("replication", "logZ1", "logZ2", "r")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _header(digest):
    return f"# format_version={FORMAT_VERSION} config_digest={digest}\n"


def _open_out(path):
    if not path or path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline=""), True


def _emit_json(record, path=None):
    text = json.dumps(record, indent=2, sort_keys=True) + "\n"
    fh, close = _open_out(path)
    try:
        fh.write(text)
    finally:
        if close:
            fh.close()


def _digest_inputs(inputs):
    text = json.dumps(inputs, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


# --------------------------------------------------------------------------
# commands

def cmd_moments(args):
    cfg = RunConfig.load(args.config)
    sim = cfg.sim
    fams = []
    for fam in (sim.family1, sim.family2):
        p = env_moments(fam, cfg.quad_order)
        fams.append({**fam.to_dict(), "mu": p.mu, "sigma": p.sigma,
                     "quad_order": p.quad_order, "quad_error_estimate": p.quad_error_estimate})
    corr = pair_correlation(sim.family1, sim.family2, sim.latent_r, cfg.quad_order)
    _emit_json({
        "format_version": FORMAT_VERSION,
        "config_digest": cfg.digest(),
        "family1": fams[0],
        "family2": fams[1],
        "latent_r": corr.latent_r,
        "rho": corr.rho,
    }, args.output)
    return EXIT_OK


def cmd_simulate(args):
    cfg = RunConfig.load(args.config)
    sim = cfg.sim
    params = true_parameters(sim, cfg.quad_order)
    ends = simulate_endpoints(sim, args.workers)
    r = r_values(ends.logZ1, ends.logZ2, sim.n, sim.m, params.mu1, params.mu2,
                 params.sigma1, params.sigma2, params.rho)
    fh, close = _open_out(args.output or cfg.output)
    try:
        fh.write(_header(cfg.digest()))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SIMULATE_COLUMNS)
        for i in range(len(ends)):
            w.writerow((i, repr(float(ends.logZ1[i])), repr(float(ends.logZ2[i])),
                        repr(float(r[i]))))
    finally:
        if close:
            fh.close()
    if args.trajectories:
        with open(args.trajectories, "w", encoding="utf-8", newline="") as fh:
            fh.write(_header(cfg.digest()))
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRAJECTORY_COLUMNS)
            for pair in replicate(sim, args.workers):
                w.writerows(trajectory_rows(pair))
    return EXIT_OK


_EXPLICIT = ("logz1", "logz2", "n", "m", "sigma1", "sigma2", "rho")


def _observation(args, needed):
    """Resolve observed log populations and known parameters.

    Returns ``(values, digest)``; with ``--from-sim`` the values come from
    one simulated replication and the quadrature truths of the config.
    """
    if args.from_sim:
        if not args.config:
            raise UsageError("--from-sim needs a config file")
        cfg = RunConfig.load(args.config)
        pair = simulate_pair(cfg.sim, args.replication)
        params = true_parameters(cfg.sim, cfg.quad_order)
        vals = {"logz1": pair.traj1.logZ, "logz2": pair.traj2.logZ, "n": cfg.sim.n,
                "m": cfg.sim.m, "sigma1": params.sigma1, "sigma2": params.sigma2,
                "rho": params.rho, "kappa": cfg.kappa, "sim": cfg.sim}
        if args.kappa is not None:
            vals["kappa"] = args.kappa
        return vals, cfg.digest()
    if args.config:
        raise UsageError("a config file is only used together with --from-sim")
    missing = [f"--{k}" for k in needed if getattr(args, k) is None]
    if missing:
        raise UsageError(f"missing required known-parameter flag(s): {', '.join(missing)} "
                         "(or use --from-sim CONFIG)")
    vals = {k: getattr(args, k) for k in needed}
    vals["kappa"] = 0.05 if args.kappa is None else args.kappa
    return vals, _digest_inputs(vals)


def _with_meta(record, digest):
    return {"format_version": FORMAT_VERSION, "config_digest": digest, **record}


def cmd_ci(args):
    if args.method == "sigma-sq":
        return _ci_sigma(args)
    vals, digest = _observation(args, _EXPLICIT)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        iv = ci_mu_diff(vals["logz1"], vals["n"], vals["logz2"], vals["m"],
                        vals["sigma1"], vals["sigma2"], vals["rho"], vals["kappa"])
    _emit_json(_with_meta(iv.to_record(), digest), args.output)
    return EXIT_OK


def _ci_sigma(args):
    if not args.independent_copies:
        raise UsageError("the sigma^2 interval is valid only for two independent copies of "
                         "one process; pass --independent-copies to attest this design")
    vals, digest = _observation(args, ("logz1", "logz2", "n"))
    sim = vals.get("sim")
    if sim is not None and (sim.family1 != sim.family2 or sim.latent_r != 0 or sim.n != sim.m):
        raise UsageError("--from-sim with the sigma^2 interval needs identical families, "
                         "latent_r = 0 and n = m")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        iv = ci_sigma_sq(vals["logz1"], vals["logz2"], vals["n"], vals["kappa"],
                         independent_copies=True)
    _emit_json(_with_meta(iv.to_record(), digest), args.output)
    return EXIT_OK


def cmd_ci_sigma(args):
    args.method = "sigma-sq"
    return _ci_sigma(args)


def cmd_test(args):
    vals, digest = _observation(args, _EXPLICIT)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        res = test_mu_equal(vals["logz1"], vals["n"], vals["logz2"], vals["m"],
                            vals["sigma1"], vals["sigma2"], vals["rho"], vals["kappa"])
    _emit_json(_with_meta(res.to_record(), digest), args.output)
    return EXIT_OK


def cmd_verify(args):
    cfg = RunConfig.load(args.config)
    suite = args.suite or cfg.suite
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        report = run_suite(suite, cfg.sim, kappa=cfg.kappa, delta_prime=cfg.delta_prime,
                           x_grid=cfg.x_grid, ladder=cfg.ladder,
                           ladder_replications=cfg.ladder_replications,
                           coverage_replications=cfg.coverage_replications,
                           source=args.source or cfg.source, workers=args.workers,
                           quad_order=cfg.quad_order)
    digest = cfg.digest()
    csv_path = args.output or cfg.output or "verify_report.csv"
    json_path = args.summary or cfg.summary or "verify_summary.json"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_header(digest))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        w.writerows(report.rows())
    summary = _with_meta(report.summary(), digest)
    # infinite envelopes become null
    summary = json.loads(json.dumps(summary), parse_constant=lambda c: None)
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    status = "PASS" if report.passed else "FAIL"
    line = f"{status} suite={suite} N={report.size} n={report.n} m={report.m}"
    if report.ks is not None:
        line += f" ks={report.ks:.5f}"
    if report.w1 is not None:
        line += f" w1={report.w1:.5f}"
    if report.coverage is not None:
        line += f" coverage={report.coverage:.4f}"
    print(line)
    if not report.passed:
        for c in report.failures:
            where = "" if c.x is None else f" x={c.x}"
            print(f"  failed {c.diagnostic}{where}: {c.value:.6g} not in "
                  f"[{c.lo:.6g}, {c.hi:.6g}]", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


# --------------------------------------------------------------------------
# parser

def _add_observation_flags(p, sigma_only=False):
    p.add_argument("config", nargs="?", help="config file (used with --from-sim)")
    p.add_argument("--from-sim", action="store_true",
                   help="observe one simulated replication of CONFIG and use quadrature truths")
    p.add_argument("--replication", type=int, default=0,
                   help="replication index for --from-sim (default 0)")
    p.add_argument("--logz1", type=float, help="observed ln Z of process 1")
    p.add_argument("--logz2", type=float, help="observed ln Z of process 2")
    p.add_argument("--n", type=int, help="generations of process 1")
    if not sigma_only:
        p.add_argument("--m", type=int, help="generations of process 2")
        p.add_argument("--sigma1", type=float, help="known sigma of process 1")
        p.add_argument("--sigma2", type=float, help="known sigma of process 2")
        p.add_argument("--rho", type=float, help="known correlation of the log means")
    p.add_argument("--kappa", type=float, help="1 - confidence level (default 0.05, or config)")
    p.add_argument("-o", "--output", help="JSON output path (default stdout)")


def build_parser():
    workers_help = f"worker processes (default ${WORKERS_ENV} or 1)"
    parser = _Parser(prog="bpre-compare",
                     description="Compare the criticality of two branching processes "
                                 "in random environments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("moments", help="criticality parameters mu, sigma and rho as JSON")
    p.add_argument("config")
    p.add_argument("-o", "--output", help="JSON output path (default stdout)")
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("simulate", help="per-replication ln Z1, ln Z2 and R as CSV")
    p.add_argument("config")
    p.add_argument("-o", "--output", help="CSV output path (default: config 'output' or stdout)")
    p.add_argument("--trajectories", help="also write full generation paths to this CSV")
    p.add_argument("--workers", type=int, default=None, help=workers_help)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ci", help="confidence interval for mu1 - mu2 (or sigma^2)")
    _add_observation_flags(p)
    p.add_argument("--method", choices=("mu-diff", "sigma-sq"), default="mu-diff")
    p.add_argument("--independent-copies", action="store_true",
                   help="attest that process 2 is an independent copy of process 1")
    p.set_defaults(func=cmd_ci)

    p = sub.add_parser("ci-sigma", help="confidence interval for sigma^2 from independent copies")
    _add_observation_flags(p, sigma_only=True)
    p.add_argument("--independent-copies", action="store_true",
                   help="attest that process 2 is an independent copy of process 1")
    p.set_defaults(func=cmd_ci_sigma)

    p = sub.add_parser("test", help="two-sided test of mu1 = mu2")
    _add_observation_flags(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("verify", help="Monte Carlo verification suite; exit 2 on failure")
    p.add_argument("config")
    p.add_argument("--suite", choices=("clt", "berry-esseen", "tails", "coverage", "all"),
                   help="override the config's suite")
    p.add_argument("--source", choices=("simulate", "normal"),
                   help="override the config's sample source")
    p.add_argument("-o", "--output", help="CSV report path (default verify_report.csv)")
    p.add_argument("--summary", help="JSON summary path (default verify_summary.json)")
    p.add_argument("--workers", type=int, default=None, help=workers_help)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "workers", None) is None and hasattr(args, "workers"):
        args.workers = default_workers()
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"bpre-compare {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BPREError as exc:
        print(f"bpre-compare {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"bpre-compare {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Every command prints ``{"header": {...}, "results": [...], "checks": [...]}`` as JSON (the
``table`` command can print CSV instead). The header echoes the parsed query and the resolved
defaults, so a published number can be reproduced from its output alone.

The report layout is described by the JSON schema returned by :func:`report_schema`.

Exit codes: 0 success, 2 validation error, 3 failed cross-check.
"""

import argparse
import csv
import itertools
import json
import logging
import sys
from fractions import Fraction
from importlib import resources
from typing import Any, Callable, Optional, Sequence

import numpy as np

from . import __version__, asymptotics, contour, exact, montecarlo
from .config import config_from_json, labeled
from .errors import EXIT_CROSS_CHECK, EXIT_OK, EXIT_VALIDATION, ConsistencyError, CrossCheckError, DomainError, ResourceError
from .exact import Check
from .qalg import c_coeff, check_q, q_factorial
from .settings import DEFAULTS, Defaults

logger = logging.getLogger(__name__)


def parse_ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def parse_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def parse_q(text: str) -> Fraction:
    """``0.6`` and ``3/5`` both give the exact fraction 3/5."""
    try:
        q = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"q must be a decimal or a fraction p/r, got {text!r}") from None
    if not 0 < q < 1:
        raise argparse.ArgumentTypeError(f"q must satisfy 0 < q < 1, got {text}")
    return q


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--q", type=parse_q, default=None, help="decimal or fraction p/r (exact mode reads decimals exactly)")
    common.add_argument("--t", type=float, default=None)
    common.add_argument("--samples", type=int, default=None)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--mode", choices=("exact", "contour", "mc", "all"), default=None)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--log-level", default="WARNING", choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    common.add_argument("--threads", type=int, default=None)
    common.add_argument("--backend", choices=("numpy", "python", "cython", "c"), default=None)
    common.add_argument("--nodes", type=int, default=None)
    common.add_argument("--contour", default="auto", help="'auto' or a ContourSpec as JSON text or a path to a JSON file")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(
        prog="qtazrp-lab",
        description="Exact, contour and Monte Carlo solvers for the multi-species q-TAZRP. "
        "Vectors are comma separated; write negative leading entries as --x=-1,0.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="one trajectory sample at time t")
    p.add_argument("--x", type=parse_ints, help="one particle per species")
    p.add_argument("--config", help="occupancy configuration as JSON")
    p.add_argument("--replica", type=int, default=0)

    p = sub.add_parser("cdf", parents=[common], help="P_x(X(t) <= y)")
    p.add_argument("--x", type=parse_ints, required=True)
    p.add_argument("--y", type=parse_ints, required=True)

    p = sub.add_parser("hitprob", parents=[common], help="hitting probability of the jump chain")
    p.add_argument("--x", type=parse_ints, required=True)
    p.add_argument("--y", type=parse_ints, required=True)
    p.add_argument("--symbolic", action="store_true", help="print the exact rational function of q")

    for name, text in (("qmoment", "joint q-moment by the contour formula"), ("duality", "joint q-moment through the finite dual")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--k", type=parse_ints, required=True)
        p.add_argument("--M", type=parse_ints, required=True)

    p = sub.add_parser("contour-check", parents=[common], help="contour identity suite at random parameters")
    p.add_argument("--trials", type=int, default=1)

    p = sub.add_parser("shift-verify", parents=[common], help="compare (x -> y) with (x2 -> y2)")
    for flag in ("--x", "--y", "--x2", "--y2"):
        p.add_argument(flag, type=parse_ints, required=True)
    p.add_argument("--no-symbolic", dest="symbolic", action="store_false")

    p = sub.add_parser("asymptotic", parents=[common], help="diffusive limit of the joint q-moment")
    p.add_argument("--sigma", type=parse_floats, required=True)
    p.add_argument("--finite-L", type=parse_floats, default=None, help="comma-separated L values for a convergence study")

    p = sub.add_parser("table", parents=[common], help="Monte Carlo grid of P_x(X(t) <= y)")
    p.add_argument("--optional", action="store_true", help="also estimate the cells left blank in the published grid")
    return parser


class Report:
    """Collects results and checks of one command."""

    def __init__(self, args: argparse.Namespace, defaults: Defaults):
        self.args = args
        self.defaults = defaults
        self.results: list[dict] = []
        self.checks: list[Check] = []
        self.informational: set[str] = set()

    def add(self, method: str, value: Any, **extra: Any) -> None:
        self.results.append({"method": method, "value": value, **{k: v for k, v in extra.items() if v is not None}})

    def check(self, check: Check) -> None:
        self.checks.append(check)

    def cross_check(self, tol: float) -> None:
        """Pairwise agreement of the deterministic results, which all estimate the same number."""
        values = [(r["method"], r["value"]) for r in self.results if "stderr" not in r and isinstance(r["value"], float)]
        if len(values) < 2:
            return
        worst = max(abs(a - b) for (_, a), (_, b) in itertools.combinations(values, 2))
        names = ", ".join(m for m, _ in values)
        self.check(Check("max-pairwise-discrepancy", worst <= tol, f"{worst:.3e} over {names} (tol {tol:g})"))

    @property
    def failed(self) -> bool:
        return any(not c.passed and c.name not in self.informational for c in self.checks)

    def header(self) -> dict:
        query = {k: _jsonable(v) for k, v in vars(self.args).items() if k != "log_level"}
        return {"query": query, "version": __version__, "defaults": self.defaults.as_dict()}

    def to_json(self) -> dict:
        return {"header": self.header(), "results": self.results, "checks": [c.to_json() for c in self.checks]}


def report_schema() -> dict:
    """JSON schema of the report every command prints, shipped as ``report.schema.json``."""
    return json.loads(resources.files(__package__).joinpath("report.schema.json").read_text(encoding="utf-8"))


def _jsonable(value: Any) -> Any:
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, tuple):
        return list(value)
    return value


def _require(args: argparse.Namespace, *names: str) -> None:
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise DomainError(f"{args.command} needs {', '.join(missing)}")


def _same_length(*vectors: Sequence[int]) -> None:
    if len({len(v) for v in vectors}) != 1:
        raise DomainError(f"inconsistent dimensions: {[tuple(v) for v in vectors]}")


def _contour_spec(args: argparse.Namespace) -> Optional[contour.ContourSpec]:
    if args.contour == "auto":
        return None
    text = args.contour
    if not text.lstrip().startswith("{"):
        with open(text) as f:
            text = f.read()
    try:
        return contour.ContourSpec.from_json(json.loads(text))
    except (ValueError, KeyError, TypeError) as exc:
        raise DomainError(f"invalid --contour JSON: {exc}") from exc


def _mc_options(args: argparse.Namespace, defaults: Defaults) -> dict:
    return {"samples": defaults.samples, "seed": defaults.seed, "backend": defaults.backend, "threads": args.threads}


def _check_estimate(report: Report, estimate: montecarlo.SimEstimate, reference: float, name: str) -> None:
    ok = estimate.within(reference, report.defaults.mc_sigmas)
    report.check(Check(name, ok, f"{estimate.mean:.7f} +- {estimate.stderr:.1e} vs {reference:.7f}"))


def cmd_simulate(args: argparse.Namespace, report: Report) -> None:
    _require(args, "q", "t")
    if (args.x is None) == (args.config is None):
        raise DomainError("simulate needs exactly one of --x and --config")
    x0 = labeled(args.x) if args.x is not None else config_from_json(args.config)
    final = montecarlo.simulate(x0, args.t, float(args.q), report.defaults.seed, args.replica)
    report.add("mc", list(final) if isinstance(final, tuple) else final.to_json(), seed=report.defaults.seed, replica=args.replica)


def cmd_cdf(args: argparse.Namespace, report: Report) -> None:
    _require(args, "q", "t")
    _same_length(args.x, args.y)
    mode = args.mode or "exact"
    q, t = args.q, args.t
    d = report.defaults
    reference = None
    if mode in ("exact", "all"):
        reference = exact.cdf(args.x, args.y, t, q, d.max_states)
        report.add("exact", reference)
    if mode == "all":
        report.add("path-decomposition", exact.path_decomposition_cdf(args.x, args.y, t, q, d.max_paths))
    if mode in ("contour", "all"):
        try:
            report.add("contour", contour.cdf_contour(args.x, args.y, t, float(q), _contour_spec(args), d.offset, args.nodes))
        except DomainError as exc:
            if mode == "contour":
                raise
            logger.info("contour method skipped: %s", exc)
    if mode in ("mc", "all"):
        estimate = montecarlo.estimate_cdf(args.x, args.y, t, float(q), **_mc_options(args, d))
        report.add("mc", estimate.mean, stderr=estimate.stderr, samples=estimate.samples, seed=estimate.seed)
        if reference is not None:
            _check_estimate(report, estimate, reference, "mc-within-sigmas")
    if mode == "all":
        report.cross_check(d.cross_tol)


def cmd_hitprob(args: argparse.Namespace, report: Report) -> None:
    _same_length(args.x, args.y)
    mode = args.mode or "exact"
    reference = None
    if mode in ("exact", "all"):
        if args.symbolic or args.q is None:
            rf = exact.hitting_prob(args.x, args.y, "symbolic")
            reference = float(rf.evaluate(args.q)) if args.q is not None else None
            report.add("exact", reference, symbolic=str(rf))
        else:
            reference = float(exact.hitting_prob(args.x, args.y, "numeric", q=args.q))
            report.add("exact", reference)
    if mode in ("mc", "all"):
        _require(args, "q")
        estimate = montecarlo.estimate_hitting(args.x, args.y, float(args.q), **_mc_options(args, report.defaults))
        report.add("mc", estimate.mean, stderr=estimate.stderr, samples=estimate.samples, seed=estimate.seed)
        if reference is not None:
            _check_estimate(report, estimate, reference, "mc-within-sigmas")
    if mode == "contour":
        raise DomainError("hitting probabilities have no contour method; use --mode exact or mc")


def _qmoment(args: argparse.Namespace, report: Report, default_mode: str) -> None:
    _require(args, "q", "t")
    _same_length(args.k, args.M)
    mode = args.mode or default_mode
    d = report.defaults
    reference = None
    if mode in ("exact", "all"):
        reference = exact.duality_qmoment(args.k, args.M, args.t, args.q, d.max_states)
        report.add("exact", reference)
    paired = mode == "all" or (default_mode == "exact" and mode == "exact")
    if mode == "contour" or paired:
        report.add("contour", contour.qmoment_contour(args.k, args.M, args.t, float(args.q), _contour_spec(args), d.offset, args.nodes))
    if mode in ("mc", "all"):
        estimate = montecarlo.estimate_qmoment(args.k, args.M, args.t, float(args.q), **_mc_options(args, d))
        report.add("mc", estimate.mean, stderr=estimate.stderr, samples=estimate.samples, seed=estimate.seed)
        if reference is not None:
            _check_estimate(report, estimate, reference, "mc-within-sigmas")
    if paired:
        report.cross_check(d.cross_tol)


def cmd_qmoment(args: argparse.Namespace, report: Report) -> None:
    _qmoment(args, report, "contour")


def cmd_duality(args: argparse.Namespace, report: Report) -> None:
    """The dual side always comes with the contour value it must reproduce."""
    _qmoment(args, report, "exact")


def identity_suite(q: float, t: float, rng: np.random.Generator, nodes: Optional[int] = None) -> list[Check]:
    """Contour identities at parameters drawn from ``rng``: ``N`` in {2, 3}, ``K`` in ``1..N-1``,
    a constant bound ``M``, random starts ``x`` and a random ``sigma``."""
    tol = 1e-8
    checks = []
    N = int(rng.integers(2, 4))
    K = int(rng.integers(1, N))

    w = rng.uniform(-1.5, 1.5, N) + 1j * rng.uniform(-1.5, 1.5, N)
    labels = tuple(range(1, N + 1))
    total = 0j
    for sigma in itertools.permutations(labels):
        inverse = [sigma.index(k) + 1 for k in labels]
        total += contour.a_sigma(sigma, [w[i - 1] for i in inverse], q)
    expected = float(q_factorial(N).evaluate(q)) * contour.b_factor(w, q)
    checks.append(Check("symmetrization", abs(total - expected) < tol * max(1.0, abs(expected)), f"{abs(total - expected):.2e}"))

    M = (int(rng.integers(1, 4)),) * (N - K)
    x = tuple(int(v) for v in rng.integers(0, 4, K))
    sigma = tuple(int(s) + 1 for s in rng.permutation(K))
    params = f"N={N}, K={K}, M={M}, x={x}, sigma={sigma}"

    I_values = [contour.contour_I(N, L, K, M, sigma, x, t, q, nodes=nodes) for L in range(K, N + 1)]
    tilde = contour.contour_I_tilde(N, K, M, sigma, x, t, q, nodes=nodes)
    checks.append(Check("sum-I-equals-I-tilde", abs(sum(I_values) - tilde) < tol, f"{sum(I_values):.12g} vs {tilde:.12g} ({params})"))

    L = N
    J = contour.contour_J(K, L, L - K, M, sigma, x, t, q, nodes=nodes)
    c = float(c_coeff(N, K, L - K).evaluate(q))
    checks.append(Check("I-J-relation", abs(J * c - I_values[L - K]) < tol, f"{J * c:.12g} vs {I_values[L - K]:.12g} ({params})"))

    P = int(rng.integers(1, L - K + 1))
    lhs = contour.contour_J(K, L, P - 1, M, sigma, x, t, q, nodes=nodes)
    rhs = contour.contour_J(K, L, P, M, sigma, x, t, q, nodes=nodes)
    rhs += q ** (P - L) * contour.contour_J(K, L - 1, P - 1, M[: P - 1] + M[P:], sigma, x, t, q, nodes=nodes)
    checks.append(Check("J-recurrence", abs(lhs - rhs) < tol, f"{lhs:.12g} vs {rhs:.12g} ({params}, P={P})"))

    for k in range(1, N):
        a = int(rng.integers(0, 4))
        exponents = [int(rng.integers(0, 4)) for _ in range(N)]
        exponents[k - 1] = exponents[k] = a
        residual = contour.antisymmetry_check(k, exponents, t, q, nodes=nodes)
        checks.append(Check(f"antisymmetry k={k}", residual < tol, f"|integral| = {residual:.2e} for {tuple(exponents)}"))
    return checks


def cmd_contour_check(args: argparse.Namespace, report: Report) -> None:
    _require(args, "q", "t")
    offset = contour.calibrate_offset(float(args.q), args.t)
    report.check(Check("offset-calibration", offset == report.defaults.offset, f"best offset {offset}, configured {report.defaults.offset}"))
    rng = np.random.default_rng(report.defaults.seed)
    for trial in range(args.trials):
        for check in identity_suite(float(args.q), args.t, rng, args.nodes):
            report.check(Check(f"{check.name} #{trial}" if args.trials > 1 else check.name, check.passed, check.detail))
    report.add("contour", float(sum(c.passed for c in report.checks)), checks_total=len(report.checks))


def cmd_shift_verify(args: argparse.Namespace, report: Report) -> None:
    _same_length(args.x, args.y, args.x2, args.y2)
    t_list = (0.5, 2.0) if args.t is None else (args.t,)
    q_list = (Fraction(3, 10), Fraction(3, 5)) if args.q is None else (args.q,)
    shift = exact.verify_shift(args.x, args.y, args.x2, args.y2, t_list, q_list, args.symbolic, report.defaults.exact_tol)
    for check in shift.checks:
        report.check(check)
    first, second = shift.symbolic
    report.add("exact", shift.verdict, symbolic=[first, second] if first is not None else None)
    # only a violation of the shift theorem fails the command
    if shift.passed:
        report.informational.update(c.name for c in shift.checks)


def cmd_asymptotic(args: argparse.Namespace, report: Report) -> None:
    _require(args, "q")
    q = float(check_q(args.q))
    report.add("limit-density", asymptotics.limit_density(args.sigma, q))
    limit = asymptotics.limit_qmoment(args.sigma, q)
    report.add("limit", limit)
    if args.finite_L:
        points = asymptotics.convergence_study(args.sigma, q, args.finite_L)
        for point in points:
            report.add("finite-L", point.finite, L=point.L, error=point.error)
        errors = [p.error for p in points]
        shrinking = all(b < a for a, b in zip(errors, errors[1:]))
        report.check(Check("error-decreasing", shrinking, ", ".join(f"{e:.2e}" for e in errors)))


def cmd_table(args: argparse.Namespace, report: Report) -> None:
    q = float(args.q) if args.q is not None else 0.6
    t = args.t if args.t is not None else 2.0
    d = report.defaults
    cells = montecarlo.table(q, t, d.samples, d.seed, args.optional, backend=d.backend, threads=args.threads)
    for cell in cells:
        report.add("mc", cell.estimate.mean, stderr=cell.estimate.stderr, samples=cell.estimate.samples, seed=cell.estimate.seed,
                   x=list(cell.x), offset=list(cell.offset), published=cell.published)
        if args.mode == "all" and cell.published is not None:
            report.check(Check(f"published x={cell.x} y-x={cell.offset}", cell.agrees(d.mc_sigmas),
                               f"{cell.estimate.mean:.7f} vs {cell.published:.7f}"))


COMMANDS: dict[str, Callable[[argparse.Namespace, Report], None]] = {
    "simulate": cmd_simulate,
    "cdf": cmd_cdf,
    "hitprob": cmd_hitprob,
    "qmoment": cmd_qmoment,
    "duality": cmd_duality,
    "contour-check": cmd_contour_check,
    "shift-verify": cmd_shift_verify,
    "asymptotic": cmd_asymptotic,
    "table": cmd_table,
}


def _write_csv(report: Report, out) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["x", "y-x", "estimate", "stderr", "samples", "seed"])
    for r in report.results:
        writer.writerow([
            ",".join(map(str, r["x"])),
            ",".join(map(str, r["offset"])),
            f"{r['value']:.7f}",
            f"{r['stderr']:.2e}",
            r["samples"],
            r["seed"],
        ])


def run(argv: Optional[Sequence[str]] = None, out=None) -> int:
    """Parse ``argv``, run the command, print its report and return the exit code."""
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_VALIDATION

    logging.basicConfig(level=args.log_level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    defaults = DEFAULTS.replace(nodes=args.nodes, samples=args.samples, seed=args.seed, backend=args.backend)
    report = Report(args, defaults)
    try:
        if args.format == "csv" and args.command != "table":
            raise DomainError("csv output is only available for the table command")
        COMMANDS[args.command](args, report)
    except (DomainError, ResourceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (CrossCheckError, ConsistencyError) as exc:
        print(f"cross-check failed: {exc}", file=sys.stderr)
        return EXIT_CROSS_CHECK

    if args.format == "csv":
        _write_csv(report, out)
    else:
        json.dump(report.to_json(), out, indent=2, default=_jsonable)
        out.write("\n")
    for check in report.checks:
        if not check.passed and check.name not in report.informational:
            logger.warning("check failed: %s (%s)", check.name, check.detail)
    return EXIT_CROSS_CHECK if report.failed else EXIT_OK


def main() -> None:
    sys.exit(run())

"""Command-line entry point.

Exit codes: 0 success, 1 input or usage error, 2 invalid algorithm or family
text, 3 a mathematical property failed (STPP violation, singular matrix,
invalid algorithm tensor, error bound exceeded).
"""

from __future__ import annotations

import argparse
import csv
import io
import sys

import numpy as np

from . import bilinear, groups, linalg, stability, stpp
from .errors import (DimensionError, InvalidAlgorithmError, SingularMatrixError, SpecError,
                     STPPViolation)
from .matrix import Matrix, NormKind, format_matrix, read_matrix, write_matrix
from .rounding import RoundingContext

EXIT_OK, EXIT_INPUT, EXIT_SPEC, EXIT_MATH = 0, 1, 2, 3

DEFAULT_SEED = 0


class UsageError(Exception):
    pass


def _emit(text: str, path: str | None):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise UsageError(f"expected a comma separated list of integers, got {text!r}") from None


def _read_matrix(path: str) -> Matrix:
    # malformed matrix files are input errors, not algorithm-spec errors
    try:
        return read_matrix(path)
    except SpecError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _emit_matrix(M: Matrix, path: str | None):
    if path is None or path == "-":
        sys.stdout.write(format_matrix(M))
    else:
        write_matrix(M, path)


# multiply / validate ---------------------------------------------------------


def cmd_multiply(args) -> int:
    A, B = _read_matrix(args.A), _read_matrix(args.B)
    if A.cols != B.rows:
        raise DimensionError(f"cannot multiply A ({A.rows}x{A.cols}) by B ({B.rows}x{B.cols})")
    if args.alg == "classical":
        C = A @ B
    else:
        alg = bilinear.get_algorithm(args.alg)
        counter = bilinear.OpCounter()
        C = bilinear.multiply_stationary(alg, A, B, args.cutoff, counter=counter)
        if args.count:
            print(f"scalar multiplications: {counter.multiplications}", file=sys.stderr)
    _emit_matrix(C, args.output)
    return EXIT_OK


def cmd_validate(args) -> int:
    alg = bilinear.get_algorithm(args.alg)
    res = bilinear.validate(alg)
    if res.ok:
        print(f"{alg.name or args.alg}: valid k={alg.k} t={alg.t} "
              f"exponent log_k t = {bilinear.product_rank_bound(alg):.9f}")
        return EXIT_OK
    h, l, i, j = res.witness
    print(f"{alg.name or args.alg}: invalid; coefficient of A[{h}]B[{l}] in C[{i}][{j}] "
          f"is {res.found}, expected {res.expected}")
    return EXIT_MATH


# bench -----------------------------------------------------------------------


def _bench_multiplier(selector: str, cutoff: int):
    if selector == "classical":
        return None, (lambda A, B: A @ B)
    alg = bilinear.get_algorithm(selector)
    if not bilinear.validate(alg).ok:
        raise InvalidAlgorithmError(f"{alg.name or selector} does not compute matrix multiplication")
    return alg, (lambda A, B: bilinear.multiply_stationary(alg, A, B, cutoff, check=False))


def cmd_bench(args) -> int:
    sizes = _int_list(args.sizes)
    if not sizes:
        raise UsageError("bench needs at least one size")
    kind = NormKind(args.norm)
    alg, mult = _bench_multiplier(args.alg, args.cutoff)
    for n in sizes:
        if n < 1:
            raise UsageError(f"bad size {n}")
        if alg is not None:
            bilinear.recursion_depth(alg.k, n)
    ctx = RoundingContext(args.p)
    rng = np.random.default_rng(args.seed)
    out = io.StringIO()
    theta = None if alg is None else (args.theta if args.theta is not None else alg.profile.theta0)
    out.write(f"# fastmm bench algorithm={args.alg} seed={args.seed} p={args.p} "
              f"norm={kind.value} theta={'n/a' if theta is None else theta} "
              f"mu={'classical' if alg is None else 'stationary'} cutoff={args.cutoff} "
              f"instances={args.instances} slack={args.slack}\n")
    out.write("# units: errors and norms are absolute values in the chosen norm; "
              "epsilon is the unit roundoff 2^-p; pass means measured <= mu*eps*|A||B|*(1+slack)\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(stability.CSV_HEADER + ["multiplications"])
    all_pass = True
    for n in sizes:
        if alg is None:
            mu = stability.classical_mu(n, kind)
            mults = n ** 3
        else:
            mu = stability.mu_for_algorithm(alg, n, theta)
            mults = bilinear.count_multiplications(alg, n, args.cutoff) if n > 1 else 1
        reports = []
        for _ in range(args.instances):
            A, B = stability.random_inputs(rng, n)
            reports.append(stability.measure_error(mult, A, B, ctx, kind, mu=mu, theta=theta,
                                                   slack=args.slack, algorithm=args.alg))
        summary = stability.worst_case(reports)
        all_pass &= summary.passed
        writer.writerow(summary.as_row() + [mults])
    if args.scaling is not None:
        n = args.scaling_n
        sc = stability.epsilon_scaling(mult, n, args.p, args.scaling, instances=args.instances,
                                       seed=args.seed, norm_kind=kind)
        out.write(f"# epsilon scaling n={n} p={args.p}->{args.scaling}: expected ratio "
                  f"{sc.expected_ratio:.6g}, observed {sc.observed_ratio:.6g}, factor "
                  f"{sc.factor:.4f} ({'consistent' if sc.consistent() else 'inconsistent'} within 2x)\n")
    _emit(out.getvalue(), args.output)
    return EXIT_OK if all_pass else EXIT_MATH


# stpp ------------------------------------------------------------------------


def _parse_group(text: str) -> groups.AbelianGroup:
    orders = _int_list(text)
    if not orders or min(orders) < 1:
        raise UsageError(f"bad group {text!r}: give cyclic factor orders such as 5 or 5,5")
    return groups.AbelianGroup(tuple(orders))


def _read_family(path: str) -> stpp.AbelianSTPFamily:
    if path == "fixture":
        return stpp.fixture_family()
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read family file {path!r}: {exc.strerror}") from None
    return stpp.parse_family_text(text, name=path)


def cmd_stpp_search(args) -> int:
    H = _parse_group(args.group)
    sizes = _int_list(args.sizes)
    if len(sizes) != 3:
        raise UsageError("--sizes takes three subset sizes a,b,c")
    stats: dict = {}
    coll = groups.stpp_search(H, args.N, tuple(sizes), budget=args.budget, stats=stats)
    if coll is None:
        why = "search space exhausted" if stats.get("exhausted") else "budget exhausted"
        print(f"no collection found ({why} after {stats.get('nodes', 0)} nodes)", file=sys.stderr)
        return EXIT_INPUT
    _emit(stpp.certify(coll) + "\n", args.output)
    return EXIT_OK


def cmd_stpp_check(args) -> int:
    family = _read_family(args.family)
    for coll in family.instances:
        res = coll.check()
        if not res:
            print(f"N={coll.N}: STPP violated: {groups.format_witness(res.witness)}")
            return EXIT_MATH
        print(f"N={coll.N} H={coll.group.order} k={coll.k}: STPP verified")
    return EXIT_OK


def cmd_stpp_multiply(args) -> int:
    family = _read_family(args.family)
    A, B = _read_matrix(args.A), _read_matrix(args.B)
    timings: dict = {}
    C = stpp.multiply_stpp(family, A, B, base=args.base, depth=args.depth, timings=timings)
    _emit_matrix(C, args.output)
    if not args.quiet:
        arith = moves = 0.0
        for step, label in stpp.STEP_LABELS.items():
            t = timings.get(step, 0.0)
            if "no arithmetic" in label:
                moves += t
            else:
                arith += t
            print(f"{label:<42} {t:.6f} s", file=sys.stderr)
        print(f"{'total':<42} arithmetic {arith:.6f} s, no arithmetic {moves:.6f} s",
              file=sys.stderr)
    return EXIT_OK


def cmd_stpp_growth(args) -> int:
    family = _read_family(args.family)
    print(stpp.measure_growth(family).describe())
    return EXIT_OK


# exponent --------------------------------------------------------------------


def _triple(text: str) -> tuple[int, int, int]:
    parts = _int_list(text)
    if len(parts) != 3:
        raise UsageError(f"bad triple {text!r}: expected e,h,l")
    return tuple(parts)


def _print_stpp_exponents(alpha: float, beta: float):
    mu_exp = stability.mu_stpp_exponent(alpha, beta)
    run_exp = stability.runtime_exponent(alpha, beta)
    total = mu_exp + run_exp
    print(f"alpha={alpha:g} beta={beta:g}")
    print(f"stability exponent (alpha+2)/(2 beta) = {mu_exp:.9f}")
    print(f"runtime exponent (alpha-1)/beta = {run_exp:.9f}")
    print(f"sum = {total:.9f} ({'> 3' if total > 3 else '<= 3'})")


def cmd_exponent(args) -> int:
    did = False
    if args.triple:
        triples = [_triple(t) for t in args.triple]
        irreps = _int_list(args.irreps) if args.irreps else None
        if (args.rank is None) == (irreps is None):
            raise UsageError("give exactly one of --rank or --irreps with --triple")
        try:
            problem = stability.ExponentProblem(tuple(triples), args.rank, irreps)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        res = stability.omega_bound(problem)
        note = "" if res.status == "ok" else f" ({res.status})"
        print(f"omega <= {res.value:.9f}{note}")
        did = True
    if args.alpha is not None or args.beta is not None:
        if args.alpha is None or args.beta is None:
            raise UsageError("--alpha and --beta go together")
        _print_stpp_exponents(args.alpha, args.beta)
        did = True
    if args.stpp_family:
        family = _read_family(args.stpp_family)
        alpha, beta = family.alpha, family.beta
        if alpha is None or beta is None:
            g = stpp.measure_growth(family)
            if not g.conforming:
                raise UsageError("family growth could not be fitted (need two or more N)")
            alpha, beta = g.alpha_hat, g.beta_hat
            print("(alpha, beta fitted from the family's instances)")
        _print_stpp_exponents(alpha, beta)
        did = True
    if not did:
        raise UsageError("nothing to do: give --triple with --rank/--irreps, --alpha/--beta "
                         "or --stpp-family")
    return EXIT_OK


# linear algebra --------------------------------------------------------------


def _multiplier(args):
    return linalg.get_multiplier(args.multiplier, args.mult_cutoff)


def cmd_invert(args) -> int:
    A = _read_matrix(args.A)
    _emit_matrix(linalg.invert(A, _multiplier(args), args.cutoff), args.output)
    return EXIT_OK


def cmd_lu(args) -> int:
    A = _read_matrix(args.A)
    res = linalg.lu_decompose(A, _multiplier(args), args.cutoff)
    text = ("# L\n" + format_matrix(res.L) + "# U\n" + format_matrix(res.U)
            + "# perm (A[:, perm] = L U)\n" + " ".join(str(p) for p in res.perm) + "\n")
    _emit(text, args.output)
    return EXIT_OK


def cmd_det(args) -> int:
    A = _read_matrix(args.A)
    d = linalg.determinant(A, _multiplier(args), args.cutoff)
    _emit(f"{d if A.regime == 'rational' else format(d, '.17g')}\n", args.output)
    return EXIT_OK


def cmd_solve(args) -> int:
    A, b = _read_matrix(args.A), _read_matrix(args.b)
    _emit_matrix(linalg.solve(A, b, _multiplier(args), args.cutoff), args.output)
    return EXIT_OK


# parser ----------------------------------------------------------------------


def _add_linalg(sub, name, help_text, handler, extra=()):
    p = sub.add_parser(name, help=help_text)
    p.add_argument("A", help="matrix file")
    for arg in extra:
        p.add_argument(arg, help="right-hand side matrix file")
    p.add_argument("--multiplier", default="classical",
                   help="classical, strassen, classical-<k>, stpp or spec:<file> (default: classical)")
    p.add_argument("--mult-cutoff", type=int, default=bilinear.DEFAULT_CUTOFF,
                   help="recursion cutoff of the multiplier (default: %(default)s)")
    p.add_argument("--cutoff", type=int, default=linalg.LINALG_CUTOFF,
                   help="side at which the reduction switches to elimination (default: %(default)s)")
    p.add_argument("-o", "--output", help="output file (default: stdout)")
    p.set_defaults(func=handler)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fastmm", description="Fast matrix multiplication toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("multiply", help="multiply two matrix files")
    p.add_argument("A")
    p.add_argument("B")
    p.add_argument("--alg", default="strassen",
                   help="classical, strassen, classical-<k> or spec:<file> (default: strassen)")
    p.add_argument("--cutoff", type=int, default=bilinear.DEFAULT_CUTOFF,
                   help="switch to classical multiplication at this side (default: %(default)s)")
    p.add_argument("--count", action="store_true", help="report scalar multiplications on stderr")
    p.add_argument("-o", "--output", help="output file (default: stdout)")
    p.set_defaults(func=cmd_multiply)

    p = sub.add_parser("validate", help="check that an algorithm computes matrix multiplication")
    p.add_argument("alg", help="strassen, classical-<k> or spec:<file>")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("bench", help="measure rounding errors against the stability bound")
    p.add_argument("--alg", default="strassen", help="classical, strassen, classical-<k> or spec:<file>")
    p.add_argument("--sizes", default="4,8,16,32", help="comma separated sizes (default: %(default)s)")
    p.add_argument("--p", type=int, default=24, help="significand bits (default: %(default)s)")
    p.add_argument("--norm", default="max-entry", choices=[k.value for k in NormKind])
    p.add_argument("--theta", type=float, help="norm constant (default: the algorithm's surrogate)")
    p.add_argument("--cutoff", type=int, default=1, help="recursion cutoff (default: %(default)s)")
    p.add_argument("--instances", type=int, default=50, help="instances per size (default: %(default)s)")
    p.add_argument("--slack", type=float, default=0.1, help="relative slack (default: %(default)s)")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help="PRNG seed (default: %(default)s)")
    p.add_argument("--scaling", type=int, metavar="P_LOW",
                   help="also compare mean errors at P_LOW bits against --p")
    p.add_argument("--scaling-n", type=int, default=8, help="size for --scaling (default: %(default)s)")
    p.add_argument("-o", "--output", help="CSV output file (default: stdout)")
    p.set_defaults(func=cmd_bench)

    sp = sub.add_parser("stpp", help="simultaneous triple product property tools")
    ssub = sp.add_subparsers(dest="action", required=True)
    p = ssub.add_parser("search", help="search for a collection of triples")
    p.add_argument("--group", required=True, help="cyclic factor orders, e.g. 5 or 5,5")
    p.add_argument("--N", type=int, required=True, help="number of triples")
    p.add_argument("--sizes", default="1,1,1", help="subset sizes a,b,c (default: %(default)s)")
    p.add_argument("--budget", type=int, default=1_000_000, help="node budget (default: %(default)s)")
    p.add_argument("-o", "--output", help="family file (default: stdout)")
    p.set_defaults(func=cmd_stpp_search)
    p = ssub.add_parser("check", help="verify a family file")
    p.add_argument("family", help="family file, or 'fixture' for the shipped family")
    p.set_defaults(func=cmd_stpp_check)
    p = ssub.add_parser("multiply", help="multiply through the group algebra")
    p.add_argument("--family", default="fixture", help="family file (default: the shipped family)")
    p.add_argument("A")
    p.add_argument("B")
    p.add_argument("--base", default="classical", choices=["classical", "strassen"])
    p.add_argument("--depth", type=int, default=1, help="recursion depth (default: %(default)s)")
    p.add_argument("-q", "--quiet", action="store_true", help="omit the timing breakdown")
    p.add_argument("-o", "--output", help="output file (default: stdout)")
    p.set_defaults(func=cmd_stpp_multiply)
    p = ssub.add_parser("growth", help="fit the growth exponents of a family")
    p.add_argument("family", nargs="?", default="fixture")
    p.set_defaults(func=cmd_stpp_growth)

    p = sub.add_parser("exponent", help="bounds on the matrix multiplication exponent")
    p.add_argument("--triple", action="append", metavar="E,H,L", help="tensor format; repeatable")
    p.add_argument("--rank", type=float, help="rank of the direct sum of the given formats")
    p.add_argument("--irreps", help="comma separated irreducible representation dimensions")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--stpp-family", help="family file (or 'fixture') for the growth exponents")
    p.set_defaults(func=cmd_exponent)

    _add_linalg(sub, "invert", "invert a square matrix", cmd_invert)
    _add_linalg(sub, "lu", "LUP decomposition", cmd_lu)
    _add_linalg(sub, "det", "determinant", cmd_det)
    _add_linalg(sub, "solve", "solve A x = b", cmd_solve, extra=("b",))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage; 2 is reserved for invalid specs here
        return EXIT_INPUT if exc.code == 2 else exc.code
    try:
        return args.func(args)
    except (SpecError, InvalidAlgorithmError) as exc:
        print(f"fastmm: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except STPPViolation as exc:
        print(f"fastmm: {exc}", file=sys.stderr)
        return EXIT_MATH
    except SingularMatrixError as exc:
        print(f"fastmm: singular matrix: {exc}", file=sys.stderr)
        return EXIT_MATH
    except (UsageError, DimensionError, ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"fastmm: {msg}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

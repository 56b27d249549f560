"""Error-bound calculators, exponent solvers and the empirical error harness."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .bilinear import BilinearAlgorithm, SparsityProfile, recursion_depth
from .matrix import Matrix, NormKind, norm
from .rounding import RoundingContext

__all__ = [
    "CSV_HEADER",
    "EpsilonScaling",
    "ErrorBoundReport",
    "ExponentProblem",
    "OmegaBound",
    "PrePostLevel",
    "classical_mu",
    "epsilon_scaling",
    "exponent_sum",
    "GrowthFit",
    "growth_slope",
    "measure_error",
    "mu_for_algorithm",
    "mu_nonstationary",
    "mu_stationary",
    "mu_stpp_exponent",
    "omega_bound",
    "random_inputs",
    "runtime_exponent",
    "worst_case",
]


# stationary / nonstationary bounds -----------------------------------------


def mu_stationary(profile: SparsityProfile, norm_u: float, norm_v: float, norm_w: float,
                  theta: float, k: int, n: int) -> float:
    """``(1 + D log_k n) (theta |U| |V| |W|)^(log_k n)`` with ``D = max(alpha+beta+gamma+3)``."""
    if theta <= 0:
        raise ValueError("theta must be positive")
    d = recursion_depth(k, n)
    return (1 + profile.depth_constant * d) * (theta * norm_u * norm_v * norm_w) ** d


def mu_for_algorithm(alg: BilinearAlgorithm, n: int, theta: float | None = None) -> float:
    """Stationary bound with max-entry coefficient norms and ``theta0`` by default."""
    prof = alg.profile
    theta = prof.theta0 if theta is None else theta
    nu, nv, nw = alg.coefficient_norms()
    return mu_stationary(prof, nu, nv, nw, theta, alg.k, n)


def classical_mu(n: int, kind: NormKind | str = NormKind.MAX_ENTRY) -> float:
    """First-order bound for left-to-right inner products.

    Each entry errs by at most ``n eps sum_l |a_il b_lj|``, so in the max-entry
    norm ``mu = n**2``; in the Frobenius norm ``mu = n`` (Cauchy-Schwarz).
    """
    return float(n * n) if NormKind(kind) is NormKind.MAX_ENTRY else float(n)


@dataclass(frozen=True)
class PrePostLevel:
    t: int
    pre_norm: float = 1.0
    post_norm: float = 1.0
    f_pre: float = 0.0
    f_post: float = 0.0

    def __post_init__(self):
        if min(self.t, self.pre_norm, self.post_norm, self.f_pre, self.f_post) < 0:
            raise ValueError("level parameters must be nonnegative")


def mu_nonstationary(levels: Sequence[PrePostLevel], mu_base: float) -> float:
    """Evaluate the level recursion bottom-up and return ``mu(n_1)``.

    ``mu_j = mu_{j+1} t_j |Post_j| |Pre_j|^2 + 2 f_pre_j t_j |Post_j| + f_post_j |Pre_j|^2``
    """
    if not levels:
        raise ValueError("at least one level is required")
    mu = mu_base
    for lv in reversed(levels):
        pre2 = lv.pre_norm * lv.pre_norm
        mu = mu * lv.t * lv.post_norm * pre2 + 2 * lv.f_pre * lv.t * lv.post_norm + lv.f_post * pre2
    return mu


# group-theoretic exponents ---------------------------------------------------


def _check_beta(beta):
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")


def mu_stpp_exponent(alpha: float, beta: float) -> float:
    """Exponent of ``mu(n)`` for an Abelian STP family with growth ``(alpha, beta)``."""
    _check_beta(beta)
    return (alpha + 2) / (2 * beta)


def runtime_exponent(alpha: float, beta: float) -> float:
    _check_beta(beta)
    return (alpha - 1) / beta


def exponent_sum(alpha: float, beta: float) -> float:
    """Sum of the error and runtime exponents, which always equals ``3 alpha / (2 beta)``."""
    total = mu_stpp_exponent(alpha, beta) + runtime_exponent(alpha, beta)
    closed = 3 * alpha / (2 * beta)
    assert math.isclose(total, closed, rel_tol=1e-12, abs_tol=1e-12), (total, closed)
    return total


# omega bounds ----------------------------------------------------------------


@dataclass(frozen=True)
class ExponentProblem:
    triples: tuple
    rank: float | None = None
    irrep_dims: tuple | None = None

    def __post_init__(self):
        triples = tuple(tuple(int(x) for x in tr) for tr in self.triples)
        if not triples or any(len(tr) != 3 for tr in triples):
            raise ValueError("need at least one (e, h, l) triple")
        if any(x <= 0 for tr in triples for x in tr):
            raise ValueError(f"degenerate triple in {triples}: dimensions must be positive")
        object.__setattr__(self, "triples", triples)
        if (self.rank is None) == (self.irrep_dims is None):
            raise ValueError("give exactly one of rank or irrep_dims")
        if self.rank is not None and self.rank <= 0:
            raise ValueError("rank must be positive")
        if self.irrep_dims is not None:
            dims = tuple(int(d) for d in self.irrep_dims)
            if not dims or min(dims) <= 0:
                raise ValueError("irrep dimensions must be positive")
            object.__setattr__(self, "irrep_dims", dims)


@dataclass(frozen=True)
class OmegaBound:
    value: float
    status: str = "ok"   # "ok", "clamped-high" (bound above 3) or "clamped-low" (below 2)

    def __float__(self):
        return self.value


OMEGA_TOL = 1e-9


def omega_bound(problem: ExponentProblem, tol: float = OMEGA_TOL) -> OmegaBound:
    """Solve ``sum (e h l)^(w/3) = rhs(w)`` for ``w`` in [2, 3] by bisection."""
    vols = [float(e * h * l) for e, h, l in problem.triples]
    if problem.rank is not None:
        r = float(problem.rank)

        def f(w):
            return math.fsum(v ** (w / 3) for v in vols) - r
    else:
        dims = [float(d) for d in problem.irrep_dims]

        def f(w):
            return math.fsum(v ** (w / 3) for v in vols) - math.fsum(d ** w for d in dims)

    lo, hi = 2.0, 3.0
    flo, fhi = f(lo), f(hi)
    if fhi < 0:
        return OmegaBound(3.0, "clamped-high")
    if flo > 0:
        return OmegaBound(2.0, "clamped-low")
    if fhi == 0:
        return OmegaBound(3.0)
    if flo == 0:
        return OmegaBound(2.0)
    # bisect well past the advertised tolerance so the midpoint is safely inside it
    while hi - lo > tol * 1e-3:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0:
            return OmegaBound(mid)
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return OmegaBound(0.5 * (lo + hi))


# empirical harness -----------------------------------------------------------


@dataclass(frozen=True)
class ErrorBoundReport:
    n: int
    algorithm: str
    norm_kind: str
    p: int | None
    epsilon: float
    measured_error: float
    norm_a: float
    norm_b: float
    mu: float
    theta: float | None
    slack: float = 0.0
    instances: int = 1
    bound: float = field(init=False)
    passed: bool = field(init=False)

    def __post_init__(self):
        bound = self.mu * self.epsilon * self.norm_a * self.norm_b
        object.__setattr__(self, "bound", bound)
        object.__setattr__(self, "passed", self.measured_error <= bound * (1 + self.slack))

    @property
    def normalized_error(self) -> float:
        """``measured / (eps |A| |B|)``, the empirically observed ``mu``."""
        scale = self.epsilon * self.norm_a * self.norm_b
        return self.measured_error / scale if scale else 0.0

    def as_row(self) -> list:
        return [self.n, self.algorithm, self.norm_kind, "" if self.p is None else self.p,
                f"{self.epsilon:.6e}", f"{self.measured_error:.6e}", f"{self.norm_a:.6e}",
                f"{self.norm_b:.6e}", f"{self.mu:.6e}", "" if self.theta is None else self.theta,
                self.slack, self.instances, "true" if self.passed else "false"]

    def describe(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (f"n={self.n} {self.algorithm} p={self.p} eps={self.epsilon:.3e} "
                f"|C~-C|_{self.norm_kind}={self.measured_error:.3e} "
                f"<= mu*eps*|A||B|*(1+{self.slack})={self.bound * (1 + self.slack):.3e} "
                f"(mu={self.mu:.4g}, theta={self.theta}) {verdict}")


CSV_HEADER = ["n", "algorithm", "norm", "p_bits", "epsilon", "measured_abs_error",
              "norm_A", "norm_B", "mu", "theta", "slack", "instances", "pass"]


def _exact_parts(M: Matrix):
    if not M.is_complex:
        return M.to_rational(), None
    vals = M.to_numpy()
    return (Matrix.from_array(vals.real).to_rational(),
            Matrix.from_array(vals.imag).to_rational())


def _exact_error(C_comp: Matrix, A: Matrix, B: Matrix) -> np.ndarray:
    """Entrywise ``C_comp - A B`` (exact difference, rounded once to binary64)."""
    ar, ai = _exact_parts(A)
    br, bi = _exact_parts(B)
    cr, ci = _exact_parts(C_comp)
    if ai is None and bi is None and ci is None:
        return (cr - ar @ br).to_numpy()
    ai = Matrix.zeros(*ar.shape) if ai is None else ai
    bi = Matrix.zeros(*br.shape) if bi is None else bi
    ci = Matrix.zeros(*cr.shape) if ci is None else ci
    real = ar @ br - ai @ bi
    imag = ar @ bi + ai @ br
    return (cr - real).to_numpy() + 1j * (ci - imag).to_numpy()


def measure_error(multiplier: Callable[[Matrix, Matrix], Matrix], A: Matrix, B: Matrix,
                  ctx: RoundingContext | int | None, norm_kind: NormKind | str = NormKind.MAX_ENTRY,
                  *, mu: float = 1.0, theta: float | None = None, slack: float = 0.0,
                  algorithm: str = "") -> ErrorBoundReport:
    """Run ``multiplier`` on ``A, B`` rounded into ``ctx`` and compare with the exact product.

    The reference is the exact rational product of the rounded inputs.  With
    ``ctx=None`` the inputs are converted to exact rationals and ``eps = 0``.
    """
    kind = NormKind(norm_kind)
    if A.rows != A.cols or B.shape != A.shape:
        raise ValueError(f"need square operands of equal side, got {A.shape} and {B.shape}")
    if isinstance(ctx, int):
        ctx = RoundingContext(ctx)
    if ctx is None:
        a_in, b_in, eps, p = A.to_rational(), B.to_rational(), 0.0, None
    else:
        a_in, b_in, eps, p = A.to_rounded(ctx.p), B.to_rounded(ctx.p), ctx.epsilon, ctx.p
    C = multiplier(a_in, b_in)
    if C.shape != (A.rows, B.cols):
        raise ValueError(f"multiplier returned shape {C.shape}")
    diff = _exact_error(C, a_in, b_in)
    err = norm(Matrix.from_array(diff), kind)
    return ErrorBoundReport(A.rows, algorithm, kind.value, p, eps, err,
                            norm(a_in, kind), norm(b_in, kind), mu, theta, slack)


def worst_case(reports: Sequence[ErrorBoundReport]) -> ErrorBoundReport:
    """Summary report: the instance with the largest measured/bound ratio, pass if all passed."""
    if not reports:
        raise ValueError("no reports")
    worst = max(reports, key=lambda r: r.measured_error / r.bound if r.bound else math.inf)
    out = ErrorBoundReport(worst.n, worst.algorithm, worst.norm_kind, worst.p, worst.epsilon,
                           worst.measured_error, worst.norm_a, worst.norm_b, worst.mu,
                           worst.theta, worst.slack, len(reports))
    object.__setattr__(out, "passed", all(r.passed for r in reports))
    return out


def random_inputs(rng: np.random.Generator, n: int, complex_values: bool = False):
    """Binary64 operands with entries uniform on [-1, 1] (or unit Gaussian complex)."""
    if complex_values:
        shape = (2, n, n)
        z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        return Matrix.from_array(z[0]), Matrix.from_array(z[1])
    x = rng.uniform(-1.0, 1.0, size=(2, n, n))
    return Matrix.from_array(x[0]), Matrix.from_array(x[1])


@dataclass(frozen=True)
class EpsilonScaling:
    n: int
    p_high: int
    p_low: int
    mean_high: float
    mean_low: float

    @property
    def expected_ratio(self) -> float:
        return 2.0 ** (self.p_high - self.p_low)

    @property
    def observed_ratio(self) -> float:
        return self.mean_low / self.mean_high if self.mean_high else math.inf

    @property
    def factor(self) -> float:
        """Observed over expected ratio; 1 means errors scale exactly with eps."""
        return self.observed_ratio / self.expected_ratio

    def consistent(self, within: float = 2.0) -> bool:
        return 1 / within <= self.factor <= within


def epsilon_scaling(multiplier, n: int, p_high: int, p_low: int, *, instances: int = 50,
                    seed: int = 0, norm_kind: NormKind | str = NormKind.MAX_ENTRY) -> EpsilonScaling:
    """Mean absolute errors at two precisions on the same seeded binary64 inputs."""
    rng = np.random.default_rng(seed)
    hi, lo = [], []
    for _ in range(instances):
        A, B = random_inputs(rng, n)
        hi.append(measure_error(multiplier, A, B, p_high, norm_kind).measured_error)
        lo.append(measure_error(multiplier, A, B, p_low, norm_kind).measured_error)
    return EpsilonScaling(n, p_high, p_low, float(np.mean(hi)), float(np.mean(lo)))


@dataclass(frozen=True)
class GrowthFit:
    slope: float
    intercept: float
    limit: float

    @property
    def within_limit(self) -> bool:
        return self.slope <= self.limit


def growth_slope(sizes: Sequence[int], normalized_errors: Sequence[float],
                 limit: float = math.log2(12) + 0.5) -> GrowthFit:
    """Least-squares slope of ``log2(error/eps)`` against ``log2 n`` (advisory)."""
    x = np.log2(np.asarray(sizes, dtype=float))
    y = np.log2(np.asarray(normalized_errors, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    return GrowthFit(float(slope), float(intercept), limit)

"""Matrix multiplication through the group algebra of ``H wr Sym_N``.

A family supplies, for each ``N``, an Abelian group ``H`` and ``N`` triples
``(X_i, Y_i, Z_i)`` with the simultaneous triple product property.  The sets
``X = (X_1 x ... x X_N) x Sym_N`` (and ``Y``, ``Z`` likewise) then have the
triple product property in the wreath product, which lets an ``n x n``
product be read off a single group-algebra product.  That product is computed
in the Fourier basis of ``H^N``: one small ``N! x N!`` matrix product per
``Sym_N``-orbit of characters.
"""

from __future__ import annotations

import itertools
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np

from .arith import NativeOps
from .bilinear import multiply_batch, strassen
from .errors import DimensionError, SpecError, STPPViolation
from .groups import (
    TripleCollection,
    WreathElement,
    WreathProduct,
    format_collection,
    format_witness,
    fourier_wreath,
    inverse_fourier_wreath,
    orbit_representatives,
    parse_collections,
    tpp_check,
)
from .matrix import Matrix

__all__ = [
    "AbelianSTPFamily",
    "GrowthReport",
    "IndexMaps",
    "Plan",
    "build_xyz",
    "fixture_family",
    "load_family",
    "measure_growth",
    "multiply_stpp",
    "plan",
]

STEP_LABELS = {
    "embedding": "1 embedding (no arithmetic)",
    "fourier": "2 Fourier transform (arithmetic)",
    "assemble": "3 assemble matrices (no arithmetic)",
    "multiply": "4 multiply matrices (arithmetic)",
    "disassemble": "5 disassemble matrices (no arithmetic)",
    "inverse-fourier": "6 inverse Fourier transform (arithmetic)",
    "output": "7 output (no arithmetic)",
}


def worker_count() -> int:
    """Worker cap from ``FASTMM_THREADS`` (default 1)."""
    raw = os.environ.get("FASTMM_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


# families --------------------------------------------------------------------


@dataclass(frozen=True)
class AbelianSTPFamily:
    """Triple collections indexed by ``N`` plus optional claimed growth ``(alpha, beta)``."""

    instances: tuple
    alpha: float | None = None
    beta: float | None = None
    name: str = ""

    def __post_init__(self):
        inst = tuple(sorted(self.instances, key=lambda c: c.N))
        if len({c.N for c in inst}) != len(inst):
            raise ValueError("at most one collection per N")
        object.__setattr__(self, "instances", inst)

    def instance(self, N: int) -> TripleCollection:
        for c in self.instances:
            if c.N == N:
                return c
        raise KeyError(f"family has no collection for N={N}")

    def available(self) -> list[tuple[int, int]]:
        """``(N, k_N)`` for every instantiated ``N``."""
        return [(c.N, c.k) for c in self.instances]

    def to_text(self, certified: bool = False) -> str:
        return "\n".join(format_collection(c, certified) for c in self.instances)


def load_family(path, name: str | None = None) -> AbelianSTPFamily:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return AbelianSTPFamily(tuple(parse_collections(text)), name=name or str(path))


def fixture_family() -> AbelianSTPFamily:
    """The shipped family over cyclic groups (found by :func:`stpp_search`)."""
    text = resources.files("fastmm.data").joinpath("cyclic_family.stpp").read_text("utf-8")
    return AbelianSTPFamily(tuple(parse_collections(text)), name="cyclic_family")


@dataclass(frozen=True)
class Plan:
    N: int
    k: int
    padded_n: int
    base_case: bool


def plan(family, n: int) -> Plan:
    """Least ``N`` with ``k_N N! >= n``; base case when ``N! >= n``."""
    if n < 1:
        raise ValueError("n must be positive")
    for N, k in sorted(family.available()):
        size = k * math.factorial(N)
        if size >= n:
            return Plan(N, k, size, math.factorial(N) >= n)
    raise DimensionError(f"family cannot reach n={n}: largest plan size is "
                         f"{max((k * math.factorial(N) for N, k in family.available()), default=0)}")


# index maps ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class IndexMaps:
    """Enumerations of ``X, Y, Z`` and the embedding positions they induce."""

    group: WreathProduct
    X: tuple
    Y: tuple
    Z: tuple
    emb_a: np.ndarray = field(repr=False)   # index of x^-1 y
    emb_b: np.ndarray = field(repr=False)   # index of y^-1 z
    emb_c: np.ndarray = field(repr=False)   # index of x^-1 z

    @property
    def n(self) -> int:
        return len(self.X)


def _product_set(G: WreathProduct, sets) -> tuple:
    # tuple part outer, permutation part inner
    return tuple(WreathElement(h, sigma) for h in itertools.product(*sets) for sigma in G.perms)


def _quotient_index(G: WreathProduct, S, T) -> np.ndarray:
    inv = [G.inv(s) for s in S]
    return np.array([[G.index(G.mul(si, t)) for t in T] for si in inv], dtype=np.int64)


@lru_cache(maxsize=16)
def _build(coll: TripleCollection, check: bool) -> IndexMaps:
    coll.require_stpp()
    G = WreathProduct(coll.group, coll.N)
    X = _product_set(G, [tr[0] for tr in coll.triples])
    Y = _product_set(G, [tr[1] for tr in coll.triples])
    Z = _product_set(G, [tr[2] for tr in coll.triples])
    if not len(X) == len(Y) == len(Z):
        raise DimensionError(f"|X|={len(X)}, |Y|={len(Y)}, |Z|={len(Z)} differ")
    if check:
        res = tpp_check(G, X, Y, Z)
        if not res:
            raise STPPViolation("embedded sets fail the triple product property in the wreath "
                                f"product: {res.witness}", res.witness)
    return IndexMaps(G, X, Y, Z, _quotient_index(G, X, Y), _quotient_index(G, Y, Z),
                     _quotient_index(G, X, Z))


def build_xyz(family, N: int, check: bool = True) -> IndexMaps:
    """Enumerate ``X, Y, Z`` for level ``N``; rejects collections that fail the property."""
    coll = family.instance(N) if not isinstance(family, TripleCollection) else family
    return _build(coll, check)


# the seven steps ---------------------------------------------------------------


def embed(M: np.ndarray, emb: np.ndarray, size: int) -> np.ndarray:
    """Step 1/7 helper: place ``M[r, c]`` at position ``emb[r, c]`` of a group-algebra vector."""
    v = np.zeros(size, dtype=np.complex128)
    v[emb] = M
    return v


@dataclass(frozen=True, eq=False)
class _OrbitTables:
    reps: np.ndarray        # character indices of the orbit representatives
    act: np.ndarray         # act[r, c] = index(perm_r . chi_c)
    rel: np.ndarray         # rel[s, r] = rank(perm_s perm_r^-1)
    comp: np.ndarray        # comp[s, r] = rank(perm_s perm_r)
    rep_pos: np.ndarray     # representative position of every character
    tau_rank: np.ndarray    # rank of the least tau with chi = tau . chi0


@lru_cache(maxsize=16)
def _orbit_tables(G: WreathProduct) -> _OrbitTables:
    H, N = G.base, G.N
    reps = np.array([G.h_index(chi) for chi in orbit_representatives(H, N)], dtype=np.int64)
    act = np.stack([G.action_index(p) for p in G.perms])
    rank = G.perm_rank
    P = G.perms
    rel = np.array([[rank(s.compose(r.inverse())) for r in P] for s in P], dtype=np.int64)
    comp = np.array([[rank(s.compose(r)) for r in P] for s in P], dtype=np.int64)
    size = H.order ** N
    rep_pos = np.full(size, -1, dtype=np.int64)
    tau_rank = np.full(size, -1, dtype=np.int64)
    # walk tau in reverse lexicographic order so the least tau is written last
    for t in reversed(range(len(P))):
        idx = act[t, reps]
        rep_pos[idx] = np.arange(len(reps))
        tau_rank[idx] = t
    assert (rep_pos >= 0).all()
    return _OrbitTables(reps, act, rel, comp, rep_pos, tau_rank)


def assemble_blocks(vhat: np.ndarray, G: WreathProduct) -> np.ndarray:
    """Step 3: ``M[chi0][rho, sigma] = vhat[rho . chi0, sigma rho^-1]`` for all representatives."""
    tab = _orbit_tables(G)
    size = G.base.order ** G.N
    f = len(G.perms)
    out = np.empty((len(tab.reps), f, f), dtype=np.complex128)
    for r in range(f):
        chis = tab.act[r, tab.reps]
        for s in range(f):
            out[:, r, s] = vhat[tab.rel[s, r] * size + chis]
    return out


def disassemble_blocks(blocks: np.ndarray, G: WreathProduct) -> np.ndarray:
    """Step 5: ``chat[chi, sigma] = C[chi0][tau, sigma tau]`` where ``chi = tau . chi0``."""
    tab = _orbit_tables(G)
    size = G.base.order ** G.N
    out = np.empty(G.order, dtype=np.complex128)
    for s in range(len(G.perms)):
        out[s * size:(s + 1) * size] = blocks[tab.rep_pos, tab.tau_rank, tab.comp[s, tab.tau_rank]]
    return out


def _base_multiplier(base: str):
    if base == "classical":
        ops = NativeOps(np.complex128)
        return lambda a, b: ops.matmul(a, b)
    if base == "strassen":
        alg = strassen()
        return lambda a, b: multiply_batch(alg, a, b, cutoff=1)
    raise ValueError(f"unknown base multiplier {base!r}; use 'classical' or 'strassen'")


def _multiply_blocks(family, left, right, base: str, depth: int, threads: int):
    if depth > 1:
        out = np.empty_like(left)
        for i in range(left.shape[0]):
            out[i] = multiply_stpp(family, Matrix.from_array(left[i]), Matrix.from_array(right[i]),
                                   base=base, depth=depth - 1).to_numpy()
        return out
    mult = _base_multiplier(base)
    if threads <= 1 or left.shape[0] < 2 * threads:
        return mult(left, right)
    chunks = np.array_split(np.arange(left.shape[0]), threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda ix: mult(left[ix], right[ix]), chunks))
    return np.concatenate(parts, axis=0)


def multiply_stpp(family, A: Matrix, B: Matrix, *, base: str = "classical", depth: int = 1,
                  threads: int | None = None, timings: dict | None = None) -> Matrix:
    """Product ``A B`` through the group algebra of the family's wreath product.

    ``base`` multiplies the per-orbit blocks (and whole products in the base
    case); ``depth > 1`` recurses into those blocks with this algorithm.
    Real inputs give a float result (the imaginary residue is dropped).
    """
    if A.rows != A.cols or A.shape != B.shape:
        raise DimensionError(f"need square operands of equal side, got {A.shape} and {B.shape}")
    n = A.rows
    real = not (A.is_complex or B.is_complex)
    a_mat = A.to_numpy().astype(np.complex128)
    b_mat = B.to_numpy().astype(np.complex128)
    threads = worker_count() if threads is None else threads
    p = plan(family, n)
    clock = _Clock(timings)
    if p.base_case:
        with clock("multiply"):
            c = _base_multiplier(base)(a_mat[None], b_mat[None])[0]
        return _result(c, real)
    maps = build_xyz(family, p.N)
    G = maps.group
    m = maps.n
    ap = np.zeros((m, m), dtype=np.complex128)
    bp = np.zeros((m, m), dtype=np.complex128)
    ap[:n, :n] = a_mat
    bp[:n, :n] = b_mat
    with clock("embedding"):
        a_vec = embed(ap, maps.emb_a, G.order)
        b_vec = embed(bp, maps.emb_b, G.order)
    with clock("fourier"):
        a_hat = fourier_wreath(a_vec, G)
        b_hat = fourier_wreath(b_vec, G)
    with clock("assemble"):
        a_blk = assemble_blocks(a_hat, G)
        b_blk = assemble_blocks(b_hat, G)
    with clock("multiply"):
        # With the assembly above, c_hat[chi, sigma] = C[chi0][tau, sigma tau] holds
        # for C = B^chi A^chi; the opposite order gives the transposed convention.
        c_blk = _multiply_blocks(family, b_blk, a_blk, base, depth, threads)
    with clock("disassemble"):
        c_hat = disassemble_blocks(c_blk, G)
    with clock("inverse-fourier"):
        c_vec = inverse_fourier_wreath(c_hat, G)
    with clock("output"):
        c = c_vec[maps.emb_c][:n, :n]
    return _result(c, real)


def _result(c: np.ndarray, real: bool) -> Matrix:
    if real:
        return Matrix.from_array(np.ascontiguousarray(c.real), "float")
    return Matrix.from_array(c, "complex")


class _Clock:
    def __init__(self, sink):
        self.sink = sink

    def __call__(self, step):
        return _Timer(self.sink, step)


class _Timer:
    def __init__(self, sink, step):
        self.sink, self.step = sink, step

    def __enter__(self):
        self.t0 = time.perf_counter()

    def __exit__(self, *exc):
        if self.sink is not None:
            self.sink[self.step] = self.sink.get(self.step, 0.0) + time.perf_counter() - self.t0
        return False


# growth ----------------------------------------------------------------------


@dataclass(frozen=True)
class GrowthReport:
    Ns: tuple
    group_orders: tuple
    ks: tuple
    alpha_hat: float | None
    beta_hat: float | None
    claimed: tuple
    conforming: bool

    def describe(self) -> str:
        rows = [f"N={N} |H|={h} k={k} plan={k * math.factorial(N)}"
                for N, h, k in zip(self.Ns, self.group_orders, self.ks)]
        claim = "measured only" if self.claimed == (None, None) else f"claimed alpha,beta={self.claimed}"
        fit = (f"alpha_hat={self.alpha_hat:.4f} beta_hat={self.beta_hat:.4f}"
               if self.alpha_hat is not None else "alpha_hat=n/a beta_hat=n/a")
        flag = "conforming" if self.conforming else "non-conforming growth"
        return "\n".join(rows + [f"{fit} ({claim}; {flag})"])


def _slope(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    if len(set(x.tolist())) < 2:
        return None
    return float(np.polyfit(x, y, 1)[0])


def measure_growth(family: AbelianSTPFamily, Ns=None) -> GrowthReport:
    """Fit ``log|H_N|`` against ``log N`` and ``log k_N`` against ``N log N``.

    The three subset-size products must agree at every ``N`` (``k`` raises otherwise).
    """
    colls = [family.instance(N) for N in Ns] if Ns is not None else list(family.instances)
    Ns = tuple(c.N for c in colls)
    orders = tuple(c.group.order for c in colls)
    ks = tuple(c.k for c in colls)
    alpha = _slope([math.log(N) for N in Ns], [math.log(h) for h in orders])
    beta = _slope([N * math.log(N) for N in Ns], [math.log(k) for k in ks])
    conforming = alpha is not None and beta is not None and alpha > 0 and beta > 0
    return GrowthReport(Ns, orders, ks, alpha, beta, (family.alpha, family.beta), conforming)


def certify(coll: TripleCollection) -> str:
    """Family text with the certificate line, or raise with the witness."""
    res = coll.check()
    if not res:
        raise STPPViolation(f"STPP violated: {format_witness(res.witness)}", res.witness)
    return format_collection(coll, certified=True)


def parse_family_text(text: str, name: str = "") -> AbelianSTPFamily:
    try:
        return AbelianSTPFamily(tuple(parse_collections(text)), name=name)
    except ValueError as exc:
        raise SpecError(str(exc)) from None

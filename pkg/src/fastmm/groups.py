"""Finite Abelian groups, their characters, wreath products with Sym_N,
Fourier transforms on ``H^N``, and (simultaneous) triple product checks.

Conventions used throughout:

* permutations compose as ``(s o t)(i) = s(t(i))``;
* ``Sym_N`` acts on ``H^N`` by ``(s.h)(i) = h(s^-1(i))``;
* a wreath element ``(h, s)`` stands for the product ``h s``, so
  ``(h1, s1)(h2, s2) = (h1 + s1.h2, s1 s2)`` and ``s h = (s.h, s)``;
* vectors indexed by ``H wr Sym_N`` are laid out permutation-major:
  position ``rank(s) * |H|^N + index(h)`` holds the coefficient of ``(h, s)``.
"""

from __future__ import annotations

import cmath
import itertools
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from .errors import DimensionError, SpecError, STPPViolation

__all__ = [
    "AbelianGroup",
    "Character",
    "SymPerm",
    "TripleCollection",
    "WreathElement",
    "WreathProduct",
    "char_eval",
    "fourier_wreath",
    "inverse_fourier_wreath",
    "orbit_decomposition",
    "orbit_representatives",
    "quotient_set",
    "stpp_check",
    "stpp_search",
    "tpp_check",
    "wreath_inv",
    "wreath_mul",
]


# Abelian groups ----------------------------------------------------------------


@dataclass(frozen=True)
class AbelianGroup:
    """``Z/n_1 x ... x Z/n_d``; elements are residue tuples."""

    factor_orders: tuple[int, ...]

    def __post_init__(self):
        orders = tuple(int(n) for n in self.factor_orders)
        if not orders or min(orders) < 1:
            raise ValueError(f"factor orders must be positive, got {self.factor_orders}")
        object.__setattr__(self, "factor_orders", orders)

    @classmethod
    def cyclic(cls, n: int) -> AbelianGroup:
        return cls((n,))

    @property
    def order(self) -> int:
        return math.prod(self.factor_orders)

    @property
    def rank(self) -> int:
        return len(self.factor_orders)

    @property
    def identity(self) -> tuple[int, ...]:
        return (0,) * self.rank

    def elements(self) -> list[tuple[int, ...]]:
        """All elements in lexicographic order (which is also index order)."""
        return list(itertools.product(*(range(n) for n in self.factor_orders)))

    def index(self, h) -> int:
        i = 0
        for x, n in zip(h, self.factor_orders):
            i = i * n + x
        return i

    def element(self, index: int) -> tuple[int, ...]:
        out = []
        for n in reversed(self.factor_orders):
            index, x = divmod(index, n)
            out.append(x)
        return tuple(reversed(out))

    def coerce(self, h) -> tuple[int, ...]:
        if isinstance(h, (int, np.integer)):
            h = (int(h),)
        h = tuple(int(x) for x in h)
        if len(h) != self.rank:
            raise DimensionError(f"element {h} does not belong to a rank-{self.rank} group")
        return tuple(x % n for x, n in zip(h, self.factor_orders))

    def add(self, g, h):
        return tuple((a + b) % n for a, b, n in zip(g, h, self.factor_orders))

    def neg(self, h):
        return tuple(-a % n for a, n in zip(h, self.factor_orders))

    def sub(self, g, h):
        return tuple((a - b) % n for a, b, n in zip(g, h, self.factor_orders))

    # multiplicative names so generic checks work on any group
    mul = add
    inv = neg

    def characters(self) -> list[Character]:
        return [Character(self, c) for c in self.elements()]

    def power(self, N: int) -> AbelianGroup:
        """``H^N`` as a flat product of cyclic factors."""
        return AbelianGroup(self.factor_orders * N)

    def __str__(self):
        return " x ".join(f"Cyc{n}" for n in self.factor_orders)


_QUARTER_TURNS = {Fraction(0): 1 + 0j, Fraction(1, 4): 1j, Fraction(1, 2): -1 + 0j,
                  Fraction(3, 4): -1j}


def root_of_unity(turns: Fraction) -> complex:
    """``exp(2 pi i turns)`` with the angle reduced exactly mod 1."""
    turns = turns % 1
    exact = _QUARTER_TURNS.get(turns)
    if exact is not None:
        return exact
    return cmath.exp(2j * math.pi * float(turns))


@dataclass(frozen=True)
class Character:
    """``chi_c(h) = exp(2 pi i sum_j c_j h_j / n_j)``."""

    group: AbelianGroup
    coeffs: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "coeffs", self.group.coerce(self.coeffs))

    def turns(self, h) -> Fraction:
        return sum((Fraction(c * x, n) for c, x, n in zip(self.coeffs, h, self.group.factor_orders)),
                   Fraction(0)) % 1

    def __call__(self, h) -> complex:
        return root_of_unity(self.turns(self.group.coerce(h)))

    @property
    def is_trivial(self) -> bool:
        return not any(self.coeffs)


def char_eval(chi: Character, h) -> complex:
    return chi(h)


def character_table(group: AbelianGroup) -> np.ndarray:
    """``T[c, h] = chi_c(h)`` in index order."""
    els = group.elements()
    return np.array([[Character(group, c)(h) for h in els] for c in els])


# permutations and the wreath product -------------------------------------------


@dataclass(frozen=True, order=True)
class SymPerm:
    """Permutation of ``{0..N-1}`` with ``images[s] = sigma(s)``."""

    images: tuple[int, ...]

    def __post_init__(self):
        imgs = tuple(int(x) for x in self.images)
        if sorted(imgs) != list(range(len(imgs))):
            raise ValueError(f"{imgs} is not a permutation")
        object.__setattr__(self, "images", imgs)

    @classmethod
    def identity(cls, N: int) -> SymPerm:
        return cls(tuple(range(N)))

    @property
    def degree(self) -> int:
        return len(self.images)

    def __call__(self, s: int) -> int:
        return self.images[s]

    def compose(self, other: SymPerm) -> SymPerm:
        """``self o other``: apply ``other`` first."""
        return SymPerm(tuple(self.images[j] for j in other.images))

    __mul__ = compose

    def inverse(self) -> SymPerm:
        inv = [0] * len(self.images)
        for s, t in enumerate(self.images):
            inv[t] = s
        return SymPerm(tuple(inv))

    def act(self, h: tuple) -> tuple:
        """``(sigma . h)(s) = h(sigma^-1(s))``."""
        inv = self.inverse().images
        return tuple(h[inv[s]] for s in range(len(h)))

    @property
    def sign(self) -> int:
        seen, sign = set(), 1
        for s in range(len(self.images)):
            if s in seen:
                continue
            length, j = 0, s
            while j not in seen:
                seen.add(j)
                j = self.images[j]
                length += 1
            if length % 2 == 0:
                sign = -sign
        return sign


def all_perms(N: int) -> list[SymPerm]:
    """``Sym_N`` in lexicographic order of image tuples."""
    return [SymPerm(p) for p in itertools.permutations(range(N))]


@dataclass(frozen=True, order=True)
class WreathElement:
    h: tuple
    sigma: SymPerm


class WreathProduct:
    """``H wr Sym_N = H^N x| Sym_N``."""

    def __init__(self, base: AbelianGroup, N: int):
        if N < 1:
            raise ValueError("N must be at least 1")
        self.base = base
        self.N = N
        self.perms = all_perms(N)
        self._perm_rank = {p: i for i, p in enumerate(self.perms)}
        self.power = base.power(N)

    @property
    def order(self) -> int:
        return self.base.order ** self.N * math.factorial(self.N)

    @property
    def identity(self) -> WreathElement:
        return WreathElement((self.base.identity,) * self.N, SymPerm.identity(self.N))

    def coerce(self, g) -> WreathElement:
        if isinstance(g, WreathElement):
            h, sigma = g.h, g.sigma
        else:
            h, sigma = g
        if not isinstance(sigma, SymPerm):
            sigma = SymPerm(sigma)
        h = tuple(self.base.coerce(x) for x in h)
        if len(h) != self.N or sigma.degree != self.N:
            raise DimensionError(f"element does not belong to {self}")
        return WreathElement(h, sigma)

    def mul(self, g1: WreathElement, g2: WreathElement) -> WreathElement:
        h2 = g1.sigma.act(g2.h)
        h = tuple(self.base.add(a, b) for a, b in zip(g1.h, h2))
        return WreathElement(h, g1.sigma.compose(g2.sigma))

    def inv(self, g: WreathElement) -> WreathElement:
        qi = g.sigma.inverse()
        return WreathElement(tuple(self.base.neg(x) for x in qi.act(g.h)), qi)

    def perm_element(self, sigma: SymPerm) -> WreathElement:
        return WreathElement((self.base.identity,) * self.N, sigma)

    def base_element(self, h) -> WreathElement:
        return WreathElement(tuple(h), SymPerm.identity(self.N))

    def h_index(self, h) -> int:
        m = self.base.order
        i = 0
        for x in h:
            i = i * m + self.base.index(x)
        return i

    def h_element(self, index: int) -> tuple:
        m = self.base.order
        out = []
        for _ in range(self.N):
            index, x = divmod(index, m)
            out.append(self.base.element(x))
        return tuple(reversed(out))

    def perm_rank(self, sigma: SymPerm) -> int:
        return self._perm_rank[sigma]

    def index(self, g: WreathElement) -> int:
        return self.perm_rank(g.sigma) * self.base.order ** self.N + self.h_index(g.h)

    def element(self, index: int) -> WreathElement:
        size = self.base.order ** self.N
        r, i = divmod(index, size)
        return WreathElement(self.h_element(i), self.perms[r])

    def elements(self) -> list[WreathElement]:
        return [self.element(i) for i in range(self.order)]

    @cached_property
    def _coords(self) -> np.ndarray:
        # row i: base-element indices of the N coordinates of h with index i
        m = self.base.order
        idx = np.arange(m ** self.N)
        cols = [(idx // m ** (self.N - 1 - s)) % m for s in range(self.N)]
        return np.stack(cols, axis=1)

    def action_index(self, sigma: SymPerm) -> np.ndarray:
        """``out[index(h)] = index(sigma . h)``."""
        coords = self._coords[:, list(sigma.inverse().images)]
        m = self.base.order
        weights = m ** np.arange(self.N - 1, -1, -1)
        return coords @ weights

    def __str__(self):
        return f"({self.base}) wr Sym{self.N}"


def wreath_mul(G: WreathProduct, g1, g2) -> WreathElement:
    return G.mul(G.coerce(g1), G.coerce(g2))


def wreath_inv(G: WreathProduct, g) -> WreathElement:
    return G.inv(G.coerce(g))


# Fourier transform on H^N, slice by slice --------------------------------------


def _dft_forward(x: np.ndarray, base: AbelianGroup, N: int) -> np.ndarray:
    # xhat[chi] = sum_h chi(h) x[h]; numpy's inverse FFT carries the +i sign
    shape = base.factor_orders * N
    size = math.prod(shape)
    y = np.fft.ifftn(x.reshape(shape), axes=range(len(shape))) * size
    return y.reshape(size)


def _dft_backward(xhat: np.ndarray, base: AbelianGroup, N: int) -> np.ndarray:
    # x[h] = |H^N|^-1 sum_chi chi(-h) xhat[chi]
    shape = base.factor_orders * N
    size = math.prod(shape)
    return np.fft.fftn(xhat.reshape(shape), axes=range(len(shape))).reshape(size) / size


def fourier_wreath(a, G: WreathProduct) -> np.ndarray:
    """``ahat[chi, sigma] = sum_h chi(h) a[sigma h]`` laid out sigma-major."""
    a = np.asarray(a, dtype=np.complex128)
    size = G.base.order ** G.N
    if a.shape != (G.order,):
        raise DimensionError(f"vector of length {a.shape} does not match |G|={G.order}")
    out = np.empty(G.order, dtype=np.complex128)
    for r, sigma in enumerate(G.perms):
        block = a[r * size:(r + 1) * size]
        # sigma h = (sigma.h, sigma): pull the slice back along the action
        out[r * size:(r + 1) * size] = _dft_forward(block[G.action_index(sigma)], G.base, G.N)
    return out


def inverse_fourier_wreath(chat, G: WreathProduct) -> np.ndarray:
    """Inverse of :func:`fourier_wreath`."""
    chat = np.asarray(chat, dtype=np.complex128)
    size = G.base.order ** G.N
    if chat.shape != (G.order,):
        raise DimensionError(f"vector of length {chat.shape} does not match |G|={G.order}")
    out = np.empty(G.order, dtype=np.complex128)
    for r, sigma in enumerate(G.perms):
        vals = _dft_backward(chat[r * size:(r + 1) * size], G.base, G.N)
        block = np.empty(size, dtype=np.complex128)
        block[G.action_index(sigma)] = vals
        out[r * size:(r + 1) * size] = block
    return out


# orbit representatives of Sym_N on characters of H^N ---------------------------


def orbit_representatives(H: AbelianGroup, N: int) -> list[tuple]:
    """Lexicographically least element of each ``Sym_N``-orbit of characters of ``H^N``.

    A character of ``H^N`` is a tuple of ``N`` coefficient tuples; the least
    element of an orbit is its sorted arrangement.
    """
    return list(itertools.combinations_with_replacement(H.elements(), N))


def orbit_decomposition(chi: tuple) -> tuple[tuple, SymPerm]:
    """Return ``(chi0, tau)`` with ``chi = tau . chi0``, ``tau`` lexicographically least."""
    chi = tuple(chi)
    chi0 = tuple(sorted(chi))
    for tau in all_perms(len(chi)):
        if tau.act(chi0) == chi:
            return chi0, tau
    raise AssertionError("unreachable: sorted arrangement lies in the orbit")


# triple product property ------------------------------------------------------


def quotient_set(group, S, T=None) -> set:
    """``Q(S, T) = {s t^-1}``; ``T`` defaults to ``S``."""
    T = S if T is None else T
    return {group.mul(s, group.inv(t)) for s in S for t in T}


@dataclass(frozen=True)
class CheckResult:
    ok: bool
    witness: tuple | None = None

    def __bool__(self):
        return self.ok


def _sorted(q):
    return sorted(q)


def tpp_check(group, X, Y, Z) -> CheckResult:
    """Exhaustive triple product property check.

    On failure the witness is ``(q_x, q_y, q_z)`` with product 1, not all 1;
    the first one in lexicographic order of ``(q_z, q_y)`` is reported.
    """
    if not X or not Y or not Z:
        raise ValueError("subsets must be non-empty")
    one = group.identity
    qx = quotient_set(group, X)
    qy = _sorted(quotient_set(group, Y))
    qz = _sorted(quotient_set(group, Z))
    for z in qz:
        for y in qy:
            x = group.inv(group.mul(y, z))
            if x in qx and not (x == one and y == one and z == one):
                return CheckResult(False, (x, y, z))
    return CheckResult(True)


def stpp_check(group, triples) -> CheckResult:
    """Simultaneous triple product property over a list of ``(X_i, Y_i, Z_i)``.

    Witness on failure: ``(i, j, k, q_x, q_y, q_z)`` (0-based indices) where
    ``q_x in Q(X_i, X_j)``, ``q_y in Q(Y_j, Y_k)``, ``q_z in Q(Z_k, Z_i)`` and
    ``q_x q_y q_z = 1`` without ``q_x = q_y = q_z = 1`` and ``i = j = k``.
    """
    triples = [tuple(tr) for tr in triples]
    if not triples:
        raise ValueError("need at least one triple")
    for tr in triples:
        if len(tr) != 3 or not all(tr):
            raise ValueError("each triple needs three non-empty subsets")
    one = group.identity
    n = len(triples)
    qx = {(i, j): quotient_set(group, triples[i][0], triples[j][0]) for i in range(n) for j in range(n)}
    qy = {(j, k): _sorted(quotient_set(group, triples[j][1], triples[k][1]))
          for j in range(n) for k in range(n)}
    qz = {(k, i): _sorted(quotient_set(group, triples[k][2], triples[i][2]))
          for k in range(n) for i in range(n)}
    for i in range(n):
        for j in range(n):
            for k in range(n):
                xs = qx[i, j]
                for z in qz[k, i]:
                    for y in qy[j, k]:
                        x = group.inv(group.mul(y, z))
                        if x in xs and not (x == one and y == one and z == one and i == j == k):
                            return CheckResult(False, (i, j, k, x, y, z))
    return CheckResult(True)


# triple collections and the family file format ---------------------------------


@dataclass(frozen=True)
class TripleCollection:
    group: AbelianGroup
    triples: tuple

    def __post_init__(self):
        norm = []
        for tr in self.triples:
            if len(tr) != 3:
                raise ValueError("each entry must be an (X, Y, Z) triple")
            sets = []
            for S in tr:
                els = sorted({self.group.coerce(h) for h in S})
                if not els:
                    raise ValueError("subsets must be non-empty")
                sets.append(tuple(els))
            norm.append(tuple(sets))
        object.__setattr__(self, "triples", tuple(norm))

    @property
    def N(self) -> int:
        return len(self.triples)

    def sizes(self) -> list[tuple[int, int, int]]:
        return [tuple(len(S) for S in tr) for tr in self.triples]

    def products(self) -> tuple[int, int, int]:
        """``(prod |X_i|, prod |Y_i|, prod |Z_i|)``."""
        return tuple(math.prod(len(tr[a]) for tr in self.triples) for a in range(3))

    @property
    def k(self) -> int:
        px, py, pz = self.products()
        if not px == py == pz:
            raise DimensionError(f"products of subset sizes differ: {px}, {py}, {pz}")
        return px

    def check(self) -> CheckResult:
        return stpp_check(self.group, self.triples)

    def require_stpp(self):
        res = self.check()
        if not res:
            raise STPPViolation(f"collection violates the simultaneous triple product property: "
                                f"{format_witness(res.witness)}", res.witness)


def _fmt_el(h) -> str:
    return "(" + ",".join(str(x) for x in h) + ")"


def format_witness(w) -> str:
    if w is None:
        return "none"
    if len(w) == 6:
        i, j, k, x, y, z = w
        return f"i={i} j={j} k={k} q_x={_fmt_el(x)} q_y={_fmt_el(y)} q_z={_fmt_el(z)}"
    return " ".join(f"{name}={_fmt_el(q) if isinstance(q, tuple) else q}"
                    for name, q in zip(("q_x", "q_y", "q_z"), w))


def format_collection(coll: TripleCollection, certified: bool = False) -> str:
    lines = ["H: " + ",".join(str(n) for n in coll.group.factor_orders), f"N: {coll.N}"]
    for i, tr in enumerate(coll.triples, start=1):
        for name, S in zip("XYZ", tr):
            lines.append(f"{name}{i}: " + " ".join(_fmt_el(h) for h in S))
    if certified:
        lines.append("STPP: verified")
    return "\n".join(lines) + "\n"


_TUPLE = re.compile(r"\(([^()]*)\)")


def parse_collections(text: str) -> list[TripleCollection]:
    """Parse one or more collections; each starts with an ``H:`` line."""
    blocks, cur = [], None
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise SpecError(f"bad family line {line!r}")
        key, val = (s.strip() for s in line.split(":", 1))
        if key == "H":
            cur = {"H": val, "sets": {}}
            blocks.append(cur)
            continue
        if cur is None:
            raise SpecError("family text must start with an 'H:' line")
        if key == "N":
            cur["N"] = val
        elif key == "STPP":
            cur["cert"] = val
        elif re.fullmatch(r"[XYZ]\d+", key):
            cur["sets"][key] = [tuple(int(x) for x in m.split(",") if x.strip())
                                for m in _TUPLE.findall(val)]
        else:
            raise SpecError(f"unknown family key {key!r}")
    out = []
    for b in blocks:
        try:
            H = AbelianGroup(tuple(int(x) for x in b["H"].split(",")))
            N = int(b["N"])
        except (KeyError, ValueError) as exc:
            raise SpecError(f"malformed family header: {exc}") from None
        triples = []
        for i in range(1, N + 1):
            try:
                triples.append(tuple(b["sets"][f"{name}{i}"] for name in "XYZ"))
            except KeyError as exc:
                raise SpecError(f"family with N={N} is missing set {exc.args[0]}") from None
        try:
            out.append(TripleCollection(H, tuple(triples)))
        except (ValueError, DimensionError) as exc:
            raise SpecError(f"bad family sets: {exc}") from None
    if not out:
        raise SpecError("no collection found")
    return out


# search ----------------------------------------------------------------------


def _normalize_targets(targets, N):
    targets = tuple(targets)
    if len(targets) == 3 and all(isinstance(x, (int, np.integer)) for x in targets):
        return [tuple(int(x) for x in targets)] * N
    targets = [tuple(int(x) for x in t) for t in targets]
    if len(targets) != N or any(len(t) != 3 for t in targets):
        raise ValueError("size targets must be one (a, b, c) or one per triple")
    return targets


def stpp_search(H: AbelianGroup, N: int, size_targets=(1, 1, 1), budget: int = 1_000_000,
                stats: dict | None = None) -> TripleCollection | None:
    """Lexicographically first collection of ``N`` triples with the requested sizes.

    Subsets are tried as combinations in element-index order, triple by triple
    and ``X, Y, Z`` within a triple, backtracking on the first violation.  The
    first triple's sets are restricted to contain the identity, which loses
    nothing: translating every ``X_i`` (or every ``Y_i``, or every ``Z_i``) by
    the same element preserves the property.  ``budget`` caps the number of
    candidate subsets examined; ``None`` is returned when it runs out or the
    space is exhausted (``stats['exhausted']`` tells which).
    """
    targets = _normalize_targets(size_targets, N)
    m = H.order
    if stats is None:
        stats = {}
    stats.update(nodes=0, exhausted=False)
    if any(min(t) < 1 or max(t) > m for t in targets):
        stats["exhausted"] = True
        return None
    els = H.elements()
    # integer tables: sub[a, b] = index(a - b)
    sub = np.array([[H.index(H.sub(a, b)) for b in els] for a in els], dtype=np.int64)
    neg = [int(sub[0, a]) for a in range(m)]
    add = [[int(sub[a, neg[b]]) for b in range(m)] for a in range(m)]

    cache: dict = {}

    def quot(S, T):
        q = cache.get((S, T))
        if q is None:
            q = cache[S, T] = frozenset(int(sub[s, t]) for s in S for t in T)
        return q

    slots = [(i, c) for i in range(N) for c in range(3)]
    chosen: list = [[None, None, None] for _ in range(N)]

    def violates(last):
        # check every (i, j, k) whose sets are all fixed and that involves the triple just completed
        for i in range(last + 1):
            for j in range(last + 1):
                for k in range(last + 1):
                    if last not in (i, j, k):
                        continue
                    qx = quot(chosen[i][0], chosen[j][0])
                    qy = quot(chosen[j][1], chosen[k][1])
                    qz = quot(chosen[k][2], chosen[i][2])
                    for z in qz:
                        for y in qy:
                            x = neg[add[y][z]]
                            if x in qx and not (x == 0 and y == 0 and z == 0 and i == j == k):
                                return True
        return False

    def candidates(i, c):
        size = targets[i][c]
        if i == 0:
            for rest in itertools.combinations(range(1, m), size - 1):
                yield (0,) + rest
        else:
            yield from itertools.combinations(range(m), size)

    def rec(pos):
        if pos == len(slots):
            return True
        i, c = slots[pos]
        for S in candidates(i, c):
            stats["nodes"] += 1
            if stats["nodes"] > budget:
                raise _BudgetExceeded
            chosen[i][c] = S
            if c == 2 and violates(i):
                continue
            if rec(pos + 1):
                return True
        chosen[i][c] = None
        return False

    try:
        found = rec(0)
    except _BudgetExceeded:
        return None
    if not found:
        stats["exhausted"] = True
        return None
    triples = tuple(tuple(tuple(els[x] for x in S) for S in tr) for tr in chosen)
    return TripleCollection(H, triples)


class _BudgetExceeded(Exception):
    pass

"""Symbolic infinite subsets of N = {1, 2, 3, ...} with exact set algebra.

Three representable families cover every construction used by the simulator:

* ``Fep`` -- finitely modified eventually periodic sets: a residue set modulo
  m, plus a finite added set disjoint from the periodic part and a finite
  removed set inside it.  Closed under intersection and complement (via CRT),
  with exact membership, rank, n-th element, and densities.
* ``BlockLang`` -- unions of intervals with unbounded lengths (factorial
  blocks and their rank images), optionally filtered by a residue mask.
* ``PrimesLang`` -- the primes, with declared analytic densities (0, 0).

All densities and thresholds are ``fractions.Fraction``; there is no floating
point anywhere in a decision path.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial, gcd
from typing import Iterator, Union


class UnsupportedAlgebra(Exception):
    """No exact closed form exists for the requested operand combination."""


def _lcm(a: int, b: int) -> int:
    return a // gcd(a, b) * b


def _count_residue(x: int, r: int, m: int) -> int:
    # number of y in [1, x] with y = r (mod m)
    if x < 1:
        return 0
    if r == 0:
        return x // m
    return (x - r) // m + 1 if x >= r else 0


# ---------------------------------------------------------------------------
# FEP sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Fep:
    """(periodic part \\ removed) | added, in normal form."""

    mod: int
    residues: frozenset
    added: frozenset = frozenset()
    removed: frozenset = frozenset()

    def __post_init__(self):
        if self.mod < 1:
            raise ValueError("modulus must be >= 1")
        if not self.residues:
            raise ValueError("residue set empty: the represented set would be finite")
        if any(not 0 <= r < self.mod for r in self.residues):
            raise ValueError("residues must lie in [0, mod)")
        if any(a % self.mod in self.residues for a in self.added):
            raise ValueError("added set must avoid the periodic part")
        if any(b % self.mod not in self.residues for b in self.removed):
            raise ValueError("removed set must lie inside the periodic part")

    # -- core oracles -------------------------------------------------------

    def _periodic(self, x: int) -> bool:
        return x % self.mod in self.residues

    def contains(self, x: int) -> bool:
        if x < 1:
            return False
        if x in self.added:
            return True
        return self._periodic(x) and x not in self.removed

    def count(self, x: int) -> int:
        """|L ∩ [1, x]|, exact."""
        if x < 1:
            return 0
        c = sum(_count_residue(x, r, self.mod) for r in self.residues)
        c -= sum(1 for b in self.removed if b <= x)
        c += sum(1 for a in self.added if a <= x)
        return c

    def rank(self, x: int) -> int:
        return self.count(x) if self.contains(x) else 0

    def nth(self, j: int) -> int:
        if j < 1:
            raise ValueError("j must be >= 1")
        lo, hi = 1, self.mod
        while self.count(hi) < j:
            hi *= 2
        while lo < hi:
            mid = (lo + hi) // 2
            if self.count(mid) >= j:
                hi = mid
            else:
                lo = mid + 1
        return lo

    def iter_elements(self) -> Iterator[int]:
        res = sorted(self.residues)
        adds = sorted(self.added)
        ai = 0
        k = 0
        while True:
            base = k * self.mod
            for r in res:
                v = base + r
                if v < 1:
                    continue
                while ai < len(adds) and adds[ai] < v:
                    yield adds[ai]
                    ai += 1
                if v in self.removed:
                    continue
                yield v
            k += 1

    # -- algebra helpers ----------------------------------------------------

    def lifted_residues(self, big_mod: int) -> frozenset:
        """Residue set of the periodic part modulo a multiple of ``mod``."""
        assert big_mod % self.mod == 0
        return frozenset(
            r for r in range(big_mod) if r % self.mod in self.residues
        )

    @property
    def periodic_fraction(self) -> Fraction:
        return Fraction(len(self.residues), self.mod)

    def is_nat(self) -> bool:
        return (
            len(self.residues) == self.mod and not self.added and not self.removed
        )

    def spec_str(self) -> str:
        parts = [f"mod={self.mod}", f"residues={sorted(self.residues)}"]
        if self.added:
            parts.append(f"add={sorted(self.added)}")
        if self.removed:
            parts.append(f"remove={sorted(self.removed)}")
        return "fep(" + ", ".join(parts) + ")"

    def __repr__(self):
        return self.spec_str()


def fep(mod: int, residues, add=(), remove=()) -> Fep:
    """Build a normalized Fep.

    Semantics before normalization: x is a member iff
    (x in periodic and x not in remove) or (x in add).
    """
    residues = frozenset(r % mod for r in residues)
    if not residues:
        raise ValueError("residue set empty")
    add = frozenset(int(a) for a in add)
    remove = frozenset(int(b) for b in remove)
    if any(v < 1 for v in add | remove):
        raise ValueError("finite modifications must be positive integers")
    periodic = lambda x: x % mod in residues
    removed = frozenset(b for b in remove if periodic(b) and b not in add)
    added = frozenset(a for a in add if not periodic(a))
    return Fep(mod, residues, added, removed)


NAT = fep(1, [0])
EVENS = fep(2, [0])
ODDS = fep(2, [1])


# ---------------------------------------------------------------------------
# Finite explicit sets (possible intersection results; never languages)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FiniteSet:
    elements: tuple

    def contains(self, x: int) -> bool:
        return x in self.elements

    def count(self, x: int) -> int:
        return sum(1 for e in self.elements if e <= x)

    def rank(self, x: int) -> int:
        return self.count(x) if self.contains(x) else 0

    def nth(self, j: int) -> int:
        if not 1 <= j <= len(self.elements):
            raise ValueError("index outside the finite set")
        return self.elements[j - 1]

    def iter_elements(self) -> Iterator[int]:
        return iter(self.elements)

    def spec_str(self) -> str:
        return f"finite({list(self.elements)})"

    def __repr__(self):
        return self.spec_str()


def finite_set(elements) -> FiniteSet:
    return FiniteSet(tuple(sorted(set(int(e) for e in elements))))


# ---------------------------------------------------------------------------
# Interval-block languages
# ---------------------------------------------------------------------------

def _factorial_intervals() -> Iterator[tuple]:
    i = 1
    while True:
        yield factorial(2 * i), factorial(2 * i + 1)
        i += 1


@dataclass(frozen=True)
class BlockLang:
    """Union of intervals with unbounded lengths, filtered by a residue mask.

    ``base`` names the interval family; ``rank_base`` (when set) maps the
    factorial intervals through the n-th-element function of another language,
    which is how sparse rank-keep omission filters are represented exactly.
    """

    base: str = "factorial_pairs"
    rank_base: Union[Fep, None] = None
    mask_mod: int = 1
    mask_residues: frozenset = frozenset({0})
    added: frozenset = frozenset()
    removed: frozenset = frozenset()

    def intervals(self) -> Iterator[tuple]:
        if self.base != "factorial_pairs":
            raise UnsupportedAlgebra(f"unknown block family {self.base!r}")
        if self.rank_base is None:
            yield from _factorial_intervals()
        else:
            for lo, hi in _factorial_intervals():
                yield self.rank_base.nth(lo), self.rank_base.nth(hi)

    # -- core oracles -------------------------------------------------------

    def _masked(self, x: int) -> bool:
        if x % self.mask_mod not in self.mask_residues:
            return False
        if self.rank_base is not None and not self.rank_base.contains(x):
            return False
        return True

    def _in_blocks(self, x: int) -> bool:
        for lo, hi in self.intervals():
            if lo > x:
                return False
            if x <= hi:
                return True
        return False

    def _block_member(self, x: int) -> bool:
        return self._in_blocks(x) and self._masked(x)

    def contains(self, x: int) -> bool:
        if x < 1:
            return False
        if x in self.added:
            return True
        return self._block_member(x) and x not in self.removed

    def _mask_count(self, x: int) -> int:
        if x < 1:
            return 0
        if self.rank_base is None:
            return sum(_count_residue(x, r, self.mask_mod) for r in self.mask_residues)
        # rank-image blocks always use the trivial mask over the base language
        return self.rank_base.count(x)

    def count(self, x: int) -> int:
        c = 0
        for lo, hi in self.intervals():
            if lo > x:
                break
            c += self._mask_count(min(hi, x)) - self._mask_count(lo - 1)
        c -= sum(1 for b in self.removed if b <= x)
        c += sum(1 for a in self.added if a <= x)
        return c

    def rank(self, x: int) -> int:
        return self.count(x) if self.contains(x) else 0

    def nth(self, j: int) -> int:
        if j < 1:
            raise ValueError("j must be >= 1")
        lo, hi = 1, 8
        while self.count(hi) < j:
            hi *= 2
        while lo < hi:
            mid = (lo + hi) // 2
            if self.count(mid) >= j:
                hi = mid
            else:
                lo = mid + 1
        return lo

    def iter_elements(self) -> Iterator[int]:
        adds = sorted(self.added)
        ai = 0
        for lo, hi in self.intervals():
            for x in range(lo, hi + 1):
                if not self._masked(x) or x in self.removed:
                    continue
                while ai < len(adds) and adds[ai] < x:
                    yield adds[ai]
                    ai += 1
                yield x

    @property
    def mask_fraction(self) -> Fraction:
        if self.rank_base is not None:
            return self.rank_base.periodic_fraction
        return Fraction(len(self.mask_residues), self.mask_mod)

    def spec_str(self) -> str:
        parts = [self.base]
        if self.rank_base is not None:
            parts.append(f"ranks_of={self.rank_base.spec_str()}")
        if self.mask_mod != 1:
            parts.append(f"mask(mod={self.mask_mod}, residues={sorted(self.mask_residues)})")
        if self.added:
            parts.append(f"add={sorted(self.added)}")
        if self.removed:
            parts.append(f"remove={sorted(self.removed)}")
        return "blocks(" + ", ".join(parts) + ")"

    def __repr__(self):
        return self.spec_str()


FACTORIAL_BLOCKS = BlockLang()


# ---------------------------------------------------------------------------
# Primes
# ---------------------------------------------------------------------------

_sieve_primes = [2, 3, 5, 7]
_sieve_limit = 10


def _grow_sieve(limit: int) -> None:
    global _sieve_primes, _sieve_limit
    if limit <= _sieve_limit:
        return
    limit = max(limit, 2 * _sieve_limit)
    flags = bytearray([1]) * (limit + 1)
    flags[0:2] = b"\x00\x00"
    p = 2
    while p * p <= limit:
        if flags[p]:
            flags[p * p :: p] = bytearray(len(flags[p * p :: p]))
        p += 1
    _sieve_primes = [i for i, f in enumerate(flags) if f]
    _sieve_limit = limit


@dataclass(frozen=True)
class PrimesLang:
    """The primes; declared densities mu_low = mu_up = 0 in any Fep."""

    def contains(self, x: int) -> bool:
        if x < 2:
            return False
        _grow_sieve(x)
        i = bisect.bisect_left(_sieve_primes, x)
        return i < len(_sieve_primes) and _sieve_primes[i] == x

    def count(self, x: int) -> int:
        if x < 2:
            return 0
        _grow_sieve(x)
        return bisect.bisect_right(_sieve_primes, x)

    def rank(self, x: int) -> int:
        return self.count(x) if self.contains(x) else 0

    def nth(self, j: int) -> int:
        if j < 1:
            raise ValueError("j must be >= 1")
        while len(_sieve_primes) < j:
            _grow_sieve(2 * _sieve_limit)
        return _sieve_primes[j - 1]

    def iter_elements(self) -> Iterator[int]:
        i = 0
        while True:
            while i >= len(_sieve_primes):
                _grow_sieve(2 * _sieve_limit)
            yield _sieve_primes[i]
            i += 1

    def spec_str(self) -> str:
        return "special(primes)"

    def __repr__(self):
        return self.spec_str()


PRIMES = PrimesLang()

Lang = Union[Fep, BlockLang, PrimesLang]
SetLike = Union[Fep, BlockLang, PrimesLang, FiniteSet]


# ---------------------------------------------------------------------------
# Free-function oracle surface
# ---------------------------------------------------------------------------

def contains(lang: SetLike, x: int) -> bool:
    return lang.contains(x)


def nth(lang: Lang, j: int) -> int:
    return lang.nth(j)


def rank(lang: SetLike, x: int) -> int:
    return lang.rank(x)


def iter_elements(lang: SetLike) -> Iterator[int]:
    return lang.iter_elements()


def is_infinite(s: SetLike) -> bool:
    return not isinstance(s, FiniteSet)


def complement(lang: SetLike) -> SetLike:
    """Complement within N; exact for Fep (and FiniteSet)."""
    if isinstance(lang, FiniteSet):
        return fep(1, [0], remove=lang.elements)
    if isinstance(lang, Fep):
        co_res = frozenset(range(lang.mod)) - lang.residues
        if not co_res:
            return finite_set(lang.removed)
        return Fep(lang.mod, co_res, added=lang.removed, removed=lang.added)
    raise UnsupportedAlgebra(f"complement of {lang!r}")


def _intersect_fep_fep(a: Fep, b: Fep):
    m = _lcm(a.mod, b.mod)
    res = a.lifted_residues(m) & b.lifted_residues(m)
    candidates = a.added | b.added
    if not res:
        elems = [x for x in candidates if a.contains(x) and b.contains(x)]
        return finite_set(elems)
    periodic = lambda x: x % m in res
    removed = frozenset(
        x for x in (a.removed | b.removed) if periodic(x)
    )
    added = frozenset(
        x
        for x in candidates
        if a.contains(x) and b.contains(x) and not periodic(x)
    )
    # an added element of one operand may coincide with a removed one's slot
    removed = frozenset(x for x in removed if not (a.contains(x) and b.contains(x)))
    return Fep(m, res, added=added, removed=removed)


def _intersect_fep_blocks(a: Fep, b: BlockLang):
    if b.rank_base is not None:
        # the block language's elements all lie in its rank base; when that
        # base sits inside a, the intersection is b itself (finite mods aside)
        if not b.added and not b.removed and is_subset(b.rank_base, a):
            return b
        raise UnsupportedAlgebra("fep x rank-image blocks")
    m = _lcm(a.mod, b.mask_mod)
    res = a.lifted_residues(m) & frozenset(
        r for r in range(m) if r % b.mask_mod in b.mask_residues
    )
    candidates = a.added | b.added
    if not res:
        elems = [x for x in candidates if a.contains(x) and b.contains(x)]
        return finite_set(elems)
    pure_blocks = BlockLang(base=b.base)
    in_periodic = lambda x: x % m in res and pure_blocks.contains(x)
    removed = frozenset(
        x
        for x in (a.removed | b.removed)
        if in_periodic(x) and not (a.contains(x) and b.contains(x))
    )
    added = frozenset(
        x
        for x in candidates
        if a.contains(x) and b.contains(x) and not in_periodic(x)
    )
    return BlockLang(
        base=b.base,
        mask_mod=m,
        mask_residues=res,
        added=added,
        removed=removed,
    )


def intersect_pair(a: SetLike, b: SetLike) -> SetLike:
    if a == b:
        return a
    if isinstance(a, FiniteSet):
        return finite_set(x for x in a.elements if b.contains(x))
    if isinstance(b, FiniteSet):
        return finite_set(x for x in b.elements if a.contains(x))
    if isinstance(a, Fep) and a.is_nat():
        return b
    if isinstance(b, Fep) and b.is_nat():
        return a
    if isinstance(a, Fep) and isinstance(b, Fep):
        return _intersect_fep_fep(a, b)
    if isinstance(a, Fep) and isinstance(b, BlockLang):
        return _intersect_fep_blocks(a, b)
    if isinstance(a, BlockLang) and isinstance(b, Fep):
        return _intersect_fep_blocks(b, a)
    raise UnsupportedAlgebra(f"intersect({a!r}, {b!r})")


def intersect(langs) -> SetLike:
    """Exact intersection of a non-empty list of symbolic sets."""
    langs = list(langs)
    if not langs:
        raise ValueError("intersect of empty list")
    acc = langs[0]
    for nxt in langs[1:]:
        acc = intersect_pair(acc, nxt)
    return acc


def difference_witness(a: Lang, b: Lang, scan_limit: int = 10_000):
    """Smallest element of a \\ b, or None if a ⊆ b (exact for Fep pairs)."""
    try:
        diff = intersect_pair(a, complement(b))
    except UnsupportedAlgebra:
        for x in range(1, scan_limit + 1):
            if a.contains(x) and not b.contains(x):
                return x
        raise
    if isinstance(diff, FiniteSet):
        return diff.elements[0] if diff.elements else None
    return next(diff.iter_elements())


def is_subset(a: SetLike, b: SetLike) -> bool:
    if isinstance(a, FiniteSet):
        return all(b.contains(x) for x in a.elements)
    if isinstance(b, Fep) and b.is_nat():
        return True
    return difference_witness(a, b) is None


def mu_exact(a: SetLike, b: Lang) -> tuple:
    """(mu_low(a, b), mu_up(a, b)), exact where supported."""
    if isinstance(b, FiniteSet):
        raise ValueError("density in a finite set is undefined")
    if a == b:
        return Fraction(1), Fraction(1)
    if isinstance(a, FiniteSet):
        return Fraction(0), Fraction(0)
    if isinstance(a, PrimesLang):
        if isinstance(b, Fep):
            return Fraction(0), Fraction(0)
        raise UnsupportedAlgebra("primes density outside Fep hosts")
    if isinstance(a, Fep) and isinstance(b, Fep):
        m = _lcm(a.mod, b.mod)
        inter = len(a.lifted_residues(m) & b.lifted_residues(m))
        total = len(b.lifted_residues(m))
        q = Fraction(inter, total)
        return q, q
    if isinstance(a, BlockLang) and isinstance(b, Fep):
        # unbounded block lengths: a long gap drives the prefix ratio to 0;
        # a long block drives it to the mask fraction relative to b
        if a.rank_base is not None:
            m = _lcm(a.rank_base.mod, b.mod)
            inter = len(a.rank_base.lifted_residues(m) & b.lifted_residues(m))
        else:
            m = _lcm(a.mask_mod, b.mod)
            mask_res = frozenset(
                r for r in range(m) if r % a.mask_mod in a.mask_residues
            )
            inter = len(mask_res & b.lifted_residues(m))
        total = len(b.lifted_residues(m))
        return Fraction(0), Fraction(inter, total)
    raise UnsupportedAlgebra(f"mu_exact({a!r}, {b!r})")


def mu_empirical(a, b: Lang, m: int) -> Fraction:
    """|a ∩ {b_1..b_m}| / m with b_j the canonical enumeration of b."""
    if m < 1:
        raise ValueError("m must be >= 1")
    member = a.contains if hasattr(a, "contains") else a
    cnt = 0
    it = b.iter_elements()
    for _ in range(m):
        if member(next(it)):
            cnt += 1
    return Fraction(cnt, m)


def period_count(b: Lang) -> int:
    """Elements of b per periodic window."""
    if isinstance(b, Fep):
        return len(b.residues)
    raise UnsupportedAlgebra(f"period of {b!r}")


def envelope_period(a: Fep, b: Fep) -> int:
    """Sound constant P with |mu_empirical(a,b,m) - mu_low(a,b)| <= P/m for all m."""
    mods = len(a.added) + len(a.removed) + len(b.added) + len(b.removed)
    return _lcm(a.mod, b.mod) + mods


def density_profile(a: SetLike, b: Fep) -> tuple:
    """Exact deviation profile of a inside b's canonical enumeration.

    Returns (ratio, g_min, h0): for all m >= h0 the deviation
    g(m) = |a ∩ {b_1..b_m}| − m·ratio is periodic with g(m) >= g_min.
    """
    if not isinstance(a, (Fep, FiniteSet)) or not isinstance(b, Fep):
        raise UnsupportedAlgebra(f"density_profile({a!r}, {b!r})")
    if isinstance(a, FiniteSet):
        mx = max(a.elements, default=0)
        h0 = b.count(mx) + 1
        return Fraction(0), Fraction(0), max(h0, 1)
    ratio = mu_exact(a, b)[0]
    finite_vals = a.added | a.removed | b.added | b.removed
    mx = max(finite_vals, default=0)
    h0 = max(b.count(mx) + 1, 1)
    per = _lcm(a.mod, b.mod) // b.mod * len(b.residues)
    start_val = b.nth(h0)
    cnt_a = _count_in_prefix(a, b, start_val)
    g_min = Fraction(cnt_a) - h0 * ratio
    for r in range(h0 + 1, h0 + per):
        val = b.nth(r)
        cnt_a += 1 if a.contains(val) else 0
        g = Fraction(cnt_a) - r * ratio
        if g < g_min:
            g_min = g
    return ratio, g_min, h0


def _count_in_prefix(a: SetLike, b: Fep, up_to_value: int) -> int:
    """|{x in b : x <= v, x in a}| exactly, for Fep a and b."""
    if isinstance(a, Fep):
        inter = _intersect_fep_fep(a, b)
        return inter.count(up_to_value)
    raise UnsupportedAlgebra(f"prefix count for {a!r}")


def density_rate_from_profile(ratio: Fraction, g_min: Fraction, h0: int, eps: Fraction) -> int:
    """Sound m* from a deviation profile: for all m >= m*,
    empirical(m) >= ratio / (1 + eps)."""
    if eps <= 0:
        raise ValueError("eps must be > 0")
    if ratio == 0:
        return 1
    if g_min >= 0:
        return max(h0, 1)
    need = (-g_min) * (1 + eps) / (ratio * eps)
    m_free = int(need) + 1
    return max(h0, m_free, 1)


def density_rate(a: SetLike, b: Fep, eps) -> int:
    """m* such that mu_empirical(a, b, m) >= mu_low(a,b)/(1+eps) for all m >= m*.

    Sound but not minimal.  Exact-FEP operands only.
    """
    eps = Fraction(eps)
    if a == b:
        return 1
    ratio, g_min, h0 = density_profile(a, b)
    return density_rate_from_profile(ratio, g_min, h0, eps)

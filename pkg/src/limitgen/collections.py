"""Indexed countable collections of languages and the finite-expansion
constructions.

Expansion enumerates (base index, finite added set, finite removed set)
triples along diagonals of total weight i + code(A) + code(B), where a finite
set is coded by its binary characteristic number (element a <-> bit a-1).
Triples violating the side conditions (A inside the language, B outside it)
are skipped, so every enumerated language is already in normal form.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional

from . import langs
from .langs import Fep, SetLike, UnsupportedAlgebra, fep


def code_to_set(code: int) -> frozenset:
    out = []
    bit = 1
    val = 1
    while bit <= code:
        if code & bit:
            out.append(val)
        bit <<= 1
        val += 1
    return frozenset(out)


def set_to_code(s) -> int:
    return sum(1 << (a - 1) for a in s)


class Collection:
    """Base interface: a deterministic total indexing of infinite languages."""

    def size(self) -> Optional[int]:
        raise NotImplementedError

    def language_at(self, i: int) -> SetLike:
        raise NotImplementedError

    def active_count(self, n: int) -> int:
        """How many languages the engine considers at step n."""
        sz = self.size()
        return n if sz is None else min(n, sz)

    def spec_str(self) -> str:
        raise NotImplementedError


class ExplicitCollection(Collection):
    def __init__(self, languages):
        self.languages = list(languages)
        if not self.languages:
            raise ValueError("empty collection")

    def size(self):
        return len(self.languages)

    def language_at(self, i: int) -> SetLike:
        if not 1 <= i <= len(self.languages):
            raise IndexError(f"language index {i} out of range")
        return self.languages[i - 1]

    def spec_str(self):
        return "[" + ", ".join(l.spec_str() for l in self.languages) + "]"


class GenerativeCollection(Collection):
    """Lazily indexed family, optionally truncated to ``count`` members."""

    def __init__(self, family: str, count: Optional[int] = None):
        self.family = family
        self.count = count
        self._cache: dict = {}
        if family not in FAMILIES:
            raise ValueError(f"unknown language family {family!r}")

    def size(self):
        return self.count

    def language_at(self, i: int) -> SetLike:
        if i < 1 or (self.count is not None and i > self.count):
            raise IndexError(f"language index {i} out of range")
        if i not in self._cache:
            self._cache[i] = FAMILIES[self.family](i)
        return self._cache[i]

    def spec_str(self):
        suffix = "" if self.count is None else f", count={self.count}"
        return f"family({self.family}{suffix})"


def _two_noisy(i: int) -> Fep:
    """Adversarial family behind the two-noisy-example stream.

    Integers are folded into N by z >= 1 -> 2z and z <= -1 -> -2z + 1, so the
    intended target (all positives) becomes the evens, the two noise values
    (-2, -1) become 5 and 3, and the co-infinite tail (integers <= -100)
    becomes the odds >= 201.  Index 1 is the target; index i >= 2 is the
    folded image of {3, 5} u {2, ..., 2(i-2)} u {odd n >= 201}.
    """
    if i == 1:
        return langs.EVENS
    j = i - 1
    add = set(range(2, 2 * (j - 1) + 1, 2))
    remove = set(range(1, 200, 2)) - {3, 5}
    return fep(2, [1], add=add, remove=remove)


def _hard_residue(k: int):
    def build(i: int) -> Fep:
        if not 1 <= i <= k:
            raise IndexError
        keep = [r for r in range(k) if r != (i - 1) % k]
        add = [x for x in range(1, k + 1) if x % k == (i - 1) % k]
        return fep(k, keep, add=add)

    return build


FAMILIES = {
    "two_noisy": _two_noisy,
    "hard_residue_2": _hard_residue(2),
    "hard_residue_3": _hard_residue(3),
}


class _PatternAlphabet:
    """Finite subsets of a lazily materialized increasing alphabet, coded by
    binary characteristic numbers: bit j of the code selects alphabet[j].
    The alphabet may be finite (co-finite host languages); codes that need
    more letters than exist denote no set and yield None."""

    def __init__(self, host: SetLike):
        if isinstance(host, langs.FiniteSet):
            self._iter = None
            self._elems = list(host.elements)
        else:
            self._iter = host.iter_elements()
            self._elems = []

    def subset(self, code: int) -> Optional[frozenset]:
        need = code.bit_length()
        while len(self._elems) < need:
            if self._iter is None:
                return None
            self._elems.append(next(self._iter))
        return frozenset(self._elems[j] for j in range(need) if code >> j & 1)


class ExpandedCollection(Collection):
    """Countable closure of a base collection under finite modifications.

    Triples (base index, added set, removed set) are enumerated along
    diagonals of weight i + code(A) + code(B).  The characteristic codes run
    over the per-language valid sub-alphabets (values outside the language
    for A, inside it for B), so every enumerated language is already in
    normal form and the enumeration is gap-free.
    """

    def __init__(self, base: Collection, mode: str):
        if mode not in ("add_remove", "add_only"):
            raise ValueError(f"unknown expansion mode {mode!r}")
        base_size = base.size()
        if base_size is None:
            raise ValueError("expansion requires a finite base collection")
        self.base = base
        self.mode = mode
        self._out_alpha = {
            i: _PatternAlphabet(langs.complement(base.language_at(i)))
            for i in range(1, base_size + 1)
        }
        self._in_alpha = {
            i: _PatternAlphabet(base.language_at(i))
            for i in range(1, base_size + 1)
        }
        self._triples: list = []
        self._gen = self._generate()
        self._lang_cache: dict = {}

    def size(self):
        return None

    def _generate(self) -> Iterator[tuple]:
        base_size = self.base.size()
        weight = 1
        while True:
            for i in range(1, min(weight, base_size) + 1):
                rest = weight - i
                if self.mode == "add_only":
                    a = self._out_alpha[i].subset(rest)
                    if a is not None:
                        yield i, a, frozenset()
                    continue
                for code_a in range(rest + 1):
                    a = self._out_alpha[i].subset(code_a)
                    if a is None:
                        continue
                    b = self._in_alpha[i].subset(rest - code_a)
                    if b is None:
                        continue
                    yield i, a, b
            weight += 1

    def triple_at(self, j: int) -> tuple:
        while len(self._triples) < j:
            self._triples.append(next(self._gen))
        return self._triples[j - 1]

    def language_at(self, j: int) -> SetLike:
        if j < 1:
            raise IndexError(f"language index {j} out of range")
        if j not in self._lang_cache:
            i, a, b = self.triple_at(j)
            self._lang_cache[j] = modified_language(self.base.language_at(i), a, b)
        return self._lang_cache[j]

    def index_of(self, i: int, a, b, search_limit: int = 1_000_000) -> int:
        """Index of the (normalized) triple; exists for every valid triple."""
        a, b = frozenset(a), frozenset(b)
        j = 1
        while j <= search_limit:
            if self.triple_at(j) == (i, a, b):
                return j
            j += 1
        raise LookupError(f"triple ({i}, {sorted(a)}, {sorted(b)}) not found")

    def spec_str(self):
        return f"expand({self.base.spec_str()}, {self.mode})"


def modified_language(base: SetLike, a, b) -> SetLike:
    """base u A \\ B for finite A (outside base) and B (inside base)."""
    a, b = frozenset(a), frozenset(b)
    if not a and not b:
        return base
    if isinstance(base, Fep):
        return fep(
            base.mod,
            base.residues,
            add=(set(base.added) | a) - b,
            remove=set(base.removed) | b,
        )
    raise UnsupportedAlgebra(f"finite modification of {base!r}")


def closure(collection: Collection, indices) -> SetLike:
    indices = sorted(set(indices))
    if not indices:
        raise ValueError("closure of an empty index set")
    return langs.intersect([collection.language_at(i) for i in indices])


def check_c_noise_property(
    collection: Collection,
    indices,
    c: Fraction,
    probe_streams,
    horizon: int,
):
    """Finite-horizon falsifier for the constant-noise generation property.

    Satisfied   -- the closure of the subcollection is provably infinite.
    ViolatedBy  -- some probe keeps every subcollection member's empirical
                   noise rate <= c throughout the tail half of the horizon
                   while the closure is (exactly) finite.
    Inconclusive -- neither observed; the property quantifies over all
                   enumerations, so a finite run cannot certify it.
    """
    c = Fraction(c)
    if not 0 < c < 1:
        raise ValueError("c must be in (0, 1)")
    cl = closure(collection, indices)
    if langs.is_infinite(cl):
        return ("Satisfied", None)
    members = [collection.language_at(i) for i in sorted(set(indices))]
    tail_start = max(1, horizon // 2)
    for probe in probe_streams:
        values = probe.materialize(horizon)
        ok = True
        for lang in members:
            out = 0
            for n, x in enumerate(values, start=1):
                if not lang.contains(x):
                    out += 1
                if n >= tail_start and out * c.denominator > c.numerator * n:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            return ("ViolatedBy", probe)
    return ("Inconclusive", None)

"""Concrete generators: engine instantiations, the fall-back set generator,
the set-to-element density transform, the finite-class version-space
generator, expansion and repetition wrappers, and scripted stubs for the
adaptive adversary.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Optional

from . import langs
from .collections import Collection, ExpandedCollection
from .genmeta import (
    ActiveNowPriority,
    ClosureNode,
    CompliantPrefixStop,
    ConsistencyPriority,
    DensityFloorStop,
    Engine,
    EpsHalvingThresholds,
    HalvingThresholds,
    InfiniteClosureStop,
    SymbolicSet,
    TraceRow,
    UniformThresholds,
)
from .langs import SetLike, UnsupportedAlgebra
from .streams import Step


class DensityRateUnavailable(Exception):
    pass


class GeneratorBase:
    """Uniform per-step interface: observe the adversary's step, emit a row."""

    set_based = False

    def observe(self, step: Step) -> TraceRow:
        raise NotImplementedError

    def feedback(self):
        """Set output of the last step, for adaptive adversaries."""
        return None


class EngineGenerator(GeneratorBase):
    def __init__(self, engine: Engine, set_based: bool):
        self.engine = engine
        self.set_based = set_based
        self._last: Optional[TraceRow] = None

    def observe(self, step: Step) -> TraceRow:
        row = self.engine.step(step.value, step.is_noise, step.sigma)
        self._last = row
        return row

    def feedback(self):
        if self._last is None or self._last.output.kind == "empty":
            return None
        return (self._last.output.closure, self.engine.seen)

    @property
    def oracle_calls(self):
        return self.engine.oracle_calls

    def stabilization_report(self, p: int):
        return self.engine.stabilization_report(p)

    def target_priority(self, index: int) -> int:
        return self.engine.priority_at(index, self.engine.n)


# -- engine instantiations ---------------------------------------------------

def vanishing_noise_generator(collection: Collection, **kw) -> EngineGenerator:
    """Thresholds 1/2^(i+1); stop at the largest infinite intersection."""
    eng = Engine(collection, HalvingThresholds(), InfiniteClosureStop(), element_mode=True, **kw)
    return EngineGenerator(eng, set_based=False)


def constant_noise_generator(collection: Collection, c, **kw) -> EngineGenerator:
    """Uniform thresholds c; stop at the largest infinite intersection."""
    eng = Engine(collection, UniformThresholds(c), InfiniteClosureStop(), element_mode=True, **kw)
    return EngineGenerator(eng, set_based=False)


def sorting_variant_generator(collection: Collection, **kw) -> EngineGenerator:
    """Index-order over the currently active set; no priority memory, hence
    no stable-prefix property."""
    eng = Engine(
        collection,
        ActiveNowPriority(HalvingThresholds()),
        InfiniteClosureStop(actives_only=True),
        element_mode=True,
        **kw,
    )
    return EngineGenerator(eng, set_based=False)


def vanishing_noise_set_density_generator(collection: Collection, eps, **kw) -> EngineGenerator:
    """Thresholds eps/2^i; set output from the largest infinite intersection."""
    eng = Engine(collection, EpsHalvingThresholds(eps), InfiniteClosureStop(), element_mode=False, **kw)
    return EngineGenerator(eng, set_based=True)


def constant_noise_set_density_generator(collection: Collection, c, rho, **kw) -> EngineGenerator:
    """Uniform thresholds c; stop while the prefix closure keeps lower density
    >= rho inside every prefix member."""
    eng = Engine(collection, UniformThresholds(c), DensityFloorStop(rho), element_mode=False, **kw)
    return EngineGenerator(eng, set_based=True)


def bounded_dense_generator(collection: Collection, eps, m_bound, **kw) -> EngineGenerator:
    """Thresholds eps/2^i plus the rank-displacement check sigma <= M*m; stop
    while the closure stays (1-eps)/M dense in every prefix member."""
    eps = Fraction(eps)
    m_bound = Fraction(m_bound)
    if m_bound < 1:
        raise ValueError("displacement bound must be >= 1")
    eng = Engine(
        collection,
        EpsHalvingThresholds(eps, bound_m=m_bound),
        DensityFloorStop((1 - eps) / m_bound),
        element_mode=False,
        **kw,
    )
    return EngineGenerator(eng, set_based=True)


def baseline_consistent_generator(collection: Collection, **kw) -> EngineGenerator:
    """Static index order over consistent languages; the noiseless-game
    intersection generator (fails with even two noisy examples)."""
    eng = Engine(
        collection,
        ConsistencyPriority(),
        InfiniteClosureStop(actives_only=True),
        element_mode=True,
        **kw,
    )
    return EngineGenerator(eng, set_based=False)


def closure_exhaustion_probe(collection: Collection, c, **kw) -> EngineGenerator:
    """Executable form of the constant-noise impossibility argument: output
    fresh-against-own-outputs elements of the closure of every currently
    compliant language.  On hard instances the finite closure is exhausted
    after exactly |closure| outputs."""
    eng = Engine(
        collection,
        UniformThresholds(c),
        CompliantPrefixStop(),
        element_mode=True,
        fresh_against_seen=False,
        **kw,
    )
    return EngineGenerator(eng, set_based=False)


# -- fall-back set generator ---------------------------------------------------

class FallbackGenerator(GeneratorBase):
    """Consistency-filtered active set with the fall-back prefix rule: keep
    the longest prefix shared with the previous active set whose closure is
    infinite; output its closure minus the seen set."""

    set_based = True

    def __init__(self, collection: Collection):
        self.collection = collection
        self.n = 0
        self.seen: set = set()
        self.first_seen: dict = {}
        self.rows: list = []
        self.root = ClosureNode(None, None, None, True)
        self._alive: list = []  # consistent indices, ascending
        self._prev_alive: list = []
        self._expanded = isinstance(collection, ExpandedCollection)
        if self._expanded:
            self._base_out: dict = {}  # base index -> set of seen values outside it

    def _consistent_new(self, j: int) -> bool:
        if self._expanded:
            i, a, b = self.collection.triple_at(j)
            out = self._base_out.setdefault(i, set())
            if not out <= a:
                return False
            return not any(v in self.seen for v in b)
        lang = self.collection.language_at(j)
        return all(lang.contains(x) for x in self.seen)

    def _extend(self, node: ClosureNode, idx: int) -> ClosureNode:
        child = node.children.get(idx)
        if child is None:
            lang = self.collection.language_at(idx)
            closure = lang if node.parent is None else langs.intersect_pair(node.closure, lang)
            child = ClosureNode(node, idx, closure, langs.is_infinite(closure))
            node.children[idx] = child
        return child

    def observe(self, step: Step) -> TraceRow:
        self.n += 1
        n = self.n
        x = step.value
        self.seen.add(x)
        if x not in self.first_seen:
            self.first_seen[x] = n

        if self._expanded:
            base = self.collection.base
            size = base.size()
            for i in range(1, size + 1):
                if not base.language_at(i).contains(x):
                    self._base_out.setdefault(i, set()).add(x)
        # drop alive languages the new value kills, keep order
        survivors = []
        for j in self._alive:
            if self._expanded:
                i, a, b = self.collection.triple_at(j)
                if (x in b) or (x in self._base_out.get(i, ()) and x not in a):
                    continue
            else:
                if not self.collection.language_at(j).contains(x):
                    continue
            survivors.append(j)
        self._prev_alive = self._alive
        self._alive = survivors
        if self.collection.active_count(n) >= n and self._consistent_new(n):
            self._alive.append(n)

        # longest common prefix of the previous and current active sets
        limit = 0
        for a_idx, b_idx in zip(self._prev_alive, self._alive):
            if a_idx != b_idx:
                break
            limit += 1

        node = self.root
        j = 0
        if n > 1:
            while j < limit:
                nxt = self._extend(node, self._alive[j])
                if not nxt.infinite:
                    break
                node = nxt
                j += 1

        flags = []
        if j == 0:
            output = SymbolicSet(kind="empty", seen_upto=n)
            flags.append("empty_prefix")
        else:
            output = SymbolicSet(
                kind="inter", closure=node.closure,
                indices=node.prefix_indices(), seen_upto=n,
            )
        row = TraceRow(
            n=n, x=x, is_noise=step.is_noise, sigma=step.sigma,
            prefix=tuple(self._alive[:j]), J=j, output=output,
            element=None, flags=tuple(flags),
        )
        self.rows.append(row)
        return row

    def feedback(self):
        row = self.rows[-1] if self.rows else None
        if row is None or row.output.kind == "empty":
            return None
        return (row.output.closure, self.seen)


# -- set-to-element transform --------------------------------------------------

_M_SENTINEL = None  # stands for "beyond any horizon-reachable value"


class SetToElementTransform(GeneratorBase):
    """Element outputs from a dense set generator's history.

    Per step the base emits A_n with prefix class L_n; the transform computes
    the density-rate horizon m_n (strictly increased), picks the largest k
    with m_k/(1+2^-k) <= 2n/rho, and outputs the smallest fresh element of
    the remembered set A_k.
    """

    set_based = False

    def __init__(self, base: EngineGenerator, rho):
        if not base.set_based:
            raise ValueError("transform needs a set-based generator")
        self.base = base
        self.rho = Fraction(rho)
        if not 0 < self.rho <= 1:
            raise ValueError("rho must be in (0, 1]")
        self.m: list = []  # m_1.. (ints, or sentinel None for oversized)
        self.k = 1
        self.k_history: list = []
        self.rows: list = []
        self.outputs: set = set()
        self.seen: set = set()
        self._profiles: dict = {}  # (node id, lang index) -> profile state
        self._walk_node = None
        self._walker = None

    def _profile_state(self, node, lang_index):
        key = (id(node), lang_index)
        st = self._profiles.get(key)
        if st is None:
            lang = self.base.engine.states[lang_index].lang
            try:
                ratio, g_min, h0 = langs.density_profile(node.closure, lang)
            except UnsupportedAlgebra as exc:
                raise DensityRateUnavailable(str(exc)) from exc
            st = {"lang": lang, "ratio": ratio, "g_min": g_min, "h0": h0,
                  "cnt": 0, "max": 0, "upto": 0}
            self._profiles[key] = st
        # lazy refresh of the excluded-element counters (A = closure minus seen)
        values = self.base.engine.values
        if st["upto"] < len(values):
            lang = st["lang"]
            closure = node.closure
            for v in values[st["upto"]:]:
                if closure.contains(v) and lang.contains(v):
                    st["cnt"] += 1
                    if v > st["max"]:
                        st["max"] = v
            st["upto"] = len(values)
        return st

    def _rate_for(self, node, lang_index, n) -> Optional[int]:
        st = self._profile_state(node, lang_index)
        ratio = st["ratio"]
        if ratio == 0:
            return 1
        g_min_adj = st["g_min"] - st["cnt"]
        h0 = st["h0"]
        if st["max"]:
            h0 = max(h0, st["lang"].count(st["max"]) + 1)
        if g_min_adj >= 0:
            return max(h0, 1)
        if n > 64:
            return _M_SENTINEL  # exact value exceeds any desk horizon; 2^n blows up
        eps = Fraction(1, 2**n)
        need = (-g_min_adj) * (1 + eps) / (ratio * eps)
        return max(h0, int(need) + 1)

    def observe(self, step: Step) -> TraceRow:
        base_row = self.base.observe(step)
        n = base_row.n
        x = step.value
        self.seen.add(x)
        node = self.base.engine.current_node

        flags = list(base_row.flags)
        if base_row.output.kind == "empty":
            m_n = _M_SENTINEL
            flags.append("base_empty")
        else:
            m_n = 1
            for idx in base_row.output.indices:
                r = self._rate_for(node, idx, n)
                if r is _M_SENTINEL:
                    m_n = _M_SENTINEL
                    break
                m_n = max(m_n, r)
        prev = self.m[-1] if self.m else 0
        if m_n is _M_SENTINEL or prev is _M_SENTINEL:
            self.m.append(_M_SENTINEL)
        else:
            self.m.append(max(m_n, prev + 1))

        # largest k <= n with m_k / (1 + 2^-k) <= 2n/rho; the quotient is
        # strictly increasing in k, so a forward pointer suffices
        def fits(k):
            mk = self.m[k - 1]
            if mk is _M_SENTINEL:
                return False
            shift = 1 << min(k, 80)
            return mk * shift * self.rho.numerator <= 2 * n * (shift + 1) * self.rho.denominator

        while self.k < n and fits(self.k + 1):
            self.k += 1
        self.k_history.append(self.k)

        element = self._pick(self.k)
        if element is None:
            flags.append("transform_exhausted")
        row = TraceRow(
            n=n, x=x, is_noise=step.is_noise, sigma=step.sigma,
            prefix=base_row.prefix, J=base_row.J, output=base_row.output,
            element=element, flags=tuple(flags),
        )
        self.rows.append(row)
        return row

    def _pick(self, k: int) -> Optional[int]:
        src = self.base.engine.rows[k - 1].output
        if src.kind == "empty":
            return None
        if src.closure is not self._walk_node:
            self._walk_node = src.closure
            self._walker = src.closure.iter_elements()
        for v in self._walker:
            if v in self.seen or v in self.outputs:
                continue
            self.outputs.add(v)
            return v
        return None

    def feedback(self):
        return self.base.feedback()


# -- finite-class robust version space ------------------------------------------

class VersionSpaceGenerator(GeneratorBase):
    """Finite collections under sub-1/k noise: keep every language whose miss
    count among the distinct examples fits the dynamic budget, output the
    smallest fresh element of their intersection."""

    set_based = False

    def __init__(self, collection: Collection, d_star: Optional[int] = None):
        size = collection.size()
        if size is None:
            raise ValueError("version space needs a finite collection")
        self.collection = collection
        self.k = size
        self.languages = [collection.language_at(i) for i in range(1, size + 1)]
        self.d_star = self.estimate_d_star(self.languages) if d_star is None else d_star
        self.hits = [0] * size
        self.distinct = 0
        self.seen: set = set()
        self.first_seen: dict = {}
        self.outputs: set = set()
        self.rows: list = []
        self.budget_history: list = []  # (n, N_t, n_t, bot)
        self.n = 0
        self._noise_count = 0
        self._closure_cache: dict = {}
        self._walkers: dict = {}

    @staticmethod
    def estimate_d_star(languages, pool_per_lang: int = 8, d_cap: int = 6, budget_cap: int = 2) -> int:
        """Bounded brute-force search for the closure-dimension offset: the
        largest d (up to d_cap) admitting distinct examples whose budgeted
        version space is non-empty with a finite intersection."""
        k = len(languages)
        pool = sorted(
            {lang.nth(j) for lang in languages for j in range(1, pool_per_lang + 1)}
        )
        finite_closure: dict = {}

        def closure_is_finite(mask: int) -> bool:
            if mask not in finite_closure:
                members = [languages[i] for i in range(k) if mask & (1 << i)]
                try:
                    finite_closure[mask] = not langs.is_infinite(langs.intersect(members))
                except UnsupportedAlgebra:
                    finite_closure[mask] = False
            return finite_closure[mask]

        best = 0
        for n_budget in range(budget_cap + 1):
            nc = 0
            for d in range(1, d_cap + 1):
                found = False
                for xs in itertools.combinations(pool, d):
                    mask = 0
                    for i, lang in enumerate(languages):
                        if sum(1 for x in xs if lang.contains(x)) >= d - n_budget:
                            mask |= 1 << i
                    if mask and closure_is_finite(mask):
                        found = True
                        break
                if found:
                    nc = d
            best = max(best, nc - n_budget * k - 1)
        return max(best, 0)

    def _closure(self, mask: int):
        if mask not in self._closure_cache:
            members = [self.languages[i] for i in range(self.k) if mask & (1 << i)]
            self._closure_cache[mask] = langs.intersect(members) if members else None
        return self._closure_cache[mask]

    def observe(self, step: Step) -> TraceRow:
        self.n += 1
        n = self.n
        x = step.value
        if x not in self.seen:
            self.seen.add(x)
            self.first_seen[x] = n
            self.distinct += 1
            for i, lang in enumerate(self.languages):
                if lang.contains(x):
                    self.hits[i] += 1
        if step.is_noise:
            self._noise_count += 1

        d_t = self.distinct
        n_t = max(0, (d_t - (self.d_star + 2)) // self.k)
        mask = 0
        for i in range(self.k):
            if self.hits[i] >= d_t - n_t:
                mask |= 1 << i
        self.budget_history.append((n, self._noise_count, n_t, mask == 0))

        flags = []
        if mask == 0:
            flags.append("closure_bot")
            element = self._placeholder()
            output = SymbolicSet(kind="empty", seen_upto=n)
        else:
            cl = self._closure(mask)
            output = SymbolicSet(
                kind="inter",
                closure=cl,
                indices=tuple(i + 1 for i in range(self.k) if mask & (1 << i)),
                seen_upto=n,
            )
            element = self._pick(mask, cl)
            if element is None:
                flags.append("closure_exhausted")
                element = self._placeholder()
                flags.append("placeholder")
        row = TraceRow(
            n=n, x=x, is_noise=step.is_noise, sigma=step.sigma,
            prefix=output.indices, J=len(output.indices), output=output,
            element=element, flags=tuple(flags),
        )
        self.rows.append(row)
        return row

    def _pick(self, mask: int, cl) -> Optional[int]:
        if isinstance(cl, langs.FiniteSet):
            for v in cl.elements:
                if v not in self.seen and v not in self.outputs:
                    self.outputs.add(v)
                    return v
            return None
        if mask not in self._walkers:
            self._walkers[mask] = cl.iter_elements()
        for v in self._walkers[mask]:
            if v not in self.seen and v not in self.outputs:
                self.outputs.add(v)
                return v
        return None

    def _placeholder(self) -> int:
        v = 1
        while v in self.seen or v in self.outputs:
            v += 1
        self.outputs.add(v)
        return v


# -- wrappers -------------------------------------------------------------------

class RepetitionWrapper(GeneratorBase):
    """Runs the inner generator on the deduped projection of a raw stream.

    On repeat steps a set generator re-emits its previous set; an element
    generator emits the next fresh element of the set chosen at the last
    fresh step.
    """

    def __init__(self, inner: GeneratorBase):
        self.inner = inner
        self.set_based = inner.set_based
        self.seen_values: set = set()
        self.rows: list = []
        self.n = 0
        self._repeat_walker = None
        self._repeat_node = None
        self._emitted: set = set()

    def observe(self, step: Step) -> TraceRow:
        self.n += 1
        if step.value in self.seen_values:
            last = self.rows[-1]
            flags = tuple(list(last.flags) + ["repeat_step"])
            element = None
            if not self.set_based:
                element = self._next_from_last(last)
            row = TraceRow(
                n=self.n, x=step.value, is_noise=step.is_noise, sigma=step.sigma,
                prefix=last.prefix, J=last.J, output=last.output,
                element=element, flags=flags,
            )
            self.rows.append(row)
            return row
        self.seen_values.add(step.value)
        fresh = Step(n=self.n, value=step.value, is_noise=step.is_noise, sigma=step.sigma)
        inner_row = self.inner.observe(fresh)
        if not self.set_based and inner_row.element is not None:
            self._emitted.add(inner_row.element)
        row = TraceRow(
            n=self.n, x=step.value, is_noise=step.is_noise, sigma=step.sigma,
            prefix=inner_row.prefix, J=inner_row.J, output=inner_row.output,
            element=inner_row.element, flags=inner_row.flags,
        )
        self.rows.append(row)
        return row

    def _next_from_last(self, last: TraceRow) -> Optional[int]:
        out = last.output
        if out.kind == "empty" or out.closure is None:
            return None
        if out.closure is not self._repeat_node:
            self._repeat_node = out.closure
            self._repeat_walker = out.closure.iter_elements()
        for v in self._repeat_walker:
            if v in self.seen_values or v in self._emitted:
                continue
            self._emitted.add(v)
            return v
        return None

    def feedback(self):
        return self.inner.feedback()


# -- scripted stubs for the adaptive adversary -----------------------------------

class FollowStub(GeneratorBase):
    """Outputs (preferred language) minus seen, preferring the sparse member
    whenever the last input sits inside it."""

    set_based = True

    def __init__(self, sparse_lang: SetLike, dense_lang: SetLike):
        self.sparse_lang = sparse_lang
        self.dense_lang = dense_lang
        self.seen: set = set()
        self.first_seen: dict = {}
        self.rows: list = []
        self.n = 0

    def observe(self, step: Step) -> TraceRow:
        self.n += 1
        self.seen.add(step.value)
        if step.value not in self.first_seen:
            self.first_seen[step.value] = self.n
        lang = self.sparse_lang if self.sparse_lang.contains(step.value) else self.dense_lang
        output = SymbolicSet(kind="inter", closure=lang, indices=(), seen_upto=self.n)
        row = TraceRow(
            n=self.n, x=step.value, is_noise=step.is_noise, sigma=step.sigma,
            prefix=(), J=0, output=output, element=None,
        )
        self.rows.append(row)
        return row

    def feedback(self):
        if not self.rows:
            return None
        return (self.rows[-1].output.closure, self.seen)


class StubbornStub(GeneratorBase):
    """Always outputs a fixed sparse subset minus seen; never meets a density
    exit condition above its density."""

    set_based = True

    def __init__(self, lang: SetLike):
        self.lang = lang
        self.seen: set = set()
        self.first_seen: dict = {}
        self.rows: list = []
        self.n = 0

    def observe(self, step: Step) -> TraceRow:
        self.n += 1
        self.seen.add(step.value)
        if step.value not in self.first_seen:
            self.first_seen[step.value] = self.n
        output = SymbolicSet(kind="inter", closure=self.lang, indices=(), seen_upto=self.n)
        row = TraceRow(
            n=self.n, x=step.value, is_noise=step.is_noise, sigma=step.sigma,
            prefix=(), J=0, output=output, element=None,
        )
        self.rows.append(row)
        return row

    def feedback(self):
        if not self.rows:
            return None
        return (self.rows[-1].output.closure, self.seen)

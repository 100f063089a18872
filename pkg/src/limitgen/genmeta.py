"""Priority-based intersection engine with pluggable priority and stopping
rules.

Per step the engine (re)scores every considered language, orders them by
(priority, index), asks the stopping plugin for the prefix length J_n, and
emits the prefix closure minus the seen set (and, in element mode, the
smallest fresh member).  Threshold priorities follow the incremental rule:
a language's score is its index plus (last threshold-violation step + 1), or
index + n + 1 while currently violating -- equivalent to the from-scratch
minimum-N definition, which the tests check by brute force.

Closures of ordered prefixes are memoized in a chain keyed by
(parent node, next index), so a stabilized prefix costs one dict hit per
position per step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from . import langs
from .collections import Collection
from .langs import SetLike


class EmptyPrefix(Exception):
    pass


@dataclass
class SymbolicSet:
    """A generator's set output: prefix closure minus the seen prefix."""

    kind: str  # "inter" | "empty"
    closure: Optional[SetLike] = None
    indices: tuple = ()
    seen_upto: int = 0  # the output is closure minus {x_1..x_seen_upto}

    def is_empty_form(self) -> bool:
        return self.kind == "empty" or (
            isinstance(self.closure, langs.FiniteSet) and not self.closure.elements
        )

    def subset_of(self, lang: SetLike, first_seen: dict) -> bool:
        """Exact test: (closure minus seen prefix) subset of lang."""
        if self.kind == "empty":
            return True
        diff = langs.intersect_pair(self.closure, langs.complement(lang))
        if langs.is_infinite(diff):
            return False
        return all(
            first_seen.get(x, self.seen_upto + 1) <= self.seen_upto
            for x in diff.elements
        )

    def mu_low_in(self, lang: SetLike) -> Fraction:
        if self.kind == "empty":
            return Fraction(0)
        return langs.mu_exact(self.closure, lang)[0]


@dataclass
class _LangState:
    index: int
    lang: SetLike
    out_count: int = 0
    sigma_max: int = 0
    violating: bool = False
    last_violation: int = 0  # 0 = never
    entered_at: int = 0
    p_last: int = 0
    # maximal intervals [start, end] of violating steps
    violation_intervals: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# priority plugins
# ---------------------------------------------------------------------------

class PriorityPlugin:
    """Violation test + priority value.  The default priority is the
    index-plus-stability score; subclasses may re-rank differently."""

    monotone = True
    name = "threshold"
    uses_sigma = False
    bound_m: Optional[Fraction] = None
    standard_priority = True  # engine may inline the default sort key

    def __init__(self):
        self._pairs = {}

    def threshold(self, index: int) -> Fraction:
        raise NotImplementedError

    def _pair(self, index: int) -> tuple:
        pair = self._pairs.get(index)
        if pair is None:
            c = self.threshold(index)
            pair = (c.numerator, c.denominator)
            self._pairs[index] = pair
        return pair

    def violates(self, state: _LangState, m: int) -> bool:
        num, den = self._pair(state.index)
        if state.out_count * den > num * m:
            return True
        if self.uses_sigma:
            b = self.bound_m
            if state.sigma_max * b.denominator > b.numerator * m:
                return True
        return False

    def priority(self, state: _LangState, n: int) -> int:
        if state.violating:
            return state.index + n + 1
        return state.index + state.last_violation + 1

    def sort_key(self, state: _LangState, n: int) -> tuple:
        return (0, self.priority(state, n), state.index)


class HalvingThresholds(PriorityPlugin):
    """c_i = 1 / 2^(i+1)."""

    name = "halving"

    def threshold(self, index: int) -> Fraction:
        return Fraction(1, 2 ** (index + 1))


class UniformThresholds(PriorityPlugin):
    name = "uniform"

    def __init__(self, c):
        super().__init__()
        self.c = Fraction(c)
        if not 0 < self.c < 1:
            raise ValueError("threshold must be in (0,1)")

    def threshold(self, index: int) -> Fraction:
        return self.c


class EpsHalvingThresholds(PriorityPlugin):
    """c_i = eps / 2^i, optionally with the rank-displacement bound check."""

    name = "eps_halving"

    def __init__(self, eps, bound_m=None):
        super().__init__()
        self.eps = Fraction(eps)
        if bound_m is not None:
            self.uses_sigma = True
            self.bound_m = Fraction(bound_m)

    def threshold(self, index: int) -> Fraction:
        return self.eps / 2**index


class ConsistencyPriority(PriorityPlugin):
    """Index while consistent with everything seen, top afterwards (misses are
    permanent).  Recovers the static-order noiseless intersection generator."""

    name = "consistency"
    standard_priority = False

    def threshold(self, index: int) -> Fraction:  # pragma: no cover
        raise NotImplementedError

    def violates(self, state: _LangState, m: int) -> bool:
        return state.out_count > 0

    def sort_key(self, state: _LangState, n: int) -> tuple:
        if state.violating:
            return (1, 0, state.index)
        return (0, state.index, state.index)


class ActiveNowPriority(PriorityPlugin):
    """Index if the rate is below threshold *now*, top otherwise.  Not
    monotone, and deliberately without the stable-prefix property."""

    name = "active_now"
    monotone = False
    standard_priority = False

    def __init__(self, threshold_plugin: PriorityPlugin):
        super().__init__()
        self.inner = threshold_plugin

    def threshold(self, index: int) -> Fraction:
        return self.inner.threshold(index)

    def violates(self, state: _LangState, m: int) -> bool:
        return self.inner.violates(state, m)

    def sort_key(self, state: _LangState, n: int) -> tuple:
        if state.violating:
            return (1, 0, state.index)
        return (0, state.index, state.index)


# ---------------------------------------------------------------------------
# stopping plugins
# ---------------------------------------------------------------------------

class StoppingPlugin:
    name = "stop"
    # stop scanning when the walk reaches a currently violating language
    actives_only = False

    def extend_ok(self, engine: "Engine", node: "ClosureNode") -> bool:
        raise NotImplementedError

    def scan(self, engine: "Engine", ordered_states, n: int) -> int:
        j = 0
        node = engine.closure_root
        for st in ordered_states:
            if self.actives_only and st.violating:
                break
            nxt = engine.extend_closure(node, st.index)
            if not self.extend_ok(engine, nxt):
                break
            node = nxt
            j += 1
        engine.current_node = node
        return j


class InfiniteClosureStop(StoppingPlugin):
    """Largest prefix whose closure is infinite; closures only shrink along
    the walk, so the first finite closure ends the scan."""

    name = "infinite_closure"

    def __init__(self, actives_only: bool = False):
        self.actives_only = actives_only

    def extend_ok(self, engine, node) -> bool:
        return node.infinite


class DensityFloorStop(StoppingPlugin):
    """Largest prefix whose closure has lower density >= rho inside every
    prefix member; both conditions only degrade along the walk."""

    name = "density_floor"

    def __init__(self, rho):
        self.rho = Fraction(rho)

    def extend_ok(self, engine, node) -> bool:
        return node.infinite and engine.prefix_density_ok(node, self.rho)


class CompliantPrefixStop(StoppingPlugin):
    """All currently compliant languages in priority order; the closure may
    be finite.  Used by the closure-exhaustion probe."""

    name = "compliant_prefix"
    actives_only = True

    def extend_ok(self, engine, node) -> bool:
        return True


# ---------------------------------------------------------------------------
# closure chain
# ---------------------------------------------------------------------------

class ClosureNode:
    __slots__ = ("parent", "index", "closure", "infinite", "children",
                 "densities", "walker", "depth")

    def __init__(self, parent, index, closure, infinite):
        self.parent = parent
        self.index = index
        self.closure = closure
        self.infinite = infinite
        self.children = {}
        self.densities = {}  # member index -> mu_low(closure, member)
        self.walker = None
        self.depth = 0 if parent is None else parent.depth + 1

    def prefix_indices(self):
        out = []
        node = self
        while node.parent is not None:
            out.append(node.index)
            node = node.parent
        return tuple(reversed(out))


@dataclass
class TraceRow:
    n: int
    x: int
    is_noise: bool
    sigma: int
    prefix: tuple
    J: int
    output: SymbolicSet
    element: Optional[int]
    flags: tuple = ()


class Engine:
    """One engine per run; single-owner mutable state."""

    def __init__(
        self,
        collection: Collection,
        priority: PriorityPlugin,
        stopping: StoppingPlugin,
        element_mode: bool = True,
        fresh_against_seen: bool = True,
        check_incremental: bool = False,
    ):
        self.collection = collection
        self.priority = priority
        self.stopping = stopping
        self.element_mode = element_mode
        self.fresh_against_seen = fresh_against_seen
        self.check_incremental = check_incremental
        self.n = 0
        self.values: list = []
        self.first_seen: dict = {}
        self.seen: set = set()
        self.outputs: set = set()
        self.states: dict = {}
        self.closure_root = ClosureNode(None, None, None, True)
        self.current_node = self.closure_root
        self.rows: list = []
        self.oracle_calls = {"membership": 0, "closure": 0, "density": 0}

    # -- closure chain ------------------------------------------------------

    def extend_closure(self, node: ClosureNode, idx: int) -> ClosureNode:
        child = node.children.get(idx)
        if child is None:
            lang = self.states[idx].lang
            closure = lang if node.parent is None else langs.intersect_pair(node.closure, lang)
            self.oracle_calls["closure"] += 1
            child = ClosureNode(node, idx, closure, langs.is_infinite(closure))
            node.children[idx] = child
        return child

    def prefix_density_ok(self, node: ClosureNode, rho: Fraction) -> bool:
        walk = node
        while walk.parent is not None:
            mu = node.densities.get(walk.index)
            if mu is None:
                mu = langs.mu_exact(node.closure, self.states[walk.index].lang)[0]
                self.oracle_calls["density"] += 1
                node.densities[walk.index] = mu
            if mu < rho:
                return False
            walk = walk.parent
        return True

    # -- per-language bookkeeping -------------------------------------------

    def _absorb(self, st: _LangState, x: int, m: int):
        self.oracle_calls["membership"] += 1
        if not st.lang.contains(x):
            st.out_count += 1
        else:
            r = st.lang.rank(x) if self.priority.uses_sigma else 0
            if r > st.sigma_max:
                st.sigma_max = r
        violating = self.priority.violates(st, m)
        if violating:
            st.last_violation = m
            if st.violation_intervals and st.violation_intervals[-1][1] == m - 1:
                st.violation_intervals[-1][1] = m
            else:
                st.violation_intervals.append([m, m])
        st.violating = violating

    def _enter_language(self, i: int):
        st = _LangState(index=i, lang=self.collection.language_at(i), entered_at=self.n)
        for m, x in enumerate(self.values, start=1):
            self._absorb(st, x, m)
        self.states[i] = st

    # -- stepping -------------------------------------------------------------

    def step(self, x: int, is_noise: bool = False, sigma: int = 0, flags=()) -> TraceRow:
        self.n += 1
        n = self.n
        self.values.append(x)
        if x not in self.first_seen:
            self.first_seen[x] = n
        self.seen.add(x)

        for i in range(1, self.collection.active_count(n) + 1):
            if i not in self.states:
                self._enter_language(i)
            else:
                self._absorb(self.states[i], x, n)

        if self.check_incremental:
            self._assert_incremental_matches_definition(n)

        if self.priority.standard_priority:
            n1 = n + 1
            ordered = sorted(
                self.states.values(),
                key=lambda s: (
                    s.index + (n1 if s.violating else s.last_violation + 1),
                    s.index,
                ),
            )
        else:
            ordered = sorted(
                self.states.values(), key=lambda s: self.priority.sort_key(s, n)
            )
        if self.priority.monotone:
            for st in ordered:
                p = self.priority.priority(st, n)
                if p < st.p_last:
                    raise AssertionError(
                        f"priority of language {st.index} decreased at step {n}"
                    )
                if p < st.index:
                    raise AssertionError("priority fell below the index bound")
                st.p_last = p

        j = self.stopping.scan(self, ordered, n)
        node = self.current_node

        mflags = list(flags)
        element = None
        if j == 0:
            output = SymbolicSet(kind="empty", seen_upto=n)
            mflags.append("empty_prefix")
        else:
            output = SymbolicSet(
                kind="inter",
                closure=node.closure,
                indices=node.prefix_indices(),
                seen_upto=n,
            )
            if self.element_mode:
                element = self._pick_element(node)
                if element is None:
                    mflags.append("closure_exhausted")
                elif element in self.seen:
                    mflags.append("element_already_seen")

        row = TraceRow(
            n=n,
            x=x,
            is_noise=is_noise,
            sigma=sigma,
            prefix=tuple(st.index for st in ordered[:j]),
            J=j,
            output=output,
            element=element,
            flags=tuple(mflags),
        )
        self.rows.append(row)
        return row

    def _pick_element(self, node: ClosureNode) -> Optional[int]:
        # smallest fresh member; a per-node monotone walker is sound because
        # skipped values stay ineligible forever (seen/output sets only grow)
        blocked = self.outputs if not self.fresh_against_seen else None
        if isinstance(node.closure, langs.FiniteSet):
            for v in node.closure.elements:
                if v in self.outputs:
                    continue
                if self.fresh_against_seen and v in self.seen:
                    continue
                self.outputs.add(v)
                return v
            return None
        if node.walker is None:
            node.walker = node.closure.iter_elements()
        for v in node.walker:
            if v in self.outputs:
                continue
            if self.fresh_against_seen and v in self.seen:
                continue
            self.outputs.add(v)
            return v
        return None

    # -- diagnostics ----------------------------------------------------------

    def _assert_incremental_matches_definition(self, n: int):
        for st in self.states.values():
            out = 0
            sigma_max = 0
            violating = False
            last_v = 0
            probe = _LangState(index=st.index, lang=st.lang)
            for m, x in enumerate(self.values, start=1):
                if not st.lang.contains(x):
                    out += 1
                elif self.priority.uses_sigma:
                    sigma_max = max(sigma_max, st.lang.rank(x))
                probe.out_count = out
                probe.sigma_max = sigma_max
                if self.priority.violates(probe, m):
                    last_v = m
                    violating = True
                else:
                    violating = False
            want = (n + 1) if violating else (last_v + 1)
            got = (n + 1) if st.violating else (st.last_violation + 1)
            assert want == got, (st.index, want, got)

    def priority_at(self, index: int, m: int) -> int:
        """Reconstruct P_i^(m) from the violation intervals (exact)."""
        st = self.states[index]
        last = 0
        for a, b in st.violation_intervals:
            if a <= m <= b:
                return index + m + 1
            if b < m:
                last = b
            else:
                break
        return index + last + 1

    def stabilization_report(self, p: int):
        """(n_star, frozen): smallest step from which, up to the horizon, the
        set {i : P_i <= p} and its members' priorities never changed.
        n_star is None when changes continue through the horizon."""
        horizon = self.n
        frozen = []
        need_after = 0  # latest step at which a change happened
        for i, st in sorted(self.states.items()):
            p_final = self.priority_at(i, horizon)
            if p_final <= p:
                frozen.append(i)
                if st.violation_intervals:
                    need_after = max(need_after, st.violation_intervals[-1][1])
                need_after = max(need_after, st.entered_at)
            else:
                # priorities are non-decreasing: find the first step where
                # P_i exceeded p; the set changed there if it was ever inside
                if i + 1 > p:
                    continue  # never a member
                cross = None
                for a, b in st.violation_intervals:
                    first_in_interval = max(a, p - i)
                    if first_in_interval <= b and i + first_in_interval + 1 > p:
                        cross = first_in_interval
                        break
                if cross is not None:
                    need_after = max(need_after, cross)
        if need_after >= horizon:
            return None, tuple(frozen)
        return need_after + 1, tuple(frozen)

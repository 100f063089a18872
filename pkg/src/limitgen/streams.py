"""Adversarial enumerations with labeled contamination.

Every constructed stream is deterministic given its spec (plus seed, for
repetition injection).  "Next unseen element of X" always means smallest by
canonical order among the values not yet emitted, which makes the
constructions replayable.  Streams carry declared regime certificates; the
measured statistics are recomputed from the labels by the metrics module.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from math import gcd
from typing import Iterator, Optional

from . import langs
from .collections import modified_language
from .langs import BlockLang, Fep, SetLike, UnsupportedAlgebra, fep


class AdaptiveFeedbackMissing(Exception):
    pass


class ScheduleNotSparse(Exception):
    pass


class FilterExhaustsLanguage(Exception):
    pass


class PhaseStalled(Exception):
    """The generator never met the current phase's exit condition; this is a
    reportable outcome (generation failure), not an error in the run."""

    def __init__(self, phase: int, step: int):
        self.phase = phase
        self.step = step
        super().__init__(f"phase {phase} stalled at step {step}")


@dataclass
class Step:
    n: int
    value: int
    is_noise: bool
    sigma: int
    repeated: bool = False


# ---------------------------------------------------------------------------
# noise schedules
# ---------------------------------------------------------------------------

class Pow2Schedule:
    """Noise exactly at steps {1, 2, 4, 8, ...}; upper density 0."""

    sparse = True

    def is_noise_step(self, n: int) -> bool:
        return n & (n - 1) == 0

    def rate_bound(self, n: int) -> Fraction:
        return Fraction(n.bit_length(), n)

    def spec_str(self):
        return "pow2()"


class PatternSchedule:
    """p noise slots at the end of each q-step period: R <= p/q for all n."""

    sparse = False

    def __init__(self, p: int, q: int):
        if not 0 <= p < q:
            raise ValueError("need 0 <= p < q")
        self.p = p
        self.q = q

    def is_noise_step(self, n: int) -> bool:
        return (n - 1) % self.q >= self.q - self.p

    def rate_bound(self, n: int) -> Fraction:
        return Fraction(self.p, self.q)

    def spec_str(self):
        return f"pattern({self.p}, {self.q})"


class NoNoise:
    sparse = True

    def is_noise_step(self, n: int) -> bool:
        return False

    def rate_bound(self, n: int) -> Fraction:
        return Fraction(0)

    def spec_str(self):
        return "none()"


# ---------------------------------------------------------------------------
# omission filters (applied to the target's canonical ranks or values)
# ---------------------------------------------------------------------------

def subsequence_by_rank(lang: Fep, q: int, keeps) -> Fep:
    """Exact language of the elements whose canonical rank r has r mod q in
    keeps.  Pure-periodic hosts only."""
    if lang.added or lang.removed:
        raise UnsupportedAlgebra("rank subsequence of a finitely modified set")
    keeps = frozenset(k % q for k in keeps)
    if not keeps:
        raise FilterExhaustsLanguage("keep set empty")
    reps = sorted((r if r >= 1 else lang.mod) for r in lang.residues)
    per = len(reps)
    lcm_r = per * q // gcd(per, q)
    big_mod = (lcm_r // per) * lang.mod
    residues = set()
    for r in range(1, lcm_r + 1):
        if r % q not in keeps:
            continue
        w, t = divmod(r - 1, per)
        value = w * lang.mod + reps[t]
        residues.add(value % big_mod)
    return fep(big_mod, residues)


def sparse_rank_blocks(lang: Fep) -> BlockLang:
    """Elements whose canonical rank lies in the factorial interval blocks."""
    if lang.added or lang.removed:
        raise UnsupportedAlgebra("rank blocks of a finitely modified set")
    return BlockLang(rank_base=lang)


def skip_values(lang: SetLike, values) -> SetLike:
    values = frozenset(v for v in values if lang.contains(v))
    return modified_language(lang, frozenset(), values)


# ---------------------------------------------------------------------------
# streams
# ---------------------------------------------------------------------------

class Stream:
    """Stateful single-owner enumeration with per-step labels."""

    def __init__(self, target: SetLike, spec: str, certificates: Optional[dict] = None):
        self.target = target
        self.spec = spec
        self.certificates = certificates or {}
        self.steps: list = []
        self.first_seen: dict = {}

    # subclasses produce raw values here
    def _emit(self, n: int, feedback) -> tuple:
        raise NotImplementedError

    def next(self, feedback=None) -> Step:
        n = len(self.steps) + 1
        value, repeated = self._emit(n, feedback)
        step = Step(
            n=n,
            value=value,
            is_noise=not self.target.contains(value),
            sigma=self.target.rank(value),
            repeated=repeated,
        )
        if value not in self.first_seen:
            self.first_seen[value] = n
        self.steps.append(step)
        return step

    def materialize(self, horizon: int):
        while len(self.steps) < horizon:
            self.next()
        return [s.value for s in self.steps[:horizon]]


class _Unseen:
    """Smallest-unseen walker over a symbolic set's canonical enumeration."""

    def __init__(self, lang: SetLike):
        self.it = lang.iter_elements()

    def next_not_in(self, seen) -> int:
        for v in self.it:
            if v not in seen:
                return v
        raise FilterExhaustsLanguage("source exhausted")


class InterleaveStream(Stream):
    """Enumerate the kept part of the target, inserting noise-source elements
    at schedule-selected steps."""

    def __init__(self, target, kept, noise_source, schedule, spec, certificates=None):
        super().__init__(target, spec, certificates)
        self.kept_walker = _Unseen(kept)
        self.noise_walker = _Unseen(noise_source) if noise_source is not None else None
        self.schedule = schedule
        self.emitted = set()

    def _emit(self, n, feedback):
        if self.noise_walker is not None and self.schedule.is_noise_step(n):
            v = self.noise_walker.next_not_in(self.emitted)
        else:
            v = self.kept_walker.next_not_in(self.emitted)
        self.emitted.add(v)
        return v, False


class FiniteNoiseStream(Stream):
    """The listed noise values are emitted first, then the kept enumeration."""

    def __init__(self, target, kept, noise_values, spec, certificates=None):
        super().__init__(target, spec, certificates)
        self.noise_values = list(noise_values)
        self.kept_walker = _Unseen(kept)
        self.emitted = set()

    def _emit(self, n, feedback):
        if n <= len(self.noise_values):
            v = self.noise_values[n - 1]
        else:
            v = self.kept_walker.next_not_in(self.emitted)
        self.emitted.add(v)
        return v, False


class ScriptedStream(Stream):
    def __init__(self, target, values, spec="scripted", certificates=None):
        super().__init__(target, spec, certificates)
        self.values = list(values)

    def _emit(self, n, feedback):
        if n > len(self.values):
            raise IndexError("scripted stream exhausted")
        return self.values[n - 1], False


class RepeatInjector(Stream):
    """Deterministically re-emit past values at seeded steps (dedupe suite)."""

    def __init__(self, inner: Stream, seed: int, rate: Fraction = Fraction(1, 4)):
        super().__init__(inner.target, f"repeats({inner.spec}, seed={seed})", inner.certificates)
        self.inner = inner
        self.rng = random.Random(seed)
        self.rate = Fraction(rate)

    def _emit(self, n, feedback):
        past = [s.value for s in self.steps]
        if past and self.rng.random() < float(self.rate):
            return self.rng.choice(past), True
        step = self.inner.next(feedback)
        return step.value, False


class DedupeStream(Stream):
    """First occurrences of the unique elements of the inner stream."""

    def __init__(self, inner: Stream):
        super().__init__(inner.target, f"dedupe({inner.spec})", inner.certificates)
        self.inner = inner
        self.seen = set()

    def _emit(self, n, feedback):
        while True:
            step = self.inner.next(feedback)
            if step.value not in self.seen:
                self.seen.add(step.value)
                return step.value, False


class AdaptivePhaseStream(Stream):
    """Phase-alternating adversary pressing a set-based generator between a
    sparse language and its dense superset.

    Odd phases enumerate the superset until the generator's output set sits
    inside it with lower density at least mu_low(L, L') + eps/2; even phases
    enumerate the sparse language until the output set sits inside it.
    """

    def __init__(self, sparse_lang, dense_lang, eps, phase_budget, spec, certificates=None):
        if not langs.is_subset(sparse_lang, dense_lang):
            raise ValueError("sparse language must sit inside the dense one")
        super().__init__(dense_lang, spec, certificates)
        self.sparse_lang = sparse_lang
        self.dense_lang = dense_lang
        self.eps = Fraction(eps)
        self.phase_budget = phase_budget
        self.mu = langs.mu_exact(sparse_lang, dense_lang)[0]
        self.threshold = self.mu + self.eps / 2
        self.phase = 1
        self.phase_started_at = 1
        self.switch_steps: list = []
        self.emitted = set()
        self.walkers = {
            "dense": _Unseen(dense_lang),
            "sparse": _Unseen(sparse_lang),
        }

    def _phase_target(self):
        return "dense" if self.phase % 2 == 1 else "sparse"

    def _exit_condition(self, feedback) -> bool:
        base, excluded = feedback
        if self.phase % 2 == 1:
            if not symbolic_subset(base, excluded, self.dense_lang):
                return False
            return langs.mu_exact(base, self.dense_lang)[0] >= self.threshold
        return symbolic_subset(base, excluded, self.sparse_lang)

    def _emit(self, n, feedback):
        if n > 1:
            if feedback is None:
                raise AdaptiveFeedbackMissing(f"step {n} needs the previous set output")
            if self._exit_condition(feedback):
                self.phase += 1
                self.phase_started_at = n
                self.switch_steps.append(n)
            elif n - self.phase_started_at >= self.phase_budget:
                raise PhaseStalled(self.phase, n)
        v = self.walkers[self._phase_target()].next_not_in(self.emitted)
        self.emitted.add(v)
        return v, False


def symbolic_subset(base: SetLike, excluded, lang: SetLike) -> bool:
    """Is (base \\ excluded) a subset of lang?  Exact."""
    try:
        diff = langs.intersect_pair(base, langs.complement(lang))
    except UnsupportedAlgebra:
        raise
    if langs.is_infinite(diff):
        return False
    return all(x in excluded for x in diff.elements)


# ---------------------------------------------------------------------------
# constructors matching the declared contamination regimes
# ---------------------------------------------------------------------------

def make_vanishing_noise(target, noise_source, schedule=None, kept=None) -> Stream:
    schedule = schedule or Pow2Schedule()
    if not schedule.sparse:
        raise ScheduleNotSparse(f"{schedule.spec_str()} has positive upper density")
    kept = kept if kept is not None else target
    certificates = {
        "noise": "vanishing",
        "rate_bound": "bit_length(n)/n",
        "omission": "none" if kept == target else "declared",
    }
    spec = f"vanishing(target={target.spec_str()}, schedule={schedule.spec_str()})"
    if noise_source is None:
        return InterleaveStream(target, kept, None, NoNoise(), spec, certificates)
    return InterleaveStream(target, kept, noise_source, schedule, spec, certificates)


def make_c_noise(target, noise_source, p: int, q: int, kept=None) -> Stream:
    kept = kept if kept is not None else target
    sched = PatternSchedule(p, q)
    certificates = {"noise": "constant", "c": Fraction(p, q), "n_star": 1}
    spec = f"c_noise(target={target.spec_str()}, pattern={p}/{q})"
    return InterleaveStream(target, kept, noise_source, sched, spec, certificates)


def make_finite_noise(target, noise_values, kept=None) -> Stream:
    kept = kept if kept is not None else target
    bad = [v for v in noise_values if target.contains(v)]
    if bad:
        raise ValueError(f"declared noise values {bad} lie inside the target")
    certificates = {"noise": "finite", "last_noise_step": len(list(noise_values))}
    spec = f"finite_noise(target={target.spec_str()}, values={sorted(noise_values)})"
    return FiniteNoiseStream(target, kept, noise_values, spec, certificates)


def make_canonical(target, enumerate_lang=None) -> Stream:
    """Canonical enumeration; labels stay relative to the declared target,
    which may differ from the enumerated language (adversarial streams)."""
    kept = enumerate_lang if enumerate_lang is not None else target
    return InterleaveStream(
        target,
        kept,
        None,
        NoNoise(),
        f"canonical({kept.spec_str()})",
        {"noise": "none" if kept == target else "measured"},
    )


def apply_omission_keep_ranks(target: Fep, q: int, keeps):
    kept = subsequence_by_rank(target, q, keeps)
    mu = langs.mu_exact(kept, target)[0]
    return kept, {"omission": "periodic", "kept_mu_low": mu}


def apply_omission_sparse(target: Fep):
    kept = sparse_rank_blocks(target)
    return kept, {"omission": "sparse", "kept_mu_low": Fraction(0)}


def apply_omission_skip(target: SetLike, values):
    kept = skip_values(target, values)
    return kept, {"omission": "finite", "skipped": sorted(values)}


def empirical_noise_rate(stream: Stream, lang: SetLike, n: int) -> Fraction:
    if n > len(stream.steps):
        raise ValueError("stream not materialized that far")
    out = sum(1 for s in stream.steps[:n] if not lang.contains(s.value))
    return Fraction(out, n)

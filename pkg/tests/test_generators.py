from fractions import Fraction

import pytest

from limitgen import langs, metrics
from limitgen.collections import (
    ExpandedCollection,
    ExplicitCollection,
    GenerativeCollection,
)
from limitgen.generators import (
    FallbackGenerator,
    FollowStub,
    RepetitionWrapper,
    SetToElementTransform,
    StubbornStub,
    VersionSpaceGenerator,
    baseline_consistent_generator,
    bounded_dense_generator,
    closure_exhaustion_probe,
    constant_noise_generator,
    constant_noise_set_density_generator,
    sorting_variant_generator,
    vanishing_noise_generator,
    vanishing_noise_set_density_generator,
)
from limitgen.langs import EVENS, NAT, fep
from limitgen.streams import (
    DedupeStream,
    RepeatInjector,
    make_c_noise,
    make_canonical,
    make_finite_noise,
    make_vanishing_noise,
    apply_omission_keep_ranks,
)


def run_game(gen, stream, horizon):
    rows = []
    for _ in range(horizon):
        rows.append(gen.observe(stream.next()))
    return rows


def first_seen_of(stream):
    return stream.first_seen


# ---------------------------------------------------------------------------
# vanishing noise (element mode)
# ---------------------------------------------------------------------------

def test_vanishing_two_language_noiseless():
    coll = ExplicitCollection([fep(1, [0], remove=[1]), NAT])
    gen = vanishing_noise_generator(coll)
    stream = make_canonical(coll.language_at(1))
    rows = run_game(gen, stream, 20)
    target = coll.language_at(1)
    assert metrics.violations(rows, target, stream.first_seen, False) == []


def test_vanishing_pow2_noise_on_evens():
    coll = ExplicitCollection([EVENS, NAT])
    gen = vanishing_noise_generator(coll)
    stream = make_vanishing_noise(EVENS, langs.ODDS)
    rows = run_game(gen, stream, 3000)
    last = metrics.last_violation(rows, EVENS, stream.first_seen, False)
    assert last is None or last <= 16
    # all late outputs are fresh evens
    for row in rows[100:]:
        assert row.element % 2 == 0


def test_vanishing_two_noisy_family_succeeds():
    coll = GenerativeCollection("two_noisy", count=32)
    gen = vanishing_noise_generator(coll)
    stream = make_finite_noise(EVENS, [5, 3])
    rows = run_game(gen, stream, 2000)
    last = metrics.last_violation(rows, EVENS, stream.first_seen, False)
    assert last is None or last <= 16


def test_baseline_fails_on_two_noisy_family():
    coll = GenerativeCollection("two_noisy")  # untruncated lazy family
    gen = baseline_consistent_generator(coll)
    stream = make_finite_noise(EVENS, [5, 3])
    rows = run_game(gen, stream, 300)
    bad = metrics.violations(rows, EVENS, stream.first_seen, False)
    assert len(bad) >= 250 and bad[-1] >= 290
    # the late outputs sit in the co-infinite tail image (odds >= 201)
    tail = [r.element for r in rows[-20:]]
    assert all(v is not None and v % 2 == 1 and v >= 201 for v in tail)


# ---------------------------------------------------------------------------
# constant noise
# ---------------------------------------------------------------------------

def test_constant_noise_quarter_success():
    coll = ExplicitCollection([EVENS, NAT])
    gen = constant_noise_generator(coll, Fraction(1, 4))
    stream = make_c_noise(EVENS, langs.ODDS, 1, 4)
    rows = run_game(gen, stream, 4000)
    last = metrics.last_violation(rows, EVENS, stream.first_seen, False)
    assert last is None or last <= 2000


def test_constant_noise_probe_exhausts_hard_closure():
    coll = GenerativeCollection("hard_residue_2", count=2)
    gen = closure_exhaustion_probe(coll, Fraction(1, 2))
    stream = make_canonical(NAT)
    rows = run_game(gen, stream, 50)
    emitted = [r.element for r in rows if r.element is not None]
    assert emitted == [1, 2]
    assert sum(1 for r in rows if "closure_exhausted" in r.flags) >= 10


def test_constant_noise_alg_on_hard_instance_violates_adversarial_target():
    coll = GenerativeCollection("hard_residue_2", count=2)
    gen = constant_noise_generator(coll, Fraction(1, 2))
    stream = make_canonical(NAT)
    rows = run_game(gen, stream, 200)
    adversarial = coll.language_at(2)  # stream is 1/2-noisy for both
    bad = metrics.violations(rows, adversarial, stream.first_seen, False)
    assert len(bad) >= 10


# ---------------------------------------------------------------------------
# sorting variant
# ---------------------------------------------------------------------------

def test_sorting_variant_validity_tail_agrees_with_priority_version():
    coll = ExplicitCollection([EVENS, NAT])
    horizon = 2000
    s1 = make_vanishing_noise(EVENS, langs.ODDS)
    s2 = make_vanishing_noise(EVENS, langs.ODDS)
    rows_a = run_game(vanishing_noise_generator(coll), s1, horizon)
    rows_b = run_game(sorting_variant_generator(coll), s2, horizon)
    la = metrics.last_violation(rows_a, EVENS, s1.first_seen, False) or 0
    lb = metrics.last_violation(rows_b, EVENS, s2.first_seen, False) or 0
    assert la <= horizon // 2 and lb <= horizon // 2


def test_sorting_variant_noiseless_equals_baseline_ordering():
    coll = ExplicitCollection([fep(1, [0], remove=[1]), NAT])
    s1 = make_canonical(coll.language_at(1))
    s2 = make_canonical(coll.language_at(1))
    rows_a = run_game(sorting_variant_generator(coll), s1, 60)
    rows_b = run_game(baseline_consistent_generator(coll), s2, 60)
    assert [r.element for r in rows_a] == [r.element for r in rows_b]


# ---------------------------------------------------------------------------
# fall-back set generator (with and without expansion)
# ---------------------------------------------------------------------------

def test_fallback_step_one_empty():
    coll = ExplicitCollection([EVENS, NAT])
    gen = FallbackGenerator(coll)
    stream = make_canonical(EVENS)
    row = gen.observe(stream.next())
    assert row.J == 0 and row.output.kind == "empty"


def test_fallback_noiseless_density_one():
    coll = ExplicitCollection([NAT, EVENS])
    gen = FallbackGenerator(coll)
    stream = make_canonical(NAT)
    rows = run_game(gen, stream, 400)
    profile = metrics.set_density_profile(rows, NAT)
    # N itself stays consistent and first: density 1 appears infinitely often
    assert sum(1 for v in profile[10:] if v == 1) >= 300


def test_fallback_keep_evens_addonly_density_half():
    base = ExplicitCollection([EVENS, NAT])
    coll = ExpandedCollection(base, "add_only")
    gen = FallbackGenerator(coll)
    kept, cert = apply_omission_keep_ranks(NAT, 2, [0])
    assert cert["kept_mu_low"] == Fraction(1, 2)
    stream = make_vanishing_noise(NAT, None, kept=kept)
    horizon = 800
    rows = run_game(gen, stream, horizon)
    assert metrics.violations(rows, NAT, stream.first_seen, True) == []
    profile = metrics.set_density_profile(rows, NAT)
    second_half = profile[horizon // 2 :]
    assert sum(1 for v in second_half if v >= Fraction(1, 2)) >= 20
    assert all(v <= Fraction(1, 2) for v in profile)


def test_fallback_finite_noise_addonly():
    base = ExplicitCollection([fep(4, [0]), EVENS])
    coll = ExpandedCollection(base, "add_only")
    gen = FallbackGenerator(coll)
    kept, _ = apply_omission_keep_ranks(EVENS, 2, [0])  # 4N inside the evens
    stream = make_finite_noise(EVENS, [1, 3], kept=kept)
    rows = run_game(gen, stream, 600)
    last = metrics.last_violation(rows, EVENS, stream.first_seen, True)
    assert last is None or last <= 300
    profile = metrics.set_density_profile(rows, EVENS)
    assert sum(1 for v in profile[300:] if v >= Fraction(1, 2)) >= 20


# ---------------------------------------------------------------------------
# set density generators
# ---------------------------------------------------------------------------

def test_vanishing_set_density_mod3():
    coll = ExplicitCollection([fep(3, [1, 2]), fep(3, [0, 2]), fep(3, [0, 1])])
    gen = vanishing_noise_set_density_generator(coll, Fraction(1, 2))
    target = coll.language_at(1)
    kept = langs.intersect([coll.language_at(1), coll.language_at(2)])
    stream = make_vanishing_noise(target, langs.complement(target), kept=kept)
    rows = run_game(gen, stream, 2000)
    assert metrics.last_violation(rows, target, stream.first_seen, True) in (None, 1, 2)
    profile = metrics.set_density_profile(rows, target)
    # after stabilization the output is the pairwise closure: density 1/2
    assert all(v == Fraction(1, 2) for v in profile[50:])


def test_vanishing_set_density_necessity_witness():
    coll = ExplicitCollection([NAT, fep(4, [0])])
    gen = vanishing_noise_set_density_generator(coll, Fraction(1, 2))
    kept, _ = apply_omission_keep_ranks(NAT, 4, [0])
    stream = make_vanishing_noise(NAT, fep(4, [1, 2, 3]), kept=kept)
    rows = run_game(gen, stream, 2000)
    profile = metrics.set_density_profile(rows, NAT)
    assert all(v == Fraction(1, 4) for v in profile[50:])


def test_constant_set_density_mod3_canonical():
    coll = ExplicitCollection([fep(3, [1, 2]), fep(3, [0, 2]), fep(3, [0, 1])])
    gen = constant_noise_set_density_generator(coll, Fraction(1, 3), Fraction(1, 2))
    stream = make_canonical(NAT)
    rows = run_game(gen, stream, 2000)
    target = coll.language_at(1)
    profile = metrics.set_density_profile(rows, target)
    assert all(v >= Fraction(1, 2) for v in profile[100:])


def test_constant_set_density_rho_too_large_truncates_before_target():
    coll = ExplicitCollection([fep(3, [1, 2]), fep(3, [0, 2]), fep(3, [0, 1])])
    gen = constant_noise_set_density_generator(coll, Fraction(1, 3), Fraction(2, 3))
    stream = make_canonical(NAT)
    rows = run_game(gen, stream, 500)
    adversarial = coll.language_at(2)
    bad = metrics.violations(rows, adversarial, stream.first_seen, True)
    assert len(bad) >= 100


# ---------------------------------------------------------------------------
# bounded adversary + transform
# ---------------------------------------------------------------------------

def bounded_m2_stream():
    # evens off-schedule, odds at powers of two: 2-bounded for both languages
    kept, _ = apply_omission_keep_ranks(NAT, 2, [0])
    return make_vanishing_noise(NAT, langs.ODDS, kept=kept)


def test_bounded_dense_m2():
    coll = ExplicitCollection([EVENS, NAT])
    gen = bounded_dense_generator(coll, Fraction(1, 4), 2)
    stream = bounded_m2_stream()
    rows = run_game(gen, stream, 3000)
    assert metrics.violations(rows, NAT, stream.first_seen, True) == []
    profile = metrics.set_density_profile(rows, NAT)
    assert all(Fraction(3, 8) <= v <= Fraction(1, 2) for v in profile[10:])
    assert max(profile) <= Fraction(1, 2)


def test_bounded_dense_m1_singleton():
    coll = ExplicitCollection([EVENS])
    gen = bounded_dense_generator(coll, Fraction(1, 4), 1)
    stream = make_canonical(EVENS)
    rows = run_game(gen, stream, 300)
    profile = metrics.set_density_profile(rows, EVENS)
    assert all(v == 1 for v in profile[5:])


def test_transform_element_density_floor():
    coll = ExplicitCollection([EVENS, NAT])
    base = bounded_dense_generator(coll, Fraction(1, 4), 2)
    gen = SetToElementTransform(base, Fraction(3, 8))
    stream = bounded_m2_stream()
    horizon = 4000
    rows = run_game(gen, stream, horizon)
    assert metrics.last_violation(rows, NAT, stream.first_seen, False) in (None, 0) or (
        metrics.last_violation(rows, NAT, stream.first_seen, False) <= horizon // 2
    )
    grid = [horizon // 2, 3 * horizon // 4, horizon]
    profile = metrics.element_density_profile(rows, NAT, grid)
    floor = Fraction(3, 16) - Fraction(1, 20)
    assert min(profile) >= floor
    # k(n) is non-decreasing and grows past its starting point
    assert gen.k_history == sorted(gen.k_history)
    assert gen.k_history[-1] > 1


def test_transform_trivial_constant_base():
    coll = ExplicitCollection([EVENS])
    base = bounded_dense_generator(coll, Fraction(1, 4), 1)
    gen = SetToElementTransform(base, Fraction(1, 2))
    stream = make_canonical(EVENS)
    rows = run_game(gen, stream, 500)
    outs = [r.element for r in rows if r.element is not None]
    assert all(v % 2 == 0 for v in outs)
    assert len(set(outs)) == len(outs)


# ---------------------------------------------------------------------------
# version space
# ---------------------------------------------------------------------------

def test_version_space_estimator_zero_for_easy_pair():
    assert VersionSpaceGenerator.estimate_d_star([EVENS, NAT]) == 0


def test_version_space_success_quarter_noise():
    coll = ExplicitCollection([EVENS, NAT])
    gen = VersionSpaceGenerator(coll)
    stream = make_c_noise(EVENS, langs.ODDS, 1, 4)
    rows = run_game(gen, stream, 3000)
    last = metrics.last_violation(rows, EVENS, stream.first_seen, False)
    assert last is None or last <= 1500
    # dynamic budget dominates the realized corruption count eventually
    tail = [(n, N_t, n_t) for (n, N_t, n_t, bot) in gen.budget_history if n >= 100]
    assert all(N_t <= n_t for (_, N_t, n_t) in tail)


def test_version_space_residue_failure():
    coll = ExplicitCollection([fep(2, [1]), fep(2, [0])])  # odds, evens
    gen = VersionSpaceGenerator(coll)
    stream = make_canonical(NAT)
    rows = run_game(gen, stream, 400)
    adversarial = coll.language_at(1)
    bad = metrics.violations(rows, adversarial, stream.first_seen, False)
    assert len(bad) >= 10


# ---------------------------------------------------------------------------
# repetition wrapper
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("seed", [3, 11, 29])
def test_dedupe_equivalence_set_mode(seed):
    def fresh_gen():
        coll = ExplicitCollection([EVENS, NAT])
        return bounded_dense_generator(coll, Fraction(1, 4), 2)

    raw_a = RepeatInjector(bounded_m2_stream(), seed=seed)
    raw_b = RepeatInjector(bounded_m2_stream(), seed=seed)
    wrapped = RepetitionWrapper(fresh_gen())
    rows_raw = run_game(wrapped, raw_a, 500)

    deduped = DedupeStream(raw_b)
    plain = fresh_gen()
    fresh_positions = [i for i, s in enumerate(raw_a.steps) if not s.repeated]
    rows_dd = run_game(plain, deduped, len(fresh_positions))

    for t, pos in enumerate(fresh_positions):
        a = rows_raw[pos]
        b = rows_dd[t]
        assert a.output.indices == b.output.indices
        assert a.J == b.J
        key_a = a.output.closure.spec_str() if a.output.closure is not None else None
        key_b = b.output.closure.spec_str() if b.output.closure is not None else None
        assert key_a == key_b
    # repeat steps re-emit the previous set
    for i, s in enumerate(raw_a.steps):
        if s.repeated and i > 0:
            assert rows_raw[i].output is rows_raw[i - 1].output


# ---------------------------------------------------------------------------
# adaptive stubs
# ---------------------------------------------------------------------------

def test_follow_stub_switches_forever():
    from limitgen.streams import AdaptivePhaseStream

    stream = AdaptivePhaseStream(EVENS, NAT, Fraction(1, 8), 500, "adaptive")
    stub = FollowStub(EVENS, NAT)
    fb = None
    for _ in range(800):
        step = stream.next(fb)
        stub.observe(step)
        fb = stub.feedback()
    assert len(stream.switch_steps) >= 50


def test_stubborn_stub_stalls():
    from limitgen.streams import AdaptivePhaseStream, PhaseStalled

    stream = AdaptivePhaseStream(EVENS, NAT, Fraction(1, 8), 80, "adaptive")
    stub = StubbornStub(fep(4, [0]))
    fb = None
    with pytest.raises(PhaseStalled):
        for _ in range(500):
            step = stream.next(fb)
            stub.observe(step)
            fb = stub.feedback()

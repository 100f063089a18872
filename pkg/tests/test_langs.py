import random
from fractions import Fraction

import pytest

from limitgen.langs import (
    EVENS,
    FACTORIAL_BLOCKS,
    NAT,
    ODDS,
    PRIMES,
    BlockLang,
    Fep,
    FiniteSet,
    UnsupportedAlgebra,
    complement,
    density_rate,
    envelope_period,
    fep,
    finite_set,
    intersect,
    is_infinite,
    is_subset,
    mu_empirical,
    mu_exact,
    density_profile,
)


def brute_members(lang, hi):
    return [x for x in range(1, hi + 1) if lang.contains(x)]


# ---------------------------------------------------------------------------
# membership / rank / nth
# ---------------------------------------------------------------------------

def test_contains_basic():
    assert EVENS.contains(4)
    assert not EVENS.contains(7)
    assert not PRIMES.contains(9)
    assert PRIMES.contains(2) and PRIMES.contains(97)


def test_blocks_membership_derived():
    # brute-force block scan: 3 in [2!,3!] = [2,6]; 10 not in [2,6] u [24,120]
    assert FACTORIAL_BLOCKS.contains(3)
    assert not FACTORIAL_BLOCKS.contains(10)
    assert brute_members(FACTORIAL_BLOCKS, 30) == [2, 3, 4, 5, 6, 24, 25, 26, 27, 28, 29, 30]


def test_nth_trivial():
    assert NAT.nth(7) == 7
    assert EVENS.nth(3) == 6
    assert fep(1, [0], remove=[1]).nth(1) == 2


def test_rank_examples():
    for n in (1, 5, 123):
        assert NAT.rank(n) == n
    assert EVENS.rank(7) == 0
    assert EVENS.rank(6) == 3


def test_normal_form():
    lang = fep(2, [0], add=[2, 5], remove=[4, 5])
    # 2 is periodic so the add is dropped; 5 is non-periodic so the remove is
    assert lang.added == frozenset({5})
    assert lang.removed == frozenset({4})
    assert lang.contains(2) and lang.contains(5) and not lang.contains(4)


def test_finite_mod_constructor_rejects_bad_direct_form():
    with pytest.raises(ValueError):
        Fep(2, frozenset({0}), added=frozenset({4}))
    with pytest.raises(ValueError):
        Fep(2, frozenset({0}), removed=frozenset({3}))


def roundtrip_check(lang, hi=2000):
    members = brute_members(lang, hi)
    for j, x in enumerate(members, start=1):
        assert lang.nth(j) == x
        assert lang.rank(x) == j
    for x in range(1, hi + 1):
        assert lang.contains(x) == (lang.rank(x) >= 1)


def test_roundtrip_fixed_langs():
    for lang in (NAT, EVENS, ODDS, fep(6, [1, 5], add=[4], remove=[7]), FACTORIAL_BLOCKS, PRIMES):
        roundtrip_check(lang, 1200)


def random_fep(rng, max_mod=12, max_mods=3):
    mod = rng.randrange(1, max_mod + 1)
    k = rng.randrange(1, mod + 1)
    residues = rng.sample(range(mod), k)
    add = [rng.randrange(1, 60) for _ in range(rng.randrange(0, max_mods))]
    remove = [rng.randrange(1, 60) for _ in range(rng.randrange(0, max_mods))]
    add = [a for a in add if a % mod not in residues]
    remove = [b for b in remove if b % mod in residues and b not in add]
    return fep(mod, residues, add=add, remove=remove)


def test_roundtrip_random_feps():
    rng = random.Random(17)
    for _ in range(40):
        roundtrip_check(random_fep(rng), 600)


def test_iter_elements_matches_brute():
    rng = random.Random(3)
    for _ in range(25):
        lang = random_fep(rng)
        it = lang.iter_elements()
        got = [next(it) for _ in range(80)]
        expected = brute_members(lang, got[-1])
        assert got == expected


# ---------------------------------------------------------------------------
# intersection algebra
# ---------------------------------------------------------------------------

def test_intersect_crt_trivial():
    a = fep(2, [1])  # n mod 2 != 0
    b = fep(3, [1, 2])  # n mod 3 != 0
    inter = intersect([a, b])
    assert isinstance(inter, Fep)
    assert inter.mod == 6 and inter.residues == frozenset({1, 5})
    assert is_infinite(inter)


def test_intersect_residue_exclusion_empty():
    # three languages each omitting one residue class mod 3
    langs = [fep(3, [r for r in range(3) if r != i]) for i in range(3)]
    inter = intersect(langs)
    assert isinstance(inter, FiniteSet) and inter.elements == ()


def hard_residue_family(k):
    # [k] plus everything above k avoiding one residue class; infinite, and
    # the full intersection is exactly {1..k}
    out = []
    for i in range(k):
        keep = [r for r in range(k) if r != i]
        out.append(fep(k, keep, add=[x for x in range(1, k + 1) if x % k == i]))
    return out


def test_intersect_hard_family_closure():
    fam = hard_residue_family(2)
    inter = intersect(fam)
    assert isinstance(inter, FiniteSet)
    assert inter.elements == (1, 2)
    for lang in fam:
        assert is_infinite(lang)


def test_intersect_assoc_comm_on_prefix():
    rng = random.Random(5)
    for _ in range(15):
        a, b, c = (random_fep(rng, max_mod=8, max_mods=2) for _ in range(3))
        abc = intersect([a, b, c])
        cba = intersect([c, b, a])
        a_bc = intersect([a, intersect([b, c])])
        hi = 400
        m1 = [x for x in range(1, hi) if abc.contains(x)]
        assert m1 == [x for x in range(1, hi) if cba.contains(x)]
        assert m1 == [x for x in range(1, hi) if a_bc.contains(x)]
        assert m1 == [x for x in range(1, hi) if a.contains(x) and b.contains(x) and c.contains(x)]


def test_intersect_fep_blocks():
    mask = fep(4, [1, 2, 3])
    inter = intersect([mask, FACTORIAL_BLOCKS])
    assert isinstance(inter, BlockLang)
    hi = 200
    assert brute_members(inter, hi) == [
        x for x in range(1, hi + 1) if mask.contains(x) and FACTORIAL_BLOCKS.contains(x)
    ]


def test_intersect_unsupported():
    with pytest.raises(UnsupportedAlgebra):
        intersect([PRIMES, EVENS])


def test_complement_and_subset():
    assert is_subset(EVENS, NAT)
    assert not is_subset(NAT, EVENS)
    assert is_subset(fep(4, [0]), EVENS)
    co = complement(EVENS)
    assert brute_members(co, 20) == [x for x in range(1, 21) if x % 2 == 1]
    assert is_subset(finite_set([2, 4, 8]), EVENS)
    assert not is_subset(finite_set([2, 3]), EVENS)


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------

def test_mu_exact_reported_values():
    lo, up = mu_exact(EVENS, NAT)
    assert lo == up == Fraction(1, 2)
    lo, up = mu_exact(FACTORIAL_BLOCKS, NAT)
    assert (lo, up) == (Fraction(0), Fraction(1))
    lo, up = mu_exact(PRIMES, NAT)
    assert (lo, up) == (Fraction(0), Fraction(0))
    lang = fep(6, [1, 5])
    assert mu_exact(lang, lang) == (Fraction(1), Fraction(1))


def test_mu_empirical_examples():
    assert mu_empirical(EVENS, NAT, 10) == Fraction(5, 10)
    # primes below 10: 2, 3, 5, 7 (sieve)
    assert mu_empirical(PRIMES, NAT, 10) == Fraction(4, 10)
    # block scan: {2,3,4,5,6} of the first six integers
    assert mu_empirical(FACTORIAL_BLOCKS, NAT, 6) == Fraction(5, 6)


def test_mu_exact_matches_empirical_tail():
    rng = random.Random(11)
    for _ in range(20):
        b = random_fep(rng, max_mod=6, max_mods=2)
        a = intersect([random_fep(rng, max_mod=6, max_mods=2), b])
        if not is_infinite(a):
            continue
        lo, up = mu_exact(a, b)
        assert lo == up
        per = envelope_period(a, b)
        for m in (50, 173, 400):
            emp = mu_empirical(a, b, m)
            assert abs(emp - lo) <= Fraction(per, m)


def test_density_rate_trivial_self():
    lang = fep(6, [1, 5], add=[4])
    assert density_rate(lang, lang, Fraction(1, 3)) == 1


def scan_verify_rate(a, b, eps, m_star, horizon=10_000):
    lo = mu_exact(a, b)[0]
    bound = lo / (1 + eps)
    cnt = 0
    it = b.iter_elements()
    for m in range(1, horizon + 1):
        if a.contains(next(it)):
            cnt += 1
        if m >= m_star:
            assert Fraction(cnt, m) >= bound, (m, cnt)


def test_density_rate_sound_by_scan():
    eps = Fraction(1)
    m_star = density_rate(EVENS, NAT, eps)
    scan_verify_rate(EVENS, NAT, eps, m_star)

    a = fep(2, [1], add=[2])
    m_star = density_rate(a, NAT, Fraction(1, 2))
    scan_verify_rate(a, NAT, Fraction(1, 2), m_star)


def test_density_rate_random_sound():
    rng = random.Random(23)
    done = 0
    while done < 10:
        b = random_fep(rng, max_mod=5, max_mods=1)
        a = intersect([random_fep(rng, max_mod=5, max_mods=1), b])
        if not is_infinite(a):
            continue
        eps = Fraction(rng.randrange(1, 4), rng.randrange(4, 8))
        m_star = density_rate(a, b, eps)
        scan_verify_rate(a, b, eps, min(m_star, 4000), horizon=4000) if m_star <= 4000 else None
        done += 1


def test_density_profile_periodicity():
    a = fep(4, [0], add=[3])
    ratio, g_min, h0 = density_profile(a, EVENS)
    assert ratio == Fraction(1, 2)
    # deviation below g_min never happens on a long scan
    cnt = 0
    it = EVENS.iter_elements()
    for m in range(1, 3000):
        if a.contains(next(it)):
            cnt += 1
        if m >= h0:
            assert Fraction(cnt) - m * ratio >= g_min

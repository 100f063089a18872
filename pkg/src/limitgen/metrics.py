"""Trace analysis: validity tails, density profiles, and certificates.

Everything here is a pure function of a finished run; re-analysis of a
persisted trace must reproduce the live metrics bit for bit, so all values
are ints or Fractions and every iteration order is explicit.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Optional

from . import langs
from .genmeta import SymbolicSet, TraceRow
from .langs import SetLike


def row_valid(row: TraceRow, target: SetLike, first_seen: dict, set_based: bool) -> bool:
    """Generation contract at one step: a fresh element of the target, or a
    set output contained in target-minus-seen."""
    if set_based:
        out = row.output
        if out.kind == "empty":
            return True
        try:
            return out.subset_of(target, first_seen)
        except langs.UnsupportedAlgebra:
            return False
    w = row.element
    if w is None:
        return False
    if not target.contains(w):
        return False
    return first_seen.get(w, row.n + 1) > row.n


def violations(rows, target, first_seen, set_based) -> list:
    return [row.n for row in rows if not row_valid(row, target, first_seen, set_based)]


def last_violation(rows, target, first_seen, set_based) -> Optional[int]:
    bad = violations(rows, target, first_seen, set_based)
    return bad[-1] if bad else None


def element_density_profile(rows, target, grid) -> list:
    """mu_empirical of the output element set inside the target at each grid
    point; approximates the run's element-based lower density from below."""
    outputs = {row.element for row in rows if row.element is not None}
    grid = sorted(set(grid))
    if not grid:
        return []
    profile = []
    cnt = 0
    it = target.iter_elements()
    next_idx = 0
    for m in range(1, grid[-1] + 1):
        if next(it) in outputs:
            cnt += 1
        if m == grid[next_idx]:
            profile.append(Fraction(cnt, m))
            next_idx += 1
    return profile


def set_density_profile(rows, target) -> list:
    """Exact mu_low(A_n, target) per step (finite exclusions do not move
    densities, so only the symbolic closure matters).  Cached per closure."""
    cache: dict = {}
    out = []
    for row in rows:
        o = row.output
        if o.kind == "empty":
            out.append(Fraction(0))
            continue
        key = id(o.closure)
        if key not in cache:
            cache[key] = langs.mu_exact(o.closure, target)[0]
        out.append(cache[key])
    return out


def tail_window(values, horizon) -> list:
    start = max(0, horizon // 2)
    return values[start:]


def tail_extrema(values, horizon) -> tuple:
    tail = tail_window(values, horizon)
    if not tail:
        return Fraction(0), Fraction(0)
    return min(tail), max(tail)


def noise_rate_curve(rows, lang: SetLike) -> list:
    """R(lang; x_{1:n}) for every n, exact."""
    out = []
    bad = 0
    for n, row in enumerate(rows, start=1):
        if not lang.contains(row.x):
            bad += 1
        out.append(Fraction(bad, n))
    return out


def sigma_bound_margin(rows, lang: SetLike, m_bound: Fraction) -> Optional[int]:
    """Last step where max_{t<=n} rank(x_t, lang) exceeded M*n, if any."""
    m_bound = Fraction(m_bound)
    run_max = 0
    last_bad = None
    for n, row in enumerate(rows, start=1):
        r = lang.rank(row.x)
        if r > run_max:
            run_max = r
        if run_max * m_bound.denominator > m_bound.numerator * n:
            last_bad = n
    return last_bad


def summarize(rows, target, first_seen, set_based, horizon, grid_points: int = 10) -> dict:
    bad = violations(rows, target, first_seen, set_based)
    n_star = (bad[-1] + 1) if bad else 1
    emitted = sum(1 for r in rows if r.element is not None)
    exhausted = sum(
        1 for r in rows if "closure_exhausted" in r.flags or "closure_bot" in r.flags
    )
    empty_steps = sum(1 for r in rows if r.output.kind == "empty")
    summary = {
        "horizon": horizon,
        "violations": len(bad),
        "last_violation": bad[-1] if bad else 0,
        "n_star": n_star,
        "emitted_elements": emitted,
        "exhausted_steps": exhausted,
        "empty_steps": empty_steps,
    }
    if set_based:
        profile = set_density_profile(rows, target)
        lo, hi = tail_extrema(profile, horizon)
        summary["set_density"] = {
            "tail_min": str(lo),
            "tail_max": str(hi),
            "max_all": str(max(profile) if profile else Fraction(0)),
        }
    else:
        grid = sorted({max(1, (horizon * (i + 1)) // grid_points) for i in range(grid_points)})
        profile = element_density_profile(rows, target, grid)
        tail = profile[len(profile) // 2 :]
        summary["element_density"] = {
            "grid": grid,
            "profile": [str(v) for v in profile],
            "tail_min": str(min(tail)) if tail else "0",
        }
    return summary

"""Scenario configuration, deterministic runner, suite, and plot-data export.

Scenario files are plain text, one `key = value` per line, with values in a
small call-expression grammar (rationals written p/q).  Every run is a pure
function of the config text plus the seed, and traces serialize to JSONL with
ints only, so identical inputs give byte-identical artifacts.
"""

from __future__ import annotations

import json
import os
import re
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

from . import langs, metrics
from .collections import (
    Collection,
    ExpandedCollection,
    ExplicitCollection,
    GenerativeCollection,
)
from .generators import (
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
from .langs import Fep, SetLike, fep
from .streams import (
    AdaptivePhaseStream,
    DedupeStream,
    PhaseStalled,
    Pow2Schedule,
    RepeatInjector,
    Stream,
    apply_omission_keep_ranks,
    apply_omission_skip,
    apply_omission_sparse,
    make_c_noise,
    make_canonical,
    make_finite_noise,
    make_vanishing_noise,
)

TRACE_SCHEMA = "limitgen.trace/1"
SUMMARY_SCHEMA = "limitgen.summary/1"
CSV_SCHEMA = "limitgen.csv/1"

# What each bundled scenario certifies, by descriptive id.
CLAIMS = {
    "vanishing-noise-generability": "priority thresholds 1/2^(i+1) generate in the limit under vanishing noise and arbitrary omissions",
    "constant-noise-success": "uniform thresholds c generate when every compliant subcollection keeps an infinite closure",
    "constant-noise-hard-instance": "with noise rate exactly 1/k the augmented residue family forces exhaustion of its finite closure",
    "index-guess-fails": "neither candidate index is safe once one element is inserted or omitted",
    "upper-density-fallback": "the fall-back prefix rule plus add-only expansion reaches set density 1-c infinitely often and never beats it",
    "vanishing-set-density-floor": "threshold eps/2^i outputs keep exact density rho when infinite-sharing prefixes are rho-dense",
    "vanishing-set-density-ceiling": "the power-of-two schedule drives any valid generator into a closure that is sparse in the adversarial target",
    "constant-set-density-floor": "the density-floor stopping rule keeps every output rho-dense under constant noise",
    "constant-set-density-condition-failure": "an unattainable rho truncates the prefix below the adversarial target infinitely often",
    "bounded-set-density": "rank-bounded enumerations admit set density (1-eps)/M, and 1/M caps every output",
    "bounded-element-density": "the density-rate transform converts bounded set density into element density rho/2 minus slack",
    "version-space-success": "the dynamic-budget version space generates under noise below 1/k",
    "version-space-failure": "at noise exactly 1/k the version space collapses and outputs stray infinitely often",
    "sorting-variant": "the memoryless active-set variant generates under vanishing noise without a stable prefix",
    "baseline-noise-fragility": "the static consistency order is trapped by two inserted examples",
    "expansion-membership-reduction": "expanded-collection runs need only base membership plus finite lookups (no density oracle)",
    "density-phase-pressure": "the phase adversary forces either infinitely many switches or a stalled phase",
    "dedupe-equivalence": "running on first occurrences equals the repetition wrapper on the raw stream",
}


class ConfigError(Exception):
    def __init__(self, msg, line=None):
        self.line = line
        super().__init__(msg if line is None else f"line {line}: {msg}")


# ---------------------------------------------------------------------------
# value expression parser
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>-?\d+)|(?P<name>[A-Za-z_][A-Za-z0-9_-]*)|(?P<punct>[()\[\],=/]))"
)


@dataclass
class Call:
    name: str
    args: list = field(default_factory=list)
    kwargs: dict = field(default_factory=dict)

    def kw(self, key, default=None):
        return self.kwargs.get(key, default)


class _Parser:
    def __init__(self, text: str, line: Optional[int] = None):
        self.toks = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m:
                if text[pos:].strip():
                    raise ConfigError(f"bad token at {text[pos:]!r}", line)
                break
            pos = m.end()
            if m.group("num") is not None:
                self.toks.append(("num", int(m.group("num"))))
            elif m.group("name") is not None:
                self.toks.append(("name", m.group("name")))
            else:
                self.toks.append(("punct", m.group("punct")))
        self.i = 0
        self.line = line

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else ("end", None)

    def take(self, kind=None, value=None):
        tok = self.peek()
        if kind and tok[0] != kind or (value is not None and tok[1] != value):
            raise ConfigError(f"expected {value or kind}, got {tok[1]!r}", self.line)
        self.i += 1
        return tok

    def parse_value(self):
        kind, val = self.peek()
        if kind == "num":
            self.take()
            if self.peek() == ("punct", "/"):
                self.take()
                denom = self.take("num")[1]
                return Fraction(val, denom)
            return val
        if kind == "punct" and val == "[":
            self.take()
            items = []
            while self.peek() != ("punct", "]"):
                items.append(self.parse_value())
                if self.peek() == ("punct", ","):
                    self.take()
            self.take("punct", "]")
            return items
        if kind == "name":
            self.take()
            if val in ("true", "false"):
                return val == "true"
            if self.peek() == ("punct", "("):
                self.take()
                call = Call(val)
                while self.peek() != ("punct", ")"):
                    if (
                        self.peek()[0] == "name"
                        and self.i + 1 < len(self.toks)
                        and self.toks[self.i + 1] == ("punct", "=")
                    ):
                        key = self.take("name")[1]
                        self.take("punct", "=")
                        call.kwargs[key] = self.parse_value()
                    else:
                        call.args.append(self.parse_value())
                    if self.peek() == ("punct", ","):
                        self.take()
                self.take("punct", ")")
                return call
            return Call(val)
        raise ConfigError(f"cannot parse value near {val!r}", self.line)

    def done(self):
        return self.i >= len(self.toks)


def parse_value(text: str, line=None):
    p = _Parser(text, line)
    v = p.parse_value()
    if not p.done():
        raise ConfigError(f"trailing input in {text!r}", line)
    return v


# ---------------------------------------------------------------------------
# scenario model
# ---------------------------------------------------------------------------

_OPS = {
    "<=": lambda a, b: a <= b,
    ">=": lambda a, b: a >= b,
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    ">": lambda a, b: a > b,
}


@dataclass
class Expectation:
    lhs: object  # Call
    op: str
    rhs: object
    text: str


@dataclass
class Scenario:
    name: str
    claim: str
    kind: str
    horizon: int
    seed: int
    languages: list
    family: Optional[str]
    count: Optional[int]
    expand: Optional[str]
    target: int
    stream_ast: Optional[Call]
    generator_ast: Optional[Call]
    variant: Optional[str]
    expects: list
    raw_text: str


def parse_scenario_text(text: str, fallback_name: str = "scenario") -> Scenario:
    fields = {
        "name": fallback_name,
        "claim": "",
        "kind": "game",
        "horizon": 100,
        "seed": 0,
        "languages": [],
        "family": None,
        "count": None,
        "expand": None,
        "target": 1,
        "stream_ast": None,
        "generator_ast": None,
        "variant": None,
    }
    expects = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", lineno)
        key, _, rhs = line.partition("=")
        key = key.strip()
        rhs = rhs.strip()
        if key == "expect":
            m = re.match(r"(.+?)\s*(<=|>=|==|!=|<|>)\s*(.+)$", rhs)
            if not m:
                raise ConfigError("expected '<metric> <op> <value>'", lineno)
            lhs = parse_value(m.group(1), lineno)
            val = parse_value(m.group(3), lineno)
            expects.append(Expectation(lhs, m.group(2), val, rhs))
        elif key in ("name", "claim", "kind", "expand", "family", "variant"):
            fields[key] = rhs
        elif key in ("horizon", "seed", "target", "count"):
            fields[key] = int(rhs)
        elif key == "languages":
            fields["languages"] = parse_value(rhs, lineno)
        elif key in ("stream", "generator"):
            fields[key + "_ast"] = parse_value(rhs, lineno)
        else:
            raise ConfigError(f"unknown key {key!r}", lineno)
    env_seed = os.environ.get("LIMITGEN_SEED")
    if env_seed is not None:
        fields["seed"] = int(env_seed)
    if fields["claim"] and fields["claim"] not in CLAIMS:
        raise ConfigError(f"unknown claim id {fields['claim']!r}")
    return Scenario(expects=expects, raw_text=text, **fields)


def load_scenario(path) -> Scenario:
    path = Path(path)
    return parse_scenario_text(path.read_text(), path.stem)


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def build_language(ast) -> SetLike:
    if not isinstance(ast, Call):
        raise ConfigError(f"expected a language expression, got {ast!r}")
    if ast.name == "fep":
        return fep(
            ast.kw("mod", 1),
            ast.kw("residues", [0]),
            add=ast.kw("add", []),
            remove=ast.kw("remove", []),
        )
    if ast.name == "blocks":
        return langs.FACTORIAL_BLOCKS
    if ast.name == "special":
        if ast.args == [] or ast.args[0] == Call("primes") or ast.kw("name") == "primes":
            return langs.PRIMES
        raise ConfigError(f"unknown special language in {ast!r}")
    raise ConfigError(f"unknown language form {ast.name!r}")


def build_collections(sc: Scenario):
    """(run collection, base collection): expansion applies to the run side."""
    if sc.family:
        base = GenerativeCollection(sc.family, sc.count)
    else:
        if not sc.languages:
            raise ConfigError("scenario needs languages or a family")
        base = ExplicitCollection([build_language(a) for a in sc.languages])
    run = base
    if sc.expand:
        run = ExpandedCollection(base, sc.expand)
    return run, base


def _noise_source(spec, target: SetLike, kept: SetLike):
    if spec is None or (isinstance(spec, Call) and spec.name == "none"):
        return None
    if isinstance(spec, Call) and spec.name == "complement":
        return langs.complement(target)
    if isinstance(spec, Call) and spec.name == "omitted":
        return langs.intersect_pair(target, langs.complement(kept))
    return build_language(spec)


def _kept(spec, target: SetLike):
    if spec is None:
        return target, {}
    if not isinstance(spec, Call):
        raise ConfigError(f"bad omission spec {spec!r}")
    if spec.name == "ranks":
        kept, cert = apply_omission_keep_ranks(target, spec.kw("mod"), spec.kw("keep"))
        return kept, cert
    if spec.name == "sparse":
        kept, cert = apply_omission_sparse(target)
        return kept, cert
    if spec.name == "skip":
        kept, cert = apply_omission_skip(target, spec.kw("values", spec.args[0] if spec.args else []))
        return kept, cert
    raise ConfigError(f"unknown omission form {spec.name!r}")


def build_stream(sc: Scenario, base: Collection, target: SetLike) -> Stream:
    ast = sc.stream_ast
    if ast is None:
        raise ConfigError("scenario needs a stream")
    if ast.name == "adaptive":
        sparse_lang = base.language_at(ast.kw("sparse"))
        dense_lang = base.language_at(ast.kw("dense"))
        return AdaptivePhaseStream(
            sparse_lang,
            dense_lang,
            ast.kw("eps", Fraction(1, 8)),
            ast.kw("budget", 1000),
            spec=f"adaptive(eps={ast.kw('eps', Fraction(1, 8))})",
        )
    kept, cert = _kept(ast.kw("omit"), target)
    if ast.name == "canonical":
        of = ast.kw("of")
        stream = make_canonical(target, build_language(of) if of is not None else None)
    elif ast.name == "vanishing":
        noise = _noise_source(ast.kw("noise"), target, kept)
        stream = make_vanishing_noise(target, noise, kept=kept)
    elif ast.name == "constant":
        noise = _noise_source(ast.kw("noise"), target, kept)
        stream = make_c_noise(target, noise, ast.kw("p"), ast.kw("q"), kept=kept)
    elif ast.name == "finite":
        stream = make_finite_noise(target, ast.kw("values", []), kept=kept)
    else:
        raise ConfigError(f"unknown stream form {ast.name!r}")
    stream.certificates.update(cert)
    repeats = ast.kw("repeats")
    if repeats is not None:
        stream = RepeatInjector(stream, seed=sc.seed, rate=repeats)
    if ast.kw("dedupe", False):
        stream = DedupeStream(stream)
    return stream


def build_generator(sc: Scenario, run: Collection, base: Collection):
    ast = sc.generator_ast
    if ast is None:
        raise ConfigError("scenario needs a generator")
    name = ast.name
    if name == "vanishing_noise":
        return vanishing_noise_generator(run)
    if name == "constant_noise":
        return constant_noise_generator(run, ast.kw("c"))
    if name == "sorting_variant":
        return sorting_variant_generator(run)
    if name == "vanishing_set_density":
        return vanishing_noise_set_density_generator(run, ast.kw("eps"))
    if name == "constant_set_density":
        return constant_noise_set_density_generator(run, ast.kw("c"), ast.kw("rho"))
    if name == "bounded_dense":
        return bounded_dense_generator(run, ast.kw("eps"), ast.kw("m"))
    if name == "set_to_element":
        inner = Scenario(**{**sc.__dict__, "generator_ast": ast.kw("base")})
        base_gen = build_generator(inner, run, base)
        return SetToElementTransform(base_gen, ast.kw("rho"))
    if name == "fallback":
        return FallbackGenerator(run)
    if name == "baseline_consistent":
        return baseline_consistent_generator(run)
    if name == "closure_probe":
        return closure_exhaustion_probe(run, ast.kw("c"))
    if name == "version_space":
        d_star = ast.kw("d_star")
        if isinstance(d_star, Call) and d_star.name == "auto":
            d_star = None
        return VersionSpaceGenerator(run, d_star)
    if name == "follow_stub":
        return FollowStub(
            base.language_at(ast.kw("sparse")), base.language_at(ast.kw("dense"))
        )
    if name == "stubborn_stub":
        return StubbornStub(build_language(ast.kw("lang")))
    raise ConfigError(f"unknown generator {name!r}")


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------

@dataclass
class RunResult:
    scenario: Scenario
    rows: list
    target: SetLike
    set_based: bool
    first_seen: dict
    summary: dict
    aux: dict


def _game_loop(gen, stream, horizon):
    rows = []
    outcome = "completed"
    stalled_at = None
    feedback = None
    for _ in range(horizon):
        try:
            step = stream.next(feedback)
        except PhaseStalled as exc:
            outcome = "phase_stalled"
            stalled_at = exc.step
            break
        rows.append(gen.observe(step))
        feedback = gen.feedback()
    return rows, outcome, stalled_at


def run_scenario(sc: Scenario) -> RunResult:
    run_coll, base_coll = build_collections(sc)
    target = base_coll.language_at(sc.target)
    if sc.kind == "witness":
        return _run_witness(sc, base_coll)
    if sc.kind == "dedupe":
        return _run_dedupe(sc, run_coll, base_coll, target)

    stream = build_stream(sc, base_coll, target)
    gen = build_generator(sc, run_coll, base_coll)
    t0 = time.monotonic()
    rows, outcome, stalled_at = _game_loop(gen, stream, sc.horizon)
    elapsed = time.monotonic() - t0

    set_based = gen.set_based
    first_seen = stream.first_seen
    summary = metrics.summarize(rows, target, first_seen, set_based, sc.horizon)
    summary.update(
        {
            "schema": SUMMARY_SCHEMA,
            "scenario": sc.name,
            "claim": sc.claim,
            "seed": sc.seed,
            "outcome": outcome,
            "elapsed_s": round(elapsed, 3),
        }
    )
    aux = {
        "violations": metrics.violations(rows, target, first_seen, set_based),
        "stream": stream,
        "generator": gen,
    }
    if set_based:
        aux["set_profile"] = metrics.set_density_profile(rows, target)
    if isinstance(stream, AdaptivePhaseStream):
        summary["phase_switches"] = len(stream.switch_steps)
        summary["stalled_at"] = stalled_at or 0
    eng = getattr(gen, "engine", None)
    if eng is not None and sc.expand is None and eng.priority.monotone:
        p = eng.priority_at(sc.target, eng.n) if sc.target in eng.states else None
        if p is not None:
            n_star, frozen = eng.stabilization_report(p)
            summary["stabilization"] = {
                "p": p,
                "n_star": n_star,
                "frozen": list(frozen),
                "has_target": sc.target in frozen,
            }
    if eng is not None:
        summary["oracle_calls"] = dict(eng.oracle_calls)
        transitions = {}
        for i, st in sorted(eng.states.items()):
            t = 0
            for a, b in st.violation_intervals:
                t += 1
                if b < eng.n:
                    t += 1
            transitions[str(i)] = t
        summary["compliance_transitions"] = transitions
    if isinstance(gen, VersionSpaceGenerator):
        ok_from = None
        for n, noise_count, budget, bot in gen.budget_history:
            if noise_count > budget:
                ok_from = None
            elif ok_from is None:
                ok_from = n
        summary["budget_ok_from"] = ok_from or 0
        summary["d_star"] = gen.d_star
    if isinstance(gen, SetToElementTransform):
        summary["k_final"] = gen.k
        summary["k_monotone"] = gen.k_history == sorted(gen.k_history)
    return RunResult(sc, rows, target, set_based, first_seen, summary, aux)


def _run_witness(sc: Scenario, base: Collection) -> RunResult:
    if base.size() != 2:
        raise ConfigError("witness scenarios need exactly two languages")
    l1, l2 = base.language_at(1), base.language_at(2)
    variant = sc.variant or "noise"
    if variant == "noise":
        values = list(range(1, sc.horizon + 1))
    elif variant == "omission":
        values = list(range(3, sc.horizon + 3))
    else:
        raise ConfigError(f"unknown witness variant {variant!r}")
    witnesses = []
    for idx, lang, adversary in ((1, l1, l2), (2, l2, l1)):
        w = langs.difference_witness(lang, adversary)
        found_at = values.index(w) + 1 if w in values else 0
        witnesses.append(
            {"index": idx, "adversary_target": 3 - idx, "witness": w, "found_at": found_at}
        )
    # the shared stream really is compatible with both declared languages
    noise1 = sum(1 for v in values if not l1.contains(v))
    noise2 = sum(1 for v in values if not l2.contains(v))
    summary = {
        "schema": SUMMARY_SCHEMA,
        "scenario": sc.name,
        "claim": sc.claim,
        "seed": sc.seed,
        "outcome": "completed",
        "witnesses": witnesses,
        "witnesses_found": sum(1 for w in witnesses if w["witness"] is not None),
        "noise_counts": [noise1, noise2],
        "horizon": sc.horizon,
    }
    return RunResult(sc, [], l1, False, {}, summary, {"violations": []})


def _run_dedupe(sc: Scenario, run_coll, base_coll, target) -> RunResult:
    def fresh_gen():
        return build_generator(sc, build_collections(sc)[0], base_coll)

    stream_a = build_stream(sc, base_coll, target)
    stream_b = build_stream(sc, base_coll, target)
    if not isinstance(stream_a, RepeatInjector):
        raise ConfigError("dedupe scenarios need repeats=... in the stream")

    wrapped = RepetitionWrapper(fresh_gen())
    rows_a, _, _ = _game_loop(wrapped, stream_a, sc.horizon)
    fresh_positions = [i for i, s in enumerate(stream_a.steps) if not s.repeated]

    plain = fresh_gen()
    deduped = DedupeStream(stream_b)
    rows_b, _, _ = _game_loop(plain, deduped, len(fresh_positions))

    equal = True
    for t, pos in enumerate(fresh_positions):
        a, b = rows_a[pos], rows_b[t]
        ka = a.output.closure.spec_str() if a.output.closure is not None else "E"
        kb = b.output.closure.spec_str() if b.output.closure is not None else "E"
        if ka != kb or a.output.indices != b.output.indices or a.J != b.J:
            equal = False
            break
    repeats_ok = all(
        rows_a[i].output is rows_a[i - 1].output
        for i, s in enumerate(stream_a.steps)
        if s.repeated and i > 0
    )
    first_seen = stream_a.first_seen
    summary = metrics.summarize(rows_a, target, first_seen, True, sc.horizon)
    summary.update(
        {
            "schema": SUMMARY_SCHEMA,
            "scenario": sc.name,
            "claim": sc.claim,
            "seed": sc.seed,
            "outcome": "completed",
            "dedupe_equal": equal and repeats_ok,
            "repeat_steps": sum(1 for s in stream_a.steps if s.repeated),
        }
    )
    aux = {
        "violations": metrics.violations(rows_a, target, first_seen, True),
        "stream": stream_a,
        "set_profile": metrics.set_density_profile(rows_a, target),
    }
    return RunResult(sc, rows_a, target, True, first_seen, summary, aux)


# ---------------------------------------------------------------------------
# expectations
# ---------------------------------------------------------------------------

def _fraction_of(text):
    if isinstance(text, str):
        return Fraction(text)
    return text


def metric_value(run: RunResult, lhs: Call):
    s = run.summary
    name, args = lhs.name, lhs.args
    if name in (
        "last_violation",
        "violations",
        "n_star",
        "emitted_elements",
        "exhausted_steps",
        "empty_steps",
        "witnesses_found",
        "phase_switches",
        "stalled_at",
        "budget_ok_from",
        "d_star",
        "repeat_steps",
        "k_final",
    ):
        return s[name]
    if name == "outcome":
        return s["outcome"]
    if name == "dedupe_equal":
        return s["dedupe_equal"]
    if name == "k_monotone":
        return s["k_monotone"]
    if name == "violations_after":
        return sum(1 for v in run.aux["violations"] if v > args[0])
    if name == "set_tail_min":
        return _fraction_of(s["set_density"]["tail_min"])
    if name == "set_tail_max":
        return _fraction_of(s["set_density"]["tail_max"])
    if name == "set_max_all":
        return _fraction_of(s["set_density"]["max_all"])
    if name == "element_tail_min":
        return _fraction_of(s["element_density"]["tail_min"])
    if name == "density_steps_second_half_ge":
        profile = run.aux["set_profile"]
        half = profile[len(profile) // 2 :]
        return sum(1 for v in half if v >= args[0])
    if name == "set_density_min_after_stab":
        profile = run.aux["set_profile"]
        start = s.get("stabilization", {}).get("n_star") or 1
        tail = profile[start - 1 :]
        return min(tail) if tail else Fraction(0)
    if name == "stab_has_target":
        return s.get("stabilization", {}).get("has_target", False)
    if name == "stab_n_star":
        v = s.get("stabilization", {}).get("n_star")
        return v if v is not None else -1
    if name == "oracle_density_calls":
        return s.get("oracle_calls", {}).get("density", -1)
    if name == "compliance_transitions":
        return s["compliance_transitions"][str(args[0])]
    if name == "budget_violations_after":
        gen = run.aux.get("generator")
        return sum(
            1
            for (n, noise_count, budget, _) in gen.budget_history
            if n > args[0] and noise_count > budget
        )
    raise ConfigError(f"unknown metric {name!r}")


def check_expectations(run: RunResult):
    results = []
    for exp in run.scenario.expects:
        lhs = metric_value(run, exp.lhs)
        rhs = exp.rhs
        if isinstance(lhs, bool) or isinstance(rhs, bool):
            ok = _OPS[exp.op](bool(lhs), bool(rhs))
        elif isinstance(lhs, str) or isinstance(rhs, str):
            rhs_s = rhs.name if isinstance(rhs, Call) else str(rhs)
            ok = _OPS[exp.op](str(lhs), rhs_s)
        else:
            ok = _OPS[exp.op](lhs, rhs)
        results.append({"expect": exp.text, "actual": str(lhs), "ok": bool(ok)})
    return results


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def trace_lines(run: RunResult):
    header = {
        "schema": TRACE_SCHEMA,
        "scenario": run.scenario.name,
        "claim": run.scenario.claim,
        "seed": run.scenario.seed,
        "horizon": run.scenario.horizon,
        "config": run.scenario.raw_text,
    }
    yield json.dumps(header, sort_keys=True, separators=(",", ":"))
    for row in run.rows:
        out_kind = "E" if row.output.kind == "empty" else "I"
        w = row.element if row.element is not None else -1
        prefix = ",".join(str(i) for i in row.prefix)
        flags = ";".join(row.flags)
        yield (
            f'{{"n":{row.n},"x":{row.x},"noise":{1 if row.is_noise else 0},'
            f'"sigma":{row.sigma},"J":{row.J},"prefix":"{prefix}",'
            f'"out":"{out_kind}","w":{w},"flags":"{flags}"}}'
        )


def write_trace(path, run: RunResult):
    with open(path, "w") as fh:
        for line in trace_lines(run):
            fh.write(line)
            fh.write("\n")


def write_summary(path, run: RunResult, checks=None):
    doc = dict(run.summary)
    if checks is not None:
        doc["expectations"] = checks
        doc["passed"] = all(c["ok"] for c in checks)
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def emit_plot_csv(run: RunResult, kind: str, index: Optional[int] = None) -> str:
    lines = [f"# {CSV_SCHEMA} kind={kind} scenario={run.scenario.name}"]
    lines.append("n,value")
    if not run.rows:
        return "\n".join(lines) + "\n"
    if kind == "noise_rate":
        if index is None:
            lang = run.target
        else:
            base = build_collections(run.scenario)[0]
            lang = base.language_at(index)
        for n, v in enumerate(metrics.noise_rate_curve(run.rows, lang), start=1):
            lines.append(f"{n},{v}")
    elif kind == "set_density":
        for n, v in enumerate(metrics.set_density_profile(run.rows, run.target), start=1):
            lines.append(f"{n},{v}")
    elif kind == "element_density":
        horizon = run.scenario.horizon
        grid = sorted({max(1, (horizon * (i + 1)) // 20) for i in range(20)})
        prof = metrics.element_density_profile(run.rows, run.target, grid)
        for m, v in zip(grid, prof):
            lines.append(f"{m},{v}")
    elif kind == "priority":
        gen = run.aux.get("generator")
        eng = getattr(gen, "engine", None)
        if eng is None or index is None:
            raise ConfigError("priority plots need an engine run and --index")
        for n in range(max(1, eng.states[index].entered_at), eng.n + 1):
            lines.append(f"{n},{eng.priority_at(index, n)}")
    else:
        raise ConfigError(f"unknown plot kind {kind!r}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# suite
# ---------------------------------------------------------------------------

def bundled_scenario_paths():
    here = Path(__file__).parent / "scenarios"
    return sorted(here.glob("*.cfg"))


def run_one(path, horizon_override=None, out_dir=None):
    sc = load_scenario(path)
    if horizon_override:
        sc = Scenario(**{**sc.__dict__, "horizon": horizon_override})
    run = run_scenario(sc)
    checks = check_expectations(run)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_trace(out_dir / f"{sc.name}.trace.jsonl", run)
        write_summary(out_dir / f"{sc.name}.summary.json", run, checks)
    return run, checks


def _suite_worker(args):
    path, horizon, out_dir = args
    run, checks = run_one(path, horizon, out_dir)
    return {
        "scenario": run.scenario.name,
        "claim": run.scenario.claim,
        "passed": all(c["ok"] for c in checks),
        "checks": checks,
        "elapsed_s": run.summary.get("elapsed_s", 0.0),
    }


def run_suite(filter_str="", horizon_override=None, out_dir=None, jobs=1):
    paths = [p for p in bundled_scenario_paths() if filter_str in p.stem]
    tasks = [(p, horizon_override, out_dir) for p in paths]
    if jobs > 1 and len(tasks) > 1:
        import multiprocessing as mp

        with mp.Pool(jobs) as pool:
            rows = pool.map(_suite_worker, tasks)
    else:
        rows = [_suite_worker(t) for t in tasks]
    rows.sort(key=lambda r: r["scenario"])
    return {
        "schema": "limitgen.suite/1",
        "rows": rows,
        "passed": all(r["passed"] for r in rows),
        "count": len(rows),
    }

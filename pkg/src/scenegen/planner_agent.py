"""Planner agent: constraint extraction, rule compilation and scheme calibration.

Rules use a small closed grammar over scenario-vector variables::

    expr   := term ("OR" term)*
    term   := atom ("AND" atom)*
    atom   := "(" expr ")" | var op number | var "in" "[" number "," number "]"
    var    := SA | Similarity | NF | WF | WE | LCC_S | Reachability | VE | demand[<category>]
    op     := ">=" | "<=" | "="
"""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .ingest import CATEGORIES
from .metrics import DIMS, ScenarioVector

log = logging.getLogger(__name__)

STRUCTURAL = ("NF", "WF", "WE", "LCC_S", "Reachability")
DEMAND_VARS = tuple(f"demand[{c}]" for c in CATEGORIES)
VARIABLES = DIMS + DEMAND_VARS
EQ_TOL = 1e-9


class RuleError(ValueError):
    pass


class RuleCompileError(RuleError):
    def __init__(self, message: str, fragment: str):
        super().__init__(f"{message}: {fragment!r}")
        self.fragment = fragment


class UnresolvedVariable(RuleError):
    pass


# -- rule trees ----------------------------------------------------------


@dataclass(frozen=True)
class Compare:
    var: str
    op: str
    value: float

    def evaluate(self, env: Mapping[str, float]) -> bool:
        x = _lookup(env, self.var)
        if self.op == ">=":
            return x >= self.value
        if self.op == "<=":
            return x <= self.value
        return math.isclose(x, self.value, rel_tol=EQ_TOL, abs_tol=EQ_TOL)

    def leaves(self):
        yield self

    def render(self) -> str:
        return f"{self.var} {self.op} {self.value:g}"


@dataclass(frozen=True)
class Within:
    var: str
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise RuleError(f"empty interval [{self.lo}, {self.hi}]")

    def evaluate(self, env: Mapping[str, float]) -> bool:
        return self.lo <= _lookup(env, self.var) <= self.hi

    def leaves(self):
        yield self

    def render(self) -> str:
        return f"{self.var} in [{self.lo:g}, {self.hi:g}]"


@dataclass(frozen=True)
class And:
    children: tuple

    def evaluate(self, env):
        return all(c.evaluate(env) for c in self.children)

    def leaves(self):
        for c in self.children:
            yield from c.leaves()

    def render(self) -> str:
        return " AND ".join(_wrap(c, Or) for c in self.children)


@dataclass(frozen=True)
class Or:
    children: tuple

    def evaluate(self, env):
        return any(c.evaluate(env) for c in self.children)

    def leaves(self):
        for c in self.children:
            yield from c.leaves()

    def render(self) -> str:
        return " OR ".join(_wrap(c, Or) for c in self.children)


RuleExpression = Compare | Within | And | Or


def _wrap(node, paren_type) -> str:
    text = node.render()
    return f"({text})" if isinstance(node, paren_type) else text


def _lookup(env: Mapping[str, float], var: str) -> float:
    try:
        return float(env[var])
    except KeyError:
        raise UnresolvedVariable(f"variable {var!r} not provided") from None


def render(rule) -> str:
    return rule.render()


# -- parsing -------------------------------------------------------------

_TOKEN = re.compile(r"""
    \s*(?:
      (?P<num>[-+]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?)
    | (?P<demand>demand\[[^\]]+\])
    | (?P<op>>=|<=|=)
    | (?P<punct>[\[\](),])
    | (?P<word>[A-Za-z_][A-Za-z_0-9]*)
    | (?P<bad>\S)
    )""", re.VERBOSE)


def _tokenize(text: str) -> list[tuple[str, str]]:
    toks = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            break
        pos = m.end()
        kind = m.lastgroup
        toks.append((kind, m.group(kind)))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def take(self, kind=None, value=None):
        tok = self.peek()
        if tok[0] is None or (kind and tok[0] != kind) or (value and tok[1] != value):
            rest = " ".join(v for _, v in self.toks[self.i:]) or "<end>"
            want = value or kind or "token"
            raise RuleCompileError(f"expected {want}", rest)
        self.i += 1
        return tok[1]

    def parse(self):
        if not self.toks:
            raise RuleCompileError("empty rule", self.text)
        node = self.expr()
        if self.i != len(self.toks):
            raise RuleCompileError("unexpected trailing input", " ".join(v for _, v in self.toks[self.i:]))
        return node

    def expr(self):
        parts = [self.term()]
        while self.peek() == ("word", "OR"):
            self.take()
            parts.append(self.term())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def term(self):
        parts = [self.atom()]
        while self.peek() == ("word", "AND"):
            self.take()
            parts.append(self.atom())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def atom(self):
        if self.peek() == ("punct", "("):
            self.take()
            node = self.expr()
            self.take("punct", ")")
            return node
        kind, var = self.peek()
        if kind not in ("word", "demand") or var not in VARIABLES:
            raise RuleCompileError("unknown variable", var or "<end>")
        self.take()
        if self.peek() == ("word", "in"):
            self.take()
            self.take("punct", "[")
            lo = float(self.take("num"))
            self.take("punct", ",")
            hi = float(self.take("num"))
            self.take("punct", "]")
            try:
                return Within(var, lo, hi)
            except RuleError as exc:
                raise RuleCompileError(str(exc), f"{var} in [{lo}, {hi}]") from None
        op = self.take("op")
        return Compare(var, op, float(self.take("num")))


def parse_rule(text: str):
    return _Parser(text).parse()


# -- natural language -> grammar ------------------------------------------

_ALIASES = [
    (r"\bsum activity\b", "SA"),
    (r"\bnode fraction\b", "NF"),
    (r"\bweight fraction\b", "WF"),
    (r"\bweight entropy\b", "WE"),
    (r"\b(?:lcc size|lcc_s|largest component size)\b", "LCC_S"),
    (r"\bvalue entropy\b", "VE"),
    (r"\breachability\b", "Reachability"),
    (r"\bsimilarity\b", "Similarity"),
]
_PHRASES = [
    (r"\bbetween\s+(\S+)\s+and\s+(\S+)", r"in [\1, \2]"),
    (r"(?:must|should|shall)?\s*(?:stay|remain|be|is)?\s*(?:at least|no less than|not below|>=)", " >= "),
    (r"(?:must|should|shall)?\s*(?:stay|remain|be|is)?\s*(?:at most|no more than|not above|must not exceed|<=)", " <= "),
    (r"(?:must|should|shall)?\s*(?:stay|remain|be|is)?\s*(?:equal to|equals|exactly|==)", " = "),
    (r"\band\b", " AND "),
    (r"\bor\b", " OR "),
]
_FILLER = {"must", "should", "shall", "stay", "stays", "remain", "remains", "be", "is", "the",
           "always", "keep", "kept", "every", "each", "year", "a", "an", "of", "for", "in_"}


def normalize_constraint(text: str) -> str:
    """Rewrite a plain-language constraint into grammar text (best effort).

    Words the grammar cannot absorb are left in place so that parsing fails
    on them.
    """
    s = text.strip().rstrip(".").strip()
    demand = {}

    def hide_demand(m):
        cat = next((c for c in CATEGORIES if c.lower() == m.group(1).strip().lower()), None)
        if cat is None:
            return m.group(0)
        key = f"__d{len(demand)}__"
        demand[key] = f"demand[{cat}]"
        return key

    s = re.sub(r"demand(?:\s+for|\s+of)?\s*\[?\s*(" + "|".join(re.escape(c) for c in CATEGORIES) + r")\s*\]?",
               hide_demand, s, flags=re.IGNORECASE)
    for pat, rep in _ALIASES:
        s = re.sub(pat, rep, s, flags=re.IGNORECASE)
    for pat, rep in _PHRASES:
        s = re.sub(pat, rep, s, flags=re.IGNORECASE)
    words = []
    for w in s.split():
        if w.lower() in _FILLER:
            continue
        words.append(w)
    s = " ".join(words)
    s = re.sub(r"\s*([\[\],])\s*", lambda m: {"[": " [", "]": "] ", ",": ", "}[m.group(1)], s)
    for key, val in demand.items():
        s = s.replace(key, val)
    return re.sub(r"\s+", " ", s).strip()


@dataclass(frozen=True)
class ConstraintText:
    id: str
    source: str
    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("constraint text must be nonempty")


_SENTENCE = re.compile(r"\.(?=\s|$)|\n|;")


def is_constraint(sentence: str) -> bool:
    try:
        parse_rule(normalize_constraint(sentence))
    except RuleError:
        return False
    return True


def extract_constraints(docs: Sequence[tuple[str, str]], adapter=None) -> list[ConstraintText]:
    """Sentences that read as constraints over scenario variables."""
    from .llm import CompletionRequest

    out = []
    for doc_id, text in docs:
        source = text
        if adapter is not None and adapter.mode == "remote":
            source = adapter.complete(CompletionRequest(
                system_prompt=("List every quantitative constraint in the document, one per line, "
                               "phrased over: " + ", ".join(VARIABLES) + "."),
                user_prompt=text, max_tokens=512,
            )).text
        found = [s.strip() for s in _SENTENCE.split(source) if s.strip() and is_constraint(s)]
        if not found:
            log.warning("no constraints found in %s", doc_id)
        for k, s in enumerate(found):
            out.append(ConstraintText(f"{doc_id}#{k}", doc_id, s))
    return out


def load_documents(directory: str | Path) -> list[tuple[str, str]]:
    return [(p.name, p.read_text(encoding="utf-8")) for p in sorted(Path(directory).glob("*.txt"))]


def compile_rule(c: ConstraintText | str, adapter=None):
    """Program-aided compile: the model (or stub) emits grammar text, which is parsed."""
    from .llm import CompletionRequest, SchemaHint

    text = c.text if isinstance(c, ConstraintText) else c
    if not text.strip():
        raise RuleCompileError("empty constraint", text)
    if adapter is None:
        grammar = normalize_constraint(text)
    else:
        resp = adapter.complete(CompletionRequest(
            system_prompt=("Translate the constraint into the rule grammar: "
                           "<var> (>=|<=|=) <number> | <var> in [a, b], joined by AND/OR. "
                           "Variables: " + ", ".join(VARIABLES) + ". Output the rule only."),
            user_prompt=f"Constraint:\n{text}",
            schema_hint=SchemaHint("rule-text"),
        ))
        grammar = resp.parsed or resp.text
    try:
        return parse_rule(grammar)
    except RuleCompileError as exc:
        raise RuleCompileError(f"cannot compile {text!r}", exc.fragment) from None


def evaluate_rule(rule, values: Mapping[str, float]) -> bool:
    return rule.evaluate(values)


def rule_env(vector: ScenarioVector, demand: Mapping[str, float] | None = None) -> dict[str, float]:
    env = vector.as_dict()
    for c, v in (demand or {}).items():
        env[f"demand[{c}]"] = v
    return env


# -- schemes -------------------------------------------------------------

# Backbone parameters the calibration treats as continuous, with bounds and
# whether raising the value makes the backbone sparser.
CONTINUOUS_PARAMS: dict[str, dict[str, tuple[float, float, bool]]] = {
    "social": {"q_ii": (0.01, 0.99, True)},
    "gt": {"threshold": (1e-9, math.inf, True)},
    "hss": {"salience_threshold": (1e-6, 1.0, True)},
    "cluster": {"sigma_mult": (0.0, 10.0, False)},
    "pla": {},
    "original": {},
}


@dataclass
class ExperimentScheme:
    ev: dict[str, float]
    backbone: dict = field(default_factory=lambda: {"method": "social"})
    rules: list = field(default_factory=list)
    seed: int = 0

    def __post_init__(self):
        if any(v <= 0 for v in self.ev.values()):
            raise ValueError("demand multipliers must be positive")

    @property
    def method(self) -> str:
        return self.backbone.get("method", "social")

    def param_names(self) -> list[str]:
        return [f"ev:{c}" for c in CATEGORIES if c in self.ev] + list(CONTINUOUS_PARAMS.get(self.method, {}))

    def to_vector(self) -> np.ndarray:
        vals = [self.ev[c] for c in CATEGORIES if c in self.ev]
        vals += [float(self.backbone[k]) for k in CONTINUOUS_PARAMS.get(self.method, {})]
        return np.array(vals, dtype=float)

    def with_vector(self, x: Sequence[float]) -> "ExperimentScheme":
        cats = [c for c in CATEGORIES if c in self.ev]
        ev = {c: float(v) for c, v in zip(cats, x[: len(cats)])}
        bb = dict(self.backbone)
        for k, v in zip(CONTINUOUS_PARAMS.get(self.method, {}), x[len(cats):]):
            bb[k] = float(v)
        return replace(self, ev=ev, backbone=bb)

    def to_json(self) -> dict:
        return {"ev": {c: self.ev[c] for c in CATEGORIES if c in self.ev},
                "backbone": self.backbone,
                "rules": [render(r) for r in self.rules],
                "seed": self.seed}

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentScheme":
        return cls(dict(obj["ev"]), dict(obj["backbone"]), [parse_rule(r) for r in obj.get("rules", [])],
                   int(obj.get("seed", 0)))


@dataclass
class Execution:
    """What running a scheme produced: per-year vectors, category demand and δ."""

    vectors: list[ScenarioVector]
    demand: list[dict[str, float]]
    deviation: float


Pipeline = Callable[[ExperimentScheme], Execution]


# -- gradient calibration ------------------------------------------------


def finite_difference_gradient(f: Callable[[np.ndarray], float], x: np.ndarray, step: float = 1e-3,
                               relative: bool = True) -> np.ndarray:
    """Central differences; ``step`` is scaled by ``max(|x_i|, 1)`` when relative."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(len(x)):
        h = step * max(abs(x[i]), 1.0) if relative else step
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2 * h)
    return g


@dataclass
class CalibrationReport:
    iterations: int = 0
    J: list[float] = field(default_factory=list)
    best_J: list[float] = field(default_factory=list)
    grad_norms: list[float] = field(default_factory=list)
    converged: bool = False
    diverged: bool = False
    aborted: str | None = None

    @property
    def final_grad_norm(self) -> float:
        return self.grad_norms[-1] if self.grad_norms else 0.0

    def to_json(self) -> dict:
        return {"iterations": self.iterations, "J": self.J, "best_J": self.best_J,
                "grad_norms": self.grad_norms, "final_grad_norm": self.final_grad_norm,
                "converged": self.converged, "diverged": self.diverged, "aborted": self.aborted}


def gradient_descent(f: Callable[[np.ndarray], float], x0: Sequence[float], eta: float = 0.05,
                     eps: float = 1e-3, max_iters: int = 100, fd_step: float = 1e-3,
                     lower: Sequence[float] | None = None, upper: Sequence[float] | None = None,
                     grad: Callable[[np.ndarray], np.ndarray] | None = None,
                     blowup: float = 1e6) -> tuple[np.ndarray, CalibrationReport]:
    """Projected gradient descent keeping the best iterate seen."""
    if eta <= 0 or eps <= 0:
        raise ValueError("eta and eps must be positive")
    x = np.asarray(x0, dtype=float).copy()
    lo = np.full_like(x, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    hi = np.full_like(x, np.inf) if upper is None else np.asarray(upper, dtype=float)
    rep = CalibrationReport()
    try:
        j = f(x)
    except Exception as exc:  # noqa: BLE001 - report and stop
        rep.aborted = f"{type(exc).__name__}: {exc}"
        return x, rep
    best_x, best_j = x.copy(), j
    j0 = j
    rep.J.append(j)
    rep.best_J.append(best_j)
    for k in range(max_iters):
        if j == 0:
            rep.converged = True
            break
        try:
            g = grad(x) if grad is not None else finite_difference_gradient(f, x, fd_step)
        except Exception as exc:  # noqa: BLE001
            rep.aborted = f"{type(exc).__name__}: {exc}"
            break
        gn = float(np.linalg.norm(g))
        rep.grad_norms.append(gn)
        if gn < eps:
            rep.converged = True
            break
        x = np.clip(x - eta * g, lo, hi)
        rep.iterations = k + 1
        try:
            j = f(x)
        except Exception as exc:  # noqa: BLE001
            rep.aborted = f"{type(exc).__name__}: {exc}"
            break
        rep.J.append(j)
        if not np.isfinite(j) or not np.all(np.isfinite(x)) or abs(j) > blowup * max(abs(j0), 1.0):
            rep.diverged = True
            rep.best_J.append(best_j)
            break
        if j < best_j:
            best_x, best_j = x.copy(), j
        rep.best_J.append(best_j)
    return best_x, rep


def calibrate(scheme0: ExperimentScheme, target, pipeline: Pipeline, eta: float = 0.05, eps: float = 1e-3,
              max_iters: int = 100, fd_step: float = 1e-3,
              ev_bounds: Mapping[str, tuple[float, float]] | None = None,
              ) -> tuple[ExperimentScheme, CalibrationReport]:
    """Minimise J = deviation of the scheme's scenario from ``target``.

    ``target`` is unused by the built-in pipelines, which already score
    against their expected scenario; it is kept so custom pipelines can close
    over it.
    """
    del target
    names = scheme0.param_names()
    lower, upper = [], []
    param_bounds = CONTINUOUS_PARAMS.get(scheme0.method, {})
    for n in names:
        if n.startswith("ev:"):
            lo_, hi_ = (ev_bounds or {}).get(n[3:], (1e-6, math.inf))
            lower.append(max(lo_, 1e-6))
            upper.append(hi_)
        else:
            lo_, hi_, _ = param_bounds[n]
            lower.append(lo_)
            upper.append(hi_)

    def J(x: np.ndarray) -> float:
        return pipeline(scheme0.with_vector(x)).deviation

    x0 = np.clip(scheme0.to_vector(), lower, upper)
    best, rep = gradient_descent(J, x0, eta, eps, max_iters, fd_step, lower, upper)
    return scheme0.with_vector(best), rep


# -- execute / analyze / adjust -------------------------------------------


@dataclass
class OptimizeReport:
    rounds: int = 0
    converged: bool = False
    violations: list[int] = field(default_factory=list)
    deviations: list[float] = field(default_factory=list)
    params: list[float] = field(default_factory=list)
    conflicts: int = 0

    def to_json(self) -> dict:
        return {"rounds": self.rounds, "converged": self.converged, "violations": self.violations,
                "deviations": self.deviations, "params": self.params, "conflicts": self.conflicts}


def violations(rules: Sequence, execution: Execution) -> list[tuple[object, int]]:
    """(rule, period index) pairs that fail."""
    out = []
    for t, v in enumerate(execution.vectors):
        env = rule_env(v, execution.demand[t] if t < len(execution.demand) else None)
        for r in rules:
            if not r.evaluate(env):
                out.append((r, t))
    return out


def structural_direction(rule, env: Mapping[str, float]) -> set[str]:
    """Which way the backbone should move ('denser'/'sparser') to fix failing leaves."""
    dirs = set()
    for leaf in rule.leaves():
        if leaf.var not in STRUCTURAL or leaf.evaluate(env):
            continue
        x = env[leaf.var]
        if isinstance(leaf, Within):
            dirs.add("denser" if x < leaf.lo else "sparser")
        elif leaf.op == ">=":
            dirs.add("denser")
        elif leaf.op == "<=":
            dirs.add("sparser")
        else:
            dirs.add("denser" if x < leaf.value else "sparser")
    return dirs


def project_ev(ev: Mapping[str, float], bounds: Mapping[str, tuple[float, float]] | None) -> dict[str, float]:
    if not bounds:
        return dict(ev)
    return {c: float(min(max(v, bounds[c][0]), bounds[c][1])) if c in bounds else v for c, v in ev.items()}


def optimize_scheme(scheme: ExperimentScheme, rules: Sequence, pipeline: Pipeline, max_rounds: int = 20,
                    ev_bounds: Mapping[str, tuple[float, float]] | None = None, tol: float = 1e-6,
                    ) -> tuple[ExperimentScheme, OptimizeReport]:
    """Execute, count rule violations, adjust; repeat until clean and stable.

    The backbone's continuous parameter is bisected within its bounds toward
    whichever direction failing structural rules ask for.
    """
    rep = OptimizeReport()
    scheme = replace(scheme, ev=project_ev(scheme.ev, ev_bounds), rules=list(rules))
    param_bounds = CONTINUOUS_PARAMS.get(scheme.method, {})
    pname = next(iter(param_bounds), None)
    if pname is not None:
        lo, hi, raises_sparsity = param_bounds[pname]
        if math.isinf(hi):
            hi = max(float(scheme.backbone.get(pname, 1.0)) * 2, 1.0)
    best, best_key = scheme, None
    prev = None
    for _ in range(max_rounds):
        rep.rounds += 1
        result = pipeline(scheme)
        bad = violations(rules, result)
        rep.violations.append(len(bad))
        rep.deviations.append(result.deviation)
        if pname is not None:
            rep.params.append(float(scheme.backbone.get(pname, float("nan"))))
        key = (len(bad), result.deviation)
        if best_key is None or key < best_key:
            best, best_key = scheme, key
        if not bad and (prev is None or abs(prev - result.deviation) < tol):
            rep.converged = True
            return scheme, rep
        prev = result.deviation
        dirs: set[str] = set()
        for r, t in bad:
            dirs |= structural_direction(r, rule_env(result.vectors[t], result.demand[t]))
        if len(dirs) > 1:
            rep.conflicts += 1
        if pname is None or not dirs:
            continue
        want = sorted(dirs)[0]
        p = float(scheme.backbone[pname])
        # map "denser"/"sparser" onto moving the parameter down/up
        go_down = (want == "denser") == raises_sparsity
        if go_down:
            hi = p
            p = (lo + p) / 2
        else:
            lo = p
            p = (p + hi) / 2
        scheme = replace(scheme, backbone={**scheme.backbone, pname: p})
    return best, rep


def save_json(path: str | Path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=False) + "\n", encoding="utf-8")

"""Syntactically co-safe LTL: parsing, progression and DFA compilation.

Formulas are immutable trees.  The DFA is built by repeatedly progressing
the specification through every letter of ``2^Sigma`` and identifying states
up to a syntactic canonical form, so the automaton may be non-minimal but is
always deterministic and total.

Letters are integer bitmasks: bit ``i`` is set iff the proposition with
canonical index ``i`` (lexicographic order of names) holds.
"""
from __future__ import annotations

import math
import re
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence, Union

__all__ = [
    "Top", "Bottom", "Atom", "NegAtom", "And", "Or", "Next", "Until", "Eventually",
    "Formula", "Dfa", "TransitionEncoding",
    "SpecSyntaxError", "NegationOnCompound", "UnknownProposition", "StateExplosion",
    "NoSuchTransition", "NoSelfLoop",
    "canonical_sigma", "letter", "letter_names",
    "parse_spec", "simplify", "progress", "compile_dfa", "accepts", "eval_scltl",
    "guard", "transition_encoding", "dist_to_accept",
]

MAX_PROPOSITIONS = 16


class SpecSyntaxError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class NegationOnCompound(SpecSyntaxError):
    pass


class UnknownProposition(ValueError):
    pass


class StateExplosion(RuntimeError):
    pass


class NoSuchTransition(ValueError):
    pass


class NoSelfLoop(ValueError):
    pass


# --------------------------------------------------------------------------
# Abstract syntax

@dataclass(frozen=True, slots=True)
class Top:
    def __str__(self) -> str:
        return "true"


@dataclass(frozen=True, slots=True)
class Bottom:
    def __str__(self) -> str:
        return "false"


@dataclass(frozen=True, slots=True)
class Atom:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class NegAtom:
    name: str

    def __str__(self) -> str:
        return f"!{self.name}"


@dataclass(frozen=True, slots=True)
class And:
    left: "Formula"
    right: "Formula"

    def __str__(self) -> str:
        return f"({self.left} & {self.right})"


@dataclass(frozen=True, slots=True)
class Or:
    left: "Formula"
    right: "Formula"

    def __str__(self) -> str:
        return f"({self.left} | {self.right})"


@dataclass(frozen=True, slots=True)
class Next:
    arg: "Formula"

    def __str__(self) -> str:
        return f"X {self.arg}"


@dataclass(frozen=True, slots=True)
class Eventually:
    arg: "Formula"

    def __str__(self) -> str:
        return f"F {self.arg}"


@dataclass(frozen=True, slots=True)
class Until:
    left: "Formula"
    right: "Formula"

    def __str__(self) -> str:
        return f"({self.left} U {self.right})"


Formula = Union[Top, Bottom, Atom, NegAtom, And, Or, Next, Eventually, Until]

TRUE = Top()
FALSE = Bottom()


def canonical_sigma(names: Iterable[str]) -> tuple[str, ...]:
    """Deduplicated, lexicographically sorted proposition names."""
    sigma = tuple(sorted(set(names)))
    if len(sigma) > MAX_PROPOSITIONS:
        raise ValueError(f"at most {MAX_PROPOSITIONS} propositions supported, got {len(sigma)}")
    return sigma


def letter(names: Iterable[str], sigma: Sequence[str]) -> int:
    """Bitmask of the letter in which exactly ``names`` hold."""
    index = {p: i for i, p in enumerate(sigma)}
    mask = 0
    for p in names:
        try:
            mask |= 1 << index[p]
        except KeyError:
            raise UnknownProposition(p) from None
    return mask


def letter_names(mask: int, sigma: Sequence[str]) -> frozenset[str]:
    return frozenset(p for i, p in enumerate(sigma) if mask >> i & 1)


def atoms_of(f: Formula) -> set[str]:
    if isinstance(f, (Atom, NegAtom)):
        return {f.name}
    if isinstance(f, (And, Or, Until)):
        return atoms_of(f.left) | atoms_of(f.right)
    if isinstance(f, (Next, Eventually)):
        return atoms_of(f.arg)
    return set()


# --------------------------------------------------------------------------
# Parser

_TOKEN_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*|[!&|()]")
_KEYWORDS = {"X", "F", "U"}


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos == len(text):
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise SpecSyntaxError(f"unexpected character {text[pos]!r}", pos)
        word = m.group()
        if word[0].isalpha() or word[0] == "_":
            tokens.append((word if word in _KEYWORDS else "ident", word, pos))
        else:
            tokens.append((word, word, pos))
        pos = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    # precedence, loosest first: |, &, U (right-assoc), unary {!, X, F}

    def __init__(self, text: str, sigma: Sequence[str], allow_literals: bool):
        self.tokens = _tokenize(text)
        self.i = 0
        self.sigma = set(sigma)
        self.allow_literals = allow_literals

    def peek(self):
        return self.tokens[self.i]

    def take(self, kind: str | None = None):
        tok = self.tokens[self.i]
        if kind is not None and tok[0] != kind:
            what = "end of input" if tok[0] == "eof" else repr(tok[1])
            raise SpecSyntaxError(f"expected {kind!r}, found {what}", tok[2])
        self.i += 1
        return tok

    def parse(self) -> Formula:
        f = self.disjunction()
        tok = self.peek()
        if tok[0] != "eof":
            raise SpecSyntaxError(f"unexpected token {tok[1]!r}", tok[2])
        return f

    def disjunction(self) -> Formula:
        f = self.conjunction()
        while self.peek()[0] == "|":
            self.take()
            f = Or(f, self.conjunction())
        return f

    def conjunction(self) -> Formula:
        f = self.until()
        while self.peek()[0] == "&":
            self.take()
            f = And(f, self.until())
        return f

    def until(self) -> Formula:
        f = self.unary()
        if self.peek()[0] == "U":
            self.take()
            return Until(f, self.until())
        return f

    def unary(self) -> Formula:
        kind, text, pos = self.peek()
        if kind == "!":
            self.take()
            operand = self.unary()
            if isinstance(operand, Atom):
                return NegAtom(operand.name)
            if isinstance(operand, Top):
                return FALSE
            if isinstance(operand, Bottom):
                return TRUE
            raise NegationOnCompound("negation is only allowed on atomic propositions", pos)
        if kind == "X":
            self.take()
            return Next(self.unary())
        if kind == "F":
            self.take()
            return Eventually(self.unary())
        if kind == "(":
            self.take()
            f = self.disjunction()
            self.take(")")
            return f
        if kind == "ident":
            self.take()
            if text in ("true", "false") and self.allow_literals:
                return TRUE if text == "true" else FALSE
            if text not in self.sigma:
                raise UnknownProposition(f"proposition {text!r} (position {pos}) not declared")
            return Atom(text)
        what = "end of input" if kind == "eof" else repr(text)
        raise SpecSyntaxError(f"expected a formula, found {what}", pos)


def parse_spec(text: str, sigma: Iterable[str], allow_literals: bool = True) -> Formula:
    """Parse ASCII scLTL (``! & | X F U``, parentheses) over declared propositions.

    >>> parse_spec("(!fire U ext) & (F fire)", ["ext", "fire"])
    And(left=Until(left=NegAtom(name='fire'), right=Atom(name='ext')), right=Eventually(arg=Atom(name='fire')))
    """
    return _Parser(text, list(sigma), allow_literals).parse()


# --------------------------------------------------------------------------
# Canonical form

_RANK = {Top: 0, Bottom: 1, Atom: 2, NegAtom: 3, Next: 4, Eventually: 5, Until: 6, And: 7, Or: 8}


def sort_key(f: Formula) -> tuple:
    """Total syntactic order used to normalize commutative operands."""
    t = type(f)
    if t is Atom or t is NegAtom:
        return (_RANK[t], f.name)
    if t is Next or t is Eventually:
        return (_RANK[t], sort_key(f.arg))
    if t is Until or t is And or t is Or:
        return (_RANK[t], sort_key(f.left), sort_key(f.right))
    return (_RANK[t],)


def _flatten(f: Formula, op: type, out: list) -> None:
    if type(f) is op:
        _flatten(f.left, op, out)
        _flatten(f.right, op, out)
    else:
        out.append(f)


def _rebuild(op: type, operands: list) -> Formula:
    f = operands[-1]
    for g in reversed(operands[:-1]):
        f = op(g, f)
    return f


Cube = frozenset  # conjunction of non-boolean subformulas


def _cube_ok(cube: Cube) -> bool:
    return not any(type(g) is Atom and NegAtom(g.name) in cube for g in cube)


def _minimize(cubes) -> list[Cube]:
    """Drop contradictory cubes and any cube that is a superset of another (absorption)."""
    uniq = sorted({c for c in cubes if _cube_ok(c)}, key=len)
    kept: list[Cube] = []
    for c in uniq:
        if not any(k <= c for k in kept):
            kept.append(c)
    return kept


def _dnf(f: Formula) -> list[Cube]:
    """Disjunctive normal form over temporal units; ``[]`` is false, ``[frozenset()]`` is true."""
    t = type(f)
    if t is Top:
        return [Cube()]
    if t is Bottom:
        return []
    if t is Or:
        return _minimize(_dnf(f.left) + _dnf(f.right))
    if t is And:
        left = _dnf(f.left)
        right = _dnf(f.right) if left else []
        return _minimize([a | b for a in left for b in right])
    return [Cube((f,))]


def _from_dnf(cubes: list[Cube]) -> Formula:
    if not cubes:
        return FALSE
    terms = []
    for c in cubes:
        terms.append(_rebuild(And, sorted(c, key=sort_key)) if c else TRUE)
    if any(type(t) is Top for t in terms):
        return TRUE
    return _rebuild(Or, sorted(terms, key=sort_key))


def _unit(f: Formula) -> Formula:
    """Canonicalize inside a temporal node without touching its boolean context."""
    t = type(f)
    if t is Next:
        g = simplify(f.arg)
        return FALSE if type(g) is Bottom else Next(g)
    if t is Eventually:
        g = simplify(f.arg)
        if type(g) is Bottom:
            return FALSE
        return g if type(g) is Eventually else Eventually(g)
    if t is Until:
        left, right = simplify(f.left), simplify(f.right)
        if type(right) is Bottom:
            return FALSE
        if type(left) is Bottom and not _nullable(right):
            return right
        return Until(left, right)
    return f


def _nullable(f: Formula) -> bool:
    """Whether ``f`` holds on the empty suffix (only constant-true combinations do)."""
    t = type(f)
    if t is Top:
        return True
    if t is And:
        return _nullable(f.left) and _nullable(f.right)
    if t is Or:
        return _nullable(f.left) or _nullable(f.right)
    return False


def _canon_units(f: Formula) -> Formula:
    t = type(f)
    if t is And or t is Or:
        return t(_canon_units(f.left), _canon_units(f.right))
    return _unit(f)


@lru_cache(maxsize=1 << 16)
def simplify(f: Formula) -> Formula:
    """Canonical form: temporal units canonicalized, boolean structure as a sorted DNF.

    The DNF is minimized by absorption (``g | (g & h)`` is ``g``), drops
    ``a & !a`` cubes and applies the unit/annihilator laws for true and false.
    Inside temporal operators: ``F F g`` is ``F g``, false
    propagates through ``X``, ``F`` and the right side of ``U``, and
    ``false U g`` is ``g``.  Idempotent.
    """
    return _from_dnf(_dnf(_canon_units(f)))


def _progress(f: Formula, w: frozenset) -> Formula:
    t = type(f)
    if t is Atom:
        return TRUE if f.name in w else FALSE
    if t is NegAtom:
        return FALSE if f.name in w else TRUE
    if t is And:
        return And(_progress(f.left, w), _progress(f.right, w))
    if t is Or:
        return Or(_progress(f.left, w), _progress(f.right, w))
    if t is Next:
        return f.arg
    if t is Until:
        return Or(_progress(f.right, w), And(_progress(f.left, w), f))
    if t is Eventually:
        return Or(_progress(f.arg, w), f)
    return f


def progress(f: Formula, w: Iterable[str]) -> Formula:
    """Obligation left after reading one letter (the set of true propositions)."""
    return simplify(_progress(f, frozenset(w)))


# --------------------------------------------------------------------------
# Semantic oracle

def _sat(f: Formula, word: Sequence[frozenset], i: int) -> bool:
    t = type(f)
    n = len(word)
    if t is Top:
        return True
    if t is Bottom:
        return False
    if t is Atom:
        return i < n and f.name in word[i]
    if t is NegAtom:
        return i < n and f.name not in word[i]
    if t is And:
        return _sat(f.left, word, i) and _sat(f.right, word, i)
    if t is Or:
        return _sat(f.left, word, i) or _sat(f.right, word, i)
    if t is Next:
        # the current position must exist; the argument sees the rest, possibly empty
        return i < n and _sat(f.arg, word, i + 1)
    if t is Eventually:
        return any(_sat(f.arg, word, j) for j in range(i, n))
    if t is Until:
        for j in range(i, n):
            if _sat(f.right, word, j):
                return True
            if not _sat(f.left, word, j):
                return False
        return False
    raise TypeError(f"not a formula: {f!r}")


def eval_scltl(f: Formula, word: Sequence[Iterable[str]]) -> bool:
    """Good-prefix check by direct finite-trace semantics.

    True iff some prefix of ``word`` (letters given as collections of true
    proposition names) strongly satisfies ``f`` at position 0.  Independent
    of progression; used to validate compiled automata.
    """
    letters = [frozenset(w) for w in word]
    return any(_sat(f, letters[:k], 0) for k in range(len(letters) + 1))


# --------------------------------------------------------------------------
# Automaton

@dataclass(frozen=True)
class TransitionEncoding:
    stay: tuple[int, ...]
    go: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class Dfa:
    """Deterministic automaton over ``2^sigma``; ``delta[z][mask]`` is the successor."""

    sigma: tuple[str, ...]
    delta: tuple[tuple[int, ...], ...]
    initial: int
    accepting: frozenset[int]
    formulas: tuple[Formula, ...] | None = None
    sink: int | None = None
    hops: tuple[float, ...] = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "hops", _hops_to_accept(self.delta, self.accepting))

    @property
    def n(self) -> int:
        return len(self.sigma)

    @property
    def states(self) -> range:
        return range(len(self.delta))

    def step(self, z: int, mask: int) -> int:
        return self.delta[z][mask]

    def run(self, word: Iterable[int]) -> int:
        z = self.initial
        for mask in word:
            z = self.delta[z][mask]
        return z

    def is_live(self, z: int) -> bool:
        return self.hops[z] != math.inf

    def guard(self, z: int, z2: int) -> frozenset[int]:
        return frozenset(m for m, t in enumerate(self.delta[z]) if t == z2)

    def successors(self, z: int) -> list[int]:
        return sorted(set(self.delta[z]))

    # -- interchange formats

    def serialize(self) -> str:
        lines = [f"v1 dfa n={self.n} states={len(self.delta)} init={self.initial}",
                 "sigma " + ",".join(self.sigma)]
        lines += [f"accept {z}" for z in sorted(self.accepting)]
        for z, row in enumerate(self.delta):
            lines += [f"edge {z} {m} {t}" for m, t in enumerate(row)]
        return "\n".join(lines) + "\n"

    @classmethod
    def deserialize(cls, text: str) -> "Dfa":
        lines = [ln.split() for ln in text.splitlines() if ln.strip()]
        head = dict(tok.split("=", 1) for tok in lines[0][2:])
        if lines[0][:2] != ["v1", "dfa"]:
            raise ValueError("not a v1 dfa file")
        n, k, init = int(head["n"]), int(head["states"]), int(head["init"])
        sigma: tuple[str, ...] = ()
        accepting = set()
        table = [[-1] * (1 << n) for _ in range(k)]
        for parts in lines[1:]:
            if parts[0] == "sigma":
                sigma = tuple(parts[1].split(",")) if len(parts) > 1 else ()
            elif parts[0] == "accept":
                accepting.add(int(parts[1]))
            elif parts[0] == "edge":
                table[int(parts[1])][int(parts[2])] = int(parts[3])
            else:
                raise ValueError(f"unknown dfa line: {' '.join(parts)}")
        if any(t < 0 for row in table for t in row):
            raise ValueError("transition table is not total")
        return cls(sigma=sigma or tuple(f"p{i}" for i in range(n)),
                   delta=tuple(tuple(r) for r in table), initial=init,
                   accepting=frozenset(accepting))

    def to_dot(self) -> str:
        out = ["digraph dfa {", "  rankdir=LR;", '  __start [shape=point];']
        for z in self.states:
            shape = "doublecircle" if z in self.accepting else "circle"
            tip = f' tooltip="{self.formulas[z]}"' if self.formulas else ""
            out.append(f'  {z} [shape={shape}{tip}];')
        out.append(f"  __start -> {self.initial};")
        for z in self.states:
            for t in self.successors(z):
                sets = ["{" + ",".join(sorted(letter_names(m, self.sigma))) + "}"
                        for m in sorted(self.guard(z, t))]
                out.append(f'  {z} -> {t} [label="{" ".join(sets)}"];')
        out.append("}")
        return "\n".join(out) + "\n"


def _hops_to_accept(delta, accepting) -> tuple[float, ...]:
    preds: list[set[int]] = [set() for _ in delta]
    for z, row in enumerate(delta):
        for t in row:
            preds[t].add(z)
    hops = [math.inf] * len(delta)
    queue = deque()
    for z in sorted(accepting):
        hops[z] = 0
        queue.append(z)
    while queue:
        t = queue.popleft()
        for z in sorted(preds[t]):
            if hops[z] == math.inf:
                hops[z] = hops[t] + 1
                queue.append(z)
    return tuple(hops)


def compile_dfa(f: Formula, sigma: Iterable[str], max_states: int = 4096) -> Dfa:
    """Breadth-first progression over all ``2^n`` letters from ``simplify(f)``."""
    sigma = canonical_sigma(sigma)
    unknown = atoms_of(f) - set(sigma)
    if unknown:
        raise UnknownProposition(", ".join(sorted(unknown)))
    letters = [letter_names(m, sigma) for m in range(1 << len(sigma))]
    start = simplify(f)
    ids = {start: 0}
    formulas = [start]
    delta: list[list[int]] = []
    z = 0
    while z < len(formulas):
        row = []
        for w in letters:
            g = simplify(_progress(formulas[z], w))
            if g not in ids:
                if len(formulas) >= max_states:
                    raise StateExplosion(f"more than {max_states} automaton states")
                ids[g] = len(formulas)
                formulas.append(g)
            row.append(ids[g])
        delta.append(row)
        z += 1
    return Dfa(sigma=sigma, delta=tuple(tuple(r) for r in delta), initial=0,
               accepting=frozenset(i for i, g in enumerate(formulas) if type(g) is Top),
               formulas=tuple(formulas), sink=ids.get(FALSE))


def accepts(dfa: Dfa, word: Iterable[int]) -> bool:
    """Run the automaton over letter bitmasks; true iff it ends in an accepting state."""
    return dfa.run(word) in dfa.accepting


def guard(dfa: Dfa, z: int, z2: int) -> frozenset[int]:
    return dfa.guard(z, z2)


def transition_encoding(dfa: Dfa, z1: int, z2: int) -> TransitionEncoding:
    """Per-proposition -1/0/+1 vectors for staying in ``z1`` and for moving to ``z2``.

    +1 means the proposition holds in every letter of the guard, -1 that it
    holds in none, 0 that the guard does not constrain it.
    """
    go = dfa.guard(z1, z2)
    if not go:
        raise NoSuchTransition(f"no transition {z1} -> {z2}")
    stay = dfa.guard(z1, z1)
    if not stay:
        raise NoSelfLoop(f"state {z1} has no self-loop")
    return TransitionEncoding(_agreement(stay, dfa.n), _agreement(go, dfa.n))


def _agreement(letters: frozenset[int], n: int) -> tuple[int, ...]:
    out = []
    for i in range(n):
        bits = {m >> i & 1 for m in letters}
        out.append(0 if len(bits) == 2 else (1 if 1 in bits else -1))
    return tuple(out)


def dist_to_accept(dfa: Dfa, z: int) -> float:
    """Fewest automaton edges from ``z`` to acceptance; ``inf`` for dead states."""
    return dfa.hops[z]

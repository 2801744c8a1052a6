"""A closed, reviewable state predicate language.

Semantic objects describe their possible states with a small textual DSL
instead of runnable page script, so predicates can be persisted, diffed,
validated before use, and evaluated safely against any snapshot:

    case "no records": rowCount("tbody tr") == 0
    case "one record": rowCount("tbody tr") == 1
    case "multiple records": rowCount("tbody tr") >= 2

Primitives are rowCount(selector), exists(selector),
textContains(selector, text) and attrEquals(selector, name, value),
combined with and/or/not, parentheses, and integer comparisons. Selectors
are evaluated relative to the object's anchor element. Cases are tried in
order and the first one whose expression holds names the state; when no
case matches, or the anchor itself cannot be found, the state is
"unknown".
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Union

from . import dom
from .errors import InvalidPredicate

UNKNOWN_STATE = "unknown"

_PRIMITIVES = {"rowCount", "exists", "textContains", "attrEquals"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<string>"(?:\\.|[^"\\])*")
  | (?P<int>\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>==|!=|<=|>=|<|>|\(|\)|,|:)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    value: str
    position: int


def _tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    position = 0
    while position < len(source):
        match = _TOKEN_RE.match(source, position)
        if not match:
            raise InvalidPredicate(f"unexpected character {source[position]!r} at offset {position}")
        position = match.end()
        if match.lastgroup == "ws":
            continue
        tokens.append(Token(match.lastgroup or "", match.group(), match.start()))
    return tokens


# --- AST ---

@dataclass(frozen=True)
class RowCount:
    selector: str


@dataclass(frozen=True)
class Exists:
    selector: str


@dataclass(frozen=True)
class TextContains:
    selector: str
    text: str


@dataclass(frozen=True)
class AttrEquals:
    selector: str
    name: str
    value: str


@dataclass(frozen=True)
class Compare:
    left: Union[RowCount, int]
    op: str
    right: Union[RowCount, int]


@dataclass(frozen=True)
class Not:
    operand: "Expr"


@dataclass(frozen=True)
class And:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Or:
    left: "Expr"
    right: "Expr"


Expr = Union[Exists, TextContains, AttrEquals, Compare, Not, And, Or]


@dataclass(frozen=True)
class StatePredicate:
    """Parsed predicate plus its source text (the persisted form)."""

    cases: tuple[tuple[str, Expr], ...]
    source: str

    def state_names(self) -> list[str]:
        return [name for name, _expr in self.cases]


class _Parser:
    def __init__(self, tokens: list[Token], source: str):
        self.tokens = tokens
        self.index = 0
        self.source = source

    def peek(self) -> Optional[Token]:
        return self.tokens[self.index] if self.index < len(self.tokens) else None

    def advance(self) -> Token:
        token = self.peek()
        if token is None:
            raise InvalidPredicate("unexpected end of predicate")
        self.index += 1
        return token

    def expect(self, kind: str, value: Optional[str] = None) -> Token:
        token = self.advance()
        if token.kind != kind or (value is not None and token.value != value):
            raise InvalidPredicate(
                f"expected {value or kind} at offset {token.position}, found {token.value!r}"
            )
        return token

    def parse_cases(self) -> tuple[tuple[str, Expr], ...]:
        cases: list[tuple[str, Expr]] = []
        while self.peek() is not None:
            keyword = self.advance()
            if keyword.kind != "name" or keyword.value != "case":
                raise InvalidPredicate(
                    f"expected 'case' at offset {keyword.position}, found {keyword.value!r}"
                )
            state = self._string(self.expect("string"))
            if not state:
                raise InvalidPredicate("case state name must be non-empty")
            self.expect("op", ":")
            expr = self.parse_or()
            cases.append((state, expr))
        if not cases:
            raise InvalidPredicate("predicate has no cases")
        return tuple(cases)

    def parse_or(self) -> Expr:
        expr = self.parse_and()
        while self._at_keyword("or"):
            self.advance()
            expr = Or(expr, self.parse_and())
        return expr

    def parse_and(self) -> Expr:
        expr = self.parse_not()
        while self._at_keyword("and"):
            self.advance()
            expr = And(expr, self.parse_not())
        return expr

    def parse_not(self) -> Expr:
        if self._at_keyword("not"):
            self.advance()
            return Not(self.parse_not())
        return self.parse_atom()

    def parse_atom(self) -> Expr:
        token = self.peek()
        if token is None:
            raise InvalidPredicate("unexpected end of predicate")
        if token.kind == "op" and token.value == "(":
            self.advance()
            expr = self.parse_or()
            self.expect("op", ")")
            return expr
        operand = self._operand()
        if isinstance(operand, (Exists, TextContains, AttrEquals)):
            return operand
        # rowCount(...) or a bare integer must take part in a comparison
        op_token = self.peek()
        if op_token is None or op_token.kind != "op" or op_token.value not in {
            "==", "!=", "<", "<=", ">", ">=",
        }:
            raise InvalidPredicate("counts must be compared with ==, !=, <, <=, > or >=")
        self.advance()
        right = self._operand()
        if not isinstance(right, (RowCount, int)):
            raise InvalidPredicate("comparisons only combine counts and integers")
        return Compare(operand, op_token.value, right)

    def _operand(self) -> Union[RowCount, Exists, TextContains, AttrEquals, int]:
        token = self.advance()
        if token.kind == "int":
            return int(token.value)
        if token.kind != "name":
            raise InvalidPredicate(f"unexpected {token.value!r} at offset {token.position}")
        name = token.value
        if name not in _PRIMITIVES:
            raise InvalidPredicate(f"unknown primitive {name!r}")
        self.expect("op", "(")
        args: list[str] = [self._string(self.expect("string"))]
        while self.peek() is not None and self.peek().kind == "op" and self.peek().value == ",":
            self.advance()
            args.append(self._string(self.expect("string")))
        self.expect("op", ")")
        if name == "rowCount":
            self._arity(name, args, 1)
            return RowCount(args[0])
        if name == "exists":
            self._arity(name, args, 1)
            return Exists(args[0])
        if name == "textContains":
            self._arity(name, args, 2)
            return TextContains(args[0], args[1])
        self._arity(name, args, 3)
        return AttrEquals(args[0], args[1], args[2])

    @staticmethod
    def _arity(name: str, args: list[str], expected: int) -> None:
        if len(args) != expected:
            raise InvalidPredicate(f"{name} takes {expected} argument(s), got {len(args)}")

    @staticmethod
    def _string(token: Token) -> str:
        body = token.value[1:-1]
        return body.replace('\\"', '"').replace("\\\\", "\\")

    def _at_keyword(self, word: str) -> bool:
        token = self.peek()
        return token is not None and token.kind == "name" and token.value == word


def parse_predicate(source: str) -> StatePredicate:
    """Parse DSL text, raising InvalidPredicate on any syntax problem,
    unknown primitive, or empty case list."""
    parser = _Parser(_tokenize(source), source)
    cases = parser.parse_cases()
    # selectors must at least be parseable by the query engine
    for _state, expr in cases:
        for selector in _selectors_of(expr):
            try:
                [dom._parse_part(part) for part in selector.split()]
            except ValueError as exc:
                raise InvalidPredicate(str(exc)) from exc
    return StatePredicate(cases, source)


def _selectors_of(expr: Expr) -> list[str]:
    if isinstance(expr, (Exists, RowCount)):
        return [expr.selector]
    if isinstance(expr, (TextContains, AttrEquals)):
        return [expr.selector]
    if isinstance(expr, Not):
        return _selectors_of(expr.operand)
    if isinstance(expr, (And, Or)):
        return _selectors_of(expr.left) + _selectors_of(expr.right)
    return []


def validate_states(pred: StatePredicate, allowed: list[str]) -> None:
    """Require every case to name one of the allowed states."""
    extra = [name for name in pred.state_names() if name not in allowed]
    if extra:
        raise InvalidPredicate(f"predicate names unknown state(s): {', '.join(sorted(set(extra)))}")


# --- evaluation ---

def _count(snapshot: dom.DomSnapshot, anchor: dom.Node, selector: str) -> int:
    return len(dom.query(snapshot, selector, root=anchor))


def _eval_expr(expr: Expr, snapshot: dom.DomSnapshot, anchor: dom.Node) -> bool:
    if isinstance(expr, Exists):
        return _count(snapshot, anchor, expr.selector) > 0
    if isinstance(expr, TextContains):
        needle = dom.normalize_text(expr.text)
        return any(
            needle in dom.normalize_text(node.text_content())
            for node in dom.query(snapshot, expr.selector, root=anchor)
        )
    if isinstance(expr, AttrEquals):
        return any(
            node.attrs.get(expr.name) == expr.value
            for node in dom.query(snapshot, expr.selector, root=anchor)
        )
    if isinstance(expr, Compare):
        left = expr.left if isinstance(expr.left, int) else _count(snapshot, anchor, expr.left.selector)
        right = expr.right if isinstance(expr.right, int) else _count(snapshot, anchor, expr.right.selector)
        return {
            "==": left == right,
            "!=": left != right,
            "<": left < right,
            "<=": left <= right,
            ">": left > right,
            ">=": left >= right,
        }[expr.op]
    if isinstance(expr, Not):
        return not _eval_expr(expr.operand, snapshot, anchor)
    if isinstance(expr, And):
        return _eval_expr(expr.left, snapshot, anchor) and _eval_expr(expr.right, snapshot, anchor)
    if isinstance(expr, Or):
        return _eval_expr(expr.left, snapshot, anchor) or _eval_expr(expr.right, snapshot, anchor)
    raise InvalidPredicate(f"unhandled expression {expr!r}")


def evaluate(pred: StatePredicate, snapshot: dom.DomSnapshot, anchor: dom.Node) -> str:
    """Evaluate against an anchored snapshot; first matching case wins."""
    for state, expr in pred.cases:
        if _eval_expr(expr, snapshot, anchor):
            return state
    return UNKNOWN_STATE

"""Recursive-descent parser for the PRISM-flavoured rPCTL subset.

Grammar (``!`` binds tighter than ``&``, then ``|``, then ``=>``)::

    property := "filter" "(" "state" "," expr "," expr ")" | expr
    expr     := or ("=>" expr)?
    or       := and ("|" and)*
    and      := unary ("&" unary)*
    unary    := "!" unary | primary
    primary  := "true" | "false" | STRING | "(" expr ")" | pquery | rquery
    pquery   := "P" bound "[" path "]"
    rquery   := "R" "{" STRING "}" bound "[" ("C" "<=" INT | "F" expr) "]"
    path     := "X" expr | "F" steps? expr | expr "U" steps? expr
    bound    := "=?" | ("<" | "<=" | ">" | ">=") NUMBER
    steps    := "<=" INT

Disjunction, implication and ``false`` are desugared into Not/And/True.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import PropertySyntaxError
from .ast import (INF, And, Atom, Bound, Cumulative, Filter, Next, Not, ProbQuery,
                  Reachability, RewardQuery, TrueF, Until)

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<string>"[^"]*")
  | (?P<number>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>=\?|<=|>=|=>|[<>!&|()\[\]{},])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    pos: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise PropertySyntaxError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(Token("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str) -> None:
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0

    # -- helpers --
    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def error(self, message: str, tok: Token | None = None):
        tok = tok or self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        return PropertySyntaxError(f"{message}, found {found}", tok.pos, self.text)

    def at(self, text: str) -> bool:
        return self.tok.kind in ("op", "ident") and self.tok.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.error(f"expected {text!r}")
        tok = self.tok
        self.i += 1
        return tok

    def integer(self) -> int:
        tok = self.tok
        if tok.kind != "number" or not tok.text.isdigit():
            raise self.error("expected a non-negative integer step bound")
        self.i += 1
        return int(tok.text)

    def string(self) -> str:
        tok = self.tok
        if tok.kind != "string":
            raise self.error("expected a quoted name")
        self.i += 1
        return tok.text[1:-1]

    # -- grammar --
    def property(self):
        if self.accept("filter"):
            self.expect("(")
            op_tok = self.tok
            if not self.accept("state"):
                raise self.error("only the 'state' filter operator is supported", op_tok)
            self.expect(",")
            query = self.expr()
            self.expect(",")
            condition = self.expr()
            self.expect(")")
            node = Filter(query, condition)
        else:
            node = self.expr()
        if self.tok.kind != "eof":
            raise self.error("unexpected trailing input")
        return node

    def expr(self):
        left = self.disjunction()
        if self.accept("=>"):
            right = self.expr()
            return Not(And(left, Not(right)))
        return left

    def disjunction(self):
        node = self.conjunction()
        while self.accept("|"):
            right = self.conjunction()
            node = Not(And(Not(node), Not(right)))
        return node

    def conjunction(self):
        node = self.unary()
        while self.accept("&"):
            node = And(node, self.unary())
        return node

    def unary(self):
        if self.accept("!"):
            return Not(self.unary())
        return self.primary()

    def primary(self):
        tok = self.tok
        if tok.kind == "string":
            return Atom(self.string())
        if self.accept("true"):
            return TrueF()
        if self.accept("false"):
            return Not(TrueF())
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        if self.accept("P"):
            return self.prob_query()
        if self.accept("R"):
            return self.reward_query()
        raise self.error("expected a state formula")

    def bound(self, probability: bool) -> Bound:
        if self.accept("=?"):
            return Bound()
        tok = self.tok
        if tok.kind == "op" and tok.text in ("<", "<=", ">", ">="):
            self.i += 1
            num = self.tok
            if num.kind != "number":
                raise self.error("expected a numeric bound")
            self.i += 1
            value = float(num.text)
            if probability and not 0.0 <= value <= 1.0:
                raise PropertySyntaxError("probability bound outside [0, 1]", num.pos, self.text)
            return Bound(tok.text, value)
        raise self.error("expected '=?' or a comparison bound")

    def steps(self) -> float:
        if self.accept("<="):
            return self.integer()
        return INF

    def prob_query(self) -> ProbQuery:
        bound = self.bound(probability=True)
        self.expect("[")
        if self.accept("X"):
            path = Next(self.expr())
        elif self.accept("F"):
            n = self.steps()
            path = Until(TrueF(), self.expr(), n)
        else:
            left = self.expr()
            self.expect("U")
            n = self.steps()
            path = Until(left, self.expr(), n)
        self.expect("]")
        return ProbQuery(bound, path)

    def reward_query(self) -> RewardQuery:
        self.expect("{")
        name = self.string()
        self.expect("}")
        bound = self.bound(probability=False)
        self.expect("[")
        if self.accept("C"):
            self.expect("<=")
            kind = Cumulative(self.integer())
        elif self.accept("F"):
            kind = Reachability(self.expr())
        else:
            raise self.error("expected 'C<=N' or 'F' in reward query")
        self.expect("]")
        return RewardQuery(name, kind, bound)


def parse_property(text: str):
    """Parse one property into an AST."""
    return _Parser(text).property()


def parse_property_file(text: str) -> list[tuple[int, str, object]]:
    """Parse one property per line; ``#`` starts a comment.

    Returns ``(line_number, source, ast)`` triples. Syntax errors carry
    the 1-based line number.
    """
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = strip_comment(raw).strip()
        if not line:
            continue
        try:
            out.append((lineno, line, parse_property(line)))
        except PropertySyntaxError as exc:
            raise PropertySyntaxError(str(exc).rsplit(" at position", 1)[0], exc.position,
                                      line, lineno) from None
    return out


def strip_comment(line: str) -> str:
    in_string = False
    for i, ch in enumerate(line):
        if ch == '"':
            in_string = not in_string
        elif ch == "#" and not in_string:
            return line[:i]
    return line

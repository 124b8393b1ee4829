"""Textual query-script language for ad-hoc graph queries.

Grammar (UTF-8 text, whitespace insignificant):

    expression := source | expression '.' call
    source     := 'universe()' | 'nodes(' IDENT ')' | 'methods(' STRING ',' STRING ')'
    call       := 'nodesTaggedAny(' tags ')' | 'edgesTaggedAny(' tags ')'
                | 'retainEdges()'
                | 'forward(' expression ')' | 'reverse(' expression ')'
                | 'forwardStep(' expression ')' | 'reverseStep(' expression ')'
                | 'between(' expression ',' expression ')'
                | 'union(' expression ')' | 'intersection(' expression ')'
                | 'difference(' expression ')'
    tags       := [ IDENT { ',' IDENT } ]

Tags are bare identifiers; strings are double-quoted. parse_query() is total
on the grammar and rejects everything else with a positioned syntax error.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import QuerySyntaxError
from .graph import ProgramGraph
from .query import Subgraph, method_select, universe

_SOURCES = ("universe", "nodes", "methods")
_CHAIN_OPS = {
    "nodesTaggedAny": "tags",
    "edgesTaggedAny": "tags",
    "retainEdges": "none",
    "forward": "expr",
    "reverse": "expr",
    "forwardStep": "expr",
    "reverseStep": "expr",
    "union": "expr",
    "intersection": "expr",
    "difference": "expr",
    "between": "expr2",
}


@dataclass(frozen=True)
class Expr:
    """One node of the parsed expression tree."""

    op: str                 # source name or chain-call name
    base: "Expr | None"     # receiver for chain calls, None for sources
    args: tuple             # strings/tag tuples/Expr operands


@dataclass(frozen=True)
class QueryScript:
    text: str
    tree: Expr


class _Token:
    __slots__ = ("kind", "value", "offset")

    def __init__(self, kind: str, value: str, offset: int):
        self.kind = kind
        self.value = value
        self.offset = offset


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "().,":
            tokens.append(_Token(ch, ch, i))
            i += 1
            continue
        if ch == '"':
            j = i + 1
            while j < n and text[j] != '"':
                if text[j] == "\n":
                    raise _error(text, "unterminated string literal", i)
                j += 1
            if j >= n:
                raise _error(text, "unterminated string literal", i)
            tokens.append(_Token("string", text[i + 1:j], i))
            i = j + 1
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(_Token("ident", text[i:j], i))
            i = j
            continue
        raise _error(text, f"unexpected character {ch!r}", i)
    tokens.append(_Token("eof", "", n))
    return tokens


def _error(text: str, message: str, offset: int) -> QuerySyntaxError:
    line = text.count("\n", 0, offset) + 1
    column = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return QuerySyntaxError(message, offset, line, column)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def parse(self) -> Expr:
        expr = self._expression()
        self._expect("eof", "trailing input after expression")
        return expr

    # expression := source { '.' call }
    def _expression(self) -> Expr:
        expr = self._source()
        while self._peek().kind == ".":
            self._next()
            expr = self._call(expr)
        return expr

    def _source(self) -> Expr:
        tok = self._peek()
        if tok.kind != "ident":
            raise self._fail(f"expected {', '.join(_SOURCES)}")
        self._next()
        self._expect("(", "expected '('")
        if tok.value == "universe":
            self._expect(")", "expected ')'")
            return Expr("universe", None, ())
        if tok.value == "nodes":
            tag = self._expect("ident", "expected a tag identifier").value
            self._expect(")", "expected ')'")
            return Expr("nodes", None, (tag,))
        if tok.value == "methods":
            type_name = self._expect("string", "expected a quoted type name").value
            self._expect(",", "expected ','")
            method_name = self._expect("string", "expected a quoted method name").value
            self._expect(")", "expected ')'")
            return Expr("methods", None, (type_name, method_name))
        # A chain operation such as between(...) cannot start a query.
        raise self._fail(
            f"{tok.value!r} cannot start a query; expected one of "
            f"{', '.join(s + '(...)' for s in _SOURCES)}"
        )

    def _call(self, base: Expr) -> Expr:
        tok = self._expect("ident", "expected an operation name after '.'")
        arity = _CHAIN_OPS.get(tok.value)
        if arity is None:
            raise _error(self.text, f"unknown operation {tok.value!r}", tok.offset)
        self._expect("(", "expected '('")
        if arity == "none":
            self._expect(")", "expected ')'")
            return Expr(tok.value, base, ())
        if arity == "tags":
            tags: list[str] = []
            if self._peek().kind == "ident":
                tags.append(self._next().value)
                while self._peek().kind == ",":
                    self._next()
                    tags.append(self._expect("ident", "expected a tag identifier").value)
            self._expect(")", "expected ')'")
            return Expr(tok.value, base, (tuple(tags),))
        if arity == "expr":
            operand = self._expression()
            self._expect(")", "expected ')'")
            return Expr(tok.value, base, (operand,))
        first = self._expression()
        self._expect(",", "expected ','")
        second = self._expression()
        self._expect(")", "expected ')'")
        return Expr(tok.value, base, (first, second))

    def _peek(self) -> _Token:
        return self.tokens[self.pos]

    def _next(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def _expect(self, kind: str, message: str) -> _Token:
        tok = self._peek()
        if tok.kind != kind:
            raise self._fail(message)
        return self._next()

    def _fail(self, message: str) -> QuerySyntaxError:
        tok = self._peek()
        shown = tok.value or "end of input"
        return _error(self.text, f"{message}, found {shown!r}", tok.offset)


def parse_query(text: str) -> QueryScript:
    return QueryScript(text=text, tree=_Parser(text).parse())


def eval_query(script: QueryScript | str, graph: ProgramGraph) -> Subgraph:
    if isinstance(script, str):
        script = parse_query(script)
    return _eval(script.tree, graph)


def _eval(expr: Expr, graph: ProgramGraph) -> Subgraph:
    if expr.base is None:
        if expr.op == "universe":
            return universe(graph)
        if expr.op == "nodes":
            return universe(graph).nodes_tagged_any(expr.args[0])
        return method_select(graph, expr.args[0], expr.args[1])

    receiver = _eval(expr.base, graph)
    op = expr.op
    if op == "nodesTaggedAny":
        return receiver.nodes_tagged_any(*expr.args[0])
    if op == "edgesTaggedAny":
        return receiver.edges_tagged_any(*expr.args[0])
    if op == "retainEdges":
        return receiver.retain_edges()
    if op == "between":
        return receiver.between(_eval(expr.args[0], graph), _eval(expr.args[1], graph))
    operand = _eval(expr.args[0], graph)
    if op == "forward":
        return receiver.forward(operand)
    if op == "reverse":
        return receiver.reverse(operand)
    if op == "forwardStep":
        return receiver.forward_step(operand)
    if op == "reverseStep":
        return receiver.reverse_step(operand)
    if op == "union":
        return receiver.union(operand)
    if op == "intersection":
        return receiver.intersection(operand)
    return receiver.difference(operand)

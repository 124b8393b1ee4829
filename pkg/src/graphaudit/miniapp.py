"""Parser for the MiniApp object language (.mapp files).

A deliberately small, explicitly typed class language used as analyzable
input: classes with single inheritance, fields, methods, locals, virtual
calls, instantiation, if/while and return. The EBNF grammar ships in
docs/miniapp-grammar.md; this module produces a plain AST that the graph
builder lowers into program-graph nodes and edges.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import SourceSyntaxError

KEYWORDS = frozenset({
    "class", "extends", "void", "if", "else", "while", "return",
    "new", "this", "true", "false", "null",
})


# -- AST ---------------------------------------------------------------------

Span = tuple[int, int]  # (start offset, end offset) within the unit text


@dataclass
class Literal:
    kind: str      # "int" | "string" | "boolean" | "null"
    value: str
    span: Span


@dataclass
class VarRef:
    name: str
    span: Span


@dataclass
class FieldRead:
    owner: str     # "this" or a variable name
    name: str
    span: Span


@dataclass
class Call:
    receiver: str | None   # None => implicit this
    name: str
    args: list
    span: Span


@dataclass
class New:
    type_name: str
    args: list
    span: Span


Expr = Literal | VarRef | FieldRead | Call | New


@dataclass
class VarDecl:
    type_name: str
    name: str
    init: Expr | None
    span: Span


@dataclass
class Assign:
    # target_owner None => local variable target; "this"/name => field target
    target_owner: str | None
    target_name: str
    value: Expr
    span: Span


@dataclass
class ExprStmt:
    expr: Expr
    span: Span


@dataclass
class If:
    cond: Expr
    then_body: list
    else_body: list
    span: Span


@dataclass
class While:
    cond: Expr
    body: list
    span: Span


@dataclass
class Return:
    value: Expr | None
    span: Span


Stmt = VarDecl | Assign | ExprStmt | If | While | Return


@dataclass
class FieldDecl:
    type_name: str
    name: str
    span: Span


@dataclass
class Param:
    type_name: str
    name: str


@dataclass
class MethodDecl:
    name: str
    return_type: str            # "void" or a type name
    params: list[Param]
    body: list[Stmt]
    span: Span
    is_stub: bool = False


@dataclass
class ClassDecl:
    name: str
    extends: str | None
    fields: list[FieldDecl] = field(default_factory=list)
    methods: list[MethodDecl] = field(default_factory=list)
    span: Span = (0, 0)
    is_stub: bool = False


@dataclass
class MiniAppUnit:
    path: str
    classes: list[ClassDecl]
    text: str


# -- lexer ---------------------------------------------------------------------

_PUNCT = "{}();=.,"


class _Tok:
    __slots__ = ("kind", "value", "offset")

    def __init__(self, kind: str, value: str, offset: int):
        self.kind = kind       # "ident", "kw", "int", "string", or a punct char
        self.value = value
        self.offset = offset


def _lex(text: str, path: str) -> list[_Tok]:
    toks: list[_Tok] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch == "/" and text[i:i + 2] == "//":
            j = text.find("\n", i)
            i = n if j < 0 else j + 1
            continue
        if ch in _PUNCT:
            toks.append(_Tok(ch, ch, i))
            i += 1
            continue
        if ch == '"':
            j = i + 1
            while j < n and text[j] not in '"\n':
                j += 1
            if j >= n or text[j] != '"':
                raise _err(text, path, "unterminated string literal", i)
            toks.append(_Tok("string", text[i + 1:j], i))
            i = j + 1
            continue
        if ch.isdigit() or (ch == "-" and i + 1 < n and text[i + 1].isdigit()):
            j = i + 1
            while j < n and text[j].isdigit():
                j += 1
            toks.append(_Tok("int", text[i:j], i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            toks.append(_Tok("kw" if word in KEYWORDS else "ident", word, i))
            i = j
            continue
        raise _err(text, path, f"unexpected character {ch!r}", i)
    toks.append(_Tok("eof", "", n))
    return toks


def _err(text: str, path: str, message: str, offset: int) -> SourceSyntaxError:
    line = text.count("\n", 0, offset) + 1
    column = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return SourceSyntaxError(message, path, line, column, offset)


# -- parser ---------------------------------------------------------------------

class _Parser:
    def __init__(self, text: str, path: str):
        self.text = text
        self.path = path
        self.toks = _lex(text, path)
        self.pos = 0

    def parse_unit(self) -> MiniAppUnit:
        classes = []
        while not self._at("eof"):
            classes.append(self._class())
        return MiniAppUnit(path=self.path, classes=classes, text=self.text)

    def _class(self) -> ClassDecl:
        start = self._expect_kw("class").offset
        name = self._expect("ident", "expected a class name").value
        extends = None
        if self._at_kw("extends"):
            self._next()
            extends = self._expect("ident", "expected a superclass name").value
        self._expect("{", "expected '{'")
        decl = ClassDecl(name=name, extends=extends)
        while not self._at("}"):
            self._member(decl)
        end = self._next().offset + 1
        decl.span = (start, end)
        return decl

    def _member(self, decl: ClassDecl) -> None:
        start = self._peek().offset
        type_name = self._type_name()
        name = self._expect("ident", "expected a member name").value
        if self._at(";"):
            if type_name == "void":
                raise self._fail("fields cannot have type void")
            end = self._next().offset + 1
            decl.fields.append(FieldDecl(type_name, name, (start, end)))
            return
        self._expect("(", "expected '(' or ';' after member name")
        params: list[Param] = []
        if not self._at(")"):
            while True:
                ptype = self._type_name()
                pname = self._expect("ident", "expected a parameter name").value
                params.append(Param(ptype, pname))
                if not self._at(","):
                    break
                self._next()
        self._expect(")", "expected ')'")
        body = self._block()
        end = self._prev_end()
        decl.methods.append(MethodDecl(name, type_name, params, body, (start, end)))

    def _type_name(self) -> str:
        if self._at_kw("void"):
            self._next()
            return "void"
        return self._expect("ident", "expected a type name").value

    def _block(self) -> list[Stmt]:
        self._expect("{", "expected '{'")
        stmts = []
        while not self._at("}"):
            stmts.append(self._stmt())
        self._next()
        return stmts

    def _stmt(self) -> Stmt:
        tok = self._peek()
        start = tok.offset
        if self._at_kw("if"):
            self._next()
            self._expect("(", "expected '('")
            cond = self._expr()
            self._expect(")", "expected ')'")
            then_body = self._block()
            else_body = []
            if self._at_kw("else"):
                self._next()
                else_body = self._block()
            return If(cond, then_body, else_body, (start, self._prev_end()))
        if self._at_kw("while"):
            self._next()
            self._expect("(", "expected '('")
            cond = self._expr()
            self._expect(")", "expected ')'")
            body = self._block()
            return While(cond, body, (start, self._prev_end()))
        if self._at_kw("return"):
            self._next()
            value = None if self._at(";") else self._expr()
            end = self._expect(";", "expected ';'").offset + 1
            return Return(value, (start, end))
        # Local declaration: IDENT IDENT ...
        if tok.kind == "ident" and self._peek(1).kind == "ident":
            type_name = self._next().value
            name = self._next().value
            init = None
            if self._at("="):
                self._next()
                init = self._expr()
            end = self._expect(";", "expected ';'").offset + 1
            return VarDecl(type_name, name, init, (start, end))
        # Assignment: x = ..., this.f = ..., x.f = ...
        if tok.kind == "ident" and self._peek(1).kind == "=":
            name = self._next().value
            self._next()
            value = self._expr()
            end = self._expect(";", "expected ';'").offset + 1
            return Assign(None, name, value, (start, end))
        if ((tok.kind == "ident" or self._at_kw("this"))
                and self._peek(1).kind == "."
                and self._peek(2).kind == "ident"
                and self._peek(3).kind == "="):
            owner = self._next().value
            self._next()
            fname = self._next().value
            self._next()
            value = self._expr()
            end = self._expect(";", "expected ';'").offset + 1
            return Assign(owner, fname, value, (start, end))
        expr = self._expr()
        end = self._expect(";", "expected ';'").offset + 1
        return ExprStmt(expr, (start, end))

    def _expr(self) -> Expr:
        tok = self._peek()
        start = tok.offset
        if self._at_kw("new"):
            self._next()
            type_name = self._expect("ident", "expected a type name after 'new'").value
            self._expect("(", "expected '('")
            args = self._args()
            end = self._expect(")", "expected ')'").offset + 1
            return New(type_name, args, (start, end))
        if tok.kind == "int":
            self._next()
            return Literal("int", tok.value, (start, start + len(tok.value)))
        if tok.kind == "string":
            self._next()
            return Literal("string", tok.value, (start, start + len(tok.value) + 2))
        if self._at_kw("true") or self._at_kw("false"):
            self._next()
            return Literal("boolean", tok.value, (start, start + len(tok.value)))
        if self._at_kw("null"):
            self._next()
            return Literal("null", tok.value, (start, start + len(tok.value)))
        if self._at_kw("this") or tok.kind == "ident":
            head = self._next().value
            if self._at("(") and head != "this":
                self._next()
                args = self._args()
                end = self._expect(")", "expected ')'").offset + 1
                return Call(None, head, args, (start, end))
            if self._at("."):
                self._next()
                name = self._expect("ident", "expected a member name").value
                if self._at("("):
                    self._next()
                    args = self._args()
                    end = self._expect(")", "expected ')'").offset + 1
                    return Call(head, name, args, (start, end))
                return FieldRead(head, name, (start, self._prev_end()))
            if head == "this":
                raise self._fail("'this' must be followed by '.member'")
            return VarRef(head, (start, start + len(head)))
        raise self._fail("expected an expression")

    def _args(self) -> list[Expr]:
        args = []
        if not self._at(")"):
            args.append(self._expr())
            while self._at(","):
                self._next()
                args.append(self._expr())
        return args

    # -- token helpers ------------------------------------------------------

    def _peek(self, ahead: int = 0) -> _Tok:
        idx = min(self.pos + ahead, len(self.toks) - 1)
        return self.toks[idx]

    def _next(self) -> _Tok:
        tok = self.toks[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def _at(self, kind: str) -> bool:
        return self._peek().kind == kind

    def _at_kw(self, word: str) -> bool:
        tok = self._peek()
        return tok.kind == "kw" and tok.value == word

    def _expect(self, kind: str, message: str) -> _Tok:
        if not self._at(kind):
            raise self._fail(message)
        return self._next()

    def _expect_kw(self, word: str) -> _Tok:
        if not self._at_kw(word):
            raise self._fail(f"expected '{word}'")
        return self._next()

    def _prev_end(self) -> int:
        prev = self.toks[self.pos - 1]
        extra = 2 if prev.kind == "string" else 0
        return prev.offset + len(prev.value) + extra

    def _fail(self, message: str) -> SourceSyntaxError:
        tok = self._peek()
        shown = tok.value or "end of input"
        return _err(self.text, self.path, f"{message}, found {shown!r}", tok.offset)


def parse_unit(text: str, path: str = "<string>") -> MiniAppUnit:
    """Parse one .mapp source text into an AST unit."""
    return _Parser(text, path).parse_unit()

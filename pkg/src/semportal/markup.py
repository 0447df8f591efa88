"""Parser for the semantic markup subset (see docs/grammar.ebnf).

Turns `.stx` sources into a document AST, parses formula term trees, and
resolves cross-document references into a LinkedDocument.  Parsing recovers
from errors by skipping to the next command, so a single pass reports every
recoverable problem; `parse_document` either returns a clean AST or raises
`ParseFailure` carrying the full error list, never both.

All functions here are pure; the registry handed to `resolve_references` is
treated as an immutable snapshot.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Iterable, Mapping

from . import docmodel
from .docmodel import (
    Apply,
    Block,
    Definiendum,
    Formula,
    ImportDecl,
    LinkedDocument,
    ModuleDecl,
    Num,
    Paragraph,
    Statement,
    SymbolDecl,
    SymbolRef,
    Term,
    TermRef,
    TextLeaf,
    TextRun,
    Var,
)

# ---------------------------------------------------------------------------
# Source documents and errors
# ---------------------------------------------------------------------------

_NAME_RE = re.compile(r"[A-Za-z][A-Za-z0-9_-]*\Z")
_DOC_RE = re.compile(r"[A-Za-z0-9][A-Za-z0-9._-]*(?:/[A-Za-z0-9][A-Za-z0-9._-]*)*\Z")
_MSC_RE = re.compile(r"[A-Za-z0-9-]+\Z")
_NUM_RE = re.compile(r"[0-9]+(?:\.[0-9]+)?")

ERROR_CODES = (
    "UnclosedEnvironment",
    "UnknownCommand",
    "BadArgumentCount",
    "DuplicateSymbol",
    "EmptyFormula",
    "MalformedReference",
)


@dataclass(frozen=True)
class SourceDocument:
    path: str
    text: str
    format: str = "semantic-markup"

    def __post_init__(self) -> None:
        if not self.path or self.path.startswith("/") or "\\" in self.path:
            raise ValueError(f"invalid document path: {self.path!r}")
        if any(seg in ("", "..") for seg in self.path.split("/")):
            raise ValueError(f"invalid document path: {self.path!r}")


@dataclass(frozen=True)
class ParseError:
    line: int  # 1-based
    column: int  # 1-based
    code: str  # one of ERROR_CODES
    message: str


class ParseFailure(Exception):
    """Raised when parsing or resolution produced one or more errors."""

    def __init__(self, errors: list[ParseError]):
        self.errors = list(errors)
        head = errors[0] if errors else None
        summary = f"{head.line}:{head.column} {head.code}: {head.message}" if head else "?"
        extra = f" (+{len(errors) - 1} more)" if len(errors) > 1 else ""
        super().__init__(summary + extra)


@dataclass(frozen=True)
class DocumentAST:
    path: str
    title: str
    msc: tuple[str, ...]
    body: tuple[Block, ...]

    @property
    def modules(self) -> tuple[ModuleDecl, ...]:
        return tuple(b for b in self.body if isinstance(b, ModuleDecl))


def _collapse_ws(text: str) -> str:
    return " ".join(text.split())


# ---------------------------------------------------------------------------
# Scanner
# ---------------------------------------------------------------------------

_ESCAPABLE = "\\{}$%&#"
_TEXT_STOP = "\\{}$%"


class _ScanError(Exception):
    def __init__(self, error: ParseError):
        self.error = error


class _Scanner:
    """Character scanner with 1-based line/column tracking over LF text."""

    def __init__(self, text: str):
        self.text = text.replace("\r\n", "\n")
        self.pos = 0
        self.line = 1
        self.col = 1

    def at_end(self) -> bool:
        return self.pos >= len(self.text)

    def peek(self, offset: int = 0) -> str:
        i = self.pos + offset
        return self.text[i] if i < len(self.text) else ""

    def loc(self) -> tuple[int, int]:
        return (self.line, self.col)

    def advance(self, count: int = 1) -> str:
        taken = self.text[self.pos : self.pos + count]
        for ch in taken:
            if ch == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
        self.pos += len(taken)
        return taken

    def skip_ws(self) -> None:
        while not self.at_end():
            ch = self.peek()
            if ch == "%":
                while not self.at_end() and self.peek() != "\n":
                    self.advance()
            elif ch.isspace():
                self.advance()
            else:
                return

    def error(self, code: str, message: str, loc: tuple[int, int] | None = None) -> ParseError:
        line, col = loc if loc is not None else self.loc()
        return ParseError(line=line, column=col, code=code, message=message)

    def fail(self, code: str, message: str, loc: tuple[int, int] | None = None) -> _ScanError:
        return _ScanError(self.error(code, message, loc))

    def read_command(self) -> tuple[str, tuple[int, int]]:
        """Consume a backslash command; the backslash is at the current pos."""
        loc = self.loc()
        assert self.peek() == "\\"
        self.advance()
        name = ""
        while self.peek().isalpha():
            name += self.advance()
        if not name:
            raise self.fail("UnknownCommand", "lone backslash", loc)
        return name, loc

    def read_group(self) -> tuple[str, tuple[int, int]]:
        """Read a balanced {...} group; returns the raw content (escapes kept)."""
        self.skip_ws()
        loc = self.loc()
        if self.peek() != "{":
            raise self.fail("BadArgumentCount", "expected '{' argument group", loc)
        self.advance()
        depth = 1
        out: list[str] = []
        while not self.at_end():
            ch = self.peek()
            if ch == "\\" and self.peek(1) and self.peek(1) in _ESCAPABLE:
                out.append(self.advance(2))
                continue
            if ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    self.advance()
                    return "".join(out), loc
            elif ch == "%":
                while not self.at_end() and self.peek() != "\n":
                    self.advance()
                continue
            out.append(self.advance())
        raise self.fail("UnclosedEnvironment", "unclosed '{' group", loc)

    def lookahead_option(self, key: str) -> bool:
        """True when the next non-space text is '[<key>=' (an option, not text)."""
        i = self.pos
        text = self.text
        while i < len(text) and text[i].isspace():
            i += 1
        if i >= len(text) or text[i] != "[":
            return False
        i += 1
        while i < len(text) and text[i].isspace():
            i += 1
        return text.startswith(key + "=", i)

    def read_option(self) -> tuple[str, tuple[int, int]]:
        """Read a [...] option group; returns the raw content."""
        self.skip_ws()
        loc = self.loc()
        assert self.peek() == "["
        self.advance()
        out: list[str] = []
        while not self.at_end() and self.peek() != "]":
            out.append(self.advance())
        if self.at_end():
            raise self.fail("UnclosedEnvironment", "unclosed '[' option", loc)
        self.advance()
        return "".join(out), loc


def _unescape(raw: str) -> str:
    out: list[str] = []
    i = 0
    while i < len(raw):
        if raw[i] == "\\" and i + 1 < len(raw) and raw[i + 1] in _ESCAPABLE:
            out.append(raw[i + 1])
            i += 2
        else:
            out.append(raw[i])
            i += 1
    return "".join(out)


def _validate_sym_ref(ref: str) -> bool:
    parts = ref.split("?")
    if len(parts) == 1:
        return bool(_NAME_RE.match(parts[0]))
    if len(parts) == 2:
        return bool(_NAME_RE.match(parts[0])) and bool(_NAME_RE.match(parts[1]))
    if len(parts) == 3:
        return (
            bool(_DOC_RE.match(parts[0]))
            and bool(_NAME_RE.match(parts[1]))
            and bool(_NAME_RE.match(parts[2]))
        )
    return False


# ---------------------------------------------------------------------------
# Formula parsing
# ---------------------------------------------------------------------------


def _parse_term(sc: _Scanner) -> Term:
    sc.skip_ws()
    loc = sc.loc()
    ch = sc.peek()
    if ch == "\\":
        name, cmd_loc = sc.read_command()
        if name == "apply":
            head_raw, head_loc = sc.read_group()
            head_ref = head_raw.strip()
            if not _validate_sym_ref(head_ref):
                raise sc.fail(
                    "MalformedReference", f"invalid symbol reference {head_ref!r}", head_loc
                )
            sc.skip_ws()
            if sc.peek() != "{":
                raise sc.fail(
                    "BadArgumentCount", "\\apply needs {head} and {arguments} groups", cmd_loc
                )
            args = _parse_apply_args(sc)
            return Apply(head=SymbolRef(ref=head_ref, pos=head_loc), args=args)
        if name == "text":
            raw, _ = sc.read_group()
            return TextLeaf(text=_collapse_ws(_unescape(raw)))
        raise sc.fail("MalformedReference", f"unresolvable escape '\\{name}' in formula", cmd_loc)
    if ch.isdigit():
        match = _NUM_RE.match(sc.text, sc.pos)
        assert match is not None
        sc.advance(match.end() - sc.pos)
        return Num(literal=match.group())
    if ch.isalpha():
        sc.advance()
        if sc.peek().isalpha():
            raise sc.fail(
                "MalformedReference",
                "multi-letter names are not terms; use \\apply or \\termref",
                loc,
            )
        return Var(name=ch)
    if ch == "":
        raise sc.fail("EmptyFormula", "formula ended where a term was expected", loc)
    raise sc.fail("MalformedReference", f"unexpected character {ch!r} in formula", loc)


def _parse_apply_args(sc: _Scanner) -> tuple[Term, ...]:
    assert sc.peek() == "{"
    open_loc = sc.loc()
    sc.advance()
    args: list[Term] = []
    sc.skip_ws()
    if sc.peek() == "}":
        sc.advance()
        return ()
    while True:
        args.append(_parse_term(sc))
        sc.skip_ws()
        ch = sc.peek()
        if ch == ",":
            sc.advance()
            continue
        if ch == "}":
            sc.advance()
            return tuple(args)
        if ch == "":
            raise sc.fail("UnclosedEnvironment", "unclosed argument group", open_loc)
        raise sc.fail("MalformedReference", f"expected ',' or '}}', found {ch!r}")


def parse_formula(text: str) -> Term:
    """Parse a formula body (the content between dollar signs).

    Raises ParseFailure with a single error: EmptyFormula for blank input,
    BadArgumentCount for \\apply group problems, MalformedReference for
    unresolvable escapes or stray characters.
    """
    if not text.strip():
        raise ParseFailure([ParseError(1, 1, "EmptyFormula", "empty formula")])
    sc = _Scanner(text)
    try:
        term = _parse_term(sc)
        sc.skip_ws()
        if not sc.at_end():
            raise sc.fail(
                "MalformedReference", f"unexpected trailing {sc.peek()!r} after formula term"
            )
    except _ScanError as exc:
        raise ParseFailure([exc.error]) from None
    return term


# ---------------------------------------------------------------------------
# Document parsing
# ---------------------------------------------------------------------------


class _DocParser:
    def __init__(self, source: SourceDocument):
        self.sc = _Scanner(source.text)
        self.path = source.path
        self.errors: list[ParseError] = []

    # -- error recovery ----------------------------------------------------

    def record(self, error: ParseError) -> None:
        self.errors.append(error)

    def skip_groups(self) -> None:
        """Consume any {...}/[...] groups after a failed command."""
        while True:
            self.sc.skip_ws()
            ch = self.sc.peek()
            try:
                if ch == "{":
                    self.sc.read_group()
                elif ch == "[":
                    self.sc.read_option()
                else:
                    return
            except _ScanError:
                return

    def skip_environment(self, env: str) -> None:
        """Best-effort skip to the matching \\end{env}."""
        depth = 1
        sc = self.sc
        while not sc.at_end():
            if sc.peek() == "\\":
                try:
                    name, _ = sc.read_command()
                except _ScanError:
                    continue
                if name in ("begin", "end"):
                    try:
                        inner, _ = sc.read_group()
                    except _ScanError:
                        return
                    if inner.strip() == env:
                        depth += 1 if name == "begin" else -1
                        if depth == 0:
                            return
            else:
                sc.advance()

    # -- structure ---------------------------------------------------------

    def parse(self) -> DocumentAST:
        sc = self.sc
        title = ""
        msc: list[str] = []
        body: list[Block] = []
        module_names: set[str] = set()
        last_pos = -1
        while True:
            sc.skip_ws()
            if sc.at_end():
                break
            if sc.peek() == "\\":
                save = sc.pos
                try:
                    name, loc = sc.read_command()
                except _ScanError as exc:
                    self.record(exc.error)
                    continue
                try:
                    if name == "title":
                        raw, _ = sc.read_group()
                        title = _collapse_ws(_unescape(raw))
                    elif name == "msc":
                        raw, raw_loc = sc.read_group()
                        for code in raw.split(","):
                            code = code.strip()
                            if not code:
                                continue
                            if not _MSC_RE.match(code):
                                self.record(
                                    sc.error(
                                        "MalformedReference",
                                        f"invalid classification code {code!r}",
                                        raw_loc,
                                    )
                                )
                            else:
                                msc.append(code)
                    elif name == "begin":
                        env_raw, _ = sc.read_group()
                        env = env_raw.strip()
                        if env == "smodule":
                            module = self.parse_module(loc)
                            if module is not None:
                                if module.name in module_names:
                                    self.record(
                                        sc.error(
                                            "DuplicateSymbol",
                                            f"duplicate module name {module.name!r}",
                                            loc,
                                        )
                                    )
                                else:
                                    module_names.add(module.name)
                                    body.append(module)
                        elif env in docmodel.STATEMENT_KINDS:
                            self.record(
                                sc.error(
                                    "UnknownCommand",
                                    f"'{env}' environment is only allowed inside a module",
                                    loc,
                                )
                            )
                            self.skip_environment(env)
                        else:
                            self.record(
                                sc.error("UnknownCommand", f"unknown environment {env!r}", loc)
                            )
                            self.skip_environment(env)
                    elif name == "end":
                        env_raw, _ = sc.read_group()
                        self.record(
                            sc.error(
                                "UnclosedEnvironment",
                                f"unexpected \\end{{{env_raw.strip()}}}",
                                loc,
                            )
                        )
                    elif name == "termref":
                        sc.pos, sc.line, sc.col = save, loc[0], loc[1]
                        para = self.parse_paragraph(allow_definiendum=False)
                        if para.inlines:
                            body.append(para)
                    else:
                        self.record(
                            sc.error(
                                "UnknownCommand",
                                f"\\{name} is not allowed at the document top level",
                                loc,
                            )
                        )
                        self.skip_groups()
                except _ScanError as exc:
                    self.record(exc.error)
            else:
                para = self.parse_paragraph(allow_definiendum=False)
                if para.inlines:
                    body.append(para)
                elif sc.pos == last_pos:
                    sc.advance()  # guarantee progress on degenerate input
            last_pos = sc.pos
        if self.errors:
            raise ParseFailure(_order_errors(self.errors))
        return DocumentAST(path=self.path, title=title, msc=tuple(msc), body=tuple(body))

    def parse_module(self, begin_loc: tuple[int, int]) -> ModuleDecl | None:
        sc = self.sc
        try:
            name_raw, name_loc = sc.read_group()
        except _ScanError as exc:
            self.record(exc.error)
            return None
        name = name_raw.strip()
        if not _NAME_RE.match(name):
            self.record(sc.error("MalformedReference", f"invalid module name {name!r}", name_loc))
            name = "_invalid"
        imports: list[ImportDecl] = []
        symbols: list[SymbolDecl] = []
        symbol_names: set[str] = set()
        items: list[Statement | Paragraph] = []
        while True:
            sc.skip_ws()
            if sc.at_end():
                self.record(
                    sc.error("UnclosedEnvironment", "'smodule' environment never closed", begin_loc)
                )
                break
            if sc.peek() == "\\":
                save = sc.pos
                try:
                    cmd, loc = sc.read_command()
                except _ScanError as exc:
                    self.record(exc.error)
                    continue
                try:
                    if cmd == "end":
                        env_raw, _ = sc.read_group()
                        if env_raw.strip() == "smodule":
                            break
                        self.record(
                            sc.error(
                                "UnclosedEnvironment",
                                f"\\end{{{env_raw.strip()}}} does not close 'smodule'",
                                loc,
                            )
                        )
                    elif cmd == "begin":
                        env_raw, _ = sc.read_group()
                        env = env_raw.strip()
                        if env in docmodel.STATEMENT_KINDS:
                            stmt = self.parse_statement(env, loc)
                            if stmt is not None:
                                items.append(stmt)
                        else:
                            self.record(
                                sc.error(
                                    "UnknownCommand",
                                    f"'{env}' environment is not allowed inside a module",
                                    loc,
                                )
                            )
                            self.skip_environment(env)
                    elif cmd == "importmodule":
                        raw, raw_loc = sc.read_group()
                        ref = raw.strip()
                        parts = ref.split("?")
                        if len(parts) != 2 or not _DOC_RE.match(parts[0]) or not _NAME_RE.match(
                            parts[1]
                        ):
                            self.record(
                                sc.error(
                                    "MalformedReference",
                                    f"import must be 'doc?module', got {ref!r}",
                                    raw_loc,
                                )
                            )
                        else:
                            imports.append(ImportDecl(ref=ref, pos=raw_loc))
                    elif cmd == "symdef":
                        raw, raw_loc = sc.read_group()
                        sym_name = raw.strip()
                        arity = 0
                        if sc.lookahead_option("args"):
                            opt, opt_loc = sc.read_option()
                            value = opt.split("=", 1)[1].strip()
                            if value.isdigit():
                                arity = int(value)
                            else:
                                self.record(
                                    sc.error(
                                        "BadArgumentCount",
                                        f"args= expects a non-negative integer, got {value!r}",
                                        opt_loc,
                                    )
                                )
                        if not _NAME_RE.match(sym_name):
                            self.record(
                                sc.error(
                                    "MalformedReference",
                                    f"invalid symbol name {sym_name!r}",
                                    raw_loc,
                                )
                            )
                        elif sym_name in symbol_names:
                            self.record(
                                sc.error(
                                    "DuplicateSymbol",
                                    f"symbol {sym_name!r} already declared in module {name!r}",
                                    raw_loc,
                                )
                            )
                        else:
                            symbol_names.add(sym_name)
                            symbols.append(SymbolDecl(name=sym_name, arity=arity))
                    elif cmd in ("termref", "definiendum"):
                        sc.pos, sc.line, sc.col = save, loc[0], loc[1]
                        para = self.parse_paragraph(allow_definiendum=False)
                        if para.inlines:
                            items.append(para)
                    else:
                        self.record(
                            sc.error(
                                "UnknownCommand",
                                f"\\{cmd} is not allowed inside a module",
                                loc,
                            )
                        )
                        self.skip_groups()
                except _ScanError as exc:
                    self.record(exc.error)
            else:
                para = self.parse_paragraph(allow_definiendum=False)
                if para.inlines:
                    items.append(para)
        return ModuleDecl(
            name=name,
            imports=tuple(imports),
            symbols=tuple(symbols),
            body=tuple(items),
            pos=begin_loc,
        )

    def parse_statement(self, kind: str, begin_loc: tuple[int, int]) -> Statement | None:
        sc = self.sc
        for_refs: list[str] = []
        if sc.lookahead_option("for"):
            try:
                opt, opt_loc = sc.read_option()
            except _ScanError as exc:
                self.record(exc.error)
                opt, opt_loc = "for=", begin_loc
            for ref in opt.split("=", 1)[1].split(","):
                ref = ref.strip()
                if not ref:
                    continue
                if not _validate_sym_ref(ref):
                    self.record(
                        sc.error(
                            "MalformedReference", f"invalid for= reference {ref!r}", opt_loc
                        )
                    )
                elif ref not in for_refs:
                    for_refs.append(ref)
        inlines: list = []
        while True:
            sc.skip_ws()
            if sc.at_end():
                self.record(
                    sc.error(
                        "UnclosedEnvironment", f"'{kind}' environment never closed", begin_loc
                    )
                )
                break
            if sc.peek() == "\\":
                cmd = self._peek_command()
                if cmd == "end":
                    save = (sc.pos, sc.line, sc.col)
                    sc.read_command()
                    try:
                        env_raw, _ = sc.read_group()
                    except _ScanError as exc:
                        self.record(exc.error)
                        break
                    if env_raw.strip() != kind:
                        # leave the \end for the enclosing context to consume
                        sc.pos, sc.line, sc.col = save
                        self.record(
                            sc.error(
                                "UnclosedEnvironment",
                                f"'{kind}' environment never closed",
                                begin_loc,
                            )
                        )
                    break
                if cmd == "begin":
                    self.record(
                        sc.error("UnknownCommand", f"environments cannot nest inside '{kind}'")
                    )
                    sc.read_command()
                    try:
                        env_raw, _ = sc.read_group()
                        self.skip_environment(env_raw.strip())
                    except _ScanError as exc:
                        self.record(exc.error)
                    continue
                if cmd in ("importmodule", "symdef", "title", "msc"):
                    _, cmd_loc = sc.read_command()
                    self.record(
                        sc.error(
                            "UnknownCommand",
                            f"\\{cmd} is not allowed inside a statement",
                            cmd_loc,
                        )
                    )
                    self.skip_groups()
                    continue
            chunk = self.parse_paragraph(allow_definiendum=True)
            inlines.extend(chunk.inlines)
        # a definiendum implies membership in the statement's for= set
        for inline in inlines:
            if isinstance(inline, Definiendum) and inline.name not in for_refs:
                for_refs.append(inline.name)
        return Statement(
            kind=kind, for_refs=tuple(for_refs), inlines=tuple(inlines), pos=begin_loc
        )

    def _peek_command(self) -> str:
        i = self.sc.pos + 1
        name = ""
        while i < len(self.sc.text) and self.sc.text[i].isalpha():
            name += self.sc.text[i]
            i += 1
        return name

    def parse_paragraph(self, allow_definiendum: bool) -> Paragraph:
        """Collect inline content until a structural command or EOF."""
        sc = self.sc
        inlines: list = []
        text_parts: list[str] = []

        def flush_text() -> None:
            collapsed = _collapse_ws(_unescape("".join(text_parts)))
            text_parts.clear()
            if collapsed:
                inlines.append(TextRun(text=collapsed))

        stop_commands = {"begin", "end", "title", "msc", "importmodule", "symdef"}
        while not sc.at_end():
            ch = sc.peek()
            if ch == "%":
                while not sc.at_end() and sc.peek() != "\n":
                    sc.advance()
                text_parts.append(" ")
                continue
            if ch == "$":
                dollar_loc = sc.loc()
                flush_text()
                sc.advance()
                term = self._parse_inline_formula(dollar_loc)
                if term is not None:
                    inlines.append(Formula(term=term))
                continue
            if ch == "\\":
                if sc.peek(1) and sc.peek(1) in _ESCAPABLE:
                    text_parts.append(sc.advance(2))
                    continue
                cmd = self._peek_command()
                if cmd in stop_commands:
                    break
                save = (sc.pos, sc.line, sc.col)
                try:
                    name, loc = sc.read_command()
                except _ScanError as exc:
                    self.record(exc.error)
                    continue
                if name == "termref":
                    flush_text()
                    try:
                        ref_raw, ref_loc = sc.read_group()
                        text_raw, _ = sc.read_group()
                    except _ScanError as exc:
                        self.record(exc.error)
                        continue
                    ref = ref_raw.strip()
                    if not _validate_sym_ref(ref):
                        self.record(
                            sc.error(
                                "MalformedReference", f"invalid symbol reference {ref!r}", ref_loc
                            )
                        )
                        continue
                    inlines.append(
                        TermRef(ref=ref, text=_collapse_ws(_unescape(text_raw)), pos=ref_loc)
                    )
                elif name == "definiendum":
                    flush_text()
                    try:
                        name_raw, name_loc = sc.read_group()
                        text_raw, _ = sc.read_group()
                    except _ScanError as exc:
                        self.record(exc.error)
                        continue
                    sym = name_raw.strip()
                    if not allow_definiendum:
                        self.record(
                            sc.error(
                                "UnknownCommand",
                                "\\definiendum is only allowed inside a statement",
                                loc,
                            )
                        )
                        continue
                    if not _NAME_RE.match(sym):
                        self.record(
                            sc.error(
                                "MalformedReference", f"invalid symbol name {sym!r}", name_loc
                            )
                        )
                        continue
                    inlines.append(
                        Definiendum(name=sym, text=_collapse_ws(_unescape(text_raw)), pos=name_loc)
                    )
                else:
                    self.record(sc.error("UnknownCommand", f"unknown command \\{name}", loc))
                    self.skip_groups()
                del save
            elif ch == "}":
                self.record(sc.error("UnknownCommand", "unbalanced '}'"))
                sc.advance()
            elif ch == "{":
                self.record(sc.error("UnknownCommand", "unbalanced '{'"))
                sc.advance()
            else:
                text_parts.append(sc.advance())
        flush_text()
        return Paragraph(inlines=tuple(inlines))

    def _parse_inline_formula(self, dollar_loc: tuple[int, int]) -> Term | None:
        """Parse a `$...$` formula in place; on error, skip to the closing '$'."""
        sc = self.sc
        sc.skip_ws()
        if sc.peek() == "$":
            sc.advance()
            self.record(sc.error("EmptyFormula", "empty formula", dollar_loc))
            return None
        try:
            term = _parse_term(sc)
            sc.skip_ws()
            if sc.peek() != "$":
                if sc.at_end():
                    raise sc.fail("UnclosedEnvironment", "formula never closed", dollar_loc)
                raise sc.fail(
                    "MalformedReference",
                    f"unexpected {sc.peek()!r} after formula term",
                )
            sc.advance()
            return term
        except _ScanError as exc:
            self.record(exc.error)
            while not sc.at_end():
                if sc.peek() == "\\" and sc.peek(1) and sc.peek(1) in _ESCAPABLE:
                    sc.advance(2)
                    continue
                if sc.advance() == "$":
                    break
            return None


def _order_errors(errors: list[ParseError]) -> list[ParseError]:
    seen: set[tuple] = set()
    ordered = []
    for err in sorted(errors, key=lambda e: (e.line, e.column, e.code)):
        key = (err.line, err.column, err.code, err.message)
        if key not in seen:
            seen.add(key)
            ordered.append(err)
    return ordered


def parse_document(source: SourceDocument) -> DocumentAST:
    """Parse a source document; raises ParseFailure with all recoverable errors."""
    return _DocParser(source).parse()


def parse_text(path: str, text: str) -> DocumentAST:
    return parse_document(SourceDocument(path=path, text=text))


# ---------------------------------------------------------------------------
# Canonical pretty-printer (the round-trip inverse of parse_document)
# ---------------------------------------------------------------------------


def _escape(text: str) -> str:
    out = []
    for ch in text:
        out.append("\\" + ch if ch in "\\{}$%" else ch)
    return "".join(out)


def _term_source(term: Term) -> str:
    if isinstance(term, Apply):
        head = term.head.ref if isinstance(term.head, SymbolRef) else _term_source(term.head)
        return "\\apply{%s}{%s}" % (head, ",".join(_term_source(a) for a in term.args))
    if isinstance(term, SymbolRef):
        return term.ref
    if isinstance(term, Var):
        return term.name
    if isinstance(term, Num):
        return term.literal
    return "\\text{%s}" % _escape(term.text)


def _inline_source(inline) -> str:
    if isinstance(inline, TextRun):
        return _escape(inline.text)
    if isinstance(inline, TermRef):
        return "\\termref{%s}{%s}" % (inline.ref, _escape(inline.text))
    if isinstance(inline, Definiendum):
        return "\\definiendum{%s}{%s}" % (inline.name, _escape(inline.text))
    return "$%s$" % _term_source(inline.term)


def pretty_print(doc: DocumentAST | LinkedDocument) -> str:
    """Serialize to canonical source form; reparsing yields an identical AST."""
    lines: list[str] = []
    if doc.title:
        lines.append("\\title{%s}" % _escape(doc.title))
    if doc.msc:
        lines.append("\\msc{%s}" % ",".join(doc.msc))
    for block in doc.body:
        if lines:
            lines.append("")
        if isinstance(block, Paragraph):
            lines.append(" ".join(_inline_source(i) for i in block.inlines))
            continue
        lines.append("\\begin{smodule}{%s}" % block.name)
        for imp in block.imports:
            lines.append("  \\importmodule{%s}" % imp.ref)
        for sym in block.symbols:
            suffix = "[args=%d]" % sym.arity if sym.arity else ""
            lines.append("  \\symdef{%s}%s" % (sym.name, suffix))
        for item in block.body:
            if isinstance(item, Statement):
                option = "[for=%s]" % ",".join(item.for_refs) if item.for_refs else ""
                lines.append("  \\begin{%s}%s" % (item.kind, option))
                if item.inlines:
                    lines.append("    " + " ".join(_inline_source(i) for i in item.inlines))
                lines.append("  \\end{%s}" % item.kind)
            else:
                lines.append("  " + " ".join(_inline_source(i) for i in item.inlines))
        lines.append("\\end{smodule}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Reference resolution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModuleExports:
    doc: str  # document id (path without extension)
    name: str
    uri: str
    symbols: Mapping[str, str]  # own symbol name -> symbol URI
    imports: tuple[tuple[str, str], ...] = ()  # (doc id, module name)


def _exports_of(path: str, module: ModuleDecl) -> ModuleExports:
    return ModuleExports(
        doc=docmodel.doc_id(path),
        name=module.name,
        uri=docmodel.module_uri(path, module.name),
        symbols={
            s.name: docmodel.symbol_uri(path, module.name, s.name) for s in module.symbols
        },
        imports=tuple(tuple(i.ref.split("?", 1)) for i in module.imports),
    )


class SymbolRegistry:
    """Exported symbols of ingested documents, keyed by (doc id, module name).

    Imports are transitive: a module re-exports everything reachable through
    its import chain, with nearer declarations shadowing farther ones.
    """

    def __init__(self) -> None:
        self._modules: dict[tuple[str, str], ModuleExports] = {}

    def add_document(self, path: str, modules: Iterable[ModuleDecl]) -> None:
        did = docmodel.doc_id(path)
        for module in modules:
            self._modules[(did, module.name)] = _exports_of(path, module)

    def add_ast(self, ast: DocumentAST) -> None:
        self.add_document(ast.path, ast.modules)

    def module(self, doc: str, name: str) -> ModuleExports | None:
        return self._modules.get((doc, name))

    def copy(self) -> "SymbolRegistry":
        clone = SymbolRegistry()
        clone._modules = dict(self._modules)
        return clone

    def __len__(self) -> int:
        return len(self._modules)


def visible_symbols(
    root: ModuleExports,
    lookup,
) -> dict[str, str]:
    """Symbols visible inside a module: own plus transitively imported.

    Breadth-first over the import graph; nearer modules shadow farther ones
    and earlier imports shadow later ones at equal distance.  Import cycles
    are tolerated.
    """
    scope: dict[str, str] = {}
    seen: set[tuple[str, str]] = {(root.doc, root.name)}
    frontier = [root]
    while frontier:
        nxt: list[ModuleExports] = []
        for exports in frontier:
            for name, uri in exports.symbols.items():
                scope.setdefault(name, uri)
            for key in exports.imports:
                if key in seen:
                    continue
                seen.add(key)
                target = lookup(*key)
                if target is not None:
                    nxt.append(target)
        frontier = nxt
    return scope


class _Resolver:
    def __init__(self, ast: DocumentAST, registry: SymbolRegistry):
        self.ast = ast
        self.registry = registry
        self.doc = docmodel.doc_id(ast.path)
        self.errors: list[ParseError] = []
        self.own = {m.name: m for m in ast.modules}
        self._visible_cache: dict[tuple[str, str], dict[str, str]] = {}

    def fail(self, ref: str, pos: tuple[int, int], detail: str = "unresolved reference") -> None:
        self.errors.append(
            ParseError(pos[0], pos[1], "MalformedReference", f"{detail} '{ref}'")
        )

    def module_exports(self, doc: str, name: str) -> ModuleExports | None:
        if doc == self.doc and name in self.own:
            return _exports_of(self.ast.path, self.own[name])
        return self.registry.module(doc, name)

    def resolve(self) -> LinkedDocument:
        body: list[Block] = []
        for block in self.ast.body:
            if isinstance(block, Paragraph):
                body.append(self.resolve_paragraph(block, scope={}, imported={}, module=None))
            else:
                body.append(self.resolve_module(block))
        if self.errors:
            raise ParseFailure(_order_errors(self.errors))
        return LinkedDocument(
            path=self.ast.path,
            title=self.ast.title,
            msc=self.ast.msc,
            body=tuple(body),
        )

    def _visible(self, exports: ModuleExports) -> dict[str, str]:
        key = (exports.doc, exports.name)
        cached = self._visible_cache.get(key)
        if cached is None:
            cached = visible_symbols(exports, self.module_exports)
            self._visible_cache[key] = cached
        return cached

    def _reachable_uris(self, exports: ModuleExports) -> set[str]:
        """Every symbol URI reachable over the import chain, shadowed or not."""
        uris: set[str] = set()
        seen: set[tuple[str, str]] = set()
        frontier = [exports]
        while frontier:
            node = frontier.pop()
            key = (node.doc, node.name)
            if key in seen:
                continue
            seen.add(key)
            uris.update(node.symbols.values())
            for imp in node.imports:
                target = self.module_exports(*imp)
                if target is not None:
                    frontier.append(target)
        return uris

    def resolve_module(self, module: ModuleDecl) -> ModuleDecl:
        imports: list[ImportDecl] = []
        imported: dict[str, ModuleExports] = {}
        for imp in module.imports:
            doc, name = imp.ref.split("?", 1)
            exports = self.module_exports(doc, name)
            if exports is None:
                self.fail(imp.ref, imp.pos, "unresolved import")
                imports.append(imp)
                continue
            imports.append(replace(imp, uri=exports.uri))
            imported.setdefault(name, exports)
        own = _exports_of(self.ast.path, module)
        scope = self._visible(own)
        symbols = tuple(
            replace(s, uri=docmodel.symbol_uri(self.ast.path, module.name, s.name))
            for s in module.symbols
        )
        visible_uris = self._reachable_uris(own)
        body = tuple(
            self.resolve_statement(item, scope, imported, module, visible_uris)
            if isinstance(item, Statement)
            else self.resolve_paragraph(item, scope, imported, module)
            for item in module.body
        )
        return replace(
            module,
            imports=tuple(imports),
            symbols=symbols,
            body=body,
            uri=docmodel.module_uri(self.ast.path, module.name),
        )

    def resolve_ref(
        self,
        ref: str,
        pos: tuple[int, int],
        scope: Mapping[str, str],
        imported: Mapping[str, ModuleExports],
        module: ModuleDecl | None,
    ) -> str | None:
        parts = ref.split("?")
        if len(parts) == 1:
            uri = scope.get(parts[0])
            if uri is None:
                self.fail(ref, pos)
            return uri
        if len(parts) == 2:
            mod_name, sym = parts
            exports: ModuleExports | None = None
            if module is not None and mod_name == module.name:
                exports = self.module_exports(self.doc, mod_name)
            elif mod_name in imported:
                exports = imported[mod_name]
            if exports is None:
                self.fail(ref, pos)
                return None
            uri = self._visible(exports).get(sym)
            if uri is None:
                self.fail(ref, pos)
            return uri
        doc, mod_name, sym = parts
        exports = self.module_exports(doc, mod_name)
        if exports is None:
            self.fail(ref, pos)
            return None
        uri = self._visible(exports).get(sym)
        if uri is None:
            self.fail(ref, pos)
        return uri

    def resolve_term(self, term: Term, scope, imported, module) -> Term:
        if isinstance(term, Apply):
            return Apply(
                head=self.resolve_term(term.head, scope, imported, module),
                args=tuple(self.resolve_term(a, scope, imported, module) for a in term.args),
            )
        if isinstance(term, SymbolRef):
            uri = self.resolve_ref(term.ref, term.pos, scope, imported, module)
            return replace(term, uri=uri)
        return term

    def resolve_inline(self, inline, scope, imported, module):
        if isinstance(inline, TermRef):
            uri = self.resolve_ref(inline.ref, inline.pos, scope, imported, module)
            return replace(inline, uri=uri)
        if isinstance(inline, Definiendum):
            uri = scope.get(inline.name)
            if uri is None:
                self.fail(inline.name, inline.pos, "definiendum for undeclared symbol")
            return replace(inline, uri=uri)
        if isinstance(inline, Formula):
            return Formula(term=self.resolve_term(inline.term, scope, imported, module))
        return inline

    def resolve_statement(
        self, stmt: Statement, scope, imported, module, visible_uris: set[str]
    ) -> Statement:
        for_uris: list[str] = []
        for ref in stmt.for_refs:
            uri = self.resolve_ref(ref, stmt.pos, scope, imported, module)
            if uri is None:
                continue
            if uri not in visible_uris:
                self.fail(ref, stmt.pos, "for= must name a declared or imported symbol")
                continue
            if uri not in for_uris:
                for_uris.append(uri)
        inlines = tuple(
            self.resolve_inline(i, scope, imported, module) for i in stmt.inlines
        )
        return replace(stmt, inlines=inlines, for_uris=tuple(for_uris))

    def resolve_paragraph(self, para: Paragraph, scope, imported, module) -> Paragraph:
        return Paragraph(
            inlines=tuple(self.resolve_inline(i, scope, imported, module) for i in para.inlines)
        )


def resolve_references(ast: DocumentAST, registry: SymbolRegistry) -> LinkedDocument:
    """Resolve imports, term references, formula heads and for= entries.

    All-or-nothing per document: any unresolved name raises ParseFailure with
    one MalformedReference per unresolved reference.  The returned document
    has an empty fragment map; run docmodel.assign_fragment_ids to complete it.
    """
    return _Resolver(ast, registry).resolve()


def link_document(ast: DocumentAST, registry: SymbolRegistry) -> LinkedDocument:
    """resolve_references + assign_fragment_ids in one step."""
    return docmodel.assign_fragment_ids(resolve_references(ast, registry))

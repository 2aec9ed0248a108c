"""Parser, printer, and tokenizer for the MDL structured-ASCII model format.

The format is a tree of named sections delimited by braces, where each
section carries ordered ``Key value`` parameter lines:

    Model {
      Name "example"
      System {
        Block {
          BlockType Gain
          Name "g"
        }
      }
    }

Values are lexemes: bare words/numbers, double-quoted strings (with ``""``
escaping), or bracketed vector literals kept as single lexemes. Parsing is
lossless at the lexeme level; the printer emits a fixed normal form
(two-space indent, one item per line) so that print -> parse -> print is a
fixpoint after one pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field

__all__ = [
    "Param",
    "ParamValue",
    "Section",
    "SyntaxTree",
    "TokenSeq",
    "Diagnostic",
    "ParseError",
    "parse",
    "parse_token_stream",
    "print_tree",
    "tokenize",
    "join_tokens",
    "strip_comments",
    "decode_model_bytes",
    "read_model_file",
]

STRICT = "strict"
LENIENT = "lenient"

BARE = "bare"
QUOTED = "quoted"
VECTOR = "vector"
MULTI = "multi"


class ParseError(Exception):
    """Raised on malformed input (always in strict mode, rarely in lenient).

    ``code`` is one of UnbalancedBraces, UnterminatedString, EmptyInput,
    NoRootSection, UnterminatedVector, MissingValue, UnexpectedConstruct.
    """

    def __init__(self, code: str, message: str, line: int, offset: int):
        super().__init__(f"{code} at line {line}, offset {offset}: {message}")
        self.code = code
        self.line = line
        self.offset = offset


@dataclass(frozen=True)
class Diagnostic:
    """A recoverable problem recorded while parsing in lenient mode."""

    code: str
    message: str
    line: int
    offset: int


@dataclass(frozen=True)
class ParamValue:
    """Value of one parameter: one or more lexemes as they appeared.

    A single lexeme is a bare token, a quoted string, or a vector literal;
    multi-lexeme values occur in files that place several lexemes after one
    key on a line.
    """

    lexemes: tuple[str, ...]

    @staticmethod
    def bare(text: str) -> "ParamValue":
        return ParamValue((text,))

    @staticmethod
    def quoted(text: str) -> "ParamValue":
        return ParamValue(('"' + text.replace('"', '""') + '"',))

    @property
    def kind(self) -> str:
        if len(self.lexemes) != 1:
            return MULTI
        lx = self.lexemes[0]
        if lx.startswith('"'):
            return QUOTED
        if lx.startswith("["):
            return VECTOR
        return BARE

    def text(self) -> str:
        """The value as printed: lexemes joined by single spaces."""
        return " ".join(self.lexemes)

    def as_string(self) -> str:
        """Unquoted content for quoted values; raw text otherwise."""
        if self.kind == QUOTED:
            lx = self.lexemes[0]
            return lx[1:-1].replace('""', '"') if lx.endswith('"') and len(lx) >= 2 else lx[1:]
        return self.text()

    def as_int(self) -> int | None:
        """Integer content of a bare or quoted scalar value, else None."""
        try:
            return int(self.as_string())
        except ValueError:
            return None


@dataclass(frozen=True)
class Param:
    key: str
    value: ParamValue


@dataclass
class Section:
    """A named brace-delimited section holding params and child sections."""

    name: str
    params: list[Param] = field(default_factory=list)
    children: list["Section"] = field(default_factory=list)

    def get(self, key: str) -> ParamValue | None:
        """First value for ``key`` (keys are case-sensitive)."""
        for p in self.params:
            if p.key == key:
                return p.value
        return None

    def children_named(self, name: str) -> list["Section"]:
        return [c for c in self.children if c.name == name]


@dataclass
class SyntaxTree:
    """Faithful image of one model file: a single root section."""

    root: Section
    diagnostics: list[Diagnostic] = field(default_factory=list, compare=False)


@dataclass(frozen=True)
class TokenSeq:
    """Whitespace tokens of a text; ``{`` and ``}`` are always standalone."""

    tokens: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def __getitem__(self, i):
        return self.tokens[i]

    def text(self) -> str:
        return " ".join(self.tokens)


def tokenize(text: str) -> TokenSeq:
    """Split text into whitespace-delimited tokens, isolating braces.

    A token is a maximal run of non-whitespace characters, except that
    ``{`` and ``}`` always stand alone (``a{b}`` -> ``a``, ``{``, ``b``,
    ``}``). Stable under re-joining with single spaces.
    """
    tokens: list[str] = []
    for run in text.split():
        start = 0
        for i, ch in enumerate(run):
            if ch in "{}":
                if i > start:
                    tokens.append(run[start:i])
                tokens.append(ch)
                start = i + 1
        if start < len(run):
            tokens.append(run[start:])
    return TokenSeq(tuple(tokens))


def join_tokens(tokens: TokenSeq | list[str] | tuple[str, ...]) -> str:
    return " ".join(tokens)


def strip_comments(text: str) -> str:
    """Drop ``#``-prefixed comment lines (whole-line comments only)."""
    kept = [ln for ln in text.splitlines() if not ln.lstrip().startswith("#")]
    return "\n".join(kept) + ("\n" if text.endswith("\n") else "")


def decode_model_bytes(raw: bytes) -> tuple[str, bool]:
    """Decode file bytes as UTF-8; non-UTF-8 bytes are substituted lossily.

    Returns (text, lossy); ``lossy`` is True when substitution happened.
    """
    try:
        return raw.decode("utf-8"), False
    except UnicodeDecodeError:
        return raw.decode("utf-8", "replace"), True


def read_model_file(path, mode: str = STRICT,
                    drop_comments: bool = True) -> SyntaxTree:
    """Read and parse one model file.

    Lossy byte substitution (e.g. Latin-1 content) is recorded as an
    EncodingFallback diagnostic in lenient mode and is an error in strict.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    text, lossy = decode_model_bytes(raw)
    if lossy and mode == STRICT:
        raise ParseError("EncodingFallback", f"{path} is not valid UTF-8", 1, 0)
    if drop_comments:
        text = strip_comments(text)
    tree = parse(text, mode)
    if lossy:
        tree.diagnostics.append(Diagnostic(
            "EncodingFallback", "non-UTF-8 bytes were substituted", 1, 0))
    return tree


# ---------------------------------------------------------------------------
# Lexing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Lexeme:
    text: str
    line: int
    offset: int


class _LineLexer:
    """Splits one line into lexemes, tracking byte offsets."""

    def __init__(self, text: str, line_no: int, base_offset: int, mode: str,
                 diags: list[Diagnostic]):
        self.text = text
        self.line_no = line_no
        self.base = base_offset
        self.mode = mode
        self.diags = diags

    def _fail_or_diag(self, code: str, message: str, offset: int) -> None:
        if self.mode == STRICT:
            raise ParseError(code, message, self.line_no, offset)
        self.diags.append(Diagnostic(code, message, self.line_no, offset))

    def lexemes(self) -> list[_Lexeme]:
        out: list[_Lexeme] = []
        text, n = self.text, len(self.text)
        i = 0
        while i < n:
            ch = text[i]
            if ch in " \t\r":
                i += 1
                continue
            start = i
            if ch == "#":
                self._fail_or_diag("UnexpectedConstruct", "comment line skipped",
                                   self.base + i)
                break
            if ch in "{}":
                out.append(_Lexeme(ch, self.line_no, self.base + i))
                i += 1
                continue
            if ch == '"':
                i += 1
                while i < n:
                    if text[i] == '"':
                        if i + 1 < n and text[i + 1] == '"':
                            i += 2
                            continue
                        i += 1
                        break
                    i += 1
                else:
                    self._fail_or_diag("UnterminatedString",
                                       "string not closed before end of line",
                                       self.base + start)
                out.append(_Lexeme(text[start:i], self.line_no, self.base + start))
                continue
            if ch == "[":
                depth = 0
                while i < n:
                    if text[i] == "[":
                        depth += 1
                    elif text[i] == "]":
                        depth -= 1
                        if depth == 0:
                            i += 1
                            break
                    i += 1
                else:
                    if depth > 0:
                        self._fail_or_diag("UnterminatedVector",
                                           "vector literal not closed before end of line",
                                           self.base + start)
                out.append(_Lexeme(text[start:i], self.line_no, self.base + start))
                continue
            while i < n and text[i] not in " \t\r{}":
                i += 1
            out.append(_Lexeme(text[start:i], self.line_no, self.base + start))
        return out


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

class _Parser:
    """Shared engine for line-structured files and flat token streams.

    In line mode a param's value runs to the end of its line (stopping at a
    brace); in stream mode (no line structure, e.g. sampled token sequences)
    a param takes exactly one value lexeme.
    """

    def __init__(self, mode: str, stream: bool):
        self.mode = mode
        self.stream = stream
        self.diags: list[Diagnostic] = []
        self.root: Section | None = None
        self.stack: list[Section] = []

    def _fail_or_diag(self, code: str, message: str, line: int, offset: int) -> bool:
        """Strict: raise. Lenient: record and return True (caller skips)."""
        if self.mode == STRICT:
            raise ParseError(code, message, line, offset)
        self.diags.append(Diagnostic(code, message, line, offset))
        return True

    def feed(self, lexemes: list[_Lexeme]) -> None:
        i = 0
        n = len(lexemes)
        while i < n:
            lx = lexemes[i]
            if lx.text == "}":
                if not self.stack:
                    self._fail_or_diag("UnbalancedBraces", "close brace without open section",
                                       lx.line, lx.offset)
                    i += 1
                    continue
                self.stack.pop()
                i += 1
                continue
            if lx.text == "{":
                self._fail_or_diag("UnexpectedConstruct", "open brace without section name",
                                   lx.line, lx.offset)
                i += 1
                continue
            if i + 1 < n and lexemes[i + 1].text == "{":
                self._open_section(lx)
                i += 2
                continue
            i = self._param(lexemes, i)

    def _open_section(self, name_lx: _Lexeme) -> None:
        sec = Section(name_lx.text)
        if self.stack:
            self.stack[-1].children.append(sec)
        elif self.root is None:
            self.root = sec
        else:
            # Extra top-level sections (e.g. concatenated models): parse and drop.
            self._fail_or_diag("UnexpectedConstruct",
                               f"extra top-level section {name_lx.text!r} ignored",
                               name_lx.line, name_lx.offset)
        self.stack.append(sec)

    def _param(self, lexemes: list[_Lexeme], i: int) -> int:
        key = lexemes[i]
        values: list[str] = []
        j = i + 1
        n = len(lexemes)
        if self.stream:
            if j < n and lexemes[j].text not in ("{", "}"):
                values.append(lexemes[j].text)
                j += 1
        else:
            while j < n and lexemes[j].text not in ("{", "}"):
                values.append(lexemes[j].text)
                j += 1
        if not values:
            self._fail_or_diag("MissingValue", f"parameter {key.text!r} has no value",
                               key.line, key.offset)
        if not self.stack:
            self._fail_or_diag("UnexpectedConstruct",
                               f"parameter {key.text!r} outside any section",
                               key.line, key.offset)
        else:
            self.stack[-1].params.append(Param(key.text, ParamValue(tuple(values))))
        return j

    def finish(self, end_line: int, end_offset: int) -> SyntaxTree:
        if self.stack:
            if self.mode == STRICT:
                raise ParseError("UnbalancedBraces",
                                 f"{len(self.stack)} section(s) not closed at end of input",
                                 end_line, end_offset)
            self.diags.append(Diagnostic("UnbalancedBraces",
                                         f"{len(self.stack)} section(s) auto-closed at end of input",
                                         end_line, end_offset))
            self.stack.clear()
        if self.root is None:
            raise ParseError("NoRootSection", "input contains no section", end_line, end_offset)
        if self.root.name != "Model":
            if self.mode == STRICT:
                raise ParseError("UnexpectedConstruct",
                                 f"root section is {self.root.name!r}, expected 'Model'",
                                 1, 0)
            self.diags.append(Diagnostic("UnexpectedConstruct",
                                         f"root section is {self.root.name!r}, expected 'Model'",
                                         1, 0))
        return SyntaxTree(self.root, self.diags)


def parse(text: str, mode: str = STRICT) -> SyntaxTree:
    """Parse model-file text into a SyntaxTree, preserving item order.

    Strict mode raises ParseError on any malformed or unrecognized
    construct; lenient mode skips them and records diagnostics on the tree.
    Raises ParseError("EmptyInput") for blank input in either mode.
    """
    if not text.strip():
        raise ParseError("EmptyInput", "input is empty", 1, 0)
    parser = _Parser(mode, stream=False)
    offset = 0
    line_no = 0
    for line_no, line in enumerate(text.splitlines(), start=1):
        lexer = _LineLexer(line, line_no, offset, mode, parser.diags)
        parser.feed(lexer.lexemes())
        offset += len(line) + 1
    return parser.finish(line_no, len(text))


def parse_token_stream(tokens: TokenSeq | list[str], mode: str = LENIENT) -> SyntaxTree:
    """Parse a flat token sequence (no line structure) into a SyntaxTree.

    Used for sampled model text, where each parameter carries exactly one
    value token. Raises ParseError("EmptyInput") / ("NoRootSection") when
    nothing parseable is present.
    """
    toks = list(tokens)
    if not toks:
        raise ParseError("EmptyInput", "token stream is empty", 1, 0)
    parser = _Parser(mode, stream=True)
    parser.feed([_Lexeme(t, 1, i) for i, t in enumerate(toks)])
    return parser.finish(1, len(toks))


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

def print_tree(tree: SyntaxTree) -> str:
    """Print a tree in normal form: 2-space indent, one item per line.

    parse(print_tree(t)) is structurally equal to t, and print_tree is a
    fixpoint over parse for files already in normal form.
    """
    lines: list[str] = []

    def emit(sec: Section, depth: int) -> None:
        pad = "  " * depth
        lines.append(f"{pad}{sec.name} {{")
        inner = "  " * (depth + 1)
        for p in sec.params:
            if p.value.lexemes:
                lines.append(f"{inner}{p.key} {p.value.text()}")
            else:
                lines.append(f"{inner}{p.key}")
        for child in sec.children:
            emit(child, depth + 1)
        lines.append(f"{pad}}}")

    emit(tree.root, 0)
    return "\n".join(lines) + "\n"

"""Tokenizer for Michelson concrete syntax."""

import enum
import re
from dataclasses import dataclass

from michv.errors import LexError

SECTION_KEYWORDS = frozenset({"parameter", "storage", "code"})


class TokenKind(enum.Enum):
    KEYWORD = "keyword"
    INSTR = "instruction-name"
    TYPE = "type-name"
    INT = "int-literal"
    STRING = "string-literal"
    BYTES = "bytes-literal"
    ANNOT = "annotation"
    PUNCT = "punctuation"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str
    span: tuple

    def __repr__(self):
        return f"Token({self.kind.value}, {self.text!r})"


_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*")
_INT = re.compile(r"-?[0-9]+")
_HEX = re.compile(r"0x([0-9A-Za-z]*)")
_ANNOT = re.compile(r"[@%:][A-Za-z0-9_.%@]*")
_HEXDIGITS = set("0123456789abcdefABCDEF")
_ESCAPES = {'"': '"', "\\": "\\", "n": "\n", "t": "\t", "r": "\r", "b": "\b"}


def _classify(word):
    if word in SECTION_KEYWORDS:
        return TokenKind.KEYWORD
    if word[0].isupper():
        # all-caps is an opcode (ADD, IF_LEFT); capitalised is data (Pair, Elt)
        if word.upper() == word:
            return TokenKind.INSTR
        return TokenKind.KEYWORD
    return TokenKind.TYPE


def _skip_trivia(source, pos):
    n = len(source)
    while pos < n:
        c = source[pos]
        if c in " \t\r\n":
            pos += 1
        elif c == "#":
            end = source.find("\n", pos)
            pos = n if end < 0 else end + 1
        elif source.startswith("/*", pos):
            end = source.find("*/", pos + 2)
            if end < 0:
                raise LexError("unterminated comment", (pos, n), source)
            pos = end + 2
        else:
            break
    return pos


def _read_string(source, pos):
    start = pos
    pos += 1
    chars = []
    n = len(source)
    while pos < n:
        c = source[pos]
        if c == '"':
            return pos + 1, source[start:pos + 1]
        if c == "\n":
            break
        if c == "\\":
            if pos + 1 >= n or source[pos + 1] not in _ESCAPES:
                raise LexError("invalid escape sequence in string", (pos, pos + 2), source)
            chars.append(source[pos:pos + 2])
            pos += 2
            continue
        chars.append(c)
        pos += 1
    raise LexError("unterminated string literal", (start, pos), source)


def unescape(text):
    """Decode the body of a string-literal token (quotes included)."""
    body = text[1:-1]
    out = []
    i = 0
    while i < len(body):
        if body[i] == "\\":
            out.append(_ESCAPES[body[i + 1]])
            i += 2
        else:
            out.append(body[i])
            i += 1
    return "".join(out)


def tokenize(source):
    """Split *source* into tokens, dropping whitespace and comments.

    Spans are ``(start, end)`` offsets into *source*.
    """
    tokens = []
    pos = _skip_trivia(source, 0)
    n = len(source)
    while pos < n:
        c = source[pos]
        if c in "{};()":
            tokens.append(Token(TokenKind.PUNCT, c, (pos, pos + 1)))
            pos += 1
        elif c == '"':
            end, text = _read_string(source, pos)
            tokens.append(Token(TokenKind.STRING, text, (pos, end)))
            pos = end
        elif source.startswith("0x", pos):
            m = _HEX.match(source, pos)
            digits = m.group(1)
            bad = next((i for i, d in enumerate(digits) if d not in _HEXDIGITS), None)
            if bad is not None:
                at = pos + 2 + bad
                raise LexError(f"invalid hex digit {digits[bad]!r}", (at, at + 1), source)
            if len(digits) % 2:
                raise LexError("odd number of hex digits in bytes literal", m.span(), source)
            tokens.append(Token(TokenKind.BYTES, m.group(0), m.span()))
            pos = m.end()
        elif c.isdigit() or (c == "-" and pos + 1 < n and source[pos + 1].isdigit()):
            m = _INT.match(source, pos)
            tokens.append(Token(TokenKind.INT, m.group(0), m.span()))
            pos = m.end()
        elif c in "@%:":
            m = _ANNOT.match(source, pos)
            tokens.append(Token(TokenKind.ANNOT, m.group(0), m.span()))
            pos = m.end()
        else:
            m = _IDENT.match(source, pos)
            if m is None:
                raise LexError(f"illegal character {c!r}", (pos, pos + 1), source)
            word = m.group(0)
            tokens.append(Token(_classify(word), word, m.span()))
            pos = m.end()
        pos = _skip_trivia(source, pos)
    return tokens

"""Michelson contract parser, macro expander and pretty-printer.

Blocks parse to binary right-nested sequences: ``{ a; b; c }`` becomes
``SEQ(a, SEQ(b, c))``, an empty block is ``NOP`` and a one-element block is
the element itself.
"""

from dataclasses import dataclass, field, replace

from michv import model
from michv.errors import LexError, LiteralError, ParseError
from michv.lexer import TokenKind, tokenize
from michv.model import DataReader, Ty

NO_ARGS = frozenset({
    "CAR", "CDR", "PAIR", "SWAP", "UNIT", "CONS", "SOME", "COMPARE",
    "EQ", "NEQ", "LT", "LE", "GT", "GE",
    "ADD", "SUB", "MUL", "EDIV", "NEG", "ABS", "ISNAT", "INT",
    "AND", "OR", "NOT", "XOR", "MEM", "GET", "UPDATE", "SIZE", "CONCAT", "FAILWITH",
    "SHA256", "SHA512", "BLAKE2B", "HASH_KEY", "CHECK_SIGNATURE", "PACK",
    "AMOUNT", "BALANCE", "NOW", "SENDER", "SOURCE", "SELF", "CHAIN_ID",
    "TRANSFER_TOKENS", "SET_DELEGATE",
})
OPTIONAL_NUM = frozenset({"DUP", "DROP"})
NUM_ARG = frozenset({"DIG", "DUG"})
TYPE_ARG = frozenset({"NIL", "NONE", "LEFT", "RIGHT", "UNPACK"})
TWO_BLOCKS = frozenset({"IF", "IF_LEFT", "IF_NONE", "IF_CONS"})
ONE_BLOCK = frozenset({"LOOP", "LOOP_LEFT", "ITER"})
COMPARISONS = ("EQ", "NEQ", "LT", "LE", "GT", "GE")
MACROS = frozenset({"UNPAIR"} | {"CMP" + c for c in COMPARISONS})

PRIMITIVES = NO_ARGS | OPTIONAL_NUM | NUM_ARG | TYPE_ARG | {"PUSH"}
CONTROL = TWO_BLOCKS | ONE_BLOCK | {"DIP"}
SUPPORTED = PRIMITIVES | CONTROL | MACROS


@dataclass(frozen=True)
class Instr:
    """One instruction node.

    ``args`` holds numeric, type and literal operands; ``blocks`` holds child
    instructions (two for SEQ and the IF family, one for DIP and loops).
    Annotations, spans and the originating macro name are metadata and do not
    take part in equality.
    """

    op: str
    args: tuple = ()
    blocks: tuple = ()
    annots: tuple = field(default=(), compare=False)
    span: tuple = field(default=None, compare=False, repr=False)
    origin: str = field(default=None, compare=False, repr=False)

    def __repr__(self):
        parts = [self.op]
        parts += [repr(a) if not isinstance(a, model.Value) else model.format_value(a)
                  for a in self.args]
        parts += [repr(b) for b in self.blocks]
        return f"{parts[0]}({', '.join(parts[1:])})" if len(parts) > 1 else parts[0]


NOP = Instr("NOP")


def seq(*items):
    """Right-nest *items* into SEQ nodes (NOP when empty)."""
    if not items:
        return NOP
    result = items[-1]
    for item in reversed(items[:-1]):
        result = Instr("SEQ", (), (item, result))
    return result


def flatten(i):
    """Inverse of :func:`seq` along the right spine."""
    out = []
    while i.op == "SEQ":
        out.append(i.blocks[0])
        i = i.blocks[1]
    if i.op != "NOP" or not out:
        out.append(i)
    return out


@dataclass(frozen=True)
class Contract:
    parameter: Ty
    storage: Ty
    code: Instr
    source: str = field(default="", compare=False, repr=False)


# --------------------------------------------------------------------------
# Parsing


class _Parser:
    def __init__(self, tokens, source):
        self.tokens = tokens
        self.source = source
        self.pos = 0

    def peek(self, offset=0):
        i = self.pos + offset
        return self.tokens[i] if i < len(self.tokens) else None

    def error(self, message, tok=None, expected=()):
        tok = tok or self.peek()
        span = tok.span if tok else (len(self.source), len(self.source))
        return ParseError(message, span, self.source, expected)

    def take(self, expected="token"):
        tok = self.peek()
        if tok is None:
            raise self.error(f"unexpected end of input, expected {expected}", expected=(expected,))
        self.pos += 1
        return tok

    def at_punct(self, text):
        tok = self.peek()
        return tok is not None and tok.kind is TokenKind.PUNCT and tok.text == text

    def expect_punct(self, text):
        tok = self.take(repr(text))
        if tok.kind is not TokenKind.PUNCT or tok.text != text:
            raise self.error(f"expected {text!r}, found {tok.text!r}", tok, (text,))
        return tok

    def skip_annots(self):
        out = []
        while self.peek() is not None and self.peek().kind is TokenKind.ANNOT:
            out.append(self.take().text)
        return tuple(out)

    # types ------------------------------------------------------------

    def parse_type(self, arg_position=False):
        tok = self.peek()
        if self.at_punct("("):
            self.take()
            t = self.parse_type()
            self.expect_punct(")")
            return t
        tok = self.take("type")
        if tok.kind is not TokenKind.TYPE or tok.text not in model.ARITY:
            raise self.error(f"expected a type, found {tok.text!r}", tok, ("type",))
        name = tok.text
        self.skip_annots()
        arity = model.ARITY[name]
        if arity == 0:
            return Ty(name)
        if arg_position:
            raise self.error(f"type {name} in argument position must be parenthesised", tok)
        args = [self.parse_type(arg_position=True) for _ in range(arity)]
        if name == "pair":
            # `pair a b c` is the right comb `pair a (pair b c)`
            while self._type_follows():
                args.append(self.parse_type(arg_position=True))
            t = args[-1]
            for a in reversed(args[:-1]):
                t = model.pair(a, t)
            return t
        try:
            return Ty(name, tuple(args))
        except ValueError as exc:
            raise self.error(str(exc), tok) from None

    def _type_follows(self):
        tok = self.peek()
        if tok is None:
            return False
        return tok.kind is TokenKind.TYPE or (tok.kind is TokenKind.PUNCT and tok.text == "(")

    # instructions -----------------------------------------------------

    def parse_block(self):
        start = self.expect_punct("{")
        items = []
        while not self.at_punct("}"):
            items.append(self.parse_instr())
            if self.at_punct(";"):
                self.take()
            elif not self.at_punct("}"):
                tok = self.peek()
                found = tok.text if tok else "end of input"
                raise self.error(f"expected ';' or '}}', found {found!r}", tok, (";", "}"))
        end = self.take()
        block = seq(*items)
        if block.op == "NOP":
            return replace(block, span=(start.span[0], end.span[1]))
        return block

    def parse_num(self, opcode):
        tok = self.take("number")
        if tok.kind is not TokenKind.INT or int(tok.text) < 0:
            raise self.error(f"{opcode} expects a natural number argument", tok, ("number",))
        return int(tok.text)

    def parse_instr(self):
        if self.at_punct("{"):
            return self.parse_block()
        tok = self.take("instruction")
        if tok.kind is not TokenKind.INSTR:
            raise self.error(f"expected an instruction, found {tok.text!r}", tok, ("instruction",))
        op = tok.text
        if op not in SUPPORTED:
            raise self.error(f"unsupported instruction {op}", tok)
        annots = self.skip_annots()
        args, blocks = (), ()
        if op in NO_ARGS or op in MACROS:
            pass
        elif op in OPTIONAL_NUM:
            nxt = self.peek()
            if nxt is not None and nxt.kind is TokenKind.INT:
                args = (self.parse_num(op),)
        elif op in NUM_ARG:
            args = (self.parse_num(op),)
        elif op in TYPE_ARG:
            args = (self.parse_type(arg_position=True),)
        elif op == "PUSH":
            ty = self.parse_type(arg_position=True)
            reader = DataReader(self.tokens, self.source, self.pos)
            try:
                value = reader.read(ty, arg_position=True)
            except LiteralError as exc:
                raise ParseError(exc.message, exc.span, self.source) from None
            self.pos = reader.pos
            args = (ty, value)
        elif op == "DIP":
            nxt = self.peek()
            if nxt is not None and nxt.kind is TokenKind.INT:
                args = (self.parse_num(op),)
            blocks = (self.parse_block(),)
        elif op in ONE_BLOCK:
            blocks = (self.parse_block(),)
        elif op in TWO_BLOCKS:
            blocks = (self.parse_block(), self.parse_block())
        end = self.tokens[self.pos - 1].span[1]
        return Instr(op, args, blocks, annots, (tok.span[0], end))

    # contract ---------------------------------------------------------

    def parse_contract(self):
        sections = {}
        while self.peek() is not None:
            tok = self.take("section")
            if tok.kind is not TokenKind.KEYWORD or tok.text not in ("parameter", "storage", "code"):
                raise self.error(f"expected a section keyword, found {tok.text!r}", tok,
                                 ("parameter", "storage", "code"))
            if tok.text in sections:
                raise self.error(f"duplicate {tok.text} section", tok)
            if tok.text == "code":
                sections["code"] = self.parse_block()
            else:
                self.skip_annots()
                sections[tok.text] = self.parse_type()
            if self.at_punct(";"):
                self.take()
            elif self.peek() is not None:
                raise self.error(f"expected ';' after {tok.text} section", self.peek(), (";",))
        missing = [s for s in ("parameter", "storage", "code") if s not in sections]
        if missing:
            raise self.error(f"missing {missing[0]} section", None)
        return Contract(sections["parameter"], sections["storage"], sections["code"], self.source)


def parse_contract(tokens, source=""):
    """Parse a token sequence into a :class:`Contract`."""
    return _Parser(list(tokens), source).parse_contract()


def parse_source(source):
    """Tokenize and parse contract text."""
    try:
        tokens = tokenize(source)
    except LexError as exc:
        raise ParseError(exc.message, exc.span, source) from None
    return parse_contract(tokens, source)


def parse_code(source):
    """Parse a bare instruction block such as ``{ CDR; NIL operation; PAIR }``."""
    p = _Parser(tokenize(source), source)
    block = p.parse_block()
    if p.peek() is not None:
        raise p.error(f"trailing input {p.peek().text!r}")
    return block


def parse_type(source):
    p = _Parser(tokenize(source), source)
    t = p.parse_type()
    if p.peek() is not None:
        raise p.error(f"trailing input {p.peek().text!r}")
    return t


# --------------------------------------------------------------------------
# Macros


def _expand_one(i):
    if i.op == "UNPAIR":
        body = seq(Instr("DUP"), Instr("CAR"), Instr("DIP", (), (Instr("CDR"),)))
    else:
        body = seq(Instr("COMPARE"), Instr(i.op[3:]))
    return replace(body, span=i.span, origin=i.op, annots=i.annots)


def expand_macros(i):
    """Replace macro instructions by their core expansions (idempotent)."""
    if i.op in MACROS:
        return _expand_one(i)
    if not i.blocks:
        return i
    blocks = tuple(expand_macros(b) for b in i.blocks)
    if blocks == i.blocks and all(a is b for a, b in zip(blocks, i.blocks)):
        return i
    return replace(i, blocks=blocks)


def expand_contract(c):
    return replace(c, code=expand_macros(c.code))


def contains_macro(i):
    return i.op in MACROS or any(contains_macro(b) for b in i.blocks)


# --------------------------------------------------------------------------
# Printing


def _format_type_arg(t):
    return f"({t})" if t.args else str(t)


def _format_head(i):
    parts = [i.op, *i.annots]
    if i.op == "PUSH":
        ty, value = i.args
        parts += [_format_type_arg(ty), model.format_atom(value)]
    else:
        for a in i.args:
            parts.append(_format_type_arg(a) if isinstance(a, Ty) else str(a))
    return " ".join(parts)


def format_block(i, col=0):
    """Render *i* as a braced block whose ``{`` sits at column *col*."""
    items = flatten(i)
    if i.op == "NOP":
        return "{}"
    lines = [format_instr(x, col + 2) for x in items]
    pad = "\n" + " " * (col + 2)
    return "{ " + (";" + pad).join(lines) + " }"


def format_instr(i, col=0):
    if i.op in ("SEQ", "NOP"):
        return format_block(i, col)
    head = _format_head(i)
    if not i.blocks:
        return head
    block_col = col + len(head) + 1
    blocks = [format_block(b, block_col) for b in i.blocks]
    return head + " " + ("\n" + " " * block_col).join(blocks)


def pretty_print(c):
    """Render a contract in canonical section order."""
    code = format_block(c.code, len("code "))
    return f"parameter {c.parameter};\nstorage {c.storage};\ncode {code};\n"

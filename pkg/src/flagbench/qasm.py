"""Minimal OpenQASM-2-style reader and writer.

The grammar is documented in ``docs/qasm_grammar.md``. Besides the standard
gate set, ``measure_x`` and ``measure_y`` record measurements in the X and Y
bases so basis information survives a round trip.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .circuit import GATE_SPECS, Circuit, Instruction

HEADER = 'OPENQASM 2.0;\ninclude "qelib1.inc";\n'
_MEASURE_OPS = {"measure": "Z", "measure_x": "X", "measure_y": "Y"}
_BASIS_OP = {v: k for k, v in _MEASURE_OPS.items()}


class SourceError(ValueError):
    """Parse failure pointing at a 1-based line and column."""

    def __init__(self, line: int, column: int, message: str):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column
        self.message = message


_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"[^"\n]*")
  | (?P<op>->|==|[\[\](){};,+\-*/])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise SourceError(line, pos - line_start + 1, f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        chunk = m.group()
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, chunk, line, pos - line_start + 1))
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0
        self.qreg: tuple[str, int] | None = None
        self.creg: tuple[str, int] | None = None
        self.items: list[tuple[Token, Instruction]] = []

    # -- helpers ----------------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, message: str, tok: Token | None = None):
        tok = tok or self.tok
        raise SourceError(tok.line, tok.col, message)

    def take(self, text: str | None = None, kind: str | None = None) -> Token:
        t = self.tok
        if (text is not None and t.text != text) or (kind is not None and t.kind != kind):
            want = repr(text) if text is not None else kind
            got = repr(t.text) if t.kind != "eof" else "end of input"
            self.error(f"expected {want}, found {got}")
        self.i += 1
        return t

    def accept(self, text: str) -> bool:
        if self.tok.text == text:
            self.i += 1
            return True
        return False

    # -- expressions --------------------------------------------------------
    def expr(self) -> float:
        v = self.term()
        while self.tok.text in "+-" and self.tok.kind == "op":
            op = self.take().text
            rhs = self.term()
            v = v + rhs if op == "+" else v - rhs
        return v

    def term(self) -> float:
        v = self.unary()
        while self.tok.text in ("*", "/"):
            op_tok = self.take()
            rhs = self.unary()
            if op_tok.text == "*":
                v *= rhs
            else:
                if rhs == 0:
                    self.error("division by zero", op_tok)
                v /= rhs
        return v

    def unary(self) -> float:
        if self.accept("-"):
            return -self.unary()
        if self.accept("+"):
            return self.unary()
        t = self.tok
        if t.kind == "number":
            self.i += 1
            return float(t.text)
        if t.kind == "ident" and t.text == "pi":
            self.i += 1
            return math.pi
        if self.accept("("):
            v = self.expr()
            self.take(")")
            return v
        self.error(f"malformed parameter expression at {t.text!r}" if t.kind != "eof" else "unexpected end of input")

    # -- operands -----------------------------------------------------------
    def reg_index(self, which: str) -> int:
        reg = self.qreg if which == "q" else self.creg
        name_tok = self.take(kind="ident")
        if reg is None or name_tok.text != reg[0]:
            self.error(f"undeclared register {name_tok.text!r}", name_tok)
        self.take("[")
        idx_tok = self.take(kind="number")
        if not idx_tok.text.isdigit():
            self.error("register index must be a nonnegative integer", idx_tok)
        idx = int(idx_tok.text)
        if idx >= reg[1]:
            self.error(f"index {idx} out of range for register {reg[0]}[{reg[1]}]", idx_tok)
        self.take("]")
        return idx

    def declaration(self, kind: str):
        self.take(kind)
        name = self.take(kind="ident")
        self.take("[")
        size_tok = self.take(kind="number")
        if not size_tok.text.isdigit():
            self.error("register size must be an integer", size_tok)
        self.take("]")
        self.take(";")
        existing = self.qreg if kind == "qreg" else self.creg
        if existing is not None:
            self.error(f"only one {kind} is supported", name)
        if kind == "qreg":
            self.qreg = (name.text, int(size_tok.text))
        else:
            self.creg = (name.text, int(size_tok.text))

    # -- statements ---------------------------------------------------------
    def statement(self):
        t = self.tok
        if t.text == "OPENQASM":
            self.i += 1
            self.take(kind="number")
            self.take(";")
            return
        if t.text == "include":
            self.i += 1
            self.take(kind="string")
            self.take(";")
            return
        if t.text in ("qreg", "creg"):
            self.declaration(t.text)
            return
        if t.kind != "ident":
            self.error(f"unexpected {t.text!r}")
        if self.qreg is None:
            self.error("qreg must be declared before use")
        if t.text == "if":
            self.i += 1
            self.take("(")
            bit = self.reg_index("c")
            self.take("==")
            val = self.take(kind="number")
            if val.text != "1":
                self.error("only conditions of the form c[k]==1 are supported", val)
            self.take(")")
            start = self.tok
            if start.text not in GATE_SPECS:
                self.error(f"only gates may be conditioned, found {start.text!r}", start)
            self.items.append((start, self.gate(condition=bit)))
            return
        if t.text in _MEASURE_OPS:
            self.i += 1
            q = self.reg_index("q")
            self.take("->")
            c = self.reg_index("c")
            self.take(";")
            self.items.append((t, Instruction.measure(q, c, _MEASURE_OPS[t.text])))
            return
        if t.text == "reset":
            self.i += 1
            q = self.reg_index("q")
            self.take(";")
            self.items.append((t, Instruction.reset(q)))
            return
        if t.text == "barrier":
            self.i += 1
            if self.tok.text == self.qreg[0] and self.toks[self.i + 1].text != "[":
                self.i += 1
                qubits = list(range(self.qreg[1]))
            else:
                qubits = [self.reg_index("q")]
                while self.accept(","):
                    qubits.append(self.reg_index("q"))
            self.take(";")
            self.items.append((t, Instruction.barrier(qubits)))
            return
        self.items.append((t, self.gate()))

    def gate(self, condition: int | None = None) -> Instruction:
        name = self.take(kind="ident")
        if name.text not in GATE_SPECS:
            self.error(f"unknown gate {name.text!r}", name)
        nq, npar = GATE_SPECS[name.text]
        params = []
        if self.accept("("):
            if self.tok.text != ")":
                params.append(self.expr())
                while self.accept(","):
                    params.append(self.expr())
            self.take(")")
        if len(params) != npar:
            self.error(f"gate {name.text!r} takes {npar} parameter(s), got {len(params)}", name)
        qubits = [self.reg_index("q")]
        while self.accept(","):
            qubits.append(self.reg_index("q"))
        if len(qubits) != nq:
            self.error(f"gate {name.text!r} acts on {nq} qubit(s), got {len(qubits)}", name)
        self.take(";")
        return Instruction.gate(name.text, qubits, params, condition)

    def parse(self) -> Circuit:
        while self.tok.kind != "eof":
            self.statement()
        if self.qreg is None:
            raise SourceError(1, 1, "no qreg declared")
        c = Circuit(self.qreg[1], self.creg[1] if self.creg else 0)
        c.metadata["qreg"] = self.qreg[0]
        c.metadata["creg"] = self.creg[0] if self.creg else "c"
        for tok, ins in self.items:
            try:
                c.append(ins)
            except ValueError as exc:
                raise SourceError(tok.line, tok.col, str(exc)) from exc
        return c


def parse(text: str) -> Circuit:
    """Parse QASM text into a :class:`Circuit`; errors raise :class:`SourceError`."""
    return _Parser(text).parse()


def load(path) -> Circuit:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


_PI_DENOMS = (1, 2, 3, 4, 6, 8)


def format_param(x: float) -> str:
    """12-significant-digit literal, or a symbolic multiple of pi when exact."""
    if x == 0:
        return "0"
    for d in _PI_DENOMS:
        k = x * d / math.pi
        r = round(k)
        if r != 0 and abs(k - r) < 1e-12 and abs(r) <= 64:
            sign = "-" if r < 0 else ""
            num = "pi" if abs(r) == 1 else f"{abs(r)}*pi"
            return f"{sign}{num}" if d == 1 else f"{sign}{num}/{d}"
    return format(x, ".12g")


def _format_ins(ins: Instruction) -> str:
    if ins.kind == "gate":
        head = ins.name
        if ins.params:
            head += "(" + ",".join(format_param(p) for p in ins.params) + ")"
        line = head + " " + ",".join(f"q[{q}]" for q in ins.qubits) + ";"
        if ins.condition is not None:
            line = f"if(c[{ins.condition}]==1) " + line
        return line
    if ins.kind == "measure":
        return f"{_BASIS_OP[ins.basis]} q[{ins.qubits[0]}] -> c[{ins.clbit}];"
    if ins.kind == "reset":
        return f"reset q[{ins.qubits[0]}];"
    if ins.kind == "barrier":
        return "barrier " + ",".join(f"q[{q}]" for q in ins.qubits) + ";"
    raise ValueError(f"cannot serialize instruction kind {ins.kind!r}")


def serialize(c: Circuit) -> str:
    """Canonical text: header, registers, then one instruction per line."""
    c.validate()
    lines = [HEADER.rstrip("\n"), f"qreg q[{c.num_qubits}];"]
    if c.num_clbits:
        lines.append(f"creg c[{c.num_clbits}];")
    lines.extend(_format_ins(ins) for ins in c.instructions)
    return "\n".join(lines) + "\n"


def dump(c: Circuit, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize(c))

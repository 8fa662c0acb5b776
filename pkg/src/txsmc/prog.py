"""Transactional program model and the `.tpl` surface language.

A program declares shared variables and a list of processes.  Each process
is a sequence of transactions, and each transaction is a block of
instructions over process-local registers and shared variables.

    var x; var y;
    process p1 {
      transaction { x := 1; y := 1; }
    }
    process p2 {
      transaction { r1 := y; r2 := x; assert(!(r1 == 1 && r2 == 0)); }
    }

Bounded `for` loops are expanded during parsing, so the Program values
handed to the explorer never contain loops.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Union

MASK64 = (1 << 64) - 1
DEFAULT_UNROLL = 4


def wrap64(value: int) -> int:
    value &= MASK64
    return value - (1 << 64) if value >> 63 else value


# ---------------------------------------------------------------------------
# expressions


@dataclass(frozen=True)
class Const:
    value: int


@dataclass(frozen=True)
class Reg:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class UnOp:
    op: str  # "!" or "-"
    operand: "Expr"


Expr = Union[Const, Reg, BinOp, UnOp]

BINARY_OPS = ("||", "&&", "==", "!=", "<", "<=", ">", ">=", "+", "-", "*")


def eval_expr(e: Expr, regs: dict[str, int]) -> int:
    """Evaluate over 64-bit two's complement integers; truth values are 0/1."""
    if isinstance(e, Const):
        return wrap64(e.value)
    if isinstance(e, Reg):
        return regs.get(e.name, 0)
    if isinstance(e, UnOp):
        v = eval_expr(e.operand, regs)
        return int(v == 0) if e.op == "!" else wrap64(-v)
    op = e.op
    a = eval_expr(e.left, regs)
    # && and || short-circuit; registers have no side effects so this is
    # only a speed matter
    if op == "&&":
        return int(a != 0 and eval_expr(e.right, regs) != 0)
    if op == "||":
        return int(a != 0 or eval_expr(e.right, regs) != 0)
    b = eval_expr(e.right, regs)
    if op == "+":
        return wrap64(a + b)
    if op == "-":
        return wrap64(a - b)
    if op == "*":
        return wrap64(a * b)
    if op == "==":
        return int(a == b)
    if op == "!=":
        return int(a != b)
    if op == "<":
        return int(a < b)
    if op == "<=":
        return int(a <= b)
    if op == ">":
        return int(a > b)
    if op == ">=":
        return int(a >= b)
    raise ValueError(f"unknown operator {op!r}")


def expr_registers(e: Expr) -> Iterator[str]:
    if isinstance(e, Reg):
        yield e.name
    elif isinstance(e, UnOp):
        yield from expr_registers(e.operand)
    elif isinstance(e, BinOp):
        yield from expr_registers(e.left)
        yield from expr_registers(e.right)


# ---------------------------------------------------------------------------
# instructions


@dataclass(frozen=True)
class SharedWrite:
    var: str
    expr: Expr


@dataclass(frozen=True)
class SharedRead:
    reg: str
    var: str


@dataclass(frozen=True)
class Assign:
    reg: str
    expr: Expr


@dataclass(frozen=True)
class Assert:
    expr: Expr
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Assume:
    expr: Expr


@dataclass(frozen=True)
class If:
    cond: Expr
    then: tuple["Instruction", ...]
    orelse: tuple["Instruction", ...] = ()


@dataclass(frozen=True)
class For:
    var: str
    lo: int
    hi: int
    body: tuple["Instruction", ...]


Instruction = Union[SharedWrite, SharedRead, Assign, Assert, Assume, If, For]


@dataclass(frozen=True)
class Transaction:
    body: tuple[Instruction, ...]
    name: str | None = None


@dataclass(frozen=True)
class Process:
    name: str
    transactions: tuple[Transaction, ...]


@dataclass(frozen=True)
class Program:
    shared_vars: tuple[str, ...]
    processes: tuple[Process, ...]
    name: str = field(default="", compare=False)

    def transaction(self, proc: int, pos: int) -> Transaction:
        return self.processes[proc].transactions[pos]

    @property
    def n_transactions(self) -> int:
        return sum(len(p.transactions) for p in self.processes)

    def label(self, proc: int, pos: int) -> str:
        """Human-facing name of a transaction, falling back to p<i>.t<j>."""
        t = self.processes[proc].transactions[pos]
        return t.name or f"p{proc}.t{pos}"


class ParseError(ValueError):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {msg}" if line else msg)
        self.line = line
        self.col = col


# ---------------------------------------------------------------------------
# lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>:=|\.\.|==|!=|<=|>=|&&|\|\||[-+*<>!(){};])
    """,
    re.VERBOSE,
)

KEYWORDS = {"var", "process", "transaction", "assert", "assume", "if", "else", "for", "in"}


@dataclass(frozen=True)
class Token:
    kind: str  # "int", "ident", "op", "kw", "eof"
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    out: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "ident":
            word = m.group()
            out.append(Token("kw" if word in KEYWORDS else "ident", word, line, col))
        elif kind in ("int", "op"):
            out.append(Token(kind, m.group(), line, col))
        pos = m.end()
    out.append(Token("eof", "", line, pos - line_start + 1))
    return out


# ---------------------------------------------------------------------------
# parser

_PRECEDENCE = [("||",), ("&&",), ("==", "!="), ("<", "<=", ">", ">="), ("+", "-"), ("*",)]


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        self.shared: list[str] = []
        # registers assigned so far in the current process, in text order
        self.regs: set[str] = set()

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.tok
        return ParseError(msg, tok.line, tok.col)

    def accept(self, text: str) -> bool:
        if self.tok.text == text and self.tok.kind in ("op", "kw"):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        tok = self.tok
        if not self.accept(text):
            found = tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        return tok

    def ident(self) -> Token:
        tok = self.tok
        if tok.kind != "ident":
            raise self.error(f"expected identifier, found {tok.text or 'end of input'!r}")
        self.i += 1
        return tok

    def integer(self) -> int:
        neg = self.accept("-")
        tok = self.tok
        if tok.kind != "int":
            raise self.error("expected integer literal")
        self.i += 1
        return -int(tok.text) if neg else int(tok.text)

    # program structure

    def program(self) -> tuple[tuple[str, ...], list[tuple[str, list[tuple[str | None, list]]]]]:
        while self.tok.text == "var" and self.tok.kind == "kw":
            self.i += 1
            name = self.ident()
            if name.text in self.shared:
                raise self.error(f"duplicate variable {name.text!r}", name)
            self.shared.append(name.text)
            self.expect(";")
        if not self.shared:
            raise self.error("program must declare at least one shared variable")
        procs = []
        seen = set()
        while self.tok.kind != "eof":
            self.expect("process")
            pname = self.ident()
            if pname.text in seen:
                raise self.error(f"duplicate process {pname.text!r}", pname)
            seen.add(pname.text)
            self.regs = set()
            self.expect("{")
            txns = []
            while not self.accept("}"):
                self.expect("transaction")
                tname = self.ident().text if self.tok.kind == "ident" else None
                self.expect("{")
                txns.append((tname, self.block_body()))
            if not txns:
                raise self.error(f"process {pname.text!r} has no transactions", pname)
            procs.append((pname.text, txns))
        if not procs:
            raise self.error("program has no processes")
        return tuple(self.shared), procs

    def block_body(self) -> list:
        stmts = []
        while not self.accept("}"):
            if self.tok.kind == "eof":
                raise self.error("unterminated block")
            stmts.append(self.stmt())
        return stmts

    def stmt(self):
        tok = self.tok
        if self.accept("assert"):
            self.expect("(")
            e = self.expr()
            self.expect(")")
            self.expect(";")
            return Assert(e, tok.line)
        if self.accept("assume"):
            self.expect("(")
            e = self.expr()
            self.expect(")")
            self.expect(";")
            return Assume(e)
        if self.accept("if"):
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            self.expect("{")
            then = tuple(self.block_body())
            orelse: tuple = ()
            if self.accept("else"):
                self.expect("{")
                orelse = tuple(self.block_body())
            return If(cond, then, orelse)
        if self.accept("for"):
            var = self.ident()
            if var.text in self.shared:
                raise self.error(f"loop variable {var.text!r} is a shared variable", var)
            self.expect("in")
            lo = self.integer()
            self.expect("..")
            hi = self.integer()
            self.expect("{")
            fresh = var.text not in self.regs
            self.regs.add(var.text)
            body = tuple(self.block_body())
            if fresh:
                self.regs.discard(var.text)
            return For(var.text, lo, hi, body)
        target = self.ident()
        self.expect(":=")
        # bare shared variable on the right-hand side is a read
        if self.tok.kind == "ident" and self.tok.text in self.shared and self.toks[self.i + 1].text == ";":
            src = self.ident()
            self.expect(";")
            if target.text in self.shared:
                raise self.error("cannot copy one shared variable into another directly", src)
            self.regs.add(target.text)
            return SharedRead(target.text, src.text)
        e = self.expr()
        self.expect(";")
        if target.text in self.shared:
            return SharedWrite(target.text, e)
        self.regs.add(target.text)
        return Assign(target.text, e)

    # expressions, precedence climbing

    def expr(self, level: int = 0) -> Expr:
        if level == len(_PRECEDENCE):
            return self.unary()
        left = self.expr(level + 1)
        while self.tok.kind == "op" and self.tok.text in _PRECEDENCE[level]:
            op = self.tok.text
            self.i += 1
            left = BinOp(op, left, self.expr(level + 1))
        return left

    def unary(self) -> Expr:
        if self.accept("!"):
            return UnOp("!", self.unary())
        if self.accept("-"):
            operand = self.unary()
            if isinstance(operand, Const):
                return Const(-operand.value)
            return UnOp("-", operand)
        tok = self.tok
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if tok.kind == "int":
            self.i += 1
            return Const(int(tok.text))
        if tok.kind == "ident":
            self.i += 1
            if tok.text in self.shared:
                raise self.error(
                    f"shared variable {tok.text!r} used inside an expression; read it into a register first", tok
                )
            if tok.text not in self.regs:
                raise self.error(f"undeclared variable {tok.text!r}", tok)
            return Reg(tok.text)
        raise self.error(f"unexpected token {tok.text or 'end of input'!r} in expression")


def _check_declared(body, shared: set[str]) -> None:
    for ins in body:
        if isinstance(ins, (SharedWrite, SharedRead)) and ins.var not in shared:
            raise ParseError(f"undeclared shared variable {ins.var!r}")
        if isinstance(ins, If):
            _check_declared(ins.then, shared)
            _check_declared(ins.orelse, shared)
        if isinstance(ins, For):
            _check_declared(ins.body, shared)


def parse_program(text: str, unroll_bound: int = DEFAULT_UNROLL, name: str = "") -> Program:
    """Parse `.tpl` source into a loop-free Program."""
    p = _Parser(text)
    shared, procs = p.program()
    processes = tuple(
        Process(pname, tuple(Transaction(tuple(body), tname) for tname, body in txns)) for pname, txns in procs
    )
    prog = Program(shared, processes, name)
    return unroll(prog, unroll_bound)


def parse_file(path, unroll_bound: int = DEFAULT_UNROLL) -> Program:
    from pathlib import Path

    path = Path(path)
    return parse_program(path.read_text(encoding="utf-8"), unroll_bound, name=path.stem)


# ---------------------------------------------------------------------------
# loop unrolling


def _subst(e: Expr, var: str, value: int) -> Expr:
    if isinstance(e, Reg):
        return Const(value) if e.name == var else e
    if isinstance(e, UnOp):
        return UnOp(e.op, _subst(e.operand, var, value))
    if isinstance(e, BinOp):
        return BinOp(e.op, _subst(e.left, var, value), _subst(e.right, var, value))
    return e


def _subst_ins(ins: Instruction, var: str, value: int) -> Instruction:
    if isinstance(ins, SharedWrite):
        return SharedWrite(ins.var, _subst(ins.expr, var, value))
    if isinstance(ins, (SharedRead, Assign)):
        if ins.reg == var:
            raise ParseError(f"loop variable {var!r} assigned inside its loop")
        if isinstance(ins, Assign):
            return Assign(ins.reg, _subst(ins.expr, var, value))
        return ins
    if isinstance(ins, Assert):
        return Assert(_subst(ins.expr, var, value), ins.line)
    if isinstance(ins, Assume):
        return Assume(_subst(ins.expr, var, value))
    if isinstance(ins, If):
        return If(
            _subst(ins.cond, var, value),
            tuple(_subst_ins(i, var, value) for i in ins.then),
            tuple(_subst_ins(i, var, value) for i in ins.orelse),
        )
    if isinstance(ins, For):
        if ins.var == var:
            return ins
        return For(ins.var, ins.lo, ins.hi, tuple(_subst_ins(i, var, value) for i in ins.body))
    raise TypeError(ins)


def _unroll_body(body, bound: int) -> tuple[Instruction, ...]:
    out: list[Instruction] = []
    for ins in body:
        if isinstance(ins, For):
            if not isinstance(ins.lo, int) or not isinstance(ins.hi, int):
                raise ParseError("loop bounds must be integer constants")
            n = max(0, min(ins.hi - ins.lo, bound))
            for k in range(ins.lo, ins.lo + n):
                # unroll inner loops first so substitution sees plain code
                inner = _unroll_body(ins.body, bound)
                out.extend(_subst_ins(i, ins.var, k) for i in inner)
        elif isinstance(ins, If):
            out.append(If(ins.cond, _unroll_body(ins.then, bound), _unroll_body(ins.orelse, bound)))
        else:
            out.append(ins)
    return tuple(out)


def unroll(prog: Program, bound: int = DEFAULT_UNROLL) -> Program:
    """Expand every `for` loop, keeping at most `bound` iterations of each."""
    if bound < 1:
        raise ValueError("unroll bound must be positive")
    shared = set(prog.shared_vars)
    procs = []
    for proc in prog.processes:
        txns = []
        for t in proc.transactions:
            _check_declared(t.body, shared)
            txns.append(Transaction(_unroll_body(t.body, bound), t.name))
        procs.append(Process(proc.name, tuple(txns)))
    return Program(prog.shared_vars, tuple(procs), prog.name)


def contains_loops(body) -> bool:
    for ins in body:
        if isinstance(ins, For):
            return True
        if isinstance(ins, If) and (contains_loops(ins.then) or contains_loops(ins.orelse)):
            return True
    return False


# ---------------------------------------------------------------------------
# pretty printing

_LEVEL = {op: i for i, ops in enumerate(_PRECEDENCE) for op in ops}


def format_expr(e: Expr, parent: int = -1) -> str:
    if isinstance(e, Const):
        return str(e.value) if e.value >= 0 else f"({e.value})"
    if isinstance(e, Reg):
        return e.name
    if isinstance(e, UnOp):
        return f"{e.op}{format_expr(e.operand, len(_PRECEDENCE))}"
    lvl = _LEVEL[e.op]
    # left-associative: the right operand needs parens at equal precedence
    s = f"{format_expr(e.left, lvl)} {e.op} {format_expr(e.right, lvl + 1)}"
    return f"({s})" if lvl < parent else s


def _format_body(body, indent: str) -> list[str]:
    lines = []
    for ins in body:
        if isinstance(ins, SharedWrite):
            lines.append(f"{indent}{ins.var} := {format_expr(ins.expr)};")
        elif isinstance(ins, SharedRead):
            lines.append(f"{indent}{ins.reg} := {ins.var};")
        elif isinstance(ins, Assign):
            lines.append(f"{indent}{ins.reg} := {format_expr(ins.expr)};")
        elif isinstance(ins, Assert):
            lines.append(f"{indent}assert({format_expr(ins.expr)});")
        elif isinstance(ins, Assume):
            lines.append(f"{indent}assume({format_expr(ins.expr)});")
        elif isinstance(ins, If):
            lines.append(f"{indent}if ({format_expr(ins.cond)}) {{")
            lines += _format_body(ins.then, indent + "  ")
            if ins.orelse:
                lines.append(f"{indent}}} else {{")
                lines += _format_body(ins.orelse, indent + "  ")
            lines.append(f"{indent}}}")
        elif isinstance(ins, For):
            lines.append(f"{indent}for {ins.var} in {ins.lo}..{ins.hi} {{")
            lines += _format_body(ins.body, indent + "  ")
            lines.append(f"{indent}}}")
    return lines


def format_program(prog: Program) -> str:
    lines = [f"var {v};" for v in prog.shared_vars]
    for proc in prog.processes:
        lines.append(f"process {proc.name} {{")
        for t in proc.transactions:
            head = f"transaction {t.name} {{" if t.name else "transaction {"
            lines.append("  " + head)
            lines += _format_body(t.body, "    ")
            lines.append("  }")
        lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# flat code for step-wise execution
#
# Transaction bodies are compiled to a list of ops with explicit jumps so that
# an explorer can suspend at a shared access and resume later from a plain
# integer program counter.

# op shapes: ("write", var, expr) ("read", reg, var) ("assign", reg, expr)
# ("assert", expr, line) ("assume", expr) ("jz", expr, target) ("jmp", target)


def compile_body(body) -> tuple[tuple, ...]:
    code: list[tuple] = []

    def emit(instrs):
        for ins in instrs:
            if isinstance(ins, SharedWrite):
                code.append(("write", ins.var, ins.expr))
            elif isinstance(ins, SharedRead):
                code.append(("read", ins.reg, ins.var))
            elif isinstance(ins, Assign):
                code.append(("assign", ins.reg, ins.expr))
            elif isinstance(ins, Assert):
                code.append(("assert", ins.expr, ins.line))
            elif isinstance(ins, Assume):
                code.append(("assume", ins.expr))
            elif isinstance(ins, If):
                jz = len(code)
                code.append(None)
                emit(ins.then)
                if ins.orelse:
                    jmp = len(code)
                    code.append(None)
                    code[jz] = ("jz", ins.cond, len(code))
                    emit(ins.orelse)
                    code[jmp] = ("jmp", len(code))
                else:
                    code[jz] = ("jz", ins.cond, len(code))
            else:
                raise TypeError(f"cannot compile {type(ins).__name__}; unroll loops first")

    emit(body)
    return tuple(code)

"""Scalar expressions over chart coordinates.

A tiny expression language: decimal literals, named symbols, the four
arithmetic operators, integer powers and ``sin cos exp log sqrt``.
Expressions are immutable trees (shared subtrees make them DAGs once
differentiated), they evaluate to IEEE doubles and differentiate exactly.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | power
    power  := base ('^' ['-'] intlit)?
    base   := number | ident | ident '(' expr ')' | '(' expr ')'
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

FUNCTIONS: dict[str, Callable[[float], float]] = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
}


class ExpressionError(ValueError):
    """Base class for expression errors."""


class ExpressionSyntaxError(ExpressionError):
    def __init__(self, message: str, position: int, text: str = ""):
        self.position = position
        self.text = text
        self.message = message
        super().__init__(f"{message} at position {position}")


class UnknownIdentifierError(ExpressionSyntaxError):
    pass


class ExprDomainError(ExpressionError, ArithmeticError):
    """Raised when evaluation leaves the domain of an operation."""

    def __init__(self, message: str, node: "Expression"):
        self.node = node
        super().__init__(f"{message} in '{node}'")


class Expression:
    """Base node. Subclasses are frozen dataclasses."""

    __slots__ = ()
    precedence = 5

    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        if not isinstance(exponent, int):
            raise ExpressionError("exponent must be an integer")
        return power(self, exponent)

    def __str__(self) -> str:
        return to_text(self)

    def evaluate(self, point: Mapping[str, float]) -> float:
        return evaluate(self, point)

    def diff(self, var: str) -> "Expression":
        return differentiate(self, var)


@dataclass(frozen=True, slots=True)
class Num(Expression):
    value: float

    @property
    def precedence(self):
        return 3 if self.value < 0 else 5


@dataclass(frozen=True, slots=True)
class Sym(Expression):
    name: str


@dataclass(frozen=True, slots=True)
class Neg(Expression):
    arg: Expression
    precedence = 3


@dataclass(frozen=True, slots=True)
class BinOp(Expression):
    op: str
    left: Expression
    right: Expression

    @property
    def precedence(self):
        return 1 if self.op in "+-" else 2


@dataclass(frozen=True, slots=True)
class Pow(Expression):
    base: Expression
    exponent: int
    precedence = 4


@dataclass(frozen=True, slots=True)
class Call(Expression):
    func: str
    arg: Expression


ZERO = Num(0.0)
ONE = Num(1.0)


def as_expr(value) -> Expression:
    if isinstance(value, Expression):
        return value
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return Num(float(value))
    raise TypeError(f"cannot convert {value!r} to an Expression")


def is_zero(e: Expression) -> bool:
    return isinstance(e, Num) and e.value == 0.0


def _is_one(e: Expression) -> bool:
    return isinstance(e, Num) and e.value == 1.0


# -- smart constructors (constant folding only where it is exact) -----------

def add(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    if is_zero(a):
        return b
    if is_zero(b):
        return a
    return BinOp("+", a, b)


def sub(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    if is_zero(b):
        return a
    if is_zero(a):
        return neg(b)
    return BinOp("-", a, b)


def mul(a: Expression, b: Expression) -> Expression:
    if is_zero(a) or is_zero(b):
        return ZERO
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    if _is_one(a):
        return b
    if _is_one(b):
        return a
    if isinstance(a, Num) and a.value == -1.0:
        return neg(b)
    if isinstance(b, Num) and b.value == -1.0:
        return neg(a)
    return BinOp("*", a, b)


def div(a: Expression, b: Expression) -> Expression:
    if is_zero(a) and not is_zero(b):
        return ZERO
    if isinstance(a, Num) and isinstance(b, Num) and b.value != 0.0:
        return Num(a.value / b.value)
    if _is_one(b):
        return a
    return BinOp("/", a, b)


def neg(a: Expression) -> Expression:
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def power(base: Expression, exponent: int) -> Expression:
    if exponent == 0:
        return ONE
    if exponent == 1:
        return base
    if isinstance(base, Num):
        try:
            return Num(base.value ** exponent)
        except (ZeroDivisionError, OverflowError):
            pass
    return Pow(base, exponent)


def call(func: str, arg: Expression) -> Expression:
    if func not in FUNCTIONS:
        raise ExpressionError(f"unknown function {func!r}")
    if isinstance(arg, Num):
        try:
            return Num(FUNCTIONS[func](arg.value))
        except (ValueError, OverflowError):
            pass
    return Call(func, arg)


def sym(name: str) -> Sym:
    return Sym(name)


def const(value: float) -> Num:
    return Num(float(value))


def total(terms: Iterable[Expression]) -> Expression:
    acc: Expression = ZERO
    for t in terms:
        acc = add(acc, t)
    return acc


# -- parsing ----------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            bad = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExpressionSyntaxError(f"unexpected character {text[bad]!r}", bad, text)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, names: frozenset[str]):
        self.text = text
        self.names = names
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.take()
        if val != value or kind not in ("op",):
            found = "end of input" if kind == "end" else repr(val)
            raise ExpressionSyntaxError(f"expected {value!r}, found {found}", pos, self.text)

    def error(self, message: str, pos: int):
        return ExpressionSyntaxError(message, pos, self.text)

    def parse(self) -> Expression:
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise self.error(f"unexpected token {val!r}", pos)
        return e

    def expr(self) -> Expression:
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            e = BinOp(op, e, self.term())
        return e

    def term(self) -> Expression:
        e = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            e = BinOp(op, e, self.factor())
        return e

    def factor(self) -> Expression:
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.factor())
        return self.power()

    def power(self) -> Expression:
        base = self.base()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            sign = 1
            if self.peek()[:2] == ("op", "-"):
                self.take()
                sign = -1
            kind, val, pos = self.take()
            if kind != "num" or not val.isdigit():
                raise self.error("non-integer exponent; exponents must be integer literals", pos)
            return Pow(base, sign * int(val))
        return base

    def base(self) -> Expression:
        kind, val, pos = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "ident":
            if self.peek()[:2] == ("op", "("):
                if val not in FUNCTIONS:
                    raise UnknownIdentifierError(f"unknown function {val!r}", pos, self.text)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            if val in FUNCTIONS:
                raise self.error(f"function {val!r} needs an argument", pos)
            if val not in self.names:
                raise UnknownIdentifierError(f"unknown identifier {val!r}", pos, self.text)
            return Sym(val)
        if (kind, val) == ("op", "("):
            e = self.expr()
            self.expect(")")
            return e
        found = "end of input" if kind == "end" else repr(val)
        raise self.error(f"unexpected {found}", pos)


def parse(text: str, names: Iterable[str]) -> Expression:
    """Parse ``text``; every identifier must be in ``names`` or be a known function."""
    if not isinstance(text, str):
        text = str(text)
    if text.strip() == "":
        raise ExpressionSyntaxError("empty expression", 0, text)
    return _Parser(text, frozenset(names)).parse()


# -- printing ---------------------------------------------------------------

def _num_text(v: float) -> str:
    if v.is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def to_text(e: Expression) -> str:
    def wrap(child: Expression, min_prec: int) -> str:
        s = to_text(child)
        return f"({s})" if child.precedence < min_prec else s

    if isinstance(e, Num):
        return _num_text(e.value)
    if isinstance(e, Sym):
        return e.name
    if isinstance(e, Neg):
        return "-" + wrap(e.arg, 3)
    if isinstance(e, BinOp):
        p = e.precedence
        return f"{wrap(e.left, p)} {e.op} {wrap(e.right, p + 1)}"
    if isinstance(e, Pow):
        return f"{wrap(e.base, 5)}^{e.exponent}"
    if isinstance(e, Call):
        return f"{e.func}({to_text(e.arg)})"
    raise TypeError(type(e))


# -- traversal helpers ------------------------------------------------------

def _children(e: Expression) -> tuple[Expression, ...]:
    if isinstance(e, (Num, Sym)):
        return ()
    if isinstance(e, BinOp):
        return (e.left, e.right)
    if isinstance(e, Pow):
        return (e.base,)
    return (e.arg,)


def _postorder(roots: Iterable[Expression]) -> list[Expression]:
    """Unique nodes (by identity) in dependency order."""
    seen: set[int] = set()
    order: list[Expression] = []
    for root in roots:
        stack = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if id(node) in seen:
                continue
            if expanded:
                seen.add(id(node))
                order.append(node)
            else:
                stack.append((node, True))
                stack.extend((c, False) for c in _children(node) if id(c) not in seen)
    return order


def free_symbols(e: Expression) -> frozenset[str]:
    return frozenset(n.name for n in _postorder([e]) if isinstance(n, Sym))


def is_constant(e: Expression) -> bool:
    return not free_symbols(e)


def node_count(e: Expression) -> int:
    return len(_postorder([e]))


# -- evaluation -------------------------------------------------------------

def _apply(node: Expression, vals: Sequence[float]) -> float:
    if isinstance(node, BinOp):
        a, b = vals
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        return a / b
    if isinstance(node, Neg):
        return -vals[0]
    if isinstance(node, Pow):
        return vals[0] ** node.exponent
    return FUNCTIONS[node.func](vals[0])


def evaluate(e: Expression, point: Mapping[str, float]) -> float:
    """Evaluate ``e`` with symbols bound by ``point``."""
    values: dict[int, float] = {}
    for node in _postorder([e]):
        if isinstance(node, Num):
            v = node.value
        elif isinstance(node, Sym):
            try:
                v = float(point[node.name])
            except KeyError:
                raise ExpressionError(f"no value bound for symbol {node.name!r}") from None
        else:
            args = [values[id(c)] for c in _children(node)]
            try:
                v = _apply(node, args)
            except ZeroDivisionError:
                raise ExprDomainError("division by zero", node) from None
            except ValueError:
                raise ExprDomainError("math domain error", node) from None
            except OverflowError:
                raise ExprDomainError("overflow", node) from None
            if isinstance(v, complex):
                raise ExprDomainError("complex result", node)
        values[id(node)] = v
    return values[id(e)]


def lambdify(exprs: Sequence[Expression], names: Sequence[str]) -> Callable[..., tuple]:
    """Compile expressions into one function of positional coordinate values.

    Shared subexpressions (by identity) are computed once. The compiled code
    performs the same floating point operations as :func:`evaluate`.
    """
    exprs = list(exprs)
    index = {name: i for i, name in enumerate(names)}
    lines = []
    ref: dict[int, str] = {}
    consts: dict[str, float] = {}
    for k, node in enumerate(_postorder(exprs)):
        if isinstance(node, Num):
            cname = f"_c{len(consts)}"
            consts[cname] = node.value
            ref[id(node)] = cname
            continue
        if isinstance(node, Sym):
            if node.name not in index:
                raise ExpressionError(f"symbol {node.name!r} is not among {list(names)}")
            ref[id(node)] = f"_a{index[node.name]}"
            continue
        ch = [ref[id(c)] for c in _children(node)]
        if isinstance(node, BinOp):
            rhs = f"{ch[0]} {node.op} {ch[1]}"
        elif isinstance(node, Neg):
            rhs = f"-{ch[0]}"
        elif isinstance(node, Pow):
            rhs = f"{ch[0]} ** {node.exponent}"
        else:
            rhs = f"_{node.func}({ch[0]})"
        tmp = f"_t{k}"
        lines.append(f"    {tmp} = {rhs}")
        ref[id(node)] = tmp
    args = ", ".join(f"_a{i}" for i in range(len(names)))
    ret = ", ".join(ref[id(e)] for e in exprs)
    src = f"def _compiled({args}):\n" + "\n".join(lines) + f"\n    return ({ret}{',' if exprs else ''})\n"
    namespace = {f"_{k}": f for k, f in FUNCTIONS.items()}
    namespace.update(consts)
    exec(compile(src, "<nilgeom.lambdify>", "exec"), namespace)
    fast = namespace["_compiled"]

    def compiled(*values: float) -> tuple:
        try:
            return fast(*values)
        except (ArithmeticError, ValueError):
            point = dict(zip(names, values))
            for e in exprs:
                evaluate(e, point)
            raise

    compiled.source = src
    return compiled


# -- symbolic operations ----------------------------------------------------

def differentiate(e: Expression, var: str, cache: dict | None = None) -> Expression:
    """Exact derivative of ``e`` with respect to the symbol ``var``.

    ``cache`` may be shared across calls with the same ``var`` so that common
    subexpressions are differentiated once.
    """
    if cache is None:
        cache = {}
    for node in _postorder([e]):
        key = id(node)
        if key in cache:
            continue
        d = _derivative_rule(node, var, lambda c: cache[id(c)][1])
        cache[key] = (node, d)
    return cache[id(e)][1]


def _derivative_rule(node: Expression, var: str, d) -> Expression:
    if isinstance(node, Num):
        return ZERO
    if isinstance(node, Sym):
        return ONE if node.name == var else ZERO
    if isinstance(node, Neg):
        return neg(d(node.arg))
    if isinstance(node, BinOp):
        a, b = node.left, node.right
        da, db = d(a), d(b)
        if node.op == "+":
            return add(da, db)
        if node.op == "-":
            return sub(da, db)
        if node.op == "*":
            return add(mul(da, b), mul(a, db))
        if is_zero(db):
            return div(da, b)
        return sub(div(da, b), div(mul(a, db), power(b, 2)))
    if isinstance(node, Pow):
        db = d(node.base)
        if is_zero(db):
            return ZERO
        return mul(mul(Num(float(node.exponent)), power(node.base, node.exponent - 1)), db)
    da = d(node.arg)
    if is_zero(da):
        return ZERO
    if node.func == "sin":
        return mul(call("cos", node.arg), da)
    if node.func == "cos":
        return neg(mul(call("sin", node.arg), da))
    if node.func == "exp":
        return mul(node, da)
    if node.func == "log":
        return div(da, node.arg)
    # sqrt
    return div(da, mul(Num(2.0), node))


def substitute(e: Expression, mapping: Mapping[str, Expression]) -> Expression:
    """Replace symbols by expressions (simultaneously)."""
    out: dict[int, Expression] = {}
    for node in _postorder([e]):
        if isinstance(node, Sym):
            r = mapping.get(node.name, node)
        elif isinstance(node, Num):
            r = node
        elif isinstance(node, BinOp):
            a, b = out[id(node.left)], out[id(node.right)]
            r = {"+": add, "-": sub, "*": mul, "/": div}[node.op](a, b)
        elif isinstance(node, Neg):
            r = neg(out[id(node.arg)])
        elif isinstance(node, Pow):
            r = power(out[id(node.base)], node.exponent)
        else:
            r = call(node.func, out[id(node.arg)])
        out[id(node)] = r
    return out[id(e)]

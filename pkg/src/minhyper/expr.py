"""A tiny arithmetic expression language for user-defined immersions.

Grammar::

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := "-" factor | power
    power  := atom ("^" factor)?
    atom   := Number | Ident | Ident "(" expr ")" | "(" expr ")"

``^`` is right-associative and binds tighter than unary minus, so
``-x^2`` is ``-(x^2)``.  Evaluation is vectorised: variables may be bound
to numpy arrays.
"""

from __future__ import annotations

import contextlib
import enum
import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

import numpy as np

from .errors import EvalError, LexError, ParseError, UnboundName, UnknownFunction

__all__ = [
    "FUNCTIONS",
    "VARIABLES",
    "Binary",
    "Call",
    "Dual2",
    "Constant",
    "Env",
    "NamedConst",
    "Token",
    "TokenKind",
    "Unary",
    "Variable",
    "compile_expr",
    "evaluate",
    "evaluate_jet",
    "parse",
    "to_source",
    "tokenize",
]

VARIABLES = frozenset({"u", "v", "z"})


class TokenKind(enum.Enum):
    NUMBER = "Number"
    IDENT = "Ident"
    PLUS = "+"
    MINUS = "-"
    STAR = "*"
    SLASH = "/"
    CARET = "^"
    LPAREN = "("
    RPAREN = ")"
    COMMA = ","
    END = "end of input"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    lexeme: str
    offset: int


_NUMBER = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_IDENT = re.compile(r"[a-zA-Z][a-zA-Z0-9_]*")
_SINGLE = {
    "+": TokenKind.PLUS,
    "-": TokenKind.MINUS,
    "*": TokenKind.STAR,
    "/": TokenKind.SLASH,
    "^": TokenKind.CARET,
    "(": TokenKind.LPAREN,
    ")": TokenKind.RPAREN,
    ",": TokenKind.COMMA,
}


def tokenize(src: str) -> list[Token]:
    """Split ``src`` into tokens; offsets are UTF-8 byte positions."""
    tokens: list[Token] = []
    i = 0
    n = len(src)

    def byte_offset(k: int) -> int:
        return len(src[:k].encode("utf-8"))

    while i < n:
        ch = src[i]
        if ch.isspace():
            i += 1
            continue
        if ch in _SINGLE:
            tokens.append(Token(_SINGLE[ch], ch, byte_offset(i)))
            i += 1
            continue
        m = _NUMBER.match(src, i)
        if m:
            text = m.group()
            if not math.isfinite(float(text)):
                raise LexError(f"number {text!r} is not finite", byte_offset(i))
            tokens.append(Token(TokenKind.NUMBER, text, byte_offset(i)))
            i = m.end()
            continue
        m = _IDENT.match(src, i)
        if m:
            tokens.append(Token(TokenKind.IDENT, m.group(), byte_offset(i)))
            i = m.end()
            continue
        raise LexError(f"unexpected character {ch!r}", byte_offset(i))
    return tokens


# --- AST -----------------------------------------------------------------


@dataclass(frozen=True)
class Constant:
    value: float


@dataclass(frozen=True)
class Variable:
    name: str


@dataclass(frozen=True)
class NamedConst:
    name: str
    offset: Optional[int] = field(default=None, compare=False)


@dataclass(frozen=True)
class Unary:
    child: "Expr"
    offset: Optional[int] = field(default=None, compare=False)


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    # byte offset of the operator token; not part of tree identity
    offset: Optional[int] = field(default=None, compare=False)


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Expr"
    offset: Optional[int] = field(default=None, compare=False)


Expr = Union[Constant, Variable, NamedConst, Unary, Binary, Call]


def _safe_log(x):
    if np.any(x <= 0):
        raise EvalError("log of a non-positive number")
    return np.log(x)


def _safe_sqrt(x):
    if np.any(x < 0):
        raise EvalError("sqrt of a negative number")
    return np.sqrt(x)


FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": _safe_log,
    "sqrt": _safe_sqrt,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
    "atan": np.arctan,
    "abs": np.abs,
}


class _Parser:
    def __init__(self, tokens: list[Token], src_len: int):
        self.tokens = tokens
        self.pos = 0
        self.end = Token(TokenKind.END, "", src_len)

    def peek(self, k: int = 0) -> Token:
        i = self.pos + k
        return self.tokens[i] if i < len(self.tokens) else self.end

    def advance(self) -> Token:
        tok = self.peek()
        self.pos += 1
        return tok

    def expect(self, kind: TokenKind, what: str) -> Token:
        tok = self.peek()
        if tok.kind is not kind:
            raise ParseError(f"expected {what}, found {_describe(tok)}", tok.offset, what)
        return self.advance()

    def expr(self) -> Expr:
        node = self.term()
        while self.peek().kind in (TokenKind.PLUS, TokenKind.MINUS):
            tok = self.advance()
            node = Binary(tok.lexeme, node, self.term(), tok.offset)
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.peek().kind in (TokenKind.STAR, TokenKind.SLASH):
            tok = self.advance()
            node = Binary(tok.lexeme, node, self.factor(), tok.offset)
        return node

    def factor(self) -> Expr:
        if self.peek().kind is TokenKind.MINUS:
            tok = self.advance()
            return Unary(self.factor(), tok.offset)
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek().kind is TokenKind.CARET:
            tok = self.advance()
            return Binary("^", base, self.factor(), tok.offset)
        return base

    def atom(self) -> Expr:
        tok = self.peek()
        if tok.kind is TokenKind.NUMBER:
            self.advance()
            return Constant(float(tok.lexeme))
        if tok.kind is TokenKind.IDENT:
            self.advance()
            if self.peek().kind is TokenKind.LPAREN:
                if tok.lexeme not in FUNCTIONS:
                    raise UnknownFunction(f"unknown function {tok.lexeme!r}", tok.offset, "function name")
                self.advance()
                arg = self.expr()
                self.expect(TokenKind.RPAREN, "')'")
                return Call(tok.lexeme, arg, tok.offset)
            if tok.lexeme in VARIABLES:
                return Variable(tok.lexeme)
            return NamedConst(tok.lexeme, tok.offset)
        if tok.kind is TokenKind.LPAREN:
            self.advance()
            node = self.expr()
            self.expect(TokenKind.RPAREN, "')'")
            return node
        raise ParseError(f"expected an expression, found {_describe(tok)}", tok.offset, "expression")


def _describe(tok: Token) -> str:
    if tok.kind is TokenKind.END:
        return "end of input"
    return repr(tok.lexeme)


def parse(tokens: Union[str, list[Token]]) -> Expr:
    """Parse a token list (or source text) into an AST."""
    if isinstance(tokens, str):
        src_len = len(tokens.encode("utf-8"))
        tokens = tokenize(tokens)
    else:
        src_len = tokens[-1].offset + len(tokens[-1].lexeme) if tokens else 0
    p = _Parser(tokens, src_len)
    node = p.expr()
    if p.peek().kind is not TokenKind.END:
        tok = p.peek()
        raise ParseError(f"expected operator or end of input, found {_describe(tok)}", tok.offset, "operator")
    return node


# --- evaluation ----------------------------------------------------------


@dataclass(frozen=True)
class Env:
    u: object = 0.0
    v: object = 0.0
    z: object = 0.0
    constants: Mapping[str, float] = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        consts = {"pi": math.pi, "e": math.e}
        consts.update(self.constants or {})
        for name, val in consts.items():
            if not math.isfinite(val):
                raise ValueError(f"constant {name} is not finite")
        object.__setattr__(self, "constants", consts)

    def lookup_var(self, name: str):
        return getattr(self, name)

    def lookup_const(self, name: str, offset: Optional[int] = None) -> float:
        try:
            return self.constants[name]
        except KeyError:
            raise UnboundName(name, offset) from None


def _pow(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any((a < 0) & (b != np.round(b))):
        raise EvalError("non-integer power of a negative number")
    if np.any((a == 0) & (b < 0)):
        raise EvalError("division by zero (zero to a negative power)")
    return np.power(a, b)


def _div(a, b):
    if np.any(np.asarray(b) == 0):
        raise EvalError("division by zero")
    return np.divide(a, b)


_BINARY = {
    "+": np.add,
    "-": np.subtract,
    "*": np.multiply,
    "/": _div,
    "^": _pow,
}


def _eval(node: Expr, env: Env):
    if isinstance(node, Constant):
        return node.value
    if isinstance(node, Variable):
        return env.lookup_var(node.name)
    if isinstance(node, NamedConst):
        return env.lookup_const(node.name, node.offset)
    if isinstance(node, Unary):
        return np.negative(_eval(node.child, env))
    if isinstance(node, Binary):
        a, b = _eval(node.left, env), _eval(node.right, env)
        with _located(node):
            return _finite(_BINARY[node.op](a, b))
    if isinstance(node, Call):
        x = _eval(node.arg, env)
        with _located(node):
            return _finite(FUNCTIONS[node.fn](x))
    raise TypeError(f"not an expression node: {node!r}")


def _finite(x):
    if not np.all(np.isfinite(x)):
        raise EvalError("result is not finite (overflow or invalid operation)")
    return x


@contextlib.contextmanager
def _located(node: Expr):
    """Attach the node's source offset to an EvalError raised by its own operation."""
    try:
        yield
    except EvalError as exc:
        if exc.offset is None and node.offset is not None:
            raise EvalError(exc.reason, node.offset) from None
        raise
    except (OverflowError, ZeroDivisionError) as exc:
        raise EvalError(f"evaluation failed: {exc}", node.offset) from None


def evaluate(e: Expr, env: Env):
    """Evaluate ``e`` in double precision; domain errors raise EvalError."""
    with np.errstate(all="ignore"):
        out = _eval(e, env)
    if not np.all(np.isfinite(out)):
        raise EvalError("result is not finite (overflow or invalid operation)")
    if np.ndim(out) == 0:
        return float(out)
    return out


def compile_expr(src: str) -> Expr:
    return parse(tokenize(src))


# --- printing ------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _prec(node: Expr) -> int:
    # 1: sum, 2: product, 3: unary minus, 4: power, 5: atom
    if isinstance(node, Binary):
        return 4 if node.op == "^" else _PREC[node.op]
    if isinstance(node, Unary):
        return 3
    return 5


def to_source(node: Expr) -> str:
    """Render an AST as source text that parses back to the same tree."""
    if isinstance(node, Constant):
        text = repr(float(node.value))
        return text if node.value >= 0 else f"({text})"
    if isinstance(node, (Variable, NamedConst)):
        return node.name
    if isinstance(node, Call):
        return f"{node.fn}({to_source(node.arg)})"
    if isinstance(node, Unary):
        child = to_source(node.child)
        # -(a*b) must keep its parentheses; -a^b and --a do not need them.
        if _prec(node.child) < 3:
            child = f"({child})"
        return f"-{child}"
    if isinstance(node, Binary):
        left = to_source(node.left)
        right = to_source(node.right)
        if node.op == "^":
            if _prec(node.left) < 5:
                left = f"({left})"
            if _prec(node.right) < 3:
                right = f"({right})"
            return f"{left}^{right}"
        p = _PREC[node.op]
        if _prec(node.left) < p:
            left = f"({left})"
        if _prec(node.right) <= p:
            right = f"({right})"
        return f"{left} {node.op} {right}"
    raise TypeError(f"not an expression node: {node!r}")


# --- second-order forward differentiation ----------------------------------


@dataclass(frozen=True)
class Dual2:
    """Value with gradient and Hessian in (u, v, z)."""

    val: float
    grad: np.ndarray
    hess: np.ndarray

    @staticmethod
    def const(c: float) -> "Dual2":
        return Dual2(float(c), np.zeros(3), np.zeros((3, 3)))

    def chain(self, f0: float, f1: float, f2: float) -> "Dual2":
        """Compose with a scalar function given its value and first two derivatives here."""
        return Dual2(f0, f1 * self.grad, f1 * self.hess + f2 * np.outer(self.grad, self.grad))

    def __add__(self, o: "Dual2") -> "Dual2":
        return Dual2(self.val + o.val, self.grad + o.grad, self.hess + o.hess)

    def __sub__(self, o: "Dual2") -> "Dual2":
        return Dual2(self.val - o.val, self.grad - o.grad, self.hess - o.hess)

    def __neg__(self) -> "Dual2":
        return Dual2(-self.val, -self.grad, -self.hess)

    def __mul__(self, o: "Dual2") -> "Dual2":
        cross = np.outer(self.grad, o.grad)
        return Dual2(
            self.val * o.val,
            self.val * o.grad + o.val * self.grad,
            self.val * o.hess + o.val * self.hess + cross + cross.T,
        )

    def reciprocal(self) -> "Dual2":
        if self.val == 0:
            raise EvalError("division by zero")
        a = self.val
        return self.chain(1 / a, -1 / a**2, 2 / a**3)


def _d_pow(a: Dual2, b: Dual2) -> Dual2:
    if not b.grad.any() and not b.hess.any():
        n = b.val
        if a.val < 0 and n != round(n):
            raise EvalError("non-integer power of a negative number")
        if a.val == 0 and n < 0:
            raise EvalError("division by zero (zero to a negative power)")
        if a.val == 0 and n not in (0.0, 1.0) and n < 2:
            raise EvalError("power is not twice differentiable at zero")
        f0 = a.val**n
        f1 = n * a.val ** (n - 1) if n != 0 else 0.0
        f2 = n * (n - 1) * a.val ** (n - 2) if n not in (0.0, 1.0) else 0.0
        return a.chain(f0, f1, f2)
    if a.val <= 0:
        raise EvalError("variable exponent needs a positive base")
    return _d_exp(b * _d_call("log", a))


def _d_exp(a: Dual2) -> Dual2:
    e = math.exp(a.val)
    return a.chain(e, e, e)


def _d_call(fn: str, a: Dual2) -> Dual2:
    x = a.val
    if fn == "sin":
        s, c = math.sin(x), math.cos(x)
        return a.chain(s, c, -s)
    if fn == "cos":
        s, c = math.sin(x), math.cos(x)
        return a.chain(c, -s, -c)
    if fn == "tan":
        t = math.tan(x)
        sec2 = 1 + t * t
        return a.chain(t, sec2, 2 * t * sec2)
    if fn == "exp":
        return _d_exp(a)
    if fn == "log":
        if x <= 0:
            raise EvalError("log of a non-positive number")
        return a.chain(math.log(x), 1 / x, -1 / x**2)
    if fn == "sqrt":
        if x <= 0:
            raise EvalError("sqrt is not differentiable at non-positive arguments")
        r = math.sqrt(x)
        return a.chain(r, 0.5 / r, -0.25 / (r * x))
    if fn == "sinh":
        return a.chain(math.sinh(x), math.cosh(x), math.sinh(x))
    if fn == "cosh":
        return a.chain(math.cosh(x), math.sinh(x), math.cosh(x))
    if fn == "tanh":
        t = math.tanh(x)
        d = 1 - t * t
        return a.chain(t, d, -2 * t * d)
    if fn == "atan":
        d = 1 / (1 + x * x)
        return a.chain(math.atan(x), d, -2 * x * d * d)
    if fn == "abs":
        if x == 0:
            raise EvalError("abs is not differentiable at zero")
        s = 1.0 if x > 0 else -1.0
        return a.chain(abs(x), s, 0.0)
    raise EvalError(f"no derivative rule for {fn}")


def _eval_jet(node: Expr, env: Env, seeds: dict[str, Dual2]) -> Dual2:
    if isinstance(node, Constant):
        return Dual2.const(node.value)
    if isinstance(node, Variable):
        return seeds[node.name]
    if isinstance(node, NamedConst):
        return Dual2.const(env.lookup_const(node.name, node.offset))
    if isinstance(node, Unary):
        return -_eval_jet(node.child, env, seeds)
    if isinstance(node, Binary):
        a = _eval_jet(node.left, env, seeds)
        b = _eval_jet(node.right, env, seeds)
        with _located(node):
            if node.op == "+":
                return a + b
            if node.op == "-":
                return a - b
            if node.op == "*":
                return a * b
            if node.op == "/":
                return a * b.reciprocal()
            return _d_pow(a, b)
    if isinstance(node, Call):
        x = _eval_jet(node.arg, env, seeds)
        with _located(node):
            return _d_call(node.fn, x)
    raise TypeError(f"not an expression node: {node!r}")


def evaluate_jet(e: Expr, env: Env) -> Dual2:
    """Value, gradient and Hessian of ``e`` in (u, v, z) at the scalar point of ``env``."""
    seeds = {}
    for k, name in enumerate(("u", "v", "z")):
        g = np.zeros(3)
        g[k] = 1.0
        seeds[name] = Dual2(float(env.lookup_var(name)), g, np.zeros((3, 3)))
    with np.errstate(all="ignore"):
        try:
            out = _eval_jet(e, env, seeds)
        except (OverflowError, ZeroDivisionError) as exc:
            raise EvalError(f"derivative evaluation failed: {exc}") from None
    if not (math.isfinite(out.val) and np.all(np.isfinite(out.grad)) and np.all(np.isfinite(out.hess))):
        raise EvalError("derivative is not finite")
    return out

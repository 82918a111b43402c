"""Coefficient mini-language.

Grammar (whitespace-insensitive)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | '+' unary | power
    power  := atom ('^' unary)?
    atom   := number | name | func '(' expr (',' expr)* ')' | '(' expr ')'
    func   := sin | cos | exp | sqrt | qroot | min | max | abs

``qroot`` is the fourth root. ``pi`` and ``e`` are built-in constants; other
names are either free variables (``t``, ``s``, ``xi``, ``x`` depending on the
caller) or parameters bound at parse time, e.g. the disturbance amplitude
``A`` in ``A*(0.6*exp(-qroot(t))+1.2*cos(pi*t))``.

Parsed expressions compile to two callables: one on Python floats through
:mod:`math` (fast in integrator inner loops) and one on numpy arrays.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ExpressionError

FUNCTIONS = {"sin": 1, "cos": 1, "exp": 1, "sqrt": 1, "qroot": 1, "min": 2, "max": 2, "abs": 1}
CONSTANTS = {"pi": math.pi, "e": math.e}

_TOKEN = re.compile(r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))")


@dataclass(frozen=True)
class Node:
    kind: str  # num | var | neg | bin | call
    value: object = None
    args: tuple = ()

    def __str__(self):
        return unparse(self)


def _tokenize(text):
    pos = 0
    out = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            col = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ExpressionError(f"unexpected character {text[col]!r}", text, col)
        start = m.start(m.lastgroup)
        out.append((m.lastgroup, m.group(m.lastgroup), start))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text, variables, params):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.variables = set(variables)
        self.params = dict(params or {})

    def peek(self):
        return self.tokens[self.i]

    def take(self, value=None):
        tok = self.tokens[self.i]
        if value is not None and tok[1] != value:
            raise ExpressionError(f"expected {value!r}, found {tok[1] or 'end of input'!r}", self.text, tok[2])
        self.i += 1
        return tok

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ExpressionError(f"unexpected {tok[1]!r}", self.text, tok[2])
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = Node("bin", op, (node, self.term()))
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            node = Node("bin", op, (node, self.unary()))
        return node

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            return Node("neg", None, (self.unary(),))
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            return Node("bin", "^", (base, self.unary()))
        return base

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Node("num", float(val))
        if kind == "name":
            if self.peek()[1] == "(":
                if val not in FUNCTIONS:
                    raise ExpressionError(f"unknown function {val!r}", self.text, pos)
                self.take("(")
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.take(")")
                if len(args) != FUNCTIONS[val]:
                    raise ExpressionError(f"{val} takes {FUNCTIONS[val]} argument(s), got {len(args)}", self.text, pos)
                return Node("call", val, tuple(args))
            if val in self.variables:
                return Node("var", val)
            if val in self.params:
                return Node("num", float(self.params[val]))
            if val in CONSTANTS:
                return Node("var", val)
            raise ExpressionError(f"unknown name {val!r}", self.text, pos)
        if val == "(":
            node = self.expr()
            self.take(")")
            return node
        raise ExpressionError(f"unexpected {val or 'end of input'!r}", self.text, pos)


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def unparse(node: Node, parent_prec: int = 0) -> str:
    """Canonical text of ``node``; re-parsing it yields an identical tree."""
    if node.kind == "num":
        v = node.value
        text = repr(float(v))
        if text.endswith(".0"):
            text = text[:-2]
        return text if v >= 0 else f"({text})"
    if node.kind == "var":
        return node.value
    if node.kind == "call":
        return f"{node.value}({', '.join(unparse(a) for a in node.args)})"
    if node.kind == "neg":
        inner = unparse(node.args[0], 3)
        text = f"-{inner}"
        return f"({text})" if parent_prec >= 3 else text
    prec = _PREC[node.value]
    left, right = node.args
    if node.value == "^":
        text = f"{unparse(left, 5)}^{unparse(right, 5)}"
    else:
        text = f"{unparse(left, prec)}{node.value}{unparse(right, prec + 1)}"
    return f"({text})" if prec < parent_prec else text


def _source(node: Node, lib: str) -> str:
    if node.kind == "num":
        return repr(float(node.value))
    if node.kind == "var":
        return repr(CONSTANTS[node.value]) if node.value in CONSTANTS else f"v_{node.value}"
    if node.kind == "neg":
        return f"(-{_source(node.args[0], lib)})"
    if node.kind == "call":
        args = [_source(a, lib) for a in node.args]
        name = node.value
        if lib == "m":
            table = {"sin": "_m.sin", "cos": "_m.cos", "exp": "_m.exp", "sqrt": "_m.sqrt",
                     "abs": "abs", "min": "min", "max": "max", "qroot": "_qroot"}
        else:
            table = {"sin": "_np.sin", "cos": "_np.cos", "exp": "_np.exp", "sqrt": "_np.sqrt",
                     "abs": "_np.abs", "min": "_np.minimum", "max": "_np.maximum", "qroot": "_qroot_np"}
        return f"{table[name]}({', '.join(args)})"
    a, b = (_source(x, lib) for x in node.args)
    if node.value == "^":
        exp = node.args[1]
        if exp.kind == "num" and float(exp.value).is_integer():
            return f"({a}**{int(exp.value)})"
        return f"_pow({a}, {b})" if lib == "m" else f"_np.power({a}, {b})"
    return f"({a}{node.value}{b})"


def _qroot(x):
    return math.sqrt(math.sqrt(x))


def _qroot_np(x):
    return np.sqrt(np.sqrt(x))


def _pow(a, b):
    return math.pow(a, b)


_NAMESPACE = {"_m": math, "_np": np, "_qroot": _qroot, "_qroot_np": _qroot_np, "_pow": _pow}


class Expression:
    """A parsed coefficient expression over named variables.

    ``Expression("5/(1+t)")(2.0)`` evaluates at ``t=2``; calling with numpy
    arrays broadcasts. Positional arguments follow ``variables`` order.
    """

    def __init__(self, text: str, variables: Sequence[str] = ("t",), params: Mapping[str, float] = None):
        self.text = str(text)
        self.variables = tuple(variables)
        self.params = dict(params or {})
        self.tree = _Parser(self.text, self.variables, self.params).parse()
        argnames = ", ".join(f"v_{v}" for v in self.variables)
        self._scalar = eval(f"lambda {argnames}: {_source(self.tree, 'm')}", dict(_NAMESPACE))  # noqa: S307
        vec_body = _source(self.tree, "np")
        self._vector = eval(f"lambda {argnames}: {vec_body}", dict(_NAMESPACE))  # noqa: S307
        self._is_const = not self._uses_variables(self.tree)

    @staticmethod
    def _uses_variables(node):
        if node.kind == "var":
            return node.value not in CONSTANTS
        return any(Expression._uses_variables(a) for a in node.args)

    def __call__(self, *args):
        if any(isinstance(a, np.ndarray) for a in args):
            out = self._vector(*args)
            if self._is_const:
                shape = np.broadcast_shapes(*(np.shape(a) for a in args))
                out = np.full(shape, float(out))
            return out
        try:
            return self._scalar(*args)
        except (ValueError, OverflowError):
            return float(self._vector(*(np.float64(a) for a in args)))

    def canonical(self) -> str:
        return unparse(self.tree)

    def is_variable(self, name: str) -> bool:
        return self.tree.kind == "var" and self.tree.value == name

    def __repr__(self):
        return f"Expression({self.text!r})"

    def __eq__(self, other):
        return isinstance(other, Expression) and self.tree == other.tree and self.variables == other.variables

    def __hash__(self):
        return hash((self.tree, self.variables))


def parse(text: str, variables: Sequence[str] = ("t",), params: Mapping[str, float] = None) -> Expression:
    return Expression(text, variables, params)

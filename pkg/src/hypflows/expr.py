"""Tiny recursive-descent parser for profile descriptors.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | '+' unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Names are the single free variable (``r`` by default), the constants ``pi``
and ``e``, and the functions sinh, cosh, tanh, exp, log, sqrt, pow and const.
Evaluation is vectorised over numpy arrays (complex input is allowed).
"""

from __future__ import annotations

import re

import numpy as np

_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?)|([A-Za-z_]\w*)|(.))")

_FUNCS = {
    "sinh": (1, np.sinh),
    "cosh": (1, np.cosh),
    "tanh": (1, np.tanh),
    "exp": (1, np.exp),
    "log": (1, np.log),
    "sqrt": (1, np.sqrt),
    "pow": (2, np.power),
    "const": (1, lambda c: c),
}
_CONSTS = {"pi": np.pi, "e": np.e}


class ExpressionError(ValueError):
    pass


def _tokenize(text):
    pos, out = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExpressionError(f"cannot tokenize {text[pos:]!r}")
        num, name, op = m.groups()
        if num is not None:
            out.append(("num", float(num), m.start(1)))
        elif name is not None:
            out.append(("name", name, m.start(2)))
        else:
            if op not in "+-*/^(),":
                raise ExpressionError(f"unexpected character {op!r} at {m.start(3)}")
            out.append(("op", op, m.start(3)))
        pos = m.end()
    out.append(("end", None, len(text)))
    return out


class _Parser:
    def __init__(self, text, variable):
        self.toks = _tokenize(text)
        self.i = 0
        self.variable = variable

    def peek(self):
        return self.toks[self.i]

    def take(self, kind=None, value=None):
        tok = self.toks[self.i]
        if (kind and tok[0] != kind) or (value is not None and tok[1] != value):
            want = value if value is not None else kind
            raise ExpressionError(f"expected {want!r} at position {tok[2]}, got {tok[1]!r}")
        self.i += 1
        return tok

    def parse(self):
        node = self.expr()
        self.take("end")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[:2] in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            rhs = self.term()
            node = ("+" if op == "+" else "-", node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek()[:2] in (("op", "*"), ("op", "/")):
            op = self.take()[1]
            node = (op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return ("neg", self.unary())
        if self.peek()[:2] == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return ("^", base, self.unary())
        return base

    def atom(self):
        kind, val, pos = self.peek()
        if kind == "num":
            self.take()
            return ("num", val)
        if kind == "op" and val == "(":
            self.take()
            node = self.expr()
            self.take("op", ")")
            return node
        if kind == "name":
            self.take()
            if val in _FUNCS:
                arity, _ = _FUNCS[val]
                self.take("op", "(")
                args = [self.expr()]
                while self.peek()[:2] == ("op", ","):
                    self.take()
                    args.append(self.expr())
                self.take("op", ")")
                if len(args) != arity:
                    raise ExpressionError(f"{val} takes {arity} argument(s), got {len(args)}")
                return ("call", val, args)
            if val == self.variable:
                return ("var",)
            if val in _CONSTS:
                return ("num", _CONSTS[val])
            raise ExpressionError(f"unknown name {val!r} at position {pos}")
        raise ExpressionError(f"unexpected token {val!r} at position {pos}")


def _eval(node, x):
    tag = node[0]
    if tag == "num":
        return node[1] + 0 * x
    if tag == "var":
        return x
    if tag == "neg":
        return -_eval(node[1], x)
    if tag == "call":
        fn = _FUNCS[node[1]][1]
        return fn(*(_eval(a, x) for a in node[2])) + 0 * x
    a, b = _eval(node[1], x), _eval(node[2], x)
    if tag == "+":
        return a + b
    if tag == "-":
        return a - b
    if tag == "*":
        return a * b
    if tag == "/":
        return a / b
    return np.power(a, b)


class Expression:
    """A parsed one-variable expression, callable on scalars or arrays."""

    def __init__(self, text: str, variable: str = "r"):
        self.text = text.strip()
        self.variable = variable
        self._tree = _Parser(self.text, variable).parse()

    def __call__(self, x):
        x = np.asarray(x)
        if not np.iscomplexobj(x):
            x = x.astype(float)
        out = _eval(self._tree, x)
        return out if np.ndim(out) else out[()]

    def __repr__(self):
        return f"Expression({self.text!r}, variable={self.variable!r})"

    def __str__(self):
        return self.text

"""Tiny arithmetic expression grammar for datum specifications.

Supported: coordinates (x, y, and t for time-dependent data), numeric
constants, + - * /, unary sign, parentheses, and the functions abs,
min, max, step (step(s) = 1 where s >= 0, else 0).  Anything richer must
come from files.
"""

from __future__ import annotations

import re

import numpy as np

_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|([A-Za-z_]\w*)|(.))")

_FUNCTIONS = {
    "abs": (1, lambda a: np.abs(a)),
    "step": (1, lambda a: np.where(np.asarray(a) >= 0, 1.0, 0.0)),
    "min": (2, lambda a, b: np.minimum(a, b)),
    "max": (2, lambda a, b: np.maximum(a, b)),
}


class ExpressionError(ValueError):
    """Malformed expression or unknown name."""


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            break
        number, name, char = m.groups()
        if number is not None:
            tokens.append(("num", number))
        elif name is not None:
            tokens.append(("name", name))
        elif char is not None and char.strip():
            if char not in "+-*/(),":
                raise ExpressionError(f"unexpected character {char!r} in expression {text!r}")
            tokens.append(("op", char))
        pos = m.end()
    tokens.append(("end", ""))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, op: str):
        kind, val = self.next()
        if kind != "op" or val != op:
            raise ExpressionError(f"expected {op!r} in expression {self.text!r}")

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            raise ExpressionError(f"trailing input in expression {self.text!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek() == ("op", "+") or self.peek() == ("op", "-"):
            _, op = self.next()
            rhs = self.term()
            node = ("binop", op, node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek() == ("op", "*") or self.peek() == ("op", "/"):
            _, op = self.next()
            rhs = self.unary()
            node = ("binop", op, node, rhs)
        return node

    def unary(self):
        if self.peek() == ("op", "-"):
            self.next()
            return ("neg", self.unary())
        if self.peek() == ("op", "+"):
            self.next()
            return self.unary()
        return self.atom()

    def atom(self):
        kind, val = self.next()
        if kind == "num":
            return ("const", float(val))
        if kind == "name":
            if self.peek() == ("op", "("):
                if val not in _FUNCTIONS:
                    raise ExpressionError(f"unknown function {val!r} in expression {self.text!r}")
                self.next()
                arity, _ = _FUNCTIONS[val]
                args = [self.expr()]
                while self.peek() == ("op", ","):
                    self.next()
                    args.append(self.expr())
                self.expect(")")
                if len(args) != arity:
                    raise ExpressionError(f"{val} takes {arity} argument(s), got {len(args)}")
                return ("call", val, args)
            return ("var", val)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ExpressionError(f"unexpected token {val!r} in expression {self.text!r}")


class Expression:
    """Parsed expression; evaluate with named coordinate arrays."""

    def __init__(self, text: str):
        self.text = text
        self.node = _Parser(text).parse()
        self.variables = _collect_vars(self.node)

    def __call__(self, **env):
        missing = self.variables - set(env)
        if missing:
            raise ExpressionError(f"expression {self.text!r} uses undefined variable(s) {sorted(missing)}")
        return _eval(self.node, env)


def _collect_vars(node) -> set[str]:
    tag = node[0]
    if tag == "var":
        return {node[1]}
    if tag == "const":
        return set()
    if tag == "neg":
        return _collect_vars(node[1])
    if tag == "binop":
        return _collect_vars(node[2]) | _collect_vars(node[3])
    return set().union(*(_collect_vars(a) for a in node[2]))


def _eval(node, env):
    tag = node[0]
    if tag == "const":
        return node[1]
    if tag == "var":
        return env[node[1]]
    if tag == "neg":
        return -_eval(node[1], env)
    if tag == "binop":
        a, b = _eval(node[2], env), _eval(node[3], env)
        if node[1] == "+":
            return a + b
        if node[1] == "-":
            return a - b
        if node[1] == "*":
            return a * b
        return a / b
    _, fn = _FUNCTIONS[node[1]]
    return fn(*(_eval(a, env) for a in node[2]))

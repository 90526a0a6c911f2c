"""Text format for polynomial 1-forms.

    omega = <poly> dx + <poly> dy        # general form
    omega = d(<poly>)                    # exact differential

Polynomials are in x and y with integer, decimal or ``(re,im)`` complex
literals. Juxtaposition multiplies, ``^`` or ``**`` raises to a
non-negative integer power. Whitespace is free and ``#`` starts a comment.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from ..blowup import OneForm


class ParseError(ValueError):
    def __init__(self, message, line, column):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class NonPolynomialError(ParseError):
    pass


_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<pow>\*\*|\^)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/(),=])
""", re.VERBOSE)


@dataclass
class Token:
    kind: str
    text: str
    line: int
    column: int


def tokenize(text):
    tokens = []
    pos, line, col = 0, 1, 1
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind, chunk = m.lastgroup, m.group()
        if kind != "ws":
            tokens.append(Token(kind, chunk, line, col))
        nl = chunk.count("\n")
        if nl:
            line += nl
            col = len(chunk) - chunk.rfind("\n")
        else:
            col += len(chunk)
        pos = m.end()
    tokens.append(Token("end", "", line, col))
    return tokens


# Values are pairs (kind, data): kind "f" holds a polynomial dict, kind "w"
# holds the coefficient dicts (a, b) of a 1-form.

def _padd(p, q, sign=1):
    out = dict(p)
    for k, v in q.items():
        out[k] = out.get(k, 0) + sign * v
    return {k: v for k, v in out.items() if v != 0}


def _pmul(p, q):
    out = {}
    for (i, j), u in p.items():
        for (k, l), v in q.items():
            key = (i + k, j + l)
            out[key] = out.get(key, 0) + u * v
    return {k: v for k, v in out.items() if v != 0}


def _pscale(p, c):
    return {k: v * c for k, v in p.items() if v * c != 0}


def _pdiff(p, var):
    out = {}
    for (i, j), v in p.items():
        if var == 0 and i:
            out[(i - 1, j)] = out.get((i - 1, j), 0) + i * v
        elif var == 1 and j:
            out[(i, j - 1)] = out.get((i, j - 1), 0) + j * v
    return out


class _Parser:
    def __init__(self, text):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self):
        return self.toks[self.i]

    def error(self, msg, tok=None, cls=ParseError):
        tok = tok or self.tok
        raise cls(msg, tok.line, tok.column)

    def take(self, text=None, kind=None):
        t = self.tok
        if (text is not None and t.text != text) or (kind is not None and t.kind != kind):
            want = text if text is not None else kind
            self.error(f"expected {want!r}, found {t.text or 'end of input'!r}")
        self.i += 1
        return t

    def statement(self):
        name = self.take(kind="name")
        if name.text != "omega":
            self.error("statement must start with 'omega ='", name)
        self.take("=")
        start = self.tok
        val = self.expr()
        if self.tok.kind != "end":
            self.error(f"unexpected {self.tok.text!r}")
        if val[0] != "w":
            self.error("right-hand side is a function, not a 1-form", start)
        return val[1]

    def expr(self):
        sign = 1
        if self.tok.text in "+-" and self.tok.kind == "op":
            sign = -1 if self.take().text == "-" else 1
        val = self.term()
        if sign < 0:
            val = self._neg(val)
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.take()
            rhs_tok = self.tok
            rhs = self.term()
            if rhs[0] != val[0]:
                self.error("cannot add a function and a 1-form", rhs_tok)
            s = 1 if op.text == "+" else -1
            if val[0] == "f":
                val = ("f", _padd(val[1], rhs[1], s))
            else:
                val = ("w", (_padd(val[1][0], rhs[1][0], s), _padd(val[1][1], rhs[1][1], s)))
        return val

    @staticmethod
    def _neg(val):
        if val[0] == "f":
            return ("f", _pscale(val[1], -1))
        return ("w", (_pscale(val[1][0], -1), _pscale(val[1][1], -1)))

    def _starts_factor(self):
        t = self.tok
        return t.kind in ("num", "name") or (t.kind == "op" and t.text == "(")

    def term(self):
        val = self.power()
        while True:
            if self.tok.kind == "op" and self.tok.text == "*":
                self.take()
                tok = self.tok
                val = self._mul(val, self.power(), tok)
            elif self.tok.kind == "op" and self.tok.text == "/":
                op = self.take()
                den = self.power()
                if den[0] != "f" or any(k != (0, 0) for k in den[1]) or not den[1]:
                    self.error("division is only allowed by a nonzero constant", op, NonPolynomialError)
                c = den[1][(0, 0)]
                val = self._mul(val, ("f", {(0, 0): 1 / c}), op)
            elif self._starts_factor():
                tok = self.tok
                val = self._mul(val, self.power(), tok)
            else:
                return val

    def _mul(self, u, v, tok):
        if u[0] == "w" and v[0] == "w":
            self.error("product of two 1-forms is not a 1-form", tok)
        if u[0] == "w":
            u, v = v, u
        if v[0] == "f":
            return ("f", _pmul(u[1], v[1]))
        return ("w", (_pmul(u[1], v[1][0]), _pmul(u[1], v[1][1])))

    def power(self):
        base_tok = self.tok
        base = self.atom()
        if self.tok.kind == "pow":
            self.take()
            neg = False
            if self.tok.kind == "op" and self.tok.text == "-":
                self.take()
                neg = True
            exp_tok = self.tok
            if exp_tok.kind != "num" or not exp_tok.text.isdigit() or neg:
                self.error("exponents must be non-negative integers", exp_tok, NonPolynomialError)
            self.take()
            if base[0] != "f":
                self.error("a 1-form cannot be raised to a power", base_tok)
            out = {(0, 0): 1}
            for _ in range(int(exp_tok.text)):
                out = _pmul(out, base[1])
            return ("f", out)
        return base

    def atom(self):
        t = self.tok
        if t.kind == "num":
            self.take()
            return ("f", {(0, 0): _number(t.text)} if _number(t.text) != 0 else {})
        if t.kind == "name":
            self.take()
            if t.text == "x":
                return ("f", {(1, 0): 1})
            if t.text == "y":
                return ("f", {(0, 1): 1})
            if t.text == "dx":
                return ("w", ({(0, 0): 1}, {}))
            if t.text == "dy":
                return ("w", ({}, {(0, 0): 1}))
            if t.text == "d" and self.tok.text == "(":
                self.take("(")
                inner_tok = self.tok
                inner = self.expr()
                self.take(")")
                if inner[0] != "f":
                    self.error("d(...) needs a function", inner_tok)
                return ("w", (_pdiff(inner[1], 0), _pdiff(inner[1], 1)))
            self.error(f"unknown symbol {t.text!r}", t, NonPolynomialError)
        if t.kind == "op" and t.text == "(":
            lit = self._complex_literal()
            if lit is not None:
                return ("f", {(0, 0): lit} if lit != 0 else {})
            self.take("(")
            val = self.expr()
            self.take(")")
            return val
        self.error(f"unexpected {t.text or 'end of input'!r}")

    def _complex_literal(self):
        """(re,im) with optionally signed numeric parts, or None."""
        j = self.i + 1
        parts = []
        for closer in (",", ")"):
            sign = 1
            if self.toks[j].kind == "op" and self.toks[j].text in "+-":
                sign = -1 if self.toks[j].text == "-" else 1
                j += 1
            if self.toks[j].kind != "num":
                return None
            parts.append(sign * _number(self.toks[j].text))
            if self.toks[j + 1].text != closer:
                return None
            j += 2
        self.i = j
        return complex(parts[0], parts[1])


def _number(text):
    if re.fullmatch(r"\d+", text):
        return int(text)
    return float(text)


def parse_oneform_dicts(text):
    """(a, b) coefficient dicts {(i, j): value} of the 1-form in ``text``."""
    return _Parser(text).statement()


def parse_oneform(text):
    a, b = parse_oneform_dicts(text)
    if not a and not b:
        raise ParseError("the 1-form is identically zero", 1, 1)
    a = {k: complex(v) for k, v in a.items()}
    b = {k: complex(v) for k, v in b.items()}
    return OneForm.from_dicts(a, b)


# formatting ------------------------------------------------------------------

def _fmt_number(c):
    c = complex(c)
    if c.imag == 0:
        r = c.real
        if r == int(r) and abs(r) < 1e15:
            return str(int(r))
        return repr(r)
    return f"({repr(c.real)},{repr(c.imag)})"


def _fmt_monomial(i, j):
    parts = []
    if i:
        parts.append("x" if i == 1 else f"x^{i}")
    if j:
        parts.append("y" if j == 1 else f"y^{j}")
    return " ".join(parts)


def format_poly(terms):
    """Polynomial from a dict, highest total degree last, in a re-parseable form."""
    items = sorted(((k, v) for k, v in terms.items() if v != 0), key=lambda kv: (sum(kv[0]), -kv[0][0]))
    if not items:
        return "0"
    out = ""
    for (i, j), v in items:
        v = complex(v)
        neg = v.imag == 0 and v.real < 0
        mono = _fmt_monomial(i, j)
        num = _fmt_number(-v if neg else v)
        body = mono if mono and num == "1" else (f"{num} {mono}" if mono else num)
        if not out:
            out = f"-{body}" if neg else body
        else:
            out += f" - {body}" if neg else f" + {body}"
    return out


def _series_terms(s):
    c = s.coeffs
    return {(i, j): complex(c[i, j]) for i in range(c.shape[0]) for j in range(c.shape[1])
            if c[i, j] != 0}


def format_oneform(form):
    return (f"omega = ({format_poly(_series_terms(form.a))}) dx"
            f" + ({format_poly(_series_terms(form.b))}) dy")

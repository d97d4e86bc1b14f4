"""Line-oriented problem file format.

::

    problem p1
    vars x1 x2
    params p1
    minimize 0.5*(x1^2 + x2^2)
    subject_to
    eq: x1 + x2 - 1 - p1
    at p = [0]

``eq:`` rows mean expr = 0, ``ineq:`` rows mean expr <= 0. ``#`` starts a
comment. A compact one-line form ``minimize <expr> s.t. eq: <expr>; ineq: ...``
is accepted as well; without ``vars``/``params`` lines the declarations are
inferred as the contiguous runs x1..xn and p1..pl, so a stray ``x9`` next to
``x1`` is reported as undeclared.

Precedence, loosest first: ``+ -``, ``* /``, unary minus, ``^`` (right
associative).
"""

import re

from .errors import DimensionError, ParseError, UndeclaredIdentifierError
from .expr import Expr, apply, to_text, UNARY
from .problem import ParametricNLP

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


class _Tokens:
    def __init__(self, text, line, col0):
        self.items = []
        pos = 0
        text = text.rstrip()
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                col = col0 + pos + len(text[pos:]) - len(text[pos:].lstrip())
                raise ParseError(f"unexpected character {text[pos:].lstrip()[:1]!r}", line, col)
            kind = m.lastgroup
            start = m.start(kind)
            self.items.append((kind, m.group(kind), col0 + start))
            pos = m.end()
        self.i = 0
        self.line = line
        self.end_col = col0 + len(text)

    def peek(self):
        return self.items[self.i] if self.i < len(self.items) else (None, None, self.end_col)

    def take(self):
        tok = self.peek()
        if tok[0] is None:
            raise ParseError("unexpected end of expression", self.line, self.end_col)
        self.i += 1
        return tok

    def expect(self, sym):
        kind, val, col = self.take()
        if val != sym:
            raise ParseError(f"expected {sym!r}, found {val!r}", self.line, col)


class _ExprParser:
    def __init__(self, resolve):
        self.resolve = resolve

    def parse(self, text, line=1, col0=1):
        t = _Tokens(text, line, col0)
        if not t.items:
            raise ParseError("empty expression", line, col0)
        e = self.sum(t)
        kind, val, col = t.peek()
        if kind is not None:
            raise ParseError(f"unexpected token {val!r}", line, col)
        return e

    def sum(self, t):
        e = self.product(t)
        while t.peek()[1] in ("+", "-"):
            _, op, _ = t.take()
            rhs = self.product(t)
            e = Expr("add" if op == "+" else "sub", (e, rhs))
        return e

    def product(self, t):
        e = self.unary(t)
        while t.peek()[1] in ("*", "/"):
            _, op, _ = t.take()
            rhs = self.unary(t)
            e = Expr("mul" if op == "*" else "div", (e, rhs))
        return e

    def unary(self, t):
        if t.peek()[1] == "-":
            t.take()
            literal = t.peek()[0] == "num"
            operand = self.unary(t)
            # a minus sign directly on a number literal is part of the constant
            if literal and operand.op == "const":
                return Expr.const(-operand.value)
            return Expr("neg", (operand,))
        if t.peek()[1] == "+":
            t.take()
            return self.unary(t)
        return self.power(t)

    def power(self, t):
        base = self.atom(t)
        if t.peek()[1] == "^":
            t.take()
            # right associative; the exponent may carry its own sign
            return Expr("pow", (base, self.unary(t)))
        return base

    def atom(self, t):
        kind, val, col = t.take()
        if kind == "num":
            return Expr.const(float(val))
        if val == "(":
            e = self.sum(t)
            t.expect(")")
            return e
        if kind == "name":
            if val in UNARY and val != "neg":
                t.expect("(")
                arg = self.sum(t)
                t.expect(")")
                return apply(val, arg)
            return self.resolve(val, t.line, col)
        raise ParseError(f"unexpected token {val!r}", t.line, col)


def parse_expression(text, var_names, param_names, line=1, col0=1):
    """Parse one expression against declared variable and parameter names."""
    vidx = {name: i for i, name in enumerate(var_names)}
    pidx = {name: i for i, name in enumerate(param_names)}

    def resolve(name, ln, col):
        if name in vidx:
            return Expr.var(vidx[name])
        if name in pidx:
            return Expr.param(pidx[name])
        raise UndeclaredIdentifierError(f"undeclared identifier {name!r}", ln, col)

    return _ExprParser(resolve).parse(text, line, col0)


_IDENT = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")
_INDEXED = re.compile(r"([xp])(\d+)$")


def _infer_names(texts):
    xs, ps = set(), set()
    for text in texts:
        for name in _IDENT.findall(text):
            m = _INDEXED.match(name)
            if m:
                (xs if m.group(1) == "x" else ps).add(int(m.group(2)))

    def run(ids):
        k = 0
        while k + 1 in ids:
            k += 1
        return k

    return [f"x{i}" for i in range(1, run(xs) + 1)], [f"p{i}" for i in range(1, run(ps) + 1)]


def _parse_vector(text, line, col):
    m = re.fullmatch(r"\s*\[(.*)\]\s*", text)
    if not m:
        raise ParseError("expected a bracketed list", line, col)
    body = m.group(1).strip()
    if not body:
        return []
    try:
        return [float(v) for v in body.split(",")]
    except ValueError:
        raise ParseError("malformed number in list", line, col) from None


def parse_problem(text):
    """Parse a problem file into a :class:`ParametricNLP`."""
    name = "problem"
    var_names = param_names = None
    objective = None
    rows = []  # (kind, text, line, col)
    at = None
    state = "header"

    # split the compact form into logical lines
    logical = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        pieces = re.split(r"(\bs\.t\.|\bsubject_to\b)", line)
        col = 1
        for k, piece in enumerate(pieces):
            if k % 2 == 1:
                logical.append((ln, col, "subject_to"))
                col += len(piece)
                continue
            for sub in piece.split(";"):
                if sub.strip():
                    logical.append((ln, col + len(sub) - len(sub.lstrip()), sub.strip()))
                col += len(sub) + 1
            col -= 1

    for ln, col, line in logical:
        head, _, rest = line.partition(" ")
        rest = rest.strip()
        if line == "subject_to":
            state = "constraints"
        elif head == "problem":
            name = rest or name
        elif head == "vars":
            var_names = rest.split()
        elif head == "params":
            param_names = rest.split()
        elif head == "minimize":
            if not rest:
                raise ParseError("missing objective", ln, col)
            objective = (rest, ln, col + len("minimize "))
        elif line.startswith(("eq:", "ineq:")):
            if state != "constraints" and objective is None:
                raise ParseError("constraint before objective", ln, col)
            kind, _, body = line.partition(":")
            rows.append((kind, body.strip(), ln, col + len(kind) + 2))
        elif head == "at":
            m = re.match(r"p\s*=\s*(.*)", rest)
            if not m:
                raise ParseError("expected 'at p = [...]'", ln, col)
            at = _parse_vector(m.group(1), ln, col)
        else:
            raise ParseError(f"unrecognized statement {head!r}", ln, col)

    if objective is None:
        raise ParseError("missing 'minimize' statement", 1, 1)
    if var_names is None or param_names is None:
        inferred_x, inferred_p = _infer_names([objective[0]] + [r[1] for r in rows])
        var_names = var_names if var_names is not None else inferred_x
        param_names = param_names if param_names is not None else inferred_p
    for names in (var_names, param_names):
        if len(set(names)) != len(names):
            raise ParseError("duplicate declaration", 1, 1)

    obj = parse_expression(objective[0], var_names, param_names, objective[1], objective[2])
    eqs, ineqs = [], []
    for kind, body, ln, col in rows:
        e = parse_expression(body, var_names, param_names, ln, col)
        (eqs if kind == "eq" else ineqs).append(e)
    if at is not None and len(at) != len(param_names):
        raise DimensionError(f"'at' has {len(at)} values but {len(param_names)} parameters are declared")
    return ParametricNLP(
        n=len(var_names),
        ell=len(param_names),
        objective=obj,
        equalities=tuple(eqs),
        inequalities=tuple(ineqs),
        name=name,
        var_names=tuple(var_names),
        param_names=tuple(param_names),
        default_p=None if at is None else tuple(at),
    )


def format_problem(nlp):
    """Print a problem in the file format; ``parse_problem`` inverts it."""
    lines = [f"problem {nlp.name}"]
    lines.append("vars " + " ".join(nlp.var_names))
    lines.append("params " + " ".join(nlp.param_names))
    lines.append("minimize " + _named(nlp.objective, nlp))
    if nlp.equalities or nlp.inequalities:
        lines.append("subject_to")
    lines += ["eq: " + _named(e, nlp) for e in nlp.equalities]
    lines += ["ineq: " + _named(e, nlp) for e in nlp.inequalities]
    if nlp.default_p is not None:
        lines.append("at p = [" + ", ".join(repr(float(v)) for v in nlp.default_p) + "]")
    return "\n".join(lines) + "\n"


def _named(e, nlp):
    text = to_text(e)
    canonical_x = [f"x{i + 1}" for i in range(nlp.n)]
    canonical_p = [f"p{i + 1}" for i in range(nlp.ell)]
    if list(nlp.var_names) == canonical_x and list(nlp.param_names) == canonical_p:
        return text
    mapping = dict(zip(canonical_x, nlp.var_names))
    mapping.update(zip(canonical_p, nlp.param_names))
    return re.sub(r"\b[xp]\d+\b", lambda m: mapping[m.group(0)], text)

"""Expression language for g-valued analytic fields on harmonic space.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := unary ('*' unary)*
    unary  := '-' unary | power
    power  := primary ('^' uint)*
    primary:= atom | number | '(' expr ')'

Atoms are ``xm1..xm{2n}`` (x^{ia} u-_i), ``xp1..`` (x^{ia} u+_i), ``up1``,
``up2``, ``um1``, ``um2``, ``T1..T{dim}`` and ``i``.  Numbers may carry a
``j`` suffix.  Every term must be linear in exactly one generator T_k.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .harmonics import ChargedField
from .jets import Jet, _pad
from .lie import get_algebra


class ParseError(ValueError):
    def __init__(self, message, position=None, text=None):
        self.position = position
        self.text = text
        where = "" if position is None else f" at position {position}"
        super().__init__(f"{message}{where}")


class ChargeError(ValueError):
    pass


# AST --------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: complex


@dataclass(frozen=True)
class Atom:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class Add:
    terms: tuple
    signs: tuple


@dataclass(frozen=True)
class Mul:
    factors: tuple


@dataclass(frozen=True)
class Pow:
    base: object
    exp: int


ATOM_CHARGE = {"xm": -1, "xp": 1, "um": -1, "up": 1}
_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?j?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*(?:\[\d+\])?)"
    r"|(?P<op>[-+*^()]))"
)
_NAME = re.compile(r"^(xm|xp|um|up|T)(\d+)$")


def _tokenize(text):
    pos = 0
    out = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos:].lstrip()[:1]!r}",
                             len(text) - len(text[pos:].lstrip()), text)
        start = m.start(m.lastgroup)
        out.append((m.lastgroup, m.group(m.lastgroup), start))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


def _normalize_name(name):
    return re.sub(r"\[(\d+)\]", r"\1", name)


def atom_charge(name):
    if name == "i":
        return 0
    m = _NAME.match(name)
    return 0 if m.group(1) == "T" else ATOM_CHARGE[m.group(1)]


class _Parser:
    def __init__(self, text, dim=None, n=None):
        self.text = text
        self.toks = _tokenize(text)
        self.k = 0
        self.dim = dim
        self.n = n

    def peek(self):
        return self.toks[self.k]

    def take(self):
        t = self.toks[self.k]
        self.k += 1
        return t

    def expect(self, value):
        t = self.take()
        if t[1] != value:
            raise ParseError(f"expected {value!r}", t[2], self.text)

    def parse(self):
        if not self.text.strip():
            raise ParseError("empty expression", 0, self.text)
        e = self.expr()
        t = self.peek()
        if t[0] != "end":
            raise ParseError(f"unexpected token {t[1]!r}", t[2], self.text)
        return e

    def expr(self):
        start = self.peek()[2]
        terms, signs = [self.term()], [1]
        while self.peek()[1] in ("+", "-"):
            signs.append(1 if self.take()[1] == "+" else -1)
            terms.append(self.term())
        if len(terms) == 1:
            return terms[0]
        node = Add(tuple(terms), tuple(signs))
        charges = {charge_of(t) for t in terms}
        if len(charges) > 1:
            raise ParseError("charge-inhomogeneous sum " + str(sorted(charges)), start, self.text)
        return node

    def term(self):
        factors = [self.unary()]
        while self.peek()[1] == "*":
            self.take()
            factors.append(self.unary())
        return factors[0] if len(factors) == 1 else Mul(tuple(factors))

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.primary()
        while self.peek()[1] == "^":
            self.take()
            t = self.take()
            if t[0] != "num" or not re.fullmatch(r"\d+", t[1]):
                raise ParseError("exponent must be a non-negative integer", t[2], self.text)
            base = Pow(base, int(t[1]))
        return base

    def primary(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Num(complex(val) if val.endswith("j") else complex(float(val)))
        if kind == "name":
            name = _normalize_name(val)
            if name == "i":
                return Atom("i")
            m = _NAME.match(name)
            if not m:
                raise ParseError(f"unknown atom {val!r}", pos, self.text)
            head, idx = m.group(1), int(m.group(2))
            if idx < 1:
                raise ParseError(f"index out of range in {val!r}", pos, self.text)
            if head in ("um", "up") and idx > 2:
                raise ParseError(f"harmonic index out of range in {val!r}", pos, self.text)
            if head == "T" and self.dim is not None and idx > self.dim:
                raise ParseError(f"generator {val!r} outside algebra of dimension {self.dim}", pos, self.text)
            if head in ("xm", "xp") and self.n is not None and idx > 2 * self.n:
                raise ParseError(f"coordinate index out of range in {val!r}", pos, self.text)
            return Atom(name)
        if val == "(":
            e = self.expr()
            self.expect(")")
            return e
        raise ParseError(f"unexpected token {val!r}" if val else "unexpected end of input", pos, self.text)


def charge_of(node):
    if isinstance(node, Num):
        return 0
    if isinstance(node, Atom):
        return atom_charge(node.name)
    if isinstance(node, Neg):
        return charge_of(node.arg)
    if isinstance(node, Mul):
        return sum(charge_of(f) for f in node.factors)
    if isinstance(node, Pow):
        return node.exp * charge_of(node.base)
    if isinstance(node, Add):
        return charge_of(node.terms[0])
    raise TypeError(node)


# pretty printing --------------------------------------------------------

def _fmt_real(v):
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def pretty(node):
    if isinstance(node, Num):
        v = node.value
        if v.imag == 0:
            return _fmt_real(v.real)
        if v.real == 0:
            return _fmt_real(v.imag) + "j"
        return f"({_fmt_real(v.real)} + {_fmt_real(v.imag)}j)"
    if isinstance(node, Atom):
        return node.name
    if isinstance(node, Neg):
        inner = pretty(node.arg)
        return "-" + (f"({inner})" if isinstance(node.arg, Add) else inner)
    if isinstance(node, Mul):
        return "*".join(f"({pretty(f)})" if isinstance(f, Add) else pretty(f) for f in node.factors)
    if isinstance(node, Pow):
        b = pretty(node.base)
        if not isinstance(node.base, (Atom,)) and not (isinstance(node.base, Num) and node.base.value.imag == 0
                                                        and node.base.value.real >= 0):
            b = f"({b})"
        return f"{b}^{node.exp}"
    if isinstance(node, Add):
        parts = [pretty(node.terms[0])]
        for s, t in zip(node.signs[1:], node.terms[1:]):
            parts.append(("+ " if s > 0 else "- ") + pretty(t))
        return " ".join(parts)
    raise TypeError(node)


# compilation to polynomials ---------------------------------------------

class Polynomial(dict):
    """Map (generator or None, ((atom, power), ...)) -> complex coefficient."""

    def __mul__(self, other):
        out = Polynomial()
        for (ga, ma), ca in self.items():
            for (gb, mb), cb in other.items():
                if ga is not None and gb is not None:
                    raise ChargeError("product of two generators is not an algebra element")
                g = ga if ga is not None else gb
                powers = dict(ma)
                for a, p in mb:
                    powers[a] = powers.get(a, 0) + p
                key = (g, tuple(sorted(powers.items())))
                out[key] = out.get(key, 0) + ca * cb
        return out

    def __add__(self, other):
        out = Polynomial(self)
        for k, v in other.items():
            out[k] = out.get(k, 0) + v
        return out

    def scaled(self, c):
        return Polynomial({k: v * c for k, v in self.items()})

    def pruned(self):
        return Polynomial({k: v for k, v in self.items() if v != 0})


def _to_poly(node):
    if isinstance(node, Num):
        return Polynomial({(None, ()): complex(node.value)})
    if isinstance(node, Atom):
        if node.name == "i":
            return Polynomial({(None, ()): 1j})
        m = _NAME.match(node.name)
        if m.group(1) == "T":
            return Polynomial({(int(m.group(2)) - 1, ()): 1.0 + 0j})
        return Polynomial({(None, ((node.name, 1),)): 1.0 + 0j})
    if isinstance(node, Neg):
        return _to_poly(node.arg).scaled(-1)
    if isinstance(node, Mul):
        out = _to_poly(node.factors[0])
        for f in node.factors[1:]:
            out = out * _to_poly(f)
        return out
    if isinstance(node, Pow):
        base = _to_poly(node.base)
        out = Polynomial({(None, ()): 1.0 + 0j})
        for _ in range(node.exp):
            out = out * base
        return out
    if isinstance(node, Add):
        out = Polynomial()
        for s, t in zip(node.signs, node.terms):
            out = out + _to_poly(t).scaled(s)
        return out
    raise TypeError(node)


@dataclass(frozen=True)
class FieldExpr:
    text: str
    ast: object
    charge: int
    polynomial: Polynomial = field(compare=False, repr=False)
    atoms: frozenset = frozenset()

    @property
    def uses_xp(self):
        return any(a.startswith("xp") for a in self.atoms)

    @property
    def uses_up(self):
        return any(a.startswith("up") for a in self.atoms)

    @property
    def x_free(self):
        return not any(a.startswith("x") for a in self.atoms)

    @property
    def normalized_form(self):
        """Only xm/um atoms: satisfies H0 f = q f, e_-a f = 0 and Hmm f = 0 identically."""
        return not (self.uses_xp or self.uses_up)

    @property
    def algebra_valued(self):
        return any(g is not None for g, _ in self.polynomial)

    def max_coordinate_index(self):
        idx = [int(a[2:]) for a in self.atoms if a[:2] in ("xm", "xp")]
        return max(idx, default=0)

    def pretty(self):
        return pretty(self.ast)


def _atoms(node, acc):
    if isinstance(node, Atom):
        if node.name != "i" and not node.name.startswith("T"):
            acc.add(node.name)
    elif isinstance(node, Neg):
        _atoms(node.arg, acc)
    elif isinstance(node, Pow):
        _atoms(node.base, acc)
    elif isinstance(node, (Mul, Add)):
        for t in node.factors if isinstance(node, Mul) else node.terms:
            _atoms(t, acc)
    return acc


def parse(text, dim=None, n=None):
    """Parse an expression; ``dim`` and ``n`` bound generator/coordinate indices."""
    ast = _Parser(text, dim, n).parse()
    try:
        poly = _to_poly(ast).pruned()
    except ChargeError as exc:
        raise ParseError(str(exc), 0, text) from exc
    gens = {g for g, _ in poly}
    if None in gens and len(gens) > 1:
        raise ParseError("every term must contain exactly one generator", 0, text)
    return FieldExpr(text, ast, charge_of(ast), poly, frozenset(_atoms(ast, set())))


# evaluation -------------------------------------------------------------

def _atom_values(names, xj, Uj):
    out = {}
    for name in names:
        head, idx = name[:2], int(name[2:]) - 1
        if head == "xm":
            out[name] = (xj[..., :, idx] * Uj[..., :, 1]).sum(-1)
        elif head == "xp":
            out[name] = (xj[..., :, idx] * Uj[..., :, 0]).sum(-1)
        elif head == "um":
            out[name] = Uj[..., idx, 1]
        else:
            out[name] = Uj[..., idx, 0]
    return out


def evaluate_polynomial(poly, xj, Uj, matrices=None):
    """Evaluate on jets.  With ``matrices`` the generator terms are summed into matrices."""
    atoms = sorted({a for _, mono in poly for a, _ in mono})
    vals = _atom_values(atoms, xj, Uj)
    powers = {}

    def power(a, p):
        key = (a, p)
        if key not in powers:
            powers[key] = vals[a] if p == 1 else power(a, p - 1) * vals[a]
        return powers[key]

    batch = np.broadcast_shapes(xj.shape[:-2], Uj.shape[:-2])
    by_mono = {}
    for (g, mono), c in poly.items():
        by_mono.setdefault(mono, []).append((g, c))
    out = None
    for mono, entries in by_mono.items():
        if matrices is not None:
            coef = sum(c * matrices[g] for g, c in entries)
        else:
            coef = sum(c for _, c in entries)
        if not mono:
            term = Jet.const(xj.space, np.broadcast_to(np.asarray(coef, complex), batch + np.shape(coef)))
        else:
            prod = None
            for a, p in mono:
                prod = power(a, p) if prod is None else prod * power(a, p)
            term = prod[(...,) + (None,) * np.ndim(coef)] * np.asarray(coef) if np.ndim(coef) else prod * coef
        out = term if out is None else out + term
    if out is None:
        shape = batch + ((matrices.shape[-2:]) if matrices is not None else ())
        out = Jet.const(xj.space, np.zeros(shape, complex))
    target = batch + (tuple(matrices.shape[-2:]) if matrices is not None else ())
    if out.shape != target:
        out = out.map(lambda d: np.broadcast_to(_pad(d, len(target)), (d.shape[0],) + target))
    return out


class DSLField(ChargedField):
    """A ChargedField defined by a parsed expression over an algebra."""

    def __init__(self, expr, algebra):
        if isinstance(expr, str):
            expr = parse(expr, dim=algebra.dim)
        if not expr.algebra_valued and expr.polynomial:
            raise ChargeError("expression carries no algebra generator")
        for g, _ in expr.polynomial:
            if g is not None and g >= algebra.dim:
                raise ParseError(f"generator T{g + 1} outside algebra {algebra.name}")
        self.expr = expr
        self.algebra = algebra
        self.charge = expr.charge

    def evaluate(self, xj, Uj):
        return evaluate_polynomial(self.expr.polynomial, xj, Uj, self.algebra.matrices)

    def __repr__(self):
        return f"DSLField({self.expr.pretty()!r}, {self.algebra.name})"


class ScaledField(ChargedField):
    def __init__(self, base, scale):
        self.base, self.scale = base, scale
        self.algebra, self.charge = base.algebra, base.charge

    def evaluate(self, xj, Uj):
        return self.base.evaluate(xj, Uj) * self.scale


class SumField(ChargedField):
    def __init__(self, *parts):
        self.parts = parts
        self.algebra, self.charge = parts[0].algebra, parts[0].charge

    def evaluate(self, xj, Uj):
        out = self.parts[0].evaluate(xj, Uj)
        for p in self.parts[1:]:
            out = out + p.evaluate(xj, Uj)
        return out


class PrepotentialError(ValueError):
    pass


def make_prepotential(expr, algebra):
    """Validate a charge -2 analytic expression and wrap it as a ChargedField."""
    if isinstance(algebra, str):
        algebra = get_algebra(algebra)
    if isinstance(expr, str):
        expr = parse(expr, dim=algebra.dim)
    if expr.polynomial and expr.charge != -2:
        raise PrepotentialError(f"prepotential must have charge -2, got {expr.charge}")
    if expr.uses_xp:
        raise PrepotentialError("prepotential may not contain xp atoms (analyticity guard)")
    f = DSLField(expr, algebra)
    f.charge = -2
    f.normalized_form = expr.normalized_form
    f.x_independent = expr.x_free
    return f


def load_source(src):
    """Inline expression or path to a UTF-8 file holding one."""
    p = Path(src)
    try:
        if p.is_file():
            return p.read_text(encoding="utf-8").strip()
    except OSError:
        pass
    return src


@dataclass
class EvalContext:
    x: np.ndarray
    U: np.ndarray
    directions: list = field(default_factory=list)


@dataclass
class Derivatives:
    """Value and seeded derivatives V_k f, V_k V_l f (k <= l, k outermost)."""
    jet: Jet

    @property
    def value(self):
        return self.jet.value

    def d(self, k):
        return self.jet.data[self.jet.space.var(k)]

    def d2(self, k, l):
        sp = self.jet.space
        m = [0] * sp.nvars
        m[k] += 1
        m[l] += 1
        c = self.jet.coeff(m)
        return 2 * c if k == l else c


def eval_with_derivatives(f, ctx):
    """Evaluate a field with all derivatives requested by ``ctx.directions``."""
    from .probe import seed
    if isinstance(f, FieldExpr):
        raise TypeError("wrap expressions with DSLField first")
    _, xj, Uj = seed(ctx.x, ctx.U, ctx.directions)
    return Derivatives(f.evaluate(xj, Uj))

"""Exact arithmetic kernel: rationals, sparse multivariate polynomials, rational functions.

All coefficients are ``fractions.Fraction``.  Polynomials are sparse maps from
exponent vectors to coefficients over a fixed, ordered variable registry.
Rational functions never normalize by polynomial gcd; equality is decided by
cross-multiplication.  Only cheap content/monomial cancellation is applied to
keep intermediate objects small.
"""

from __future__ import annotations

import math
import re
from fractions import Fraction

from .errors import ExactDivisionError, UsageError

Rat = Fraction

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")


def as_rat(x) -> Rat:
    """Coerce ints, strings like ``-1/3`` and Fractions to Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise UsageError(f"cannot interpret {x!r} as an exact rational")


class Registry:
    """Ordered list of named commuting variables, fixed for a session.

    The canonical session ordering is z_1 < ... < z_N < t < hbar < seed
    symbols; helpers below build registries in that order.
    """

    __slots__ = ("names", "index")

    def __init__(self, names):
        names = tuple(names)
        if len(set(names)) != len(names):
            raise UsageError(f"duplicate variable names in registry: {names}")
        for n in names:
            if not _NAME_RE.fullmatch(n):
                raise UsageError(f"invalid variable name {n!r}")
        self.names = names
        self.index = {n: i for i, n in enumerate(names)}

    def __len__(self):
        return len(self.names)

    def __contains__(self, name):
        return name in self.index

    def __eq__(self, other):
        return isinstance(other, Registry) and self.names == other.names

    def __hash__(self):
        return hash(self.names)

    def __repr__(self):
        return f"Registry{self.names}"

    def zero(self) -> "MPoly":
        return MPoly(self, {})

    def one(self) -> "MPoly":
        return self.const(1)

    def const(self, c) -> "MPoly":
        c = as_rat(c)
        if c == 0:
            return MPoly(self, {})
        return MPoly(self, {(0,) * len(self.names): c})

    def var(self, name: str) -> "MPoly":
        if name not in self.index:
            raise UsageError(f"unknown variable {name!r} (registry {self.names})")
        exp = [0] * len(self.names)
        exp[self.index[name]] = 1
        return MPoly(self, {tuple(exp): Fraction(1)})


def session_registry(N: int, *, with_t=True, with_hbar=False, seeds=()) -> Registry:
    """Registry with the deterministic ordering z_1 < ... < z_N < t < hbar < seeds."""
    names = [f"z{i}" for i in range(1, N + 1)]
    if with_t:
        names.append("t")
    if with_hbar:
        names.append("hbar")
    names.extend(seeds)
    return Registry(names)


class MPoly:
    """Sparse multivariate polynomial with Fraction coefficients.

    ``terms`` maps exponent tuples (length = registry size) to nonzero
    coefficients.  Instances are treated as immutable.
    """

    __slots__ = ("reg", "terms")

    def __init__(self, reg: Registry, terms: dict):
        self.reg = reg
        self.terms = {e: c for e, c in terms.items() if c}

    # -- basic predicates ------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(not any(e) for e in self.terms)

    def constant_value(self) -> Rat:
        if not self.terms:
            return Fraction(0)
        if not self.is_constant():
            raise UsageError("polynomial is not constant")
        return next(iter(self.terms.values()))

    def total_degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def degree_in(self, name: str) -> int:
        i = self._vidx(name)
        return max((e[i] for e in self.terms), default=0)

    def uses(self, name: str) -> bool:
        i = self._vidx(name)
        return any(e[i] for e in self.terms)

    def _vidx(self, name: str) -> int:
        try:
            return self.reg.index[name]
        except KeyError:
            raise UsageError(f"unknown variable {name!r} (registry {self.reg.names})") from None

    def _check(self, other: "MPoly"):
        if self.reg is not other.reg and self.reg != other.reg:
            raise UsageError("registry mismatch between polynomials")

    # -- ring operations -------------------------------------------------

    def __eq__(self, other):
        if isinstance(other, MPoly):
            return self.reg == other.reg and self.terms == other.terms
        return NotImplemented

    def __neg__(self):
        return MPoly(self.reg, {e: -c for e, c in self.terms.items()})

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = self.reg.const(other)
        if not isinstance(other, MPoly):
            return NotImplemented
        self._check(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            s = out.get(e, 0) + c
            if s:
                out[e] = s
            else:
                out.pop(e, None)
        return MPoly(self.reg, out)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = self.reg.const(other)
        return self.__add__(-other)

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            c = as_rat(other)
            if c == 0:
                return self.reg.zero()
            return MPoly(self.reg, {e: k * c for e, k in self.terms.items()})
        if not isinstance(other, MPoly):
            return NotImplemented
        self._check(other)
        out: dict = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                s = out.get(e, 0) + c1 * c2
                if s:
                    out[e] = s
                else:
                    out.pop(e, None)
        return MPoly(self.reg, out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            raise UsageError("negative polynomial power")
        out = self.reg.one()
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base if n > 1 else base
            n >>= 1
        return out

    # -- calculus and substitution ----------------------------------------

    def partial(self, name: str) -> "MPoly":
        """Formal partial derivative."""
        i = self._vidx(name)
        out: dict = {}
        for e, c in self.terms.items():
            if e[i]:
                e2 = list(e)
                e2[i] -= 1
                out[tuple(e2)] = c * e[i]
        return MPoly(self.reg, out)

    def subs(self, values: dict) -> "MPoly":
        """Substitute variables by rationals or registry polynomials."""
        rat_vals: dict = {}
        poly_vals: dict = {}
        for name, v in values.items():
            i = self._vidx(name)
            if isinstance(v, (int, Fraction, str)):
                rat_vals[i] = as_rat(v)
            else:
                poly_vals[i] = v
        fast: dict = {}
        out = self.reg.zero()
        for e, c in self.terms.items():
            coeff = c
            rest = list(e)
            for i, val in rat_vals.items():
                if e[i]:
                    coeff = coeff * val ** e[i]
                    rest[i] = 0
            poly_factors = [(poly_vals[i], e[i]) for i in poly_vals if e[i]]
            for i in poly_vals:
                if e[i]:
                    rest[i] = 0
            if not poly_factors:
                key = tuple(rest)
                s = fast.get(key, 0) + coeff
                if s:
                    fast[key] = s
                else:
                    fast.pop(key, None)
                continue
            term = MPoly(self.reg, {tuple(rest): coeff})
            for val, k in poly_factors:
                term = term * (val**k)
            out = out + term
        return out + MPoly(self.reg, fast)

    def eval(self, point: dict) -> Rat:
        """Evaluate at a full rational point {name: Fraction}."""
        vals = [None] * len(self.reg.names)
        for name, v in point.items():
            vals[self._vidx(name)] = as_rat(v)
        total = Fraction(0)
        for e, c in self.terms.items():
            v = c
            for i, k in enumerate(e):
                if k:
                    if vals[i] is None:
                        raise UsageError(f"no value supplied for {self.reg.names[i]}")
                    v *= vals[i] ** k
            total += v
        return total

    def permute_vars(self, mapping: dict) -> "MPoly":
        """Rename variables within the same registry, {old_name: new_name}."""
        perm = list(range(len(self.reg.names)))
        for old, new in mapping.items():
            perm[self._vidx(old)] = self._vidx(new)
        out: dict = {}
        for e, c in self.terms.items():
            e2 = [0] * len(e)
            for i, k in enumerate(e):
                e2[perm[i]] += k
            out[tuple(e2)] = out.get(tuple(e2), 0) + c
        return MPoly(self.reg, {e: c for e, c in out.items() if c})

    def transfer(self, reg: Registry) -> "MPoly":
        """Re-express over another registry containing the same variable names."""
        out: dict = {}
        for e, c in self.terms.items():
            e2 = [0] * len(reg.names)
            for i, k in enumerate(e):
                if k:
                    if self.reg.names[i] not in reg.index:
                        raise UsageError(f"target registry lacks {self.reg.names[i]!r}")
                    e2[reg.index[self.reg.names[i]]] = k
            out[tuple(e2)] = c
        return MPoly(reg, out)

    # -- serialization -----------------------------------------------------

    def _sorted_terms(self):
        return sorted(self.terms.items(), key=lambda item: item[0], reverse=True)

    def to_str(self) -> str:
        """Serialize per the grammar ``3/2*z1^2*t - 1*nu0``."""
        if not self.terms:
            return "0"
        parts = []
        for e, c in self._sorted_terms():
            factors = []
            for i, k in enumerate(e):
                if k == 1:
                    factors.append(self.reg.names[i])
                elif k > 1:
                    factors.append(f"{self.reg.names[i]}^{k}")
            mag = abs(c)
            body = "*".join([str(mag)] + factors) if factors else str(mag)
            if not parts:
                parts.append(body if c > 0 else "-" + body)
            else:
                parts.append((" + " if c > 0 else " - ") + body)
        return "".join(parts)

    __repr__ = to_str
    __str__ = to_str

    def __hash__(self):
        return hash((self.reg, tuple(sorted(self.terms.items()))))


def parse_mpoly(reg: Registry, text: str) -> MPoly:
    """Parse the serialization grammar back into an MPoly."""
    text = text.strip()
    if text in ("", "0"):
        return reg.zero()
    # normalize: make every term explicitly signed, then split
    src = text.replace(" - ", " +-").replace(" + ", " +")
    if src.startswith("-"):
        src = "+-" + src[1:]
    elif not src.startswith("+"):
        src = "+" + src
    out = reg.zero()
    for chunk in src.split(" +" if " +" in src else "+"):
        chunk = chunk.strip().lstrip("+").strip()
        if not chunk:
            continue
        sign = Fraction(1)
        if chunk.startswith("-"):
            sign = Fraction(-1)
            chunk = chunk[1:].strip()
        coeff = sign
        exps = [0] * len(reg.names)
        for factor in chunk.split("*"):
            factor = factor.strip()
            if not factor:
                raise UsageError(f"empty factor in term {chunk!r}")
            if factor[0].isdigit():
                coeff *= Fraction(factor)
                continue
            name, _, power = factor.partition("^")
            if name not in reg.index:
                raise UsageError(f"unknown variable {name!r} in {text!r}")
            exps[reg.index[name]] += int(power) if power else 1
        key = tuple(exps)
        cur = out.terms.get(key, Fraction(0)) + coeff
        terms = dict(out.terms)
        if cur:
            terms[key] = cur
        else:
            terms.pop(key, None)
        out = MPoly(reg, terms)
    return out


def _int_content_gcd(*polys: MPoly) -> Fraction:
    """Positive rational g such that dividing every coefficient by g yields
    coprime integers (used for cheap size control; exactness preserved)."""
    num_gcd = 0
    den_lcm = 1
    for p in polys:
        for c in p.terms.values():
            num_gcd = math.gcd(num_gcd, abs(c.numerator))
            den_lcm = den_lcm * c.denominator // math.gcd(den_lcm, c.denominator)
    if num_gcd == 0:
        return Fraction(1)
    return Fraction(num_gcd, den_lcm)


def _monomial_content(p: MPoly):
    it = iter(p.terms)
    try:
        mins = list(next(it))
    except StopIteration:
        return None
    for e in it:
        for i, k in enumerate(e):
            if k < mins[i]:
                mins[i] = k
        if not any(mins):
            return None
    return tuple(mins)


def _shift_down(p: MPoly, mono) -> MPoly:
    return MPoly(p.reg, {tuple(a - b for a, b in zip(e, mono)): c for e, c in p.terms.items()})


def _uni_gcd(a: list, b: list) -> list:
    """Monic gcd of two univariate polynomials given as coefficient lists."""
    def trim(p):
        while p and p[-1] == 0:
            p.pop()
        return p

    a, b = trim(list(a)), trim(list(b))
    while b:
        # a mod b
        while len(a) >= len(b) and a:
            f = a[-1] / b[-1]
            shift = len(a) - len(b)
            for i, c in enumerate(b):
                a[shift + i] -= f * c
            trim(a)
        a, b = b, a
    if a:
        lead = a[-1]
        a = [c / lead for c in a]
    return a


def _univariate_cancel(num: MPoly, den: MPoly):
    """When den involves a single variable, cancel the shared univariate
    content of num and den (cheap Euclid; multivariate gcd stays avoided)."""
    active = [i for i, _ in enumerate(den.reg.names) if any(e[i] for e in den.terms)]
    if len(active) != 1:
        return num, den
    v = active[0]
    if den.degree_in(den.reg.names[v]) == 0:
        return num, den
    groups: dict = {}
    for e, c in num.terms.items():
        key = e[:v] + (0,) + e[v + 1 :]
        groups.setdefault(key, {})[e[v]] = c
    g = [den.terms.get(tuple(0 if i != v else k for i in range(len(den.reg.names))), Fraction(0)) for k in range(den.degree_in(den.reg.names[v]) + 1)]
    for coeffs in groups.values():
        poly = [coeffs.get(k, Fraction(0)) for k in range(max(coeffs) + 1)]
        g = _uni_gcd(g, poly)
        if len(g) <= 1:
            return num, den
    gname = den.reg.names[v]
    gpoly = MPoly(den.reg, {tuple(0 if i != v else k for i in range(len(den.reg.names))): c for k, c in enumerate(g) if c})
    del gname
    return exact_div(num, gpoly), exact_div(den, gpoly)


class RatFun:
    """Rational function num/den with cross-multiplication equality.

    ``den`` is never the zero polynomial.  No polynomial gcd is ever taken;
    construction only strips shared rational content, a shared monomial
    factor, and fixes the sign of the leading denominator coefficient so that
    serialization is deterministic.
    """

    __slots__ = ("num", "den")

    def __init__(self, num: MPoly, den: MPoly):
        if den.is_zero():
            raise ZeroDivisionError("zero denominator in RatFun")
        num._check(den)
        if num.is_zero():
            den = den.reg.one()
        else:
            mc_n = _monomial_content(num)
            mc_d = _monomial_content(den)
            if mc_n and mc_d:
                shared = tuple(min(a, b) for a, b in zip(mc_n, mc_d))
                if any(shared):
                    num = _shift_down(num, shared)
                    den = _shift_down(den, shared)
            num, den = _univariate_cancel(num, den)
            g = _int_content_gcd(num, den)
            if g != 1:
                num = num * (1 / g)
                den = den * (1 / g)
        lead = den._sorted_terms()[0][1]
        if lead < 0:
            num = -num
            den = -den
        self.num = num
        self.den = den

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_mpoly(cls, p: MPoly) -> "RatFun":
        return cls(p, p.reg.one())

    @classmethod
    def const(cls, reg: Registry, c) -> "RatFun":
        return cls(reg.const(c), reg.one())

    @classmethod
    def var(cls, reg: Registry, name: str) -> "RatFun":
        return cls(reg.var(name), reg.one())

    # -- predicates ---------------------------------------------------------

    @property
    def reg(self) -> Registry:
        return self.num.reg

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def equal(self, other: "RatFun") -> bool:
        """a/b == c/d decided by a*d - c*b == 0."""
        other = _as_ratfun(other, self.reg)
        return (self.num * other.den - other.num * self.den).is_zero()

    def __eq__(self, other):
        if isinstance(other, (RatFun, MPoly, int, Fraction)):
            return self.equal(_as_ratfun(other, self.reg))
        return NotImplemented

    def __hash__(self):
        raise TypeError("RatFun is unhashable (equality is extensional)")

    # -- field operations ----------------------------------------------------

    def __neg__(self):
        return RatFun(-self.num, self.den)

    def __add__(self, other):
        other = _as_ratfun(other, self.reg)
        if self.is_zero():
            return other
        if other.is_zero():
            return self
        if self.den == other.den:
            return RatFun(self.num + other.num, self.den)
        return RatFun(self.num * other.den + other.num * self.den, self.den * other.den)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-_as_ratfun(other, self.reg))

    def __rsub__(self, other):
        return (-self) + _as_ratfun(other, self.reg)

    def __mul__(self, other):
        other = _as_ratfun(other, self.reg)
        if self.is_zero() or other.is_zero():
            return RatFun(self.reg.zero(), self.reg.one())
        return RatFun(self.num * other.num, self.den * other.den)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _as_ratfun(other, self.reg)
        if other.is_zero():
            raise ZeroDivisionError("division by zero RatFun")
        return RatFun(self.num * other.den, self.den * other.num)

    def __rtruediv__(self, other):
        return _as_ratfun(other, self.reg) / self

    def __pow__(self, n: int):
        if n < 0:
            return RatFun(self.den, self.num) ** (-n)
        return RatFun(self.num**n, self.den**n)

    # -- calculus -------------------------------------------------------------

    def deriv(self, name: str) -> "RatFun":
        """Quotient-rule derivative (n'd - nd')/d^2."""
        n, d = self.num, self.den
        return RatFun(n.partial(name) * d - n * d.partial(name), d * d)

    def subs(self, values: dict) -> "RatFun":
        return RatFun(self.num.subs(values), self.den.subs(values))

    def eval(self, point: dict) -> Rat:
        d = self.den.eval(point)
        if d == 0:
            raise ZeroDivisionError(f"denominator vanishes at {point}")
        return self.num.eval(point) / d

    def as_mpoly(self) -> MPoly:
        """Exact numerator/denominator division; raises if not a polynomial."""
        return exact_div(self.num, self.den)

    def to_str(self) -> str:
        if self.den.is_constant():
            c = self.den.constant_value()
            return (self.num * (1 / c)).to_str()
        return f"({self.num.to_str()}) / ({self.den.to_str()})"

    __repr__ = to_str
    __str__ = to_str


def _as_ratfun(x, reg: Registry) -> RatFun:
    if isinstance(x, RatFun):
        return x
    if isinstance(x, MPoly):
        return RatFun.from_mpoly(x)
    if isinstance(x, (int, Fraction)):
        return RatFun.const(reg, x)
    raise UsageError(f"cannot coerce {x!r} to RatFun")


def ratfun_equal(a: RatFun, b: RatFun) -> bool:
    return a.equal(b)


def exact_div(a: MPoly, b: MPoly) -> MPoly:
    """Divide a by b in the polynomial ring; raise ExactDivisionError on remainder."""
    a._check(b)
    if b.is_zero():
        raise ZeroDivisionError("polynomial division by zero")
    if b.is_constant():
        return a * (1 / b.constant_value())
    reg = a.reg
    quot: dict = {}
    rem = dict(a.terms)
    lead_e, lead_c = max(b.terms.items(), key=lambda item: item[0])
    while rem:
        e, c = max(rem.items(), key=lambda item: item[0])
        de = tuple(x - y for x, y in zip(e, lead_e))
        if any(k < 0 for k in de):
            raise ExactDivisionError(f"nonzero remainder: leading term {MPoly(reg, {e: c})}")
        q = c / lead_c
        quot[de] = quot.get(de, 0) + q
        for be, bc in b.terms.items():
            ke = tuple(x + y for x, y in zip(de, be))
            s = rem.get(ke, 0) - q * bc
            if s:
                rem[ke] = s
            else:
                rem.pop(ke, None)
    return MPoly(reg, quot)


def solve_linear(rows, rhs):
    """Solve a (possibly overdetermined) exact linear system by elimination.

    rows: list of coefficient lists, rhs: list of Fractions.  Returns the
    unique solution; raises UsageError if the system is inconsistent or the
    solution is underdetermined.
    """
    m = [list(map(Fraction, r)) + [Fraction(v)] for r, v in zip(rows, rhs)]
    if not m:
        raise UsageError("empty linear system")
    ncols = len(m[0]) - 1
    row = 0
    pivots = []
    for col in range(ncols):
        piv = next((r for r in range(row, len(m)) if m[r][col] != 0), None)
        if piv is None:
            continue
        m[row], m[piv] = m[piv], m[row]
        inv = 1 / m[row][col]
        m[row] = [v * inv for v in m[row]]
        for r in range(len(m)):
            if r != row and m[r][col] != 0:
                f = m[r][col]
                m[r] = [v - f * w for v, w in zip(m[r], m[row])]
        pivots.append(col)
        row += 1
        if row == len(m):
            break
    for r in range(row, len(m)):
        if m[r][ncols] != 0:
            raise UsageError("inconsistent linear system")
    if len(pivots) < ncols:
        raise UsageError("underdetermined linear system")
    sol = [Fraction(0)] * ncols
    for r, col in enumerate(pivots):
        sol[col] = m[r][ncols]
    return sol

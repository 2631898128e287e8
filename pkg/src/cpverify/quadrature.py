"""High-precision numerical evaluation of the beta-integral wave functions.

This is the oracle for the moment relations and the only verification path at
non-integer coupling.  One-dimensional moments use mpmath's adaptive
quadrature at high precision; the m-fold wave-function coefficients use a
nested tanh-sinh grid over the ordered simplex u_1 > ... > u_m, where the
coupling factor prod (u_i - u_j)^{2 hbar} is positive and single valued.

Contour conventions (with their admissibility constraints):
  II  : polyline from infinity * e^{-2 pi i/3} through 0 to +infinity
  III : (0, inf), requires t < 0 (the essential singularity then decays)
  IV  : (0, inf), requires Re b < 0
  V   : [0, 1],   requires Re b < 0, Re c < 0
  VI  : [0, 1],   requires Re(a+b) < 0, Re c < 0, t > 1
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import mpmath

from .diffop import apply_op, build_cp_hamiltonian, zvars
from .errors import DomainError, QuadratureError, UsageError
from .exact import RatFun, Registry, as_rat, exact_div

mp = mpmath.mp

DEFAULT_PREC = 192


@dataclass(frozen=True)
class ContourSpec:
    """Canonical contour of one family with its admissibility constraints."""

    family: str
    description: str
    constraints: str


CONTOURS = {
    "II": ContourSpec("II", "polyline from inf * exp(-2 pi i/3) through 0 to +inf", "none"),
    "III": ContourSpec("III", "(0, inf)", "t < 0"),
    "IV": ContourSpec("IV", "(0, inf)", "Re b < 0"),
    "V": ContourSpec("V", "[0, 1]", "Re b < 0, Re c < 0"),
    "VI": ContourSpec("VI", "[0, 1]", "Re(a+b) < 0, Re c < 0, t > 1"),
}


def _to_mpf(x):
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    return mpmath.mpf(x)


def check_domain(J: str, t, params: dict):
    t = as_rat(t) if isinstance(t, (int, Fraction, str)) else t
    p = {k: as_rat(v) for k, v in params.items() if v is not None}
    if J == "II":
        return
    if J == "III":
        if not t < 0:
            raise DomainError("family III numeric contour requires t < 0")
    elif J == "IV":
        if not p["b"] < 0:
            raise DomainError("family IV requires Re b < 0")
    elif J == "V":
        if not (p["b"] < 0 and p["c"] < 0):
            raise DomainError("family V requires Re b < 0 and Re c < 0")
    elif J == "VI":
        if not (p["a"] + p["b"] < 0 and p["c"] < 0 and t > 1):
            raise DomainError("family VI requires Re(a+b) < 0, Re c < 0 and t > 1")
    else:
        raise UsageError(f"unknown family {J!r}")


def theta(J: str, u, t, params: dict, omu=None):
    """The weight function at u (mpf or mpc).

    ``omu`` optionally passes 1-u computed without cancellation; the factors
    (1-u) and (t-u) = (t-1)+(1-u) are singular or near-singular at u -> 1.
    """
    p = params
    if omu is None:
        omu = 1 - u
    if J == "II":
        return mpmath.exp(-(u * t + 2 * u**3 / 3))
    if J == "III":
        return u ** (-p["b"] - 1) * mpmath.exp(t / u - u)
    if J == "IV":
        return u ** (-p["b"] - 1) * mpmath.exp(-(u * t + u * u / 2))
    if J == "V":
        return u ** (-p["b"] - 1) * omu ** (-p["c"] - 1) * mpmath.exp(u * t)
    if J == "VI":
        return u ** (-p["a"] - p["b"] - 1) * omu ** (-p["c"] - 1) * ((t - 1) + omu) ** (-p["d"])
    raise UsageError(f"unknown family {J!r}")


def dt_log_theta(J: str, u, t, params: dict, omu=None):
    if J in ("II", "IV"):
        return -u
    if J == "III":
        return 1 / u
    if J == "V":
        return u
    if omu is None:
        omu = 1 - u
    return -params["d"] / ((t - 1) + omu)


def _mp_params(params):
    return {k: _to_mpf(as_rat(v)) for k, v in params.items() if v is not None}


def moment_numeric(J: str, k: int, s: int, t, params: dict, prec: int = DEFAULT_PREC):
    """int u^k (t-u)^{-s} Theta_J(u) du on the canonical contour, with error.

    s = 1 is the rho-moment and is meaningful for family VI only.
    """
    if s not in (0, 1):
        raise UsageError("s must be 0 or 1")
    if s == 1 and J != "VI":
        raise UsageError("(t-u)^{-1} moments are defined for family VI only")
    check_domain(J, t, params)
    with mp.workprec(prec):
        tv = _to_mpf(as_rat(t))
        p = _mp_params(params)

        if J == "II":
            omega = mpmath.exp(-2j * mpmath.pi / 3)

            def f(x):
                g1 = x**k * theta(J, x, tv, p)
                u2 = x * omega
                g2 = u2**k * theta(J, u2, tv, p)
                return g1 - omega * g2

            val, err = mpmath.quad(f, [0, mpmath.inf], error=True, maxdegree=10)
            return val, err

        if J in ("V", "VI"):
            # own tanh-sinh grid: nodes carry (u, 1-u) stably and extend far
            # enough into the corners for the singular endpoint exponents
            tp = _tail_power(J, params)
            level = max(6, (prec // 32) + 3)

            def total(lv):
                acc = mpmath.mpf(0)
                for u, omu, w in _grid_points(lv, prec, tp):
                    v = w * u**k * theta(J, u, tv, p, omu=omu)
                    if s:
                        v = v / ((tv - 1) + omu)
                    acc += v
                return acc

            val = total(level)
            err = abs(val - total(level - 1))
            return val, err

        def f(u):
            return u**k * theta(J, u, tv, p)

        val, err = mpmath.quad(f, [0, mpmath.inf], error=True, maxdegree=10)
        return val, err


# ---------------------------------------------------------------------------
# Tanh-sinh nodes and simplex grids
# ---------------------------------------------------------------------------

_NODE_CACHE: dict = {}


def ts_nodes(level: int, prec: int, tail_power: float = 5.0):
    """Tanh-sinh nodes on (0, 1) at step 2^-level, as (u, 1-u, weight).

    Both the node and its complement are computed in logistic form so each
    carries full relative precision arbitrarily close to the endpoints.

    ``tail_power`` controls the truncation: with an endpoint behavior
    u^beta (beta > -1), the discarded tail is of order delta^(1+beta), so the
    node list is extended until the endpoint distance is below
    2^(-prec*tail_power) with tail_power >= 1/(1+beta).
    """
    key = (level, prec, tail_power)
    if key in _NODE_CACHE:
        return _NODE_CACHE[key]
    with mp.workprec(prec + 20):
        h = mpmath.mpf(1) / (1 << level)
        pi2 = mpmath.pi / 2
        eps = mpmath.mpf(2) ** (-int((prec + 10) * tail_power))
        out = []
        j = 0
        while True:
            th = j * h
            sh = pi2 * mpmath.sinh(th)
            # (1 + tanh(sh))/2 = 1/(1 + e^{-2 sh}); complement analogously
            u_pos = 1 / (1 + mpmath.exp(-2 * sh))
            u_neg = 1 / (1 + mpmath.exp(2 * sh))
            w = h * pi2 * mpmath.cosh(th) / mpmath.cosh(sh) ** 2
            out.append((u_pos, u_neg, w / 2))
            if u_neg < eps:
                break
            j += 1
    _NODE_CACHE[key] = out
    return out


def _grid_points(level, prec, tail_power: float = 5.0):
    """Flattened (u, 1-u, w) list on (0,1); node j=0 is shared, others mirrored."""
    pts = []
    for i, (up, un, w) in enumerate(ts_nodes(level, prec, tail_power)):
        pts.append((up, un, w))
        if i:
            pts.append((un, up, w))
    return pts


def _tail_power(J: str, params: dict) -> float:
    """1/(1 + beta_min) + 1 for the most singular endpoint exponent beta_min."""
    exps = []
    if J in ("III", "IV"):
        exps.append(-params["b"] - 1)
    elif J == "V":
        exps.extend([-params["b"] - 1, -params["c"] - 1])
    elif J == "VI":
        exps.extend([-params["a"] - params["b"] - 1, -params["c"] - 1])
    beta = min([Fraction(0)] + [as_rat(e) for e in exps])
    if beta <= -1:
        raise DomainError(f"endpoint exponent {beta} is not integrable")
    return float(1 / (1 + beta)) + 1.0


def _window(J: str, t) -> float:
    # finite integration window for the semi-infinite families; the weight
    # decays at least like e^{-u} (III) or e^{-u^2/2 - tu} (IV)
    if J == "III":
        return 160.0 + 3 * abs(float(t))
    if J == "IV":
        return 40.0 + 3 * abs(float(t))
    return 1.0


def simplex_phi_coeffs(J: str, N: int, m: int, hbar, t, params: dict, prec: int = 96, level: int = 6, with_dt: bool = True):
    """Coefficients C_(k) = <prod_rho e_{k_rho}(u)> by m-fold simplex quadrature.

    Returns (coeffs, dt_coeffs, err) where err is the difference to the next
    coarser level, taken over the largest coefficient.  dt_coeffs are the
    t-derivatives computed by differentiating under the integral.
    """
    if m > 3:
        raise UsageError("desk scale: m <= 3")
    if J == "II":
        raise UsageError("family II uses a complex polyline; the real simplex grid does not apply")
    check_domain(J, t, params)
    hb = as_rat(hbar)
    with mp.workprec(prec):
        tv = _to_mpf(as_rat(t))
        p = _mp_params(params)
        window = _to_mpf(_window(J, tv))
        on_unit = J in ("V", "VI")
        beta = 2 * _to_mpf(hb)
        tp = _tail_power(J, params)
        nodes = ts_nodes(level, prec, tp)
        ncoarse = len(ts_nodes(level - 1, prec, tp)) if level > 1 else 0
        pts = []
        for j, (up, un, w) in enumerate(nodes):
            # a fine node j sits on the coarser grid iff j is even (indices,
            # not values: deep-tail nodes can round to identical mpfs)
            isc = (j % 2 == 0) and (j // 2) < ncoarse
            pts.append((up, un, w, isc))
            if j:
                pts.append((un, up, w, isc))

        keys = list(itertools.product(range(m + 1), repeat=N))
        acc = {k: mpmath.mpf(0) for k in keys}
        acc_dt = {k: mpmath.mpf(0) for k in keys}
        acc_coarse = {k: mpmath.mpf(0) for k in keys}

        def visit(us, theta_prod, dt_factor, coupling, weight, on_coarse):
            base = weight * theta_prod * coupling
            if not mpmath.isfinite(base):
                raise QuadratureError(f"non-finite integrand near {us}")
            es = _elementary(us, m)
            for k in keys:
                val = base
                for kr in k:
                    val *= es[kr]
                acc[k] += val
                if with_dt:
                    acc_dt[k] += val * dt_factor
                if on_coarse:
                    acc_coarse[k] += val

        # ordered simplex u_1 > u_2 > ... via u_i = u_{i-1} v_i; differences and
        # complements composed stably: 1 - x1 v = (1 - x1) + x1 (1 - v)
        one = mpmath.mpf(1)
        if m == 1:
            for u, omu, w, isc in pts:
                x = u * window
                omx = omu if on_unit else one - x
                visit((x,), theta(J, x, tv, p, omu=omx), dt_log_theta(J, x, tv, p, omu=omx), one, w * window, isc)
        elif m == 2:
            for u1, omu1, w1, isc1 in pts:
                x1 = u1 * window
                omx1 = omu1 if on_unit else one - x1
                th1 = theta(J, x1, tv, p, omu=omx1)
                dt1 = dt_log_theta(J, x1, tv, p, omu=omx1)
                for v, omv, w2, isc2 in pts:
                    x2 = x1 * v
                    omx2 = omx1 + x1 * omv
                    th2 = theta(J, x2, tv, p, omu=omx2)
                    dt2 = dt_log_theta(J, x2, tv, p, omu=omx2)
                    visit(
                        (x1, x2),
                        th1 * th2,
                        dt1 + dt2,
                        (x1 * omv) ** beta,
                        w1 * w2 * window * x1,
                        isc1 and isc2,
                    )
        else:
            for u1, omu1, w1, isc1 in pts:
                x1 = u1 * window
                omx1 = omu1 if on_unit else one - x1
                th1 = theta(J, x1, tv, p, omu=omx1)
                dt1 = dt_log_theta(J, x1, tv, p, omu=omx1)
                for v2, omv2, w2, isc2 in pts:
                    x2 = x1 * v2
                    omx2 = omx1 + x1 * omv2
                    th2 = theta(J, x2, tv, p, omu=omx2)
                    dt2 = dt_log_theta(J, x2, tv, p, omu=omx2)
                    for v3, omv3, w3, isc3 in pts:
                        x3 = x2 * v3
                        omx3 = omx2 + x2 * omv3
                        th3 = theta(J, x3, tv, p, omu=omx3)
                        dt3 = dt_log_theta(J, x3, tv, p, omu=omx3)
                        d12, d23, d13 = x1 * omv2, x2 * omv3, x1 * (omv2 + v2 * omv3)
                        visit(
                            (x1, x2, x3),
                            th1 * th2 * th3,
                            dt1 + dt2 + dt3,
                            (d12 * d13 * d23) ** beta,
                            w1 * w2 * w3 * window * x1 * x2,
                            isc1 and isc2 and isc3,
                        )

        scale = max(abs(v) for v in acc.values())
        if scale == 0:
            raise QuadratureError("wave function vanished identically on the grid")
        # the coarse sum uses the same weights * 2 (h doubled)
        err = max(abs(acc[k] - 2 ** (m) * acc_coarse[k]) for k in keys) / scale
        return acc, (acc_dt if with_dt else None), err


def _elementary(us, m):
    es = [mpmath.mpf(1)]
    for r in range(1, m + 1):
        total = mpmath.mpf(0)
        for combo in itertools.combinations(us, r):
            prod = mpmath.mpf(1)
            for x in combo:
                prod *= x
            total += prod
        es.append(total)
    return es


def phi_numeric(J: str, N: int, m: int, hbar, t, params: dict, prec: int = 96, level: int = 6):
    """Wave-function coefficients over the ordered simplex (see module docstring).

    The full symmetric-domain integral is m! times these values when the
    integrand is symmetric (integer hbar).
    """
    coeffs, _, err = simplex_phi_coeffs(J, N, m, hbar, t, params, prec, level, with_dt=False)
    return coeffs, err


def phi_value(coeffs, z, m):
    """Evaluate sum_k (-1)^{sum k} C_k prod z_rho^{m-k_rho} at numeric z."""
    total = mpmath.mpf(0)
    for k, c in coeffs.items():
        term = c * (-1) ** sum(k)
        for zr, kr in zip(z, k):
            term *= zr ** (m - kr)
        total += term
    return total


# ---------------------------------------------------------------------------
# Numeric Schroedinger residual
# ---------------------------------------------------------------------------


def _formal_phi(reg: Registry, N: int, m: int):
    """Phi with placeholder coefficient variables c_<sorted k>, symmetric in z."""
    phi = RatFun.const(reg, 0)
    for k in itertools.product(range(m + 1), repeat=N):
        name = "c" + "_".join(map(str, sorted(k)))
        mono = reg.var(name)
        for zn, kr in zip(zvars(reg)[:N], k):
            mono = mono * reg.var(zn) ** (m - kr)
        phi = phi + RatFun.from_mpoly(mono * Fraction((-1) ** sum(k)))
    return phi


def _cp_param_kwargs(J, params):
    if J == "II":
        return {}
    if J in ("III", "IV"):
        return {"b": params["b"]}
    if J == "V":
        return {"b": params["b"], "c": params["c"]}
    return {k: params[k] for k in ("a", "b", "c", "d")}


def pde_residual_numeric(
    J: str,
    N: int,
    m: int,
    hbar,
    t,
    params: dict,
    prec: int = 96,
    level: int = 6,
    time_factor: int | None = None,
):
    """Relative residual of hbar * tau * dPhi/dt = H_J Phi on the coefficient vector.

    dPhi/dt is computed two ways (differentiation under the integral and
    Richardson-extrapolated central differences); their disagreement beyond
    1e-8 raises QuadratureError.  tau defaults to the engine-derived time
    normalization N.  Returns a report dict with the residual as an mpf.
    """
    hb = as_rat(hbar)
    t = as_rat(t)
    tau = Fraction(N) if time_factor is None else as_rat(time_factor)
    # exact operator application on the formal coefficient polynomial; after
    # fixing t the rational function is a polynomial in z and the placeholders
    names = [f"z{i}" for i in range(1, N + 1)] + ["t"]
    cnames = sorted({"c" + "_".join(map(str, sorted(k))) for k in itertools.product(range(m + 1), repeat=N)})
    reg = Registry(names + cnames)
    phi_formal = _formal_phi(reg, N, m)
    op = build_cp_hamiltonian(reg, J, N, m, hb, **_cp_param_kwargs(J, params))
    hphi = apply_op(op, phi_formal)
    hpoly = exact_div(hphi.num.subs({"t": t}), hphi.den.subs({"t": t}))

    # numeric coefficient data
    coeffs, dt_exact, err_grid = simplex_phi_coeffs(J, N, m, hb, t, params, prec, level)
    with mp.workprec(prec):
        tv = _to_mpf(t)
        hstep = mpmath.mpf(1) / 512
        shifts = {}
        for mult in (1, -1, Fraction(1, 2), Fraction(-1, 2)):
            ts = t + Fraction(mult if isinstance(mult, int) else mult) * Fraction(1, 512)
            shifts[mult], _, _ = simplex_phi_coeffs(J, N, m, hb, ts, params, prec, level, with_dt=False)
        dt_fd = {}
        for k in coeffs:
            d1 = (shifts[1][k] - shifts[-1][k]) / (2 * hstep)
            d2 = (shifts[Fraction(1, 2)][k] - shifts[Fraction(-1, 2)][k]) / hstep
            dt_fd[k] = (4 * d2 - d1) / 3
        scale_dt = max(abs(v) for v in dt_exact.values())
        dt_gap = max(abs(dt_exact[k] - dt_fd[k]) for k in coeffs) / max(scale_dt, mpmath.mpf(1))
        if dt_gap > mpmath.mpf("1e-8"):
            raise QuadratureError(f"the two dPhi/dt computations disagree: {mpmath.nstr(dt_gap, 5)}")

        # assemble both sides per z-monomial
        taum = _to_mpf(tau) * _to_mpf(hb)
        lhs = {}
        for k, c in dt_exact.items():
            zmono = tuple(m - kr for kr in k)
            lhs[zmono] = lhs.get(zmono, mpmath.mpf(0)) + taum * c * (-1) ** sum(k)
        rhs = {}
        cvals = {}
        for k, c in coeffs.items():
            cvals["c" + "_".join(map(str, sorted(k)))] = c
        zidx = [reg.index[f"z{i}"] for i in range(1, N + 1)]
        for e, coeff in hpoly.terms.items():
            zmono = tuple(e[i] for i in zidx)
            val = _to_mpf(coeff)
            for name in cnames:
                p = e[reg.index[name]]
                if p:
                    val *= cvals[name] ** p
            rhs[zmono] = rhs.get(zmono, mpmath.mpf(0)) + val
        monos = set(lhs) | set(rhs)
        diffs = [abs(lhs.get(mn, mpmath.mpf(0)) - rhs.get(mn, mpmath.mpf(0))) for mn in monos]
        scale = max(
            max(abs(v) for v in lhs.values()), max(abs(v) for v in rhs.values())
        )
        residual = max(diffs) / scale
        return {
            "residual": residual,
            "dt_agreement": dt_gap,
            "grid_error": err_grid,
            "time_factor": tau,
            "family": J,
        }


# ---------------------------------------------------------------------------
# Determinant cross-path (hbar = 1)
# ---------------------------------------------------------------------------


def andreief_phi(J: str, z, t, m: int, params: dict, prec: int = DEFAULT_PREC):
    """Full-domain Phi(z) via m! det of one-dimensional modified moments.

    Valid at hbar = 1 where the coupling is the squared Vandermonde; the
    returned value equals m! times the ordered-simplex integral.
    """
    check_domain(J, t, params)
    with mp.workprec(prec):
        tv = _to_mpf(as_rat(t))
        p = _mp_params(params)
        zv = [_to_mpf(as_rat(x)) for x in z]

        def modified_moment(k):
            def core(u, omu):
                prod = theta(J, u, tv, p, omu=omu) * u**k
                for x in zv:
                    prod *= x - u
                return prod

            if J in ("V", "VI"):
                half = mpmath.mpf(1) / 2
                left = mpmath.quad(lambda u: core(u, 1 - u), [0, half], maxdegree=10)
                right = mpmath.quad(lambda v: core(1 - v, v), [0, half], maxdegree=10)
                return left + right
            return mpmath.quad(lambda u: core(u, 1 - u), [0, mpmath.inf], maxdegree=10)

        mom = [modified_moment(k) for k in range(2 * m - 1)]
        mat = mpmath.matrix(m, m)
        for i in range(m):
            for j in range(m):
                mat[i, j] = mom[i + j]
        return mpmath.mpf(_factorial(m)) * mpmath.det(mat)


def _factorial(n):
    out = 1
    for i in range(2, n + 1):
        out *= i
    return out

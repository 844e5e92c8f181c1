"""Numerical kernels shared by the analytical modules.

Everything here is a pure function.  Integrands are called with numpy
arrays of abscissae and must return arrays of the same shape (plain
ufunc expressions do); scalar calls are also made during root finding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
import heapq

import numpy as np
from scipy import special

__all__ = [
    "QuadratureSpec",
    "DEFAULT_QUADRATURE",
    "ConvergenceError",
    "BracketError",
    "DomainError",
    "integrate",
    "integrate_oscillatory_semiinfinite",
    "find_root",
    "gauss_2f1_coverage_kernel",
    "erfc",
    "erfcx",
    "truncation_radius",
]


class ConvergenceError(RuntimeError):
    """Raised when an iterative numerical method exhausts its budget.

    The best available estimate and its error bound are attached so a
    caller can decide whether a slightly-out-of-tolerance result is usable.
    """

    def __init__(self, message, estimate=float("nan"), error=float("inf")):
        super().__init__(f"{message} (estimate={estimate!r}, error={error!r})")
        self.estimate = estimate
        self.error = error


class BracketError(ValueError):
    """No sign change inside the supplied bracket."""

    def __init__(self, message, f_lo=float("nan"), f_hi=float("nan")):
        super().__init__(f"{message} (f(lo)={f_lo!r}, f(hi)={f_hi!r})")
        self.f_lo = f_lo
        self.f_hi = f_hi


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


@dataclass(frozen=True)
class QuadratureSpec:
    relative_tolerance: float = 1e-6
    absolute_tolerance: float = 1e-10
    max_subdivisions: int = 2000

    def __post_init__(self):
        if not (self.relative_tolerance > 0 and self.absolute_tolerance > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")

    def target(self, value):
        return max(self.relative_tolerance * abs(value), self.absolute_tolerance)


DEFAULT_QUADRATURE = QuadratureSpec()

# 21-point Kronrod rule with its embedded 10-point Gauss rule (QUADPACK qk21).
_XGK = np.array([
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.0,
])
_WGK = np.array([
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077600058050490, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])

KRONROD_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
# Gauss nodes are the odd-indexed Kronrod nodes (x[1], x[3], ... of _XGK).
GAUSS_WEIGHTS = np.zeros(21)
GAUSS_WEIGHTS[[1, 3, 5, 7, 9]] = _WG
GAUSS_WEIGHTS[[19, 17, 15, 13, 11]] = _WG


def _gk21(f, a, b):
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    y = np.asarray(f(mid + half * KRONROD_NODES), dtype=float)
    if y.shape != KRONROD_NODES.shape:
        y = np.broadcast_to(y, KRONROD_NODES.shape)
    if not np.all(np.isfinite(y)):
        raise ValueError(f"integrand is not finite on [{a}, {b}]")
    kronrod = half * float(np.dot(KRONROD_WEIGHTS, y))
    gauss = half * float(np.dot(GAUSS_WEIGHTS, y))
    return kronrod, abs(kronrod - gauss)


def _adaptive(f, a, b, spec):
    value, err = _gk21(f, a, b)
    heap = [(-err, a, b, value, err)]
    total, total_err = value, err
    n = 1
    while total_err > spec.target(total):
        if n >= spec.max_subdivisions:
            raise ConvergenceError(
                f"adaptive quadrature did not converge after {n} subdivisions",
                total, total_err)
        _, lo, hi, v, e = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if not (lo < mid < hi):
            # interval can no longer be split in floating point
            raise ConvergenceError("quadrature interval underflow", total, total_err)
        v1, e1 = _gk21(f, lo, mid)
        v2, e2 = _gk21(f, mid, hi)
        heapq.heappush(heap, (-e1, lo, mid, v1, e1))
        heapq.heappush(heap, (-e2, mid, hi, v2, e2))
        total += v1 + v2 - v
        total_err += e1 + e2 - e
        n += 1
    # re-sum to shed accumulated rounding from the running updates
    total = math.fsum(item[3] for item in heap)
    total_err = math.fsum(item[4] for item in heap)
    return total, total_err


def _scalar(value):
    """Float from a scalar or a one-element array."""
    return float(np.reshape(value, -1)[0])


def integrate(f, a, b, spec=DEFAULT_QUADRATURE, *, full_output=False):
    """Adaptive Gauss-Kronrod quadrature of ``f`` over ``[a, b]``.

    ``b`` may be ``math.inf``; the half-line is mapped onto ``[0, 1)`` with
    ``x = a + t / (1 - t)``.

    Parameters
    ----------
    f : callable
        Vectorised integrand.
    a, b : float
        Limits with ``a < b``.
    spec : QuadratureSpec
        Tolerances and subdivision budget.
    full_output : bool
        Also return the error estimate.

    Raises
    ------
    ConvergenceError
        If the error target is not met within ``spec.max_subdivisions``.
    """
    a = float(a)
    b = float(b)
    if math.isinf(a):
        raise DomainError("lower limit must be finite")
    if a == b:
        return (0.0, 0.0) if full_output else 0.0
    if not a < b:
        raise DomainError(f"require a < b, got a={a}, b={b}")
    if math.isinf(b):
        def mapped(t):
            t = np.asarray(t, dtype=float)
            one_minus = 1.0 - t
            return f(a + t / one_minus) / (one_minus * one_minus)
        value, err = _adaptive(mapped, 0.0, 1.0, spec)
    else:
        value, err = _adaptive(f, a, b, spec)
    return (value, err) if full_output else value


def _wynn_epsilon(sums):
    """Accelerated limit of a sequence of partial sums (Wynn's epsilon)."""
    n = len(sums)
    if n < 3:
        return sums[-1]
    prev = [0.0] * (n + 1)
    cur = list(sums)
    best = sums[-1]
    k = 0
    while len(cur) > 1:
        nxt = []
        for i in range(len(cur) - 1):
            diff = cur[i + 1] - cur[i]
            if diff == 0.0:
                return cur[i + 1] if k % 2 == 1 else best
            nxt.append(prev[i + 1] + 1.0 / diff)
        prev, cur = cur, nxt
        k += 1
        if k % 2 == 0:
            best = cur[-1]
    return best


def _sign_changes(y):
    s = np.sign(y)
    return np.nonzero(s[:-1] * s[1:] < 0)[0]


def _illinois(g, lo, hi, g_lo, g_hi, xtol):
    # regula falsi with the Illinois modification; bracket is maintained
    side = 0
    x = lo
    for _ in range(100):
        if hi - lo <= xtol:
            break
        x = (lo * g_hi - hi * g_lo) / (g_hi - g_lo)
        if not (lo < x < hi):
            x = 0.5 * (lo + hi)
        gx = _scalar(g(x))
        if gx == 0.0:
            return x
        if (gx > 0) == (g_hi > 0):
            hi, g_hi = x, gx
            if side == -1:
                g_lo *= 0.5
            side = -1
        else:
            lo, g_lo = x, gx
            if side == 1:
                g_hi *= 0.5
            side = 1
        if abs(hi - lo) <= xtol:
            break
    return 0.5 * (lo + hi) if hi - lo > 0 else x


def integrate_oscillatory_semiinfinite(g, spec=DEFAULT_QUADRATURE, *,
                                       omega0=1e-8, scale=1.0):
    """Integral of ``g`` over ``(0, inf)`` for decaying, possibly oscillating ``g``.

    The piece ``[0, omega0]`` is taken as ``omega0 * g(omega0)`` (``g`` must have
    a finite limit at zero).  Beyond that, panels of geometrically growing width
    starting at ``scale`` are integrated until two consecutive panels fall
    below the tolerance.  Once a panel shows sustained sign changes the rest of
    the tail is split at the zeros of ``g`` and the resulting alternating series
    is summed with Wynn's epsilon algorithm.
    """
    total = omega0 * _scalar(g(omega0))
    a = omega0
    width = float(scale)
    quiet = 0
    budget = spec.max_subdivisions
    for _ in range(64):
        b = a + width
        xs = np.linspace(a, b, 257)
        ys = np.asarray(g(xs), dtype=float)
        crossings = _sign_changes(ys)
        if len(crossings) >= 6:
            return total + _oscillatory_tail(g, xs, ys, crossings, spec, budget)
        part = integrate(g, a, b, spec)
        total += part
        if abs(part) <= spec.target(total):
            quiet += 1
            if quiet >= 2:
                return total
        else:
            quiet = 0
        a = b
        width *= 2.0
    raise ConvergenceError("no decaying tail found for semi-infinite integrand", total)


def _oscillatory_tail(g, xs, ys, crossings, spec, budget):
    a = xs[0]
    zeros = []
    for i in crossings:
        zeros.append(_illinois(g, xs[i], xs[i + 1], ys[i], ys[i + 1],
                               1e-13 * max(1.0, abs(xs[i]))))
    head = integrate(g, a, zeros[0], spec)
    terms = [integrate(g, lo, hi, spec) for lo, hi in zip(zeros[:-1], zeros[1:])]
    z = zeros[-1]
    g_z_sign = np.sign(g(z + 1e-9 * (zeros[-1] - zeros[-2])))
    spacing = zeros[-1] - zeros[-2]
    sums = []
    running = head
    for t in terms:
        running += t
        sums.append(running)
    estimates = [_wynn_epsilon(sums[-40:])] if len(sums) >= 3 else []
    while len(terms) < budget:
        # march to the next sign change
        step = 0.25 * spacing
        x_prev, y_prev = z, None
        found = None
        x = z
        for _ in range(400):
            x_new = x + step
            y_new = _scalar(g(x_new))
            if y_new == 0.0 or np.sign(y_new) != g_z_sign:
                found = (x, x_new, y_prev, y_new)
                break
            x, y_prev = x_new, y_new
            step *= 1.1
        if found is None:
            # no further zero: integrand keeps its sign, finish with panels
            rest = _monotone_tail(g, z, spacing, spec)
            return running + rest
        lo, hi, _, y_hi = found
        y_lo = _scalar(g(lo)) if lo != z else g_z_sign * 1e-300
        if y_hi == 0.0:
            z_new = hi
        else:
            z_new = _illinois(g, lo, hi, y_lo, y_hi, 1e-13 * max(1.0, abs(hi)))
        t = integrate(g, z, z_new, spec)
        terms.append(t)
        running += t
        sums.append(running)
        spacing = z_new - z
        z = z_new
        g_z_sign = -g_z_sign
        if abs(t) <= 0.1 * spec.target(running):
            return running
        if len(sums) >= 3:
            estimates.append(_wynn_epsilon(sums[-40:]))
            if len(estimates) >= 3:
                e1, e2, e3 = estimates[-3:]
                tol = spec.target(e3)
                if abs(e3 - e2) <= tol and abs(e2 - e1) <= tol:
                    return e3
    raise ConvergenceError("oscillatory tail did not converge",
                           estimates[-1] if estimates else running)


def _monotone_tail(g, start, width, spec):
    total = 0.0
    a = start
    quiet = 0
    for _ in range(64):
        b = a + width
        part = integrate(g, a, b, spec)
        total += part
        if abs(part) <= spec.target(total):
            quiet += 1
            if quiet >= 2:
                return total
        else:
            quiet = 0
        a = b
        width *= 2.0
    raise ConvergenceError("tail panels did not decay", total)


def find_root(f, lo, hi, tol=1e-12, max_iterations=400):
    """Bisection root of ``f`` on ``[lo, hi]``.

    Returns the midpoint of the final bracket, whose width is at most ``tol``.
    Raises :class:`BracketError` when ``f(lo)`` and ``f(hi)`` share a sign.
    """
    lo = float(lo)
    hi = float(hi)
    f_lo = _scalar(f(lo))
    f_hi = _scalar(f(hi))
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if f_lo * f_hi > 0:
        raise BracketError(f"no sign change on [{lo}, {hi}]", f_lo, f_hi)
    for _ in range(max_iterations):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f_mid = _scalar(f(mid))
        if f_mid == 0.0:
            return mid
        if (f_mid < 0) == (f_lo < 0):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    return 0.5 * (lo + hi)


def gauss_2f1_coverage_kernel(tau, alpha, spec=DEFAULT_QUADRATURE):
    """``2 tau / (alpha - 2) * 2F1(1, 1 - 2/alpha; 2 - 2/alpha; -tau)``.

    With ``beta = 1 - 2/alpha`` the Euler integral collapses to
    ``2F1 = int_0^1 dw / (1 + tau * w**(1/beta))`` after substituting
    ``w = t**beta``, which removes the endpoint singularity.
    """
    tau = float(tau)
    alpha = float(alpha)
    if alpha <= 2.0:
        raise DomainError(f"path-loss exponent must exceed 2, got {alpha}")
    if tau < 0:
        raise DomainError(f"threshold must be non-negative, got {tau}")
    if tau == 0.0:
        return 0.0
    power = alpha / (alpha - 2.0)
    tight = QuadratureSpec(min(spec.relative_tolerance, 1e-12), 1e-300,
                           spec.max_subdivisions)
    hyp = integrate(lambda w: 1.0 / (1.0 + tau * w ** power), 0.0, 1.0, tight)
    return 2.0 * tau / (alpha - 2.0) * hyp


def erfc(x):
    """Complementary error function (libm implementation)."""
    return math.erfc(x)


def erfcx(x):
    """Scaled complementary error function ``exp(x**2) * erfc(x)``."""
    return float(special.erfcx(x))


def truncation_radius(intensity, mass=1e-10):
    """Radius beyond which a nearest-neighbour distance has ``mass`` probability."""
    return math.sqrt(math.log(1.0 / mass) / (math.pi * intensity))

# app/services/profile_service.py
"""
One-dimensional transition profiles: the heteroclinic H, its truncation bar-H
with exact +-1 plateaus, and the collapsing family Psi_t.
"""
import logging
import math

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import cumulative_trapezoid, solve_ivp
from scipy.interpolate import CubicSpline

from app.exceptions import DomainError, InputError
from app.models import CollapsingProfile, Epsilon, Potential, Profile1D, Table, TruncatedProfile
from app.services.allen_cahn_service import sigma_constant

logger = logging.getLogger(__name__)

PROFILE_REACH = 60.0
DENSITY_SAMPLES = 8001


# -- smooth cutoffs -----------------------------------------------------------

def _psi(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(s):
    """C-infinity step: 0 for s <= 0, 1 for s >= 1, slope at most 2."""
    s = np.asarray(s, dtype=float)
    a, b = _psi(s), _psi(1.0 - s)
    return a / (a + b)


def _shoulder(s):
    t = np.abs(np.asarray(s, dtype=float)) - 1.0
    inside = (t > 0) & (t < 1)
    return t, inside, np.where(inside, t, 0.5)


def bump(s):
    """
    Cutoff chi: 1 on |s| <= 1, exp(1 - 1/(1 - (|s| - 1)^2)) on 1 < |s| < 2,
    0 on |s| >= 2. C1 at |s| = 1 and flat to every order at |s| = 2.
    """
    t, inside, safe = _shoulder(s)
    return np.where(t <= 0, 1.0, np.where(inside, np.exp(1.0 - 1.0 / (1.0 - safe ** 2)), 0.0))


def bump_derivative(s):
    s = np.asarray(s, dtype=float)
    _, inside, safe = _shoulder(s)
    slope = -2.0 * safe / (1.0 - safe ** 2) ** 2 * np.exp(1.0 - 1.0 / (1.0 - safe ** 2))
    return np.where(inside, np.sign(s) * slope, 0.0)


# -- profiles -----------------------------------------------------------------

def heteroclinic(p=None):
    """
    Monotone solution of u'' = W'(u) with u(0) = 0 and u(+-inf) = +-1.

    The standard well gives tanh(r/sqrt 2). Tabulated wells integrate the
    first-order reduction u' = sqrt(2 W(u)) and extend oddly.
    """
    p = p or Potential()
    if p.kind == 'standard' and p.scale == 1.0:
        root2 = math.sqrt(2.0)
        return Profile1D('H', lambda r: np.tanh(r / root2),
                         lambda r: (1.0 - np.tanh(r / root2) ** 2) / root2)

    inner = np.linspace(-0.999, 0.999, 4001)
    if np.any(p.W(inner) <= 0):
        raise DomainError("Potential vanishes inside (-1, 1); no heteroclinic connection")

    def rhs(_, y):
        return [math.sqrt(max(2.0 * p.W(y[0]), 0.0))]

    solution = solve_ivp(rhs, (0.0, PROFILE_REACH), [0.0], method='DOP853',
                         rtol=1e-12, atol=1e-14, dense_output=True)
    if not solution.success:
        raise DomainError(f"Heteroclinic integration failed: {solution.message}")
    r = np.linspace(0.0, PROFILE_REACH, 6001)
    u = np.minimum(solution.sol(r)[0], 1.0)
    spline = CubicSpline(r, u)

    def value(x):
        a = np.minimum(np.abs(x), PROFILE_REACH)
        return np.sign(x) * spline(a)

    def derivative(x):
        return np.sqrt(np.maximum(2.0 * p.W(value(x)), 0.0))

    logger.debug("heteroclinic integrated for %r", p)
    return Profile1D('H', value, derivative)


def truncate(h, eps):
    """
    bar-H(r) = chi(|r|/Lambda) H(r) + sign(r) (1 - chi(|r|/Lambda)).

    Identical to H on (-Lambda, Lambda) and exactly +-1 beyond 2 Lambda.
    """
    eps = eps if isinstance(eps, Epsilon) else Epsilon(eps)
    lam = eps.Lambda

    def value(r):
        s = np.abs(r) / lam
        blended = bump(s) * h(r) + np.sign(r) * (1.0 - bump(s))
        return np.where(s < 1.0, h(r), blended)

    def derivative(r):
        s = np.abs(r) / lam
        dc = bump_derivative(s) * np.sign(r) / lam
        blended = dc * (h(r) - np.sign(r)) + bump(s) * h.derivative(r)
        return np.where(s < 1.0, h.derivative(r), blended)

    return TruncatedProfile(value, derivative, eps, h)


def collapsing_family(eps, t, p=None):
    if t < 0:
        raise InputError("Collapsing parameter t must be nonnegative")
    return CollapsingProfile(truncate(heteroclinic(p), eps), t)


# -- one-dimensional energies -------------------------------------------------

def _gauss_panels(f, lo, hi, panels=400, order=8):
    x, w = leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    half = 0.5 * (edges[1:] - edges[:-1])[:, None]
    nodes = (mid + half * x).ravel()
    weights = (half * w).ravel()
    return float(np.sum(weights * f(nodes)))


def profile_energy_1d(value, derivative, eps, p, lo, hi, panels=400):
    """(1/2sigma) * integral over [lo, hi] of eps u'^2/2 + W(u)/eps, by Gauss panels."""
    e = float(eps)
    sigma = sigma_constant(p)

    def density(r):
        return 0.5 * e * derivative(r) ** 2 + p.W(value(r)) / e

    return _gauss_panels(density, lo, hi, panels) / (2 * sigma)


def layer_energy(eps, p=None, truncated=False):
    """Energy of one rescaled layer H(r/eps) or bar-H(r/eps) on the line."""
    p = p or Potential()
    eps = eps if isinstance(eps, Epsilon) else Epsilon(eps)
    e = eps.value
    h = heteroclinic(p)
    reach = max(4.0 * e * eps.Lambda, 30.0 * e)
    if truncated:
        bar = truncate(h, eps)
        return profile_energy_1d(bar.scaled, bar.scaled_derivative, e, p, -reach, reach)
    return profile_energy_1d(lambda r: h(r / e), lambda r: h.derivative(r / e) / e,
                             e, p, -reach, reach)


def _cumulative_density(eps, p):
    bar = truncate(heteroclinic(p), eps)
    e = eps.value
    top = 2.0 * e * eps.Lambda
    s = np.linspace(-top, top, DENSITY_SAMPLES)
    density = 0.5 * e * bar.scaled_derivative(s) ** 2 + p.W(bar.scaled(s)) / e
    return s, cumulative_trapezoid(density, s, initial=0.0)


def collapsing_energy(eps, t, p=None):
    """
    E(Psi_t) = (1/sigma) * integral of the layer density from -2 eps Lambda to
    2 eps Lambda - t. Read off a cumulative table, so it is non-increasing in t
    and exactly 0 for t >= 4 eps Lambda.
    """
    p = p or Potential()
    eps = eps if isinstance(eps, Epsilon) else Epsilon(eps)
    s, cumulative = _cumulative_density(eps, p)
    top = s[-1]
    upper = top - np.asarray(t, dtype=float)
    values = np.interp(upper, s, cumulative, left=0.0, right=cumulative[-1])
    values = values / sigma_constant(p)
    return values if values.ndim else float(values)


def truncation_residual(eps, p=None, samples=20001):
    """
    sup |bar-H'' - W'(bar-H)| on the unit scale and the constant C = sup / eps^3.

    bar-H'' is differentiated numerically from the closed-form derivative.
    """
    p = p or Potential()
    eps = eps if isinstance(eps, Epsilon) else Epsilon(eps)
    bar = truncate(heteroclinic(p), eps)
    r = np.linspace(-2.5 * eps.Lambda, 2.5 * eps.Lambda, samples)
    second = np.gradient(bar.derivative(r), r)
    residual = float(np.max(np.abs(second - p.dW(bar(r)))))
    return residual, residual / eps.value ** 3


def energy_convergence_table(eps_list, p=None):
    """
    Rows (eps, Lambda, E(H_eps), E(bar-H^eps), |E(bar-H^eps) - 1|, C) and the
    fitted log-log slope of the defect column.
    """
    p = p or Potential()
    table = Table(['eps', 'Lambda', 'energy_H', 'energy_truncated', 'defect', 'residual_constant'])
    for value in sorted(eps_list, reverse=True):
        eps = Epsilon(value)
        full = layer_energy(eps, p)
        cut = layer_energy(eps, p, truncated=True)
        _, constant = truncation_residual(eps, p)
        table.append(eps.value, eps.Lambda, full, cut, abs(cut - 1.0), constant)
    slope = None
    if len(table.rows) >= 2:
        x = np.log(table.column('eps'))
        y = np.log(np.maximum(table.column('defect'), 1e-300))
        slope = float(np.polyfit(x, y, 1)[0])
    return table, slope


def profile_table(eps, t=0.0, p=None, samples=401):
    """Sampled (r, H_eps, bar-H^eps, Psi_t) for the profile1d export."""
    p = p or Potential()
    eps = eps if isinstance(eps, Epsilon) else Epsilon(eps)
    h = heteroclinic(p)
    bar = truncate(h, eps)
    psi = CollapsingProfile(bar, t)
    reach = 5.0 * eps.value * eps.Lambda
    r = np.linspace(-reach, reach, samples)
    table = Table(['r', 'H', 'H_truncated', 'Psi_t'])
    for ri, a, b, c in zip(r, h(r / eps.value), bar.scaled(r), psi(r)):
        table.append(float(ri), float(a), float(b), float(c))
    return table

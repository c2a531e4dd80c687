# app/services/allen_cahn_service.py
import logging

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import linalg, optimize, sparse
from scipy.sparse.linalg import LinearOperator, lobpcg, splu

from app.exceptions import DomainError, InputError, SolverError
from app.models import CriticalPoint, EnergyReport, Epsilon, SpectralReport
from app.services.domain_service import (_check, dirichlet_pairing, integrate, laplace_beltrami,
                                         mass_matrix, node_gradient_energy, require_finite,
                                         stiffness_matrix)

logger = logging.getLogger(__name__)

DENSE_LIMIT = 1200
MAX_EIGS = 10


def _eps(eps):
    return eps if isinstance(eps, Epsilon) else Epsilon(eps)


def sigma_constant(p, nodes=64):
    """
    sigma = integral over [-1, 1] of sqrt(W/2), by Gauss-Legendre quadrature.

    For the standard well the integrand is a polynomial and the rule is exact:
    sigma = sqrt(2)/3.
    """
    x, w = leggauss(nodes)
    return float(np.sum(w * np.sqrt(np.maximum(p.W(x), 0.0) / 2.0)))


def energy(u, eps, g, p):
    """
    Allen-Cahn energy E = (1/2sigma) * integral(eps|grad u|^2/2 + W(u)/eps).

    Both addends are returned separately; their difference is the
    equipartition defect.
    """
    e = _eps(eps).value
    u = require_finite(_check(u, g), 'u')
    sigma = sigma_constant(p)
    gradient = 0.5 * e * dirichlet_pairing(u, u, g) / (2 * sigma)
    potential = integrate(p.W(u), g) / e / (2 * sigma)
    return EnergyReport(gradient=gradient, potential=potential, sigma=sigma)


def energy_density(u, eps, g, p):
    """Per-node energy density whose integral is energy(u).total."""
    e = _eps(eps).value
    u = require_finite(_check(u, g), 'u')
    sigma = sigma_constant(p)
    return (0.5 * e * node_gradient_energy(u, g) + p.W(u) / e) / (2 * sigma)


def first_variation(u, eps, g, p):
    """eps*Delta u - W'(u)/eps, the negative L2(vol) gradient of 2*sigma*E."""
    e = _eps(eps).value
    u = require_finite(_check(u, g), 'u')
    return e * laplace_beltrami(u, g) - p.dW(u) / e


def second_variation(u, phi, eps, g, p):
    """Quadratic form integral(eps|grad phi|^2 + W''(u) phi^2 / eps)."""
    e = _eps(eps).value
    u = require_finite(_check(u, g), 'u')
    phi = require_finite(_check(phi, g), 'phi')
    return e * dirichlet_pairing(phi, phi, g) + integrate(p.d2W(u) * phi * phi, g) / e


def perturbed_functional(u, eps, mu, g, p):
    """F = E - (mu/2sigma) * integral(u); its gradient pairs like first_variation."""
    if mu < 0:
        raise InputError("mu must be nonnegative")
    report = energy(u, eps, g, p)
    return report.total - mu * integrate(u, g) / (2 * report.sigma)


def perturbed_first_variation(u, eps, mu, g, p):
    if mu < 0:
        raise InputError("mu must be nonnegative")
    return first_variation(u, eps, g, p) + mu


def stationary_constants(eps, mu, p):
    """
    Constant equilibria of the perturbed flow, W'(k) = eps*mu, near each well.

    Returns (k_minus, k_plus); both sit slightly above the wells for mu > 0.
    """
    target = _eps(eps).value * mu
    knee = 1.0 / np.sqrt(3.0)

    def residual(k):
        return p.dW(k) - target

    brackets = [(-1.5, -knee), (knee, 2.0)]
    roots = []
    for lo, hi in brackets:
        if residual(lo) * residual(hi) > 0:
            raise DomainError("eps*mu too large for constants near the wells", eps_mu=target)
        roots.append(float(optimize.brentq(residual, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)))
    return tuple(roots)


# -- spectrum -----------------------------------------------------------------

def _linearized(u, e, g, p):
    B = mass_matrix(g)
    A = (-e * stiffness_matrix(g) + B @ sparse.diags(p.d2W(u).ravel() / e)).tocsc()
    return A, B


def spectrum(u, eps, g, p, k=3, seed=7, keep_fields=True, tol_scale=1e-6,
             max_iter=500):
    """
    k lowest eigenpairs of phi -> -eps*Delta phi + W''(u) phi/eps in L2(vol).

    Small grids use a dense symmetric-definite solve; larger grids run LOBPCG
    from a seeded block with a sparse LU preconditioner of the shifted operator.
    """
    e = _eps(eps).value
    u = require_finite(_check(u, g), 'u')
    if not 1 <= k <= MAX_EIGS:
        raise InputError(f"k must lie in [1, {MAX_EIGS}]")
    tol_eig = tol_scale / e
    A, B = _linearized(u, e, g, p)
    n = g.grid.size
    if n <= DENSE_LIMIT:
        values, vectors = linalg.eigh(A.toarray(), B.toarray(), subset_by_index=[0, k - 1])
    else:
        values, vectors = _lobpcg(A, B, k, e, p, u, seed, tol_eig, max_iter)
    order = np.argsort(values)
    values = values[order]
    vectors = vectors[:, order]
    fields = None
    if keep_fields:
        fields = np.stack([vectors[:, j].reshape(g.grid.shape) for j in range(k)])
    return SpectralReport(eigenvalues=values, eigenfields=fields, tol_eig=tol_eig)


def _lobpcg(A, B, k, e, p, u, seed, tol_eig, max_iter):
    n = A.shape[0]
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, k))
    shift = max(0.0, -float(np.min(p.d2W(u)))) / e + 1.0 / e
    lu = splu((A + shift * B).tocsc())
    M = LinearOperator((n, n), matvec=lu.solve, dtype=float)
    tol = max(1e-10, 1e-3 * tol_eig)
    values, vectors = lobpcg(A, X, B=B, M=M, largest=False, tol=tol, maxiter=max_iter)
    residual = A @ vectors - (B @ vectors) * values
    scale = np.sqrt(np.sum((B @ vectors) * vectors, axis=0))
    worst = float(np.max(np.linalg.norm(residual, axis=0) / np.maximum(scale, 1e-300)))
    if not np.isfinite(worst) or worst > max(tol_eig, 1e-6) * max(1.0, abs(values).max()):
        raise SolverError("Eigen-solver did not converge", residual=worst)
    logger.debug("lobpcg converged: residual %.3e", worst)
    return values, vectors


def critical_point(u, eps, g, p, k=3, provenance='', seed=7, with_spectrum=True, tol_scale=1e-6):
    """Wrap a Field with its energy, residual and (optionally) spectrum."""
    residual = float(np.max(np.abs(first_variation(u, eps, g, p))))
    report = spectrum(u, eps, g, p, k=k, seed=seed, keep_fields=False, tol_scale=tol_scale) \
        if with_spectrum else None
    return CriticalPoint(field=np.asarray(u, dtype=float), energy=energy(u, eps, g, p),
                         residual=residual, spectrum=report, provenance=provenance)

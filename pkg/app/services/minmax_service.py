# app/services/minmax_service.py
"""
Mountain passes between strictly stable critical points.

Valleys are harvested by flowing seeds under E. Each pair of valleys is
joined by a climbing string: interior nodes descend, the highest node climbs
along the string tangent, and the two half-strings are reparametrized to
equal L2 arclength. The climber is re-selected on a schedule, and a damped
Newton polish with near-null modes deflated finishes it.
"""
import hashlib
import itertools
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import minres

from app.exceptions import BoundViolation, InputError, LabError, SolverError
from app.models import (BoundCheck, Epsilon, FlowConfig, LowerBoundVerdict, MountainPassResult,
                        Table, Valley)
from app.services.allen_cahn_service import critical_point, energy, first_variation, spectrum
from app.services.domain_service import (_check, integrate, l2_distance, mass_matrix,
                                         require_finite, stiffness_matrix)
from app.services.flow_service import _Stepper, flow

logger = logging.getLogger(__name__)

CONSTANT_SPREAD = 1e-6
CLIMB_AFTER = 10
RESELECT_EVERY = 50
# Newton takes over at this multiple of tol_res
NEWTON_SWITCH = 1e3
NEWTON_ITERATIONS = 30
LINE_SEARCH_HALVINGS = 12
NULL_MODES = 4
NULL_FACTOR = 10.0


def _eps(eps):
    return eps if isinstance(eps, Epsilon) else Epsilon(eps)


def _canonical_key(valley):
    digest = hashlib.sha1(np.ascontiguousarray(valley.field).tobytes()).hexdigest()
    return (round(valley.energy, 12), round(float(np.mean(valley.field)), 12), digest)


# -- valleys ------------------------------------------------------------------

def harvest_valleys(seeds, eps, g, p, cfg=None, dedup_tol=1e-3, k=3, seed=7, tol_scale=1e-6,
                    provenances=None):
    """
    Flow each seed under E and keep the converged, strictly stable, pairwise
    distinct limits. The constants -1 and +1 are always valleys.
    """
    eps = _eps(eps)
    cfg = cfg or FlowConfig.for_eps(eps.value)
    cfg = cfg.replace(mu=0.0, snapshot_every=0)
    valleys = []
    for c in (-1.0, 1.0):
        cp = critical_point(np.full(g.grid.shape, c), eps, g, p, k=k, provenance=f'constant {c:+g}',
                            seed=seed, tol_scale=tol_scale)
        valleys.append(Valley(cp, cp.provenance))

    provenances = list(provenances or [])
    for j, u0 in enumerate(seeds):
        label = provenances[j] if j < len(provenances) else f'seed {j}'
        u0 = require_finite(_check(u0, g), label)
        result = flow(u0, cfg, eps, g, p, k=k, seed=seed, tol_scale=tol_scale)
        if not result.converged:
            logger.info("valley seed %s did not converge; skipped", label)
            continue
        if not result.spectrum.strictly_stable:
            logger.info("valley seed %s flowed to a non-strictly-stable limit; skipped", label)
            continue
        if any(l2_distance(result.limit, v.field, g) <= dedup_tol for v in valleys):
            logger.debug("valley seed %s duplicates a known valley", label)
            continue
        cp = critical_point(result.limit, eps, g, p, k=k, provenance=f'flow limit of {label}',
                            seed=seed, tol_scale=tol_scale)
        valleys.append(Valley(cp, cp.provenance))

    valleys.sort(key=_canonical_key)
    logger.info("harvested %d valleys at eps=%.4g", len(valleys), eps.value)
    return valleys


# -- climbing string ----------------------------------------------------------

def _initial_string(a, b, nodes, perturbation, seed, g):
    """Linear interpolation plus a single-lobe bump with seeded phases, zero at both ends."""
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 2 * np.pi, size=g.grid.d)
    lobe = sum(np.cos(2 * np.pi * x / length + phase)
               for x, length, phase in zip(g.grid.mesh(), g.grid.lengths, phases))
    lobe = lobe / max(float(np.max(np.abs(lobe))), 1e-300)
    alphas = np.linspace(0.0, 1.0, nodes)
    return [(1 - s) * a + s * b + perturbation * np.sin(np.pi * s) * lobe for s in alphas]


def _reparametrize(string, g, lo, hi):
    """Equal L2 arclength between the fixed nodes lo and hi, by linear interpolation."""
    if hi - lo < 2:
        return
    part = string[lo:hi + 1]
    lengths = np.array([l2_distance(x, y, g) for x, y in zip(part[:-1], part[1:])])
    arc = np.concatenate([[0.0], np.cumsum(lengths)])
    if arc[-1] <= 0:
        return
    targets = np.linspace(0.0, arc[-1], len(part))
    rebuilt = []
    for t in targets[1:-1]:
        j = min(int(np.searchsorted(arc, t, side='right')) - 1, len(part) - 2)
        w = 0.0 if lengths[j] == 0 else (t - arc[j]) / lengths[j]
        rebuilt.append((1 - w) * part[j] + w * part[j + 1])
    string[lo + 1:hi] = rebuilt


def _tangent(string, i, g):
    t = string[i + 1] - string[i - 1]
    norm = np.sqrt(max(integrate(t * t, g), 0.0))
    return t / norm if norm > 0 else t


def _null_modes(u, e, g, p, tol_scale):
    """B-normalized eigenfields of the Hessian whose eigenvalue is numerically zero."""
    report = spectrum(u, e, g, p, k=NULL_MODES, tol_scale=tol_scale)
    flat = np.abs(report.eigenvalues) <= NULL_FACTOR * report.tol_eig
    return [report.eigenfields[j].ravel() for j in np.flatnonzero(flat)]


def _deflate(x, modes, B):
    for psi in modes:
        x = x - (psi @ (B @ x)) * psi
    return x


def _newton_polish(u, e, g, p, tol_res, tol_scale=1e-6, iterations=NEWTON_ITERATIONS):
    """
    Damped Newton on eps*Delta u - W'(u)/eps = 0.

    Translations and the flat breathing of distant layers make the Jacobian
    nearly singular; those modes are deflated from the right-hand side and
    from the step. Each step is halved until the sup residual decreases.
    """
    K = stiffness_matrix(g)
    B = mass_matrix(g)
    shape = g.grid.shape
    modes = _null_modes(u, e, g, p, tol_scale)
    residual = first_variation(u, e, g, p)
    norm = float(np.max(np.abs(residual)))
    for _ in range(iterations):
        if norm <= tol_res:
            break
        J = (e * K - B @ sparse.diags(p.d2W(u).ravel() / e)).tocsr()
        rhs = -(B @ _deflate(residual.ravel(), modes, B))
        delta, _ = minres(J, rhs, rtol=1e-12, maxiter=10 * u.size)
        if not np.all(np.isfinite(delta)):
            break
        delta = _deflate(delta, modes, B).reshape(shape)
        step = 1.0
        for _ in range(LINE_SEARCH_HALVINGS):
            trial = u + step * delta
            trial_residual = first_variation(trial, e, g, p)
            trial_norm = float(np.max(np.abs(trial_residual)))
            if trial_norm < norm:
                break
            step *= 0.5
        else:
            logger.debug("newton line search stalled at residual %.3e", norm)
            break
        u, residual, norm = trial, trial_residual, trial_norm
    return u, norm


def mountain_pass(v1, v2, eps, g, p, nodes=33, max_iter=4000, perturbation=0.05, seed=7,
                  cfg=None, k=3, tol_scale=1e-6):
    """
    Climbing string from v1 to v2.

    Returns a MountainPassResult whose value is the saddle energy. Raises
    SolverError carrying the partial result when the climbing node does not
    reach a critical point.
    """
    eps = _eps(eps)
    e = eps.value
    if nodes < 3:
        raise InputError("A string needs at least three nodes")
    if l2_distance(v1.field, v2.field, g) <= 1e-12:
        raise InputError("Mountain pass needs two distinct valleys")
    cfg = cfg or FlowConfig.for_eps(e)
    stepper = _Stepper(g, cfg.dt, e, 0.0, p)

    string = _initial_string(v1.field, v2.field, nodes, perturbation, seed, g)
    climber = None
    residual = np.inf
    iteration = 0
    switch = NEWTON_SWITCH * cfg.tol_res
    climb_after = min(max(CLIMB_AFTER, max_iter // 5), max_iter)
    for iteration in range(1, max_iter + 1):
        if iteration >= climb_after and (iteration - climb_after) % RESELECT_EVERY == 0:
            energies = [energy(u, e, g, p).total for u in string[1:-1]]
            chosen = 1 + int(np.argmax(energies))
            if chosen != climber:
                logger.debug("string iteration %d: climber is node %d", iteration, chosen)
            climber = chosen
        for i in range(1, nodes - 1):
            u = string[i]
            if i == climber:
                force = first_variation(u, e, g, p)
                tau = _tangent(string, i, g)
                along = integrate(force * tau, g)
                string[i] = stepper(u) - 2.0 * (cfg.dt / e) * along * tau
            else:
                string[i] = stepper(u)
        if climber is None:
            _reparametrize(string, g, 0, nodes - 1)
            continue
        _reparametrize(string, g, 0, climber)
        _reparametrize(string, g, climber, nodes - 1)
        residual = float(np.max(np.abs(first_variation(string[climber], e, g, p))))
        if iteration % cfg.monitor_every == 0:
            logger.debug("string iteration %d: climber residual %.3e", iteration, residual)
        if residual <= switch:
            break

    tol_res = cfg.tol_res
    saddle_field = string[climber] if climber is not None else string[nodes // 2]
    saddle_field, residual = _newton_polish(saddle_field, e, g, p, tol_res, tol_scale=tol_scale)
    converged = residual <= tol_res
    if climber is not None:
        string[climber] = saddle_field
    saddle = critical_point(saddle_field, eps, g, p, k=k, provenance='mountain-pass saddle',
                            seed=seed, tol_scale=tol_scale)
    path_energies = [energy(u, e, g, p).total for u in string]
    result = MountainPassResult(pair=(v1, v2), value=saddle.energy.total, saddle=saddle,
                                path=string, path_energies=path_energies,
                                iterations=iteration, converged=converged)
    if not converged:
        raise SolverError("Climbing string did not reach a critical point",
                          residual=residual, result=result)
    logger.info("mountain pass %s -> %s: value %.6g, index %s after %d iterations",
                v1.provenance, v2.provenance, result.value, result.index, iteration)
    return result


def mountain_pass_gap(result):
    """delta = minmax value minus the higher valley energy."""
    return result.gap


# -- outer optimization -------------------------------------------------------

PAIR_COLUMNS = ['valley_a', 'valley_b', 'value', 'gap', 'index', 'converged', 'status']


def optimize_valley_pairs(valleys, eps, g, p, threads=1, **kwargs):
    """
    Mountain pass over every unordered pair; the winner minimizes the value.

    Returns (saddle CriticalPoint, Table, list of results). Failed pairs stay
    in the table with their status.
    """
    if len(valleys) < 2:
        raise InputError("At least two valleys are needed")
    ordered = sorted(valleys, key=_canonical_key)
    pairs = list(itertools.combinations(range(len(ordered)), 2))

    def solve(pair):
        a, b = pair
        try:
            return mountain_pass(ordered[a], ordered[b], eps, g, p, **kwargs), 'ok'
        except SolverError as exc:
            return exc.result, 'unconverged'
        except LabError as exc:
            logger.warning("pair (%d, %d) failed: %s", a, b, exc.message)
            return None, type(exc).__name__

    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        outcomes = list(pool.map(solve, pairs))

    table = Table(list(PAIR_COLUMNS))
    results = []
    for (a, b), (result, status) in zip(pairs, outcomes):
        if result is None:
            table.append(ordered[a].provenance, ordered[b].provenance, None, None, None, False, status)
            continue
        table.append(ordered[a].provenance, ordered[b].provenance, float(result.value),
                     float(result.gap), result.index, result.converged, status)
        if status == 'ok':
            results.append(result)
    if not results:
        raise SolverError("No valley pair produced a converged mountain pass", result=table)

    winner = min(results, key=lambda r: r.value)
    if winner.index is not None and winner.index > 1:
        raise BoundViolation("Winning saddle has Morse index above 1",
                             check=BoundCheck('winner Morse index', winner.index, 1, 0.0))
    return winner.saddle, table, results


# -- lower bound --------------------------------------------------------------

def lower_bound_check(u, eps, floor=None):
    """Constant (energy ~ 0) or non-constant with energy against the measured floor."""
    field = getattr(u, 'field', u)
    total = u.energy.total if hasattr(u, 'energy') else None
    if total is None:
        raise InputError("lower_bound_check needs a CriticalPoint")
    if float(np.ptp(field)) <= CONSTANT_SPREAD:
        return LowerBoundVerdict('constant', total)
    return LowerBoundVerdict('non-constant', total, floor)


def energy_floor(rows):
    """Smallest non-constant critical energy across (eps, energy) sweep rows, or None."""
    values = [float(value) for _, value in rows if value is not None and value > 0]
    return min(values) if values else None

# app/services/flow_service.py
"""
Negative gradient flows of E and of the perturbed functional
F = E - (mu/2sigma) * integral(u).

One step solves (V - dt K) u_new = V (u + dt (-W'(u)/eps^2 + mu/eps)) with V
the volume matrix and K = V Delta_g. The implicit matrix is an M-matrix, so
for dt <= eps^2/4 the scheme is monotone: ordered starts stay ordered.
"""
import logging
import math

import numpy as np
from scipy.sparse.linalg import splu

from app.exceptions import CalibrationError, DomainError, InputError, InstabilityError, SchemeError
from app.models import (BoundCheck, ComparisonVerdict, DichotomyVerdict, Epsilon, FlowConfig,
                        FlowResult, FlowTrace, RelaxResult)
from app.services.allen_cahn_service import critical_point, energy, first_variation, spectrum
from app.services.domain_service import (_check, integrate, mass_matrix, require_finite,
                                         stiffness_matrix, volume)
from app.services.geometry_service import fiber_coordinate

logger = logging.getLogger(__name__)

BLOW_UP = 10.0
MAX_HALVINGS = 5
DISSIPATION_TOL = 1e-10
TIE_BREAK = 1e-12
CONSTANT_SPREAD = 1e-6
ORDER_TOL = 1e-9


def _eps(eps):
    return eps if isinstance(eps, Epsilon) else Epsilon(eps)


def _functional(u, e, mu, g, p):
    report = energy(u, e, g, p)
    return report, report.total - mu * integrate(u, g) / (2 * report.sigma)


def select_mu(m, eps, g, p):
    """Twice the sup of the negative part of eps*Delta m - W'(m)/eps, floored at 1e-8/eps."""
    e = _eps(eps).value
    residual = first_variation(m, e, g, p)
    deficit = max(0.0, -float(np.min(residual)))
    return max(2.0 * deficit, 1e-8 / e)


class _Stepper:
    """Factorized semi-implicit step for one (grid, dt, eps, mu)."""

    def __init__(self, g, dt, e, mu, p):
        self.shape = g.grid.shape
        self.v = (g.volume * g.grid.cell_volume).ravel()
        self.lu = splu((mass_matrix(g) - dt * stiffness_matrix(g)).tocsc())
        self.dt, self.e, self.mu, self.p = dt, e, mu, p

    def __call__(self, u):
        explicit = u + self.dt * (-self.p.dW(u) / self.e ** 2 + self.mu / self.e)
        return self.lu.solve(self.v * explicit.ravel()).reshape(self.shape)


def _tie_break(u, e, mu, g, p, tol_res, trace):
    """Nudge a constant unstable equilibrium toward +1 so the run is deterministic."""
    if np.ptp(u) > 0:
        return u
    c = float(u.flat[0])
    if p.d2W(c) >= 0:
        return u
    residual = float(np.max(np.abs(first_variation(u, e, g, p) + mu)))
    if residual > tol_res:
        return u
    trace.notes.append(f'tie-break +{TIE_BREAK:g} at unstable constant {c:g}')
    logger.info("flow starts at an unstable constant %.4g; biasing toward +1", c)
    return u + TIE_BREAK


def _run(u0, cfg, e, g, p, monitor_sign):
    trace = FlowTrace(dt=cfg.dt)
    u = _tie_break(u0.copy(), e, cfg.mu, g, p, cfg.tol_res, trace)
    stepper = _Stepper(g, cfg.dt, e, cfg.mu, p)

    gradient = first_variation(u, e, g, p) + cfg.mu
    report, F = _functional(u, e, cfg.mu, g, p)
    residual = float(np.max(np.abs(gradient)))
    trace.record(0, 0.0, report.total, F, residual, float(gradient.min()), u)
    if cfg.snapshot_every:
        trace.snapshot_times.append(0.0)
        trace.snapshots.append(u.copy())

    step = 0
    while residual > cfg.tol_res and step < cfg.max_steps:
        u_new = stepper(u)
        step += 1
        if not np.all(np.isfinite(u_new)) or np.max(np.abs(u_new)) > BLOW_UP:
            raise InstabilityError("Flow blew up; the time step is too large",
                                   step=step, dt=cfg.dt)
        report_new, F_new = _functional(u_new, e, cfg.mu, g, p)
        if F_new > F + DISSIPATION_TOL:
            raise SchemeError("Perturbed functional increased along the flow",
                              step=step, increase=F_new - F)
        gradient = first_variation(u_new, e, g, p) + cfg.mu
        if monitor_sign:
            # mean-convex runs keep -F' > 0 and increase nodewise
            if gradient.min() <= -cfg.tol_res or np.any(u_new < u - ORDER_TOL):
                return None, step
        u, F, report = u_new, F_new, report_new
        residual = float(np.max(np.abs(gradient)))
        time = step * cfg.dt
        if step % cfg.monitor_every == 0 or residual <= cfg.tol_res:
            trace.record(step, time, report.total, F, residual, float(gradient.min()), u)
            logger.debug("flow step %d: F=%.10g residual=%.3e", step, F, residual)
        if cfg.snapshot_every and (step % cfg.snapshot_every == 0 or residual <= cfg.tol_res):
            trace.snapshot_times.append(time)
            trace.snapshots.append(u.copy())

    if trace.steps[-1] != step:
        trace.record(step, step * cfg.dt, report.total, F, residual, float(gradient.min()), u)
    if cfg.snapshot_every and trace.snapshot_times[-1] != step * cfg.dt:
        trace.snapshot_times.append(step * cfg.dt)
        trace.snapshots.append(u.copy())
    verdict = 'converged' if residual <= cfg.tol_res else 'timeout'
    return (u, trace, verdict), step


def flow(u0, cfg, eps, g, p, with_spectrum=True, monitor_sign=None, k=3, seed=7,
         tol_scale=1e-6):
    """
    Run the flow from u0 until the residual drops below cfg.tol_res or
    cfg.max_steps is reached.

    With monitor_sign the run must keep min(-F') > 0 and increase nodewise; a
    violation halves dt and restarts from u0, at most five times. By default
    the monitor is on whenever u0 itself is mean-convex.
    """
    eps = _eps(eps)
    e = eps.value
    u0 = require_finite(_check(u0, g), 'u0').astype(float)
    if cfg.dt > 0.25 * e * e * (1 + 1e-12):
        raise InputError("dt exceeds the eps^2/4 stability ceiling", dt=cfg.dt, ceiling=0.25 * e * e)
    if monitor_sign is None:
        monitor_sign = bool(np.min(first_variation(u0, e, g, p) + cfg.mu) > 0)

    halvings = 0
    while True:
        outcome, step = _run(u0, cfg, e, g, p, monitor_sign)
        if outcome is not None:
            break
        if halvings == MAX_HALVINGS:
            raise SchemeError("Mean-convexity was lost even after halving dt",
                              step=step, dt=cfg.dt, halvings=halvings)
        halvings += 1
        logger.warning("mean-convexity lost at step %d; halving dt to %.3g", step, cfg.dt / 2)
        cfg = cfg.replace(dt=cfg.dt / 2, max_steps=2 * cfg.max_steps)

    u, trace, verdict = outcome
    trace.dt_halvings = halvings
    if halvings:
        trace.notes.append(f'dt halved {halvings} time(s) to keep -F\' > 0')
    report = None
    if with_spectrum:
        report = spectrum(u, eps, g, p, k=k, seed=seed, keep_fields=False, tol_scale=tol_scale)
    logger.info("flow %s after %d steps (residual %.3e)", verdict, trace.steps[-1], trace.residual[-1])
    return FlowResult(limit=u, trace=trace, verdict=verdict, spectrum=report)


def comparison_check(upper, lower, tol=ORDER_TOL, raise_on_violation=True):
    """
    Nodewise ordering upper >= lower at every shared snapshot time.

    Accepts FlowTrace objects (or FlowResults) recorded with snapshots.
    """
    upper = getattr(upper, 'trace', upper)
    lower = getattr(lower, 'trace', lower)
    if not upper.snapshots or not lower.snapshots:
        raise InputError("Comparison needs traces recorded with snapshots")
    lookup = {round(t, 12): k for k, t in enumerate(lower.snapshot_times)}
    samples = 0
    min_gap = math.inf
    first = None
    for t, u in zip(upper.snapshot_times, upper.snapshots):
        k = lookup.get(round(t, 12))
        if k is None:
            continue
        samples += 1
        gap = float(np.min(u - lower.snapshots[k]))
        min_gap = min(min_gap, gap)
        if gap < -tol and first is None:
            first = float(t)
    if samples == 0:
        raise InputError("Traces share no snapshot times; run them with one FlowConfig")
    verdict = ComparisonVerdict(holds=first is None, samples=samples, min_gap=min_gap,
                                first_violation=first)
    if not verdict.holds and raise_on_violation:
        raise SchemeError("Comparison ordering violated", verdict=verdict.to_dict())
    return verdict


def _witness_tube(cc, g):
    s = fiber_coordinate(g, cc.surface.level)
    width = 0.25 * cc.omega
    return np.abs(s) <= width, width


def dichotomy(result, eps, g, p, cc=None):
    """
    Case (a): the limit is the constant near +1. Case (b): a non-constant limit,
    witnessed by min over the omega/4 tube around M of the limit exceeding 1/2.
    """
    limit = getattr(result, 'limit', result)
    if hasattr(result, 'converged') and not result.converged:
        raise DomainError("Dichotomy needs a converged flow limit")
    spread = float(np.ptp(limit))
    if spread <= CONSTANT_SPREAD:
        if float(np.mean(limit)) < 0:
            raise DomainError("Flow limit is the constant near -1", value=float(np.mean(limit)))
        return DichotomyVerdict(case='a', spread=spread)
    witness_min = witness_width = None
    if cc is not None:
        tube, witness_width = _witness_tube(cc, g)
        witness_min = float(limit[tube].min())
    return DichotomyVerdict(case='b', spread=spread, witness_min=witness_min,
                            witness_width=witness_width)


def witness_fill_time(trace, cc, g):
    """First snapshot time at which the omega/4 tube lies inside {u > 1/2}, or None."""
    trace = getattr(trace, 'trace', trace)
    tube, _ = _witness_tube(cc, g)
    for t, u in zip(trace.snapshot_times, trace.snapshots):
        if np.min(u[tube]) > 0.5:
            return float(t)
    return None


def energy_growth_bound(trace, start_energy, mu, g, sigma):
    """E(h_t) <= E(h) + (mu/sigma) vol(N), from monotonicity of F and |u| <= 1."""
    trace = getattr(trace, 'trace', trace)
    bound = start_energy + mu * volume(g) / sigma
    value = max(trace.energy)
    return BoundCheck('energy growth bound', value, bound, DISSIPATION_TOL * max(1.0, abs(bound)))


def two_stage_relax(h, m, cc, eps, g, p, cfg=None, mu=None, k=3, seed=7, err_constant=1.0,
                    tol_scale=1e-6):
    """
    Flow h under F (guarded by the barrier flow from m), then flow the limit
    under E. Returns the RelaxResult with every energy check recorded.
    """
    eps = _eps(eps)
    e = eps.value
    if np.any(m > h + 1e-12):
        raise CalibrationError("Barrier is not below the start field", inequality='barrier order',
                               excess=float(np.max(m - h)))
    mu = select_mu(m, eps, g, p) if mu is None else float(mu)
    positivity = float(np.min(first_variation(m, e, g, p) + mu))
    if positivity <= 0:
        raise DomainError("mu too small: the barrier is not a strict subsolution",
                          mu=mu, positivity=positivity)
    if cfg is None:
        cfg = FlowConfig.for_eps(e, mu=mu)
    cfg = cfg.replace(mu=mu, snapshot_every=cfg.snapshot_every or 4 * cfg.monitor_every)
    logger.info("relaxing at eps=%.4g with mu=%.4g, dt=%.3g", e, mu, cfg.dt)

    barrier_stage = flow(m, cfg, eps, g, p, with_spectrum=False, monitor_sign=True)
    if barrier_stage.trace.dt != cfg.dt:
        cfg = cfg.replace(dt=barrier_stage.trace.dt)
    first_stage = flow(h, cfg, eps, g, p, with_spectrum=False, monitor_sign=False)
    comparison = comparison_check(first_stage, barrier_stage)
    case = dichotomy(first_stage, eps, g, p, cc)

    second_cfg = cfg.replace(mu=0.0, snapshot_every=0)
    second_stage = flow(first_stage.limit, second_cfg, eps, g, p, k=k, seed=seed,
                        tol_scale=tol_scale)
    cp = critical_point(second_stage.limit, eps, g, p, k=k, provenance='relaxed path endpoint',
                        seed=seed, tol_scale=tol_scale)

    start = energy(h, e, g, p)
    slack = err_constant * eps.eps_log
    peak = max(max(first_stage.trace.energy), max(second_stage.trace.energy))
    checks = [
        BoundCheck('relaxation energy bound', peak, 2.0 * cc.area_M - cc.tau, slack),
        energy_growth_bound(first_stage, start.total, mu, g, start.sigma),
        # the monitor rejects a step once min(-F') reaches -tol_res
        BoundCheck('barrier mean-convexity', -min(barrier_stage.trace.min_negative_gradient), 0.0,
                   cfg.tol_res),
        BoundCheck('comparison ordering', -comparison.min_gap, ORDER_TOL, 0.0),
    ]
    anomaly = None
    if cp.spectrum is not None and not cp.spectrum.stable:
        anomaly = f'relaxed limit is unstable (lambda1={cp.spectrum.lowest:.3g})'
        logger.warning("mean-convex relaxation ended at an unstable limit: %s", anomaly)
    if float(np.max(cp.field)) < -0.5:
        anomaly = 'relaxed limit collapsed to the constant near -1'
        logger.warning(anomaly)

    fill = witness_fill_time(first_stage, cc, g)
    return RelaxResult(critical_point=cp, first_stage=first_stage, barrier_stage=barrier_stage,
                       second_stage=second_stage, mu=mu, dichotomy=case, comparison=comparison,
                       checks=checks, witness_fill_time=fill, anomaly=anomaly)

# app/services/path_service.py
"""
The explicit low-energy path from -1 to the pushed-out field h.

Every Field on the path is bar-H^eps(-D - shift) where D is the signed
distance to a two-sheeted graph at heights (2 eps Lambda + r) + t phi-tilde
and shift = 4 eps Lambda * weight * chi plus a uniform slide. Building all
of them through one composer keeps the endpoint welds bitwise exact.
"""
import logging
import math

import numpy as np

from app.exceptions import CalibrationError, DomainError, InputError, SchemeError
from app.models import Barrier, BoundCheck, CompositePath, Epsilon, PathSegment, Table
from app.services.allen_cahn_service import energy, energy_density, first_variation
from app.services.domain_service import integrate, l2_distance, volume
from app.services.flow_service import select_mu
from app.services.geometry_service import (epsilon_admissibility, fiber_coordinate,
                                           signed_distance)
from app.services.profile_service import heteroclinic, truncate

logger = logging.getLogger(__name__)

BAND_FACTOR = 6.0
REFINE_FACTOR = 4
PUSH_EXTENSIONS = 6


class PathComposer:
    """Shared state for composing profile Fields over one calibration and eps."""

    def __init__(self, cc, eps, g, p, max_samples=48, err_constant=1.0):
        self.cc = cc
        self.eps = eps if isinstance(eps, Epsilon) else Epsilon(eps)
        self.g = g
        self.p = p
        self.max_samples = max(2, int(max_samples))
        self.err_constant = err_constant
        self.bar = truncate(heteroclinic(p), self.eps)
        self.width = self.eps.value * self.eps.Lambda
        self.s = fiber_coordinate(g, cc.surface.level)
        self.chi = cc.hole_cutoff[..., None]
        self.band = BAND_FACTOR * self.width + 3 * max(g.grid.spacing) * g.rho_max
        self.delta_path = 0.05 * math.sqrt(volume(g))

    @property
    def slack(self):
        return self.err_constant * self.eps.eps_log

    def heights(self, r=0.0, t=0.0):
        return (2.0 * self.width + r) + t * self.cc.phi_tilde

    def sheet_distance(self, heights):
        """Signed distance to the two sheets, positive away from the level."""
        S = self.cc.surface
        upper = signed_distance(S.with_heights(heights, sheet=1), self.g, self.band)
        lower = signed_distance(S.with_heights(heights, sheet=-1), self.g, self.band)
        return np.where(self.s >= 0, upper.values, lower.values)

    def field(self, r=0.0, t=0.0, weight=1.0, slide=0.0, heights=None):
        if slide >= 4.0 * self.width:
            return -np.ones(self.g.grid.shape)
        if heights is None:
            heights = self.heights(r, t)
        shift = (4.0 * self.width * weight) * self.chi + slide
        u = self.bar.scaled(-self.sheet_distance(heights) - shift)
        return np.where(np.abs(self.s) >= self.cc.omega, -1.0, u)

    def samples(self, span):
        """Parameter count so the profile argument moves by at most eps/4 per step."""
        if span <= 0:
            return 1
        return int(min(self.max_samples, max(2, math.ceil(span / (0.25 * self.eps.value)) + 1)))


def _build_segment(composer, label, params, make, bound, anchor):
    params = [float(x) for x in params]
    fields = [make(x) for x in params]
    limit = REFINE_FACTOR * composer.max_samples
    while len(params) < limit:
        gaps = [l2_distance(a, b, composer.g) for a, b in zip(fields[:-1], fields[1:])]
        worst = int(np.argmax(gaps)) if gaps else 0
        if not gaps or gaps[worst] <= composer.delta_path:
            break
        mid = 0.5 * (params[worst] + params[worst + 1])
        params.insert(worst + 1, mid)
        fields.insert(worst + 1, make(mid))
    steps = [l2_distance(a, b, composer.g) for a, b in zip(fields[:-1], fields[1:])]
    energies = [energy(u, composer.eps, composer.g, composer.p) for u in fields]
    segment = PathSegment(label=label, params=params, fields=fields, energies=energies,
                          bound=bound, anchor=anchor, slack=composer.slack)
    segment.checks.append(BoundCheck(f'{label} continuity', max(steps, default=0.0),
                                     composer.delta_path, 0.0))
    segment.diagnostics['evenness_defect'] = max(
        evenness_defect(u, composer.cc.surface, composer.g) for u in fields)
    logger.info("segment %s: %d samples, max energy %.6g (bound %.6g)",
                label, len(params), segment.max_energy, bound)
    return segment


# -- fields and segments ------------------------------------------------------

def _admissible(composer, mode, curvature=None):
    verdict = epsilon_admissibility(composer.cc, composer.eps, composer.g, curvature)
    if not verdict.passed and mode == 'strict':
        raise DomainError(f"eps={composer.eps.value} is not admissible",
                          failed=verdict.failed)
    return verdict


def build_f(composer, mode='report'):
    """f = bar-H^eps_{4 eps Lambda chi}(-dist(x, M_{2 eps Lambda})): two layers with a hole at B."""
    if mode == 'strict':
        _admissible(composer, mode)
    return composer.field()


def f_bound_check(composer, f):
    cc = composer.cc
    report = energy(f, composer.eps, composer.g, composer.p)
    return BoundCheck('hole energy bound', report.total, 2.0 * (cc.area_M - cc.area_B),
                      composer.slack)


def slide_to_minus_one(composer):
    """Psi_{4 eps Lambda chi + r} for r from 4 eps Lambda down to 0, i.e. from -1 up to f."""
    top = 4.0 * composer.width
    count = composer.samples(top)
    params = np.linspace(0.0, top, count)
    cc = composer.cc
    return _build_segment(composer, 'slide', params,
                          lambda x: composer.field(slide=top - x),
                          2.0 * (cc.area_M - cc.area_B), 'sliding bound')


def open_graph_deformation(composer):
    """g_t: the sheets move along t phi-tilde while the hole stays open, t in [0, t0]."""
    cc = composer.cc
    count = composer.samples(cc.t0 * float(cc.phi_tilde.max()))
    params = np.linspace(0.0, cc.t0, count)
    return _build_segment(composer, 'open', params, lambda t: composer.field(t=t),
                          2.0 * (cc.area_M - 0.75 * cc.area_B), 'opening bound')


def close_hole(composer):
    """The hole weight drops from 1 to 0 at t = t0, s in [0, 1]."""
    cc = composer.cc
    count = composer.samples(4.0 * composer.width)
    params = np.linspace(0.0, 1.0, count)
    return _build_segment(composer, 'close', params,
                          lambda s: composer.field(t=cc.t0, weight=1.0 - s),
                          2.0 * cc.area_M - cc.tau, 'hole-closing bound')


def _push_span(composer):
    """
    End of the push range: c0 - 2 eps Lambda, extended until bar-H saturates
    on the (19/20) c0 tube. The top sheet plus its profile reach stays inside omega.
    """
    cc = composer.cc
    span = max(0.0, cc.c0 - 2.0 * composer.width)
    tube = np.abs(composer.s) <= 0.95 * cc.c0
    if not tube.any():
        return span
    limit = max(span, cc.omega - 4.0 * composer.width - cc.t0 * float(cc.phi_tilde.max()))
    for _ in range(PUSH_EXTENSIONS):
        inner = -composer.sheet_distance(composer.heights(span, cc.t0))
        shortfall = 2.0 * composer.width - float(np.min(inner[tube]))
        if shortfall <= 0:
            break
        if span >= limit:
            logger.warning("push-out cannot saturate the tube at eps=%.4g (short by %.3g)",
                           composer.eps.value, shortfall)
            break
        span = min(span + shortfall * (1.0 + 1e-6) + 1e-12, limit)
    return span


def push_out(composer):
    """Both sheets move out by r from 0 to the push span; ends at h."""
    cc = composer.cc
    span = _push_span(composer)
    if span == 0.0:
        logger.warning("push-out range is empty at eps=%.4g (c0=%.4g)", composer.eps.value, cc.c0)
    params = np.linspace(0.0, span, composer.samples(span)) if span > 0 else [0.0]
    segment = _build_segment(composer, 'push', params,
                             lambda r: composer.field(r=r, t=cc.t0, weight=0.0),
                             2.0 * cc.area_M - cc.tau, 'push-out bound')
    segment.checks.append(_tube_check(composer, segment.last))
    return segment


def _tube_check(composer, h):
    """h = +1 on the tube of semi-width (19/20) c0 around the level."""
    tube = np.abs(composer.s) <= 0.95 * composer.cc.c0
    defect = float(np.max(1.0 - h[tube])) if tube.any() else 0.0
    return BoundCheck('push-out plateau', defect, 0.0, 1e-12)


def build_barrier(composer, h=None, mu=None):
    """
    m = bar-H^eps(-dist(., graph(z0 eta))) on both sheets.

    mu defaults to twice the sup of the negative part of the residual of m.
    """
    cc = composer.cc
    m = composer.field(weight=0.0, heights=cc.z0 * cc.eta)
    if h is not None and np.any(m > h + 1e-12):
        raise CalibrationError("Barrier is not below the pushed-out field",
                               inequality='barrier order', excess=float(np.max(m - h)))
    residual = first_variation(m, composer.eps, composer.g, composer.p)
    chosen = select_mu(m, composer.eps, composer.g, composer.p) if mu is None else float(mu)
    if chosen < 0:
        raise InputError("mu must be nonnegative")
    positivity = float(np.min(residual + chosen))
    if positivity <= 0:
        raise DomainError("mu too small: the barrier is not a strict subsolution",
                          mu=chosen, positivity=positivity)
    return Barrier(field=m, mu=chosen, residual_sup=float(np.max(np.abs(residual))),
                   positivity_min=positivity)


# -- ledgers ------------------------------------------------------------------

def profile_energy(segment):
    """Per-sample energy, running max and margin against the segment bound."""
    table = Table(['param', 'energy', 'running_max', 'bound', 'margin'])
    running = -math.inf
    for x, report in zip(segment.params, segment.energies):
        running = max(running, report.total)
        bound = segment.bound if segment.bound is not None else math.nan
        table.append(float(x), float(report.total), float(running), float(bound),
                     float(bound - report.total))
    return table


def assemble_composite(segments, cc):
    """Chain segments, checking the bitwise welds and the -1 start."""
    if not segments:
        raise InputError("A composite path needs at least one segment")
    if not np.all(segments[0].first == -1.0):
        raise SchemeError("Composite path must start at the constant -1")
    for left, right in zip(segments[:-1], segments[1:]):
        if not np.array_equal(left.last, right.first):
            raise SchemeError(f"Segments {left.label} and {right.label} do not weld",
                              gap=float(np.max(np.abs(left.last - right.first))))
    target = 2.0 * cc.area_M - cc.varsigma
    return CompositePath(segments=list(segments), target=target, varsigma=cc.varsigma)


def build_path(cc, eps, g, p, mode='report', max_samples=48, err_constant=1.0, curvature=None):
    """All four segments and the composite, plus the f bound check."""
    composer = PathComposer(cc, eps, g, p, max_samples=max_samples, err_constant=err_constant)
    verdict = _admissible(composer, mode, curvature)
    slide = slide_to_minus_one(composer)
    f = slide.last
    slide.checks.append(f_bound_check(composer, f))
    segments = [slide, open_graph_deformation(composer), close_hole(composer), push_out(composer)]
    composite = assemble_composite(segments, cc)
    return composer, composite, verdict


# -- diagnostics --------------------------------------------------------------

def evenness_defect(field, S, g):
    """sup |u - u o reflection| across the level row."""
    n = g.grid.dims[-1]
    index = (2 * S.level - np.arange(n)) % n
    return float(np.max(np.abs(field - np.take(field, index, axis=-1))))


def hole_transition_energy(field, cc, g, eps, p):
    """Energy carried over the annulus R < r < 2R where the hole cutoff varies."""
    annulus = (cc.region.distance > cc.region.radius) & (cc.region.distance < 2 * cc.region.radius)
    mask = np.broadcast_to(annulus[..., None], g.grid.shape).astype(float)
    return integrate(energy_density(field, eps, g, p) * mask, g)


def empirical_thresholds(rows):
    """
    For each bound name, the largest eps below which every sampled eps passes.

    rows: iterable of (eps, {name: passed}). A name failing at the smallest eps
    maps to None.
    """
    ordered = sorted(rows, key=lambda row: row[0])
    names = sorted({name for _, checks in ordered for name in checks})
    thresholds = {}
    for name in names:
        best = None
        for eps, checks in ordered:
            if not checks.get(name, False):
                break
            best = eps
        thresholds[name] = best
    return thresholds

# app/services/geometry_service.py
"""
Graph hypersurfaces in a conformal torus: fibre coordinates, areas, signed
distances, curvature, the Jacobi operator and the calibration of the
constants the explicit paths are built from.

Heights are fibre arclengths measured from a level row of the last axis. A
two-sheeted immersion is the pair (heights, sheet=+1) and (heights, sheet=-1).
"""
import logging
import math

import numpy as np
from scipy import linalg, ndimage, sparse
from scipy.sparse.linalg import ArpackNoConvergence, eigsh
from skimage import measure

from app.exceptions import CalibrationError, DomainError, InputError, SolverError
from app.models import (AdmissibilityVerdict, BoundCheck, CalibratedConstants, ConditionCheck,
                        Epsilon, JacobiData, LevelSetSample, SignedDistanceField,
                        UnstableRegion, VerificationReport)
from app.services.domain_service import (central_difference_matrix, difference_matrix, gradient_field,
                                         laplace_beltrami, refine_metric)
from app.services.eikonal_service import fast_marching
from app.services.profile_service import smooth_step

logger = logging.getLogger(__name__)

T_SAMPLES = 64
RADIUS_STEPS = 12
BALL_RATIO = 0.45
ADMISSIBILITY_LEVELS = 9
DENSE_JACOBI_LIMIT = 400


# -- fibre coordinate ---------------------------------------------------------

def fiber_tables(g, level):
    """
    Cumulative metric arclength along each fibre, starting at `level`.

    Returns (up, down, period): up[..., k] is the length from the level to
    the node k rows above it, down[..., k] the length to the node k rows below.
    """
    h = g.grid.spacing[-1]
    rho = np.roll(g.rho, -int(level), axis=-1)
    cells = 0.5 * (rho + np.roll(rho, -1, axis=-1)) * h
    zero = np.zeros(cells.shape[:-1] + (1,))
    up = np.concatenate([zero, np.cumsum(cells, axis=-1)], axis=-1)
    down = np.concatenate([zero, np.cumsum(cells[..., ::-1], axis=-1)], axis=-1)
    return up, down, up[..., -1]


def fiber_coordinate(g, level):
    """Signed fibre arclength from the level row, in (-period/2, period/2]."""
    if g.grid.d < 2:
        raise DomainError("Fibre coordinates need at least two axes")
    up, down, _ = fiber_tables(g, level)
    n = g.grid.dims[-1]
    half = n // 2
    k = np.arange(n)
    s = np.where(k <= half, up[..., :n], -np.take(down, (n - k) % (n + 1), axis=-1))
    return np.roll(s, int(level), axis=-1)


def omega(g):
    """Half the shortest fibre period: the semi-width of the tube around a level."""
    _, _, period = fiber_tables(g, 0)
    return 0.5 * float(period.min())


def _offsets(table, lengths):
    n = table.shape[-1] - 1
    k = (table < lengths[..., None]).sum(axis=-1) - 1
    k = np.clip(k, 0, n - 1)
    lo = np.take_along_axis(table, k[..., None], axis=-1)[..., 0]
    hi = np.take_along_axis(table, (k + 1)[..., None], axis=-1)[..., 0]
    return k + (lengths - lo) / (hi - lo)


def graph_coordinates(S, g):
    """Coordinate x_d of the graph over every base node (unwrapped)."""
    up, down, _ = fiber_tables(g, S.level)
    signed = S.sheet * S.heights
    index = np.where(signed >= 0, _offsets(up, np.maximum(signed, 0.0)),
                     -_offsets(down, np.maximum(-signed, 0.0)))
    y = S.level_coordinate + index * g.grid.spacing[-1]
    base = S.grid.base().mesh()
    for axis, x in enumerate(base):
        y = y + S.slope[axis] * x
    return y


def surface_points(S, g):
    return np.stack([*S.grid.base().mesh(), graph_coordinates(S, g)])


def _periodic_part(S, y):
    p = y.copy()
    for axis, x in enumerate(S.grid.base().mesh()):
        p = p - S.slope[axis] * x
    return p


def _graph_derivatives(S, y):
    """Gradient and Hessian of the graph function in coordinate units."""
    p = _periodic_part(S, y)
    h = S.grid.base().spacing
    n = S.n
    grad = np.empty((n,) + p.shape)
    hess = np.empty((n, n) + p.shape)
    for a in range(n):
        grad[a] = (np.roll(p, -1, a) - np.roll(p, 1, a)) / (2 * h[a])
    for a in range(n):
        for b in range(n):
            if a == b:
                hess[a, a] = (np.roll(p, -1, a) - 2 * p + np.roll(p, 1, a)) / h[a] ** 2
            else:
                hess[a, b] = (np.roll(grad[a], -1, b) - np.roll(grad[a], 1, b)) / (2 * h[b])
    grad = grad + S.slope.reshape((n,) + (1,) * n)
    return grad, hess


def _check_tube(S, g):
    reach = omega(g)
    if np.abs(S.heights).max() >= reach:
        raise DomainError("Hypersurface leaves the tubular neighbourhood",
                          height=float(np.abs(S.heights).max()), omega=reach)


# -- area ---------------------------------------------------------------------

def area_density(S, g):
    """rho^n * sqrt(1 + |grad y|^2) per base node."""
    _check_tube(S, g)
    y = graph_coordinates(S, g)
    grad, _ = _graph_derivatives(S, y)
    W = np.sqrt(1.0 + np.sum(grad ** 2, axis=0))
    rho = g.rho_at(surface_points(S, g))
    return rho ** S.n * W


def area(S, g, weights=None):
    density = area_density(S, g)
    if weights is not None:
        density = density * weights
    return float(np.sum(density) * S.grid.base().cell_volume)


def immersion_area(S, g, heights, weights=None):
    """Area of both sheets of graph(heights)."""
    upper = S.with_heights(heights, sheet=1)
    return area(upper, g, weights) + area(upper.mirrored(), g, weights)


# -- signed distance ----------------------------------------------------------

def signed_distance(S, g, band=math.inf):
    """
    Metric signed distance to the graph, positive on the `sheet` side.

    Nodes next to a fibre crossing are seeded with the vertical gap scaled by
    the tilt of the graph; each side is then marched separately with slowness
    rho, so the front never wraps through the seam opposite the level. Nodes
    beyond the band carry +-(band + h).
    """
    _check_tube(S, g)
    if np.any(S.slope != 0):
        raise DomainError("Signed distances need a periodic graph")
    grid = g.grid
    n = grid.dims[-1]
    seam = n // 2
    s = np.roll(fiber_coordinate(g, S.level), -S.level, axis=-1)
    offset = S.sheet * s - S.heights[..., None]
    above = np.roll(offset, -1, axis=-1)
    below = np.roll(offset, 1, axis=-1)
    k = np.arange(n)
    up_pair = k != seam
    down_pair = k != (seam + 1) % n

    y = graph_coordinates(S, g)
    grad, _ = _graph_derivatives(S, y)
    # conformal metrics keep Euclidean angles
    tilt = np.sqrt(1.0 + np.sum(grad ** 2, axis=0))
    gap = np.abs(offset) / tilt[..., None]

    values = np.zeros(offset.shape)
    cap = min(band, 2 * omega(g)) + max(grid.spacing)
    for side in (1.0, -1.0):
        region = side * offset >= 0
        seed = region & ((up_pair & (side * above <= 0)) | (down_pair & (side * below <= 0)))
        if not seed.any():
            raise DomainError("Hypersurface does not cross the fibres")
        initial = np.roll(np.where(seed, gap, math.inf), S.level, axis=-1)
        mask = np.roll(region, S.level, axis=-1)
        distance = fast_marching(initial, g.rho, grid.spacing, band=band, mask=mask)
        distance = np.where(np.isfinite(distance), np.minimum(distance, cap), cap)
        strict = np.roll(side * offset > 0, S.level, axis=-1)
        values = np.where(strict, side * distance, values)
    return SignedDistanceField(values=values, surface=S, band=band)


def eikonal_residual(dist, g, margin=2):
    """max | |grad d|_g - 1 | over nodes well inside the band and off the surface."""
    grad = gradient_field(dist.values, g)
    norm = np.sqrt(np.sum(grad ** 2, axis=0))
    h = max(g.grid.spacing) * g.rho_max
    inside = (np.abs(dist.values) < dist.band - margin * h) & (np.abs(dist.values) > margin * h)
    if not inside.any():
        return 0.0
    return float(np.max(np.abs(norm[inside] - 1.0)))


# -- curvature ----------------------------------------------------------------

def mean_curvature_field(dist, g, smoothing=1.0):
    """
    -Delta_g of the distance; valid inside the band.

    The marched distance has first-order kinks, so its Laplacian carries
    node-scale ripple. A periodic Gaussian of width `smoothing` nodes removes
    it before the field feeds admissibility condition (iv); smoothing=0 gives
    the raw field.
    """
    H = -laplace_beltrami(dist.values, g)
    if smoothing:
        H = ndimage.gaussian_filter(H, smoothing, mode='wrap')
    return H


def _level_points(values, level, grid):
    """Index-space points on {values = level}, wrap padded so closed curves stay closed."""
    padded = np.pad(values, 1, mode='wrap')
    if grid.d == 2:
        pieces = measure.find_contours(padded, level)
        points = np.concatenate(pieces, axis=0) if pieces else np.zeros((0, 2))
    elif grid.d == 3:
        try:
            points, _, _, _ = measure.marching_cubes(padded, level)
        except (ValueError, RuntimeError):
            points = np.zeros((0, 3))
    else:
        raise DomainError("Level sets need at least two axes")
    points = points - 1.0
    dims = np.asarray(grid.dims, dtype=float)
    keep = np.all((points >= 0) & (points < dims), axis=1)
    return points[keep]


def level_set_mean_curvature(dist, g, d, curvature=None):
    """
    H = -Delta_g dist sampled on {dist = d}.

    Positive when the level set bends away from the surface along its normal.
    """
    if abs(d) >= dist.band:
        raise DomainError("Requested level lies outside the distance band", level=d, band=dist.band)
    H = mean_curvature_field(dist, g) if curvature is None else curvature
    index = _level_points(dist.values, d, g.grid)
    if index.shape[0] == 0:
        raise DomainError("Level set is empty", level=d)
    coords = (index * np.asarray(g.grid.spacing)).T
    values = g.sample(H, coords)
    return LevelSetSample(level=float(d), points=coords.T, values=values)


def _principal(S, g):
    """Conformal principal curvatures and the up normal of the graph."""
    y = graph_coordinates(S, g)
    grad, hess = _graph_derivatives(S, y)
    n = S.n
    W = np.sqrt(1.0 + np.sum(grad ** 2, axis=0))
    nu = np.concatenate([-grad, np.ones((1,) + y.shape)]) / W
    points = surface_points(S, g)
    rho = g.rho_at(points)
    log_grad, log_hess = g.log_derivatives
    df = np.stack([g.sample(log_grad[a], points) for a in range(g.grid.d)])
    dnu = np.sum(df * nu, axis=0)
    if n == 1:
        k_flat = (hess[0, 0] / W ** 3)[None]
    else:
        metric = np.eye(n)[:, :, None, None] + grad[:, None] * grad[None, :]
        shape = np.moveaxis(hess, (0, 1), (-2, -1)) / W[..., None, None]
        inverse = np.linalg.inv(np.moveaxis(metric, (0, 1), (-2, -1)))
        k_flat = np.moveaxis(np.sort(np.linalg.eigvals(inverse @ shape).real, axis=-1), -1, 0)
    k = (k_flat - dnu) / rho
    return k, nu, rho, df, points


def graph_mean_curvature(S, g):
    """H = -(div nu + n d(log rho)/d nu) / rho for nu on the `sheet` side."""
    k, _, _, _, _ = _principal(S, g)
    return S.sheet * np.sum(k, axis=0)


def second_fundamental_norm(S, g):
    """|A|^2 in the conformal metric."""
    k, _, _, _, _ = _principal(S, g)
    return np.sum(k ** 2, axis=0)


def ricci_normal(S, g):
    """Ric(nu, nu) = rho^-2 [-(d-2) Hess f(nu,nu) - Lap f + (d-2)((df.nu)^2 - |df|^2)], f = log rho."""
    _, nu, rho, df, points = _principal(S, g)
    d = g.grid.d
    _, log_hess = g.log_derivatives
    hess = np.stack([np.stack([g.sample(log_hess[a, b], points) for b in range(d)])
                     for a in range(d)])
    hess_nu = np.einsum('a...,ab...,b...->...', nu, hess, nu)
    lap = np.einsum('aa...->...', hess)
    dnu = np.sum(df * nu, axis=0)
    grad2 = np.sum(df ** 2, axis=0)
    return (-(d - 2) * hess_nu - lap + (d - 2) * (dnu ** 2 - grad2)) / rho ** 2


# -- Jacobi operator ----------------------------------------------------------

def jacobi_matrices(S, g):
    """
    Sparse forms of the second variation of area on the graph.

    Returns (stiffness, mass, q, weights): the Dirichlet form of the induced
    metric, the diagonal area mass, the potential |A|^2 + Ric(nu, nu) and the
    per-node area weights sqrt(G) * cell volume.
    """
    base = S.grid.base()
    y = graph_coordinates(S, g)
    grad, _ = _graph_derivatives(S, y)
    n = S.n
    W = np.sqrt(1.0 + np.sum(grad ** 2, axis=0))
    rho = g.rho_at(surface_points(S, g))
    q = second_fundamental_norm(S, g) + ricci_normal(S, g)
    cell = base.cell_volume
    weights = rho ** n * W * cell

    stiffness = sparse.csr_matrix((base.size, base.size))
    scale = rho ** (n - 2) / W
    for a in range(n):
        c = scale * (W ** 2 - grad[a] ** 2)
        half = 0.5 * (c + np.roll(c, -1, a))
        D = difference_matrix(base, a)
        stiffness = stiffness + D.T @ sparse.diags(half.ravel() * cell) @ D
    for a in range(n):
        for b in range(n):
            if a != b:
                c = -scale * grad[a] * grad[b]
                Ca = central_difference_matrix(base, a)
                Cb = central_difference_matrix(base, b)
                stiffness = stiffness + Ca.T @ sparse.diags(c.ravel() * cell) @ Cb
    mass = sparse.diags(weights.ravel())
    return stiffness.tocsc(), mass.tocsc(), q, weights


def quadratic_form(S, g, phi, matrices=None):
    """Q(phi) = integral |grad phi|^2 - (|A|^2 + Ric(nu,nu)) phi^2 over the graph."""
    stiffness, mass, q, _ = matrices or jacobi_matrices(S, g)
    v = np.asarray(phi, dtype=float).ravel()
    return float(v @ (stiffness @ v) - v @ (mass @ (q.ravel() * v)))


def jacobi_first_eigenpair(S, g):
    """
    First eigenpair of Delta_M + q with lambda > 0 meaning unstable.

    eta is normalized to integral eta^2 = 1 over the graph and made positive.
    """
    stiffness, mass, q, weights = jacobi_matrices(S, g)
    A = (stiffness - mass @ sparse.diags(q.ravel())).tocsc()
    size = A.shape[0]
    try:
        if size <= DENSE_JACOBI_LIMIT:
            values, vectors = linalg.eigh(A.toarray(), mass.toarray(), subset_by_index=[0, 0])
        else:
            shift = -float(q.max()) - 1.0
            values, vectors = eigsh(A, k=1, M=mass, sigma=shift, which='LM', tol=1e-12)
    except (ArpackNoConvergence, linalg.LinAlgError) as exc:
        raise SolverError(f"Jacobi eigen-solve failed: {exc}")
    eta = vectors[:, 0].reshape(q.shape)
    if eta.sum() < 0:
        eta = -eta
    eta = eta / math.sqrt(float(np.sum(eta ** 2 * weights)))
    if eta.min() < 1e-12 * eta.max():
        raise SolverError("First Jacobi eigenvector is not positive", residual=float(eta.min()))
    logger.info("Jacobi first eigenvalue %.6g (q in [%.4g, %.4g])", -values[0], q.min(), q.max())
    return JacobiData(q=q, eigenvalue=float(-values[0]), eta=eta, area_weights=weights)


# -- unstable region ----------------------------------------------------------

def intrinsic_distance(S, g, center):
    """Distance on the graph from a base node, marching with slowness rho * W."""
    y = graph_coordinates(S, g)
    grad, _ = _graph_derivatives(S, y)
    W = np.sqrt(1.0 + np.sum(grad ** 2, axis=0))
    rho = g.rho_at(surface_points(S, g))
    initial = np.full(S.heights.shape, math.inf)
    initial[tuple(center)] = 0.0
    return fast_marching(initial, rho * W, S.grid.base().spacing)


def _loop_length(S, g, center):
    y = graph_coordinates(S, g)
    grad, _ = _graph_derivatives(S, y)
    W = np.sqrt(1.0 + np.sum(grad ** 2, axis=0))
    rho = g.rho_at(surface_points(S, g)) * W
    base = S.grid.base()
    lengths = []
    for axis in range(S.n):
        line = list(center)
        line[axis] = slice(None)
        lengths.append(float(np.sum(rho[tuple(line)]) * base.spacing[axis]))
    return min(lengths)


def hole_cutoff(S, g, center, R, distance=None):
    """chi = 1 on the ball of radius R, 0 beyond 2R, |grad chi| <= 2/R."""
    r = intrinsic_distance(S, g, center) if distance is None else distance
    return 1.0 - smooth_step((r - R) / R)


def unstable_region(S, g, jd):
    """
    Ball B, larger ball D and an unstable direction phi-tilde vanishing on D.

    The outer radius halves from a quarter of the shortest base loop until the
    cut-off eigenfunction has negative second variation.
    """
    if jd.eigenvalue <= 0:
        raise CalibrationError("Hypersurface is stable; no unstable direction exists",
                               inequality='unstable region')
    center = np.unravel_index(int(np.argmin(jd.eta)), jd.eta.shape)
    distance = intrinsic_distance(S, g, center)
    loop = _loop_length(S, g, center)
    matrices = jacobi_matrices(S, g)
    attempts = 0
    for k in range(RADIUS_STEPS):
        R0 = loop / 4.0 * 2.0 ** -k
        attempts += 1
        if not 2 * R0 < loop / 2:
            continue
        cutoff = 1.0 - smooth_step((distance - R0) / R0)
        phi = jd.eta * (1.0 - cutoff)
        phi = np.where(distance <= R0, 0.0, phi)
        value = quadratic_form(S, g, phi, matrices)
        logger.debug("unstable region R0=%.4g Q=%.4g", R0, value)
        if value < 0:
            return UnstableRegion(center=tuple(int(c) for c in center), radius=BALL_RATIO * R0,
                                  outer_radius=R0, phi_tilde=phi, quadratic_form=value,
                                  distance=distance, attempts=attempts)
    raise CalibrationError("No admissible outer radius found", inequality='unstable region',
                           attempts=attempts)


# -- calibration --------------------------------------------------------------

def _lemma_holds(S, g, phi, ball, c, t_samples, area_M, area_B, tau, grid_size=9):
    excised = 1.0 - ball
    first = 2.0 * (area_M - 0.75 * area_B)
    second = 2.0 * area_M - tau
    for cp in np.linspace(0.0, c, grid_size):
        if immersion_area(S, g, cp + t_samples[-1] * phi) > second:
            return False
        for t in t_samples:
            if immersion_area(S, g, cp + t * phi, excised) > first:
                return False
    return True


def _mean_convex(S, g, eta, lam, z, samples=8):
    floor = lam * eta.min()
    for zp in np.linspace(z / samples, z, samples):
        H = graph_mean_curvature(S.with_heights(zp * eta, sheet=1), g)
        if H.min() < 0.5 * zp * floor:
            return False
    return True


def _bisect(predicate, lo, hi, iterations=20):
    if predicate(hi):
        return hi
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if predicate(mid):
            lo = mid
        else:
            hi = mid
    return lo


def calibrate_constants(S, g, region, jd):
    """
    Fix t0, tau, c0, z0, K_A and the tube widths for a calibrated surface.

    t0 is the last sample on which the two-sheet area of graph(t phi) keeps
    strictly decreasing; tau is half the area gained back; c0 and z0 are the
    largest values the sampled area and mean-convexity inequalities allow.
    """
    S = S.with_heights(np.zeros_like(S.heights), sheet=1)
    reach = omega(g)
    phi = region.phi_tilde
    ball = region.ball.astype(float)
    area_M = area(S, g)
    area_B = area(S, g, ball)
    if phi.max() <= 0:
        raise CalibrationError("Unstable direction vanishes identically", inequality='t0')

    c_top = reach / 4.0
    t_top = 0.5 * (reach - c_top) / phi.max()
    t_samples = np.linspace(0.0, t_top, T_SAMPLES)
    t_areas = np.array([immersion_area(S, g, t * phi) for t in t_samples])
    decreasing = np.diff(t_areas) < 0
    last = int(np.argmin(decreasing)) if not decreasing.all() else len(decreasing)
    if last == 0:
        raise CalibrationError("Area does not decrease along the unstable direction",
                               inequality='t0')
    t0 = float(t_samples[last])
    tau = 0.5 * (2.0 * area_M - t_areas[last])
    if tau <= 0:
        raise CalibrationError("No area deficit at t0", inequality='tau')

    sampled = t_samples[:last + 1:max(1, last // 8)]
    if sampled[-1] != t0:
        sampled = np.append(sampled, t0)
    tiny = 1e-6 * reach

    def lemma(c):
        return _lemma_holds(S, g, phi, ball, c, sampled, area_M, area_B, tau)

    if not lemma(tiny):
        raise CalibrationError("Sampled area inequalities fail for every c0",
                               inequality='lemma (i)/(ii)')
    c0 = _bisect(lemma, tiny, c_top)

    eta = jd.eta
    lam = jd.eigenvalue
    z_top = c0 / (2.0 * eta.max())

    def convex(z):
        return _mean_convex(S, g, eta, lam, z)

    if not convex(1e-6 * z_top):
        raise CalibrationError("Graphs of eta are not mean convex", inequality='mean convexity')
    z0 = _bisect(convex, 1e-6 * z_top, z_top)

    K_A = 0.0
    for cp in np.linspace(0.0, c0, 3):
        for t in sampled[::max(1, len(sampled) // 3)]:
            surface = S.with_heights(cp + t * phi)
            K_A = max(K_A, float(np.sqrt(second_fundamental_norm(surface, g)).max()))
    omega1 = min(z0 * eta.min(), reach - z0 * eta.max())

    hole = hole_cutoff(S, g, region.center, region.radius, region.distance)
    constants = CalibratedConstants(surface=S, jacobi=jd, region=region, hole_cutoff=hole,
                                    area_M=area_M, area_B=area_B, t0=t0, c0=c0, tau=tau, z0=z0,
                                    K_A=K_A, omega=reach, omega1=omega1,
                                    t_samples=t_samples, t_areas=t_areas)
    logger.info("calibrated: A_M=%.6g A_B=%.6g t0=%.4g c0=%.4g tau=%.4g z0=%.4g",
                area_M, area_B, t0, c0, tau, z0)
    return constants


def calibrate(S, g):
    """Jacobi data, unstable region and constants in one pass."""
    jd = jacobi_first_eigenpair(S, g)
    region = unstable_region(S, g, jd)
    return calibrate_constants(S, g, region, jd)


# -- independent verification -------------------------------------------------

def _zoom(values, factor):
    return ndimage.zoom(values, factor, order=3, mode='grid-wrap', grid_mode=True)


def _coordinates_by_interpolation(fine, level, heights, sheet):
    """Fibre arclength -> x_d by per-column interpolation of the cumulative length."""
    grid = fine.grid
    n = grid.dims[-1]
    h = grid.spacing[-1]
    rho = np.roll(fine.rho, -level, axis=-1)
    columns = rho.reshape(-1, n)
    out = np.empty(columns.shape[0])
    target = (sheet * heights).ravel()
    for i, column in enumerate(columns):
        up = np.concatenate([column, column[:1]])
        down = np.concatenate([column[:1], column[::-1]])
        if target[i] >= 0:
            length = np.concatenate([[0.0], np.cumsum(0.5 * (up[1:] + up[:-1]) * h)])
            out[i] = np.interp(target[i], length, np.arange(n + 1) * h)
        else:
            length = np.concatenate([[0.0], np.cumsum(0.5 * (down[1:] + down[:-1]) * h)])
            out[i] = -np.interp(-target[i], length, np.arange(n + 1) * h)
    return level * h + out.reshape(heights.shape)


def _polyline_area(fine, xs, ys, mask=None):
    """Metric length of a closed polyline sampled at base nodes (n=1) or triangle area (n=2)."""
    base = [np.asarray(x) for x in xs]
    if len(base) == 1:
        x = base[0]
        period = fine.grid.lengths[0]
        x1 = np.roll(x, -1)
        x1[-1] += period
        y1 = np.roll(ys, -1)
        mid = np.stack([(x + x1) / 2, (ys + y1) / 2])
        seg = np.hypot(x1 - x, y1 - ys) * fine.rho_at(mid)
        if mask is not None:
            seg = seg * 0.5 * (mask + np.roll(mask, -1))
        return float(seg.sum())
    X, Y = base
    Lx, Ly = fine.grid.lengths[:2]
    total = 0.0
    corners = []
    for dx, dy in ((0, 0), (1, 0), (1, 1), (0, 1)):
        cx = np.roll(np.roll(X, -dx, 0), -dy, 1) + (dx * Lx) * (np.arange(X.shape[0]) >= X.shape[0] - dx)[:, None]
        cy = np.roll(np.roll(Y, -dx, 0), -dy, 1) + (dy * Ly) * (np.arange(X.shape[1]) >= X.shape[1] - dy)[None, :]
        cz = np.roll(np.roll(ys, -dx, 0), -dy, 1)
        corners.append(np.stack([cx, cy, cz]))
    weight = 1.0 if mask is None else 0.25 * sum(np.roll(np.roll(mask, -dx, 0), -dy, 1)
                                                for dx, dy in ((0, 0), (1, 0), (1, 1), (0, 1)))
    for a, b, c in ((0, 1, 2), (0, 2, 3)):
        p, q, r = corners[a], corners[b], corners[c]
        cross = np.cross(q - p, r - p, axis=0)
        centroid = (p + q + r) / 3.0
        total += np.sum(0.5 * np.linalg.norm(cross, axis=0) * fine.rho_at(centroid) ** 2 * weight)
    return float(total)


def verify_calibration(cc, g, factor=2, tolerance=0.02):
    """
    Re-evaluate the calibrated inequalities on a refined lattice.

    Heights are resampled spectrally and areas are measured as metric
    polylines or triangulations, so no code is shared with the search.
    """
    S = cc.surface
    fine = refine_metric(g, factor)
    base = fine.grid.base()
    level = S.level * factor
    xs = base.mesh()
    phi = np.maximum(_zoom(cc.phi_tilde, factor), 0.0)
    ball = (_zoom(cc.region.ball.astype(float), factor) > 0.5).astype(float)
    eta = _zoom(cc.eta, factor)

    def two_sheet(heights, mask=None):
        total = 0.0
        for sheet in (1, -1):
            ys = _coordinates_by_interpolation(fine, level, heights, sheet)
            total += _polyline_area(fine, xs, ys, mask)
        return total

    zero = np.zeros(base.shape)
    area_M = 0.5 * two_sheet(zero)
    area_B = 0.5 * two_sheet(zero, ball)
    rel = tolerance * max(area_M, 1e-12)
    checks = [
        BoundCheck('surface area', abs(area_M - cc.area_M), 0.0, rel),
        BoundCheck('excised start area', abs(two_sheet(zero, 1 - ball) - 2 * (area_M - area_B)),
                   0.0, 2 * rel),
        BoundCheck('opening area bound', two_sheet(cc.c0 + cc.t0 * phi, 1 - ball),
                   2 * (area_M - 0.75 * area_B), 2 * rel),
        BoundCheck('closing area bound', two_sheet(cc.c0 + cc.t0 * phi), 2 * area_M - cc.tau, 2 * rel),
        BoundCheck('barrier below push-out', cc.z0 * float(eta.max()), cc.c0, None),
    ]
    ts = np.linspace(0.0, cc.t0, 6)
    areas = [two_sheet(t * phi) for t in ts]
    checks.append(BoundCheck('area decreasing to t0', float(np.max(np.diff(areas))), 0.0, None))
    return VerificationReport(checks=checks, resolution=list(fine.grid.dims))


# -- admissibility ------------------------------------------------------------

def barrier_curvature(cc, g):
    """Signed distance to graph(z0 eta) and its mean-curvature field, for reuse across eps."""
    S = cc.surface.with_heights(cc.z0 * cc.eta, sheet=1)
    dist = signed_distance(S, g, band=cc.omega1)
    return dist, mean_curvature_field(dist, g)


def epsilon_admissibility(cc, eps, g, curvature=None):
    """Verdict on the four smallness conditions and the clearance for one eps."""
    eps = eps if isinstance(eps, Epsilon) else Epsilon(eps)
    el = eps.eps_log
    eta_min, eta_max = float(cc.eta.min()), float(cc.eta.max())
    conditions = [
        ConditionCheck('(i) 12 eps|log eps| < c0/20', 12 * el, cc.c0 / 20),
        ConditionCheck('(ii) 12 eps|log eps| < z0 min eta', 12 * el, cc.z0 * eta_min),
        ConditionCheck('(iii) 24 eps|log eps| < c0 - z0 max eta', 24 * el, cc.c0 - cc.z0 * eta_max),
        ConditionCheck('clearance 12 eps|log eps| < omega1', 12 * el, cc.omega1),
    ]
    floor = 0.25 * cc.z0 * cc.lam * eta_min
    reach = 12 * el
    h = max(g.grid.spacing) * g.rho_max
    dist, H = curvature if curvature is not None else (None, None)
    if dist is None and reach + 2 * h < cc.omega1:
        dist, H = barrier_curvature(cc, g)
    if dist is None or reach + 2 * h >= dist.band:
        conditions.append(ConditionCheck('(iv) mean convexity of the barrier band', 0.0, 0.0,
                                         note='band exceeds the tube clearance', evaluated=False))
    else:
        lowest = math.inf
        for d in np.linspace(-reach, reach, ADMISSIBILITY_LEVELS):
            lowest = min(lowest, level_set_mean_curvature(dist, g, d, H).minimum)
        # equality at the floor is admissible
        conditions.append(ConditionCheck('(iv) mean convexity of the barrier band',
                                         floor - 1e-15, lowest))
    return AdmissibilityVerdict(eps=eps.value, conditions=conditions)


def admissibility_threshold(cc, g, lo=1e-4, iterations=24):
    """Largest eps < 1/e passing every condition, by bisection in log eps."""
    curvature = barrier_curvature(cc, g)

    def passes(log_eps):
        return epsilon_admissibility(cc, math.exp(log_eps), g, curvature).passed

    top = math.log(math.exp(-1) * (1 - 1e-9))
    if not passes(math.log(lo)):
        return None
    if passes(top):
        return math.exp(top)
    a, b = math.log(lo), top
    for _ in range(iterations):
        mid = 0.5 * (a + b)
        if passes(mid):
            a = mid
        else:
            b = mid
    return math.exp(a)


# -- double cover -------------------------------------------------------------

def double_cover_splitting(S, g, phi, involution=None):
    """
    Split Q on the two-sheeted cover into its even and odd parts.

    `phi` holds one Field per sheet. The involution is a permutation of the
    stacked nodes; by default it swaps the sheets.
    """
    phi = np.asarray(phi, dtype=float)
    base_shape = S.heights.shape
    if phi.shape != (2,) + base_shape:
        raise InputError("Double-cover Field must hold one Field per sheet",
                         expected=[2] + list(base_shape), got=list(phi.shape))
    stiffness, mass, q, _ = jacobi_matrices(S, g)
    block = (stiffness - mass @ sparse.diags(q.ravel())).tocsr()
    A = sparse.block_diag([block, block], format='csr')
    size = A.shape[0]
    if involution is None:
        half = size // 2
        involution = np.concatenate([np.arange(half, size), np.arange(half)])
    involution = np.asarray(involution, dtype=int)
    if sorted(involution.tolist()) != list(range(size)) or np.any(involution[involution] != np.arange(size)):
        raise DomainError("Involution must be a permutation of order two")
    P = sparse.csr_matrix((np.ones(size), (np.arange(size), involution)), shape=(size, size))
    defect = abs(P @ A @ P.T - A).max() if size else 0.0
    if defect > 1e-12 * max(1.0, abs(A).max()):
        raise DomainError("Involution is not an isometry of the Jacobi data", defect=float(defect))
    v = phi.ravel()
    mirrored = P @ v
    even = 0.5 * (v + mirrored)
    odd = 0.5 * (v - mirrored)

    def Q(w):
        return float(w @ (A @ w))

    return Q(v), Q(even), Q(odd)

'''Elastic energy of a film profile.

The elastic energy of a profile h is the minimal Dirichlet energy of
u on the subgraph {0 < y < h(x)} with u(x, 0) = x on the support of h and
natural boundary conditions elsewhere. It is computed with continuous
piecewise-linear finite elements on a mapped column mesh: every profile
node carries a vertical fibre of nodes y = h s_k, and neighbouring fibres
are joined by quads split into two triangles. Void nodes (below the
height floor) collapse to a single substrate node, which turns the
boundary columns of an island into triangle fans.

Besides the energy, a solve returns the exact derivative of the discrete
energy with respect to the nodal heights (shape_gradient). Since u is
stationary and the Dirichlet data do not move with h, this derivative
only involves the explicit dependence of the element energies on the
node positions.
'''

import math

from dataclasses import dataclass
from typing import List
from typing import Optional
from typing import Sequence

import numpy as np
import scipy.sparse
import scipy.sparse.linalg
import scipy.special

from . import enums
from . import errors
from . import profile
from . import storage
from .debug import LOG
from .types import Array
from .types import Resolution

# Corrector constant of the half strip, 7 zeta(3) / pi^3.
CW_EXACT = 7.0 * float(scipy.special.zeta(3.0)) / math.pi ** 3


@dataclass(frozen=True, eq=False)
class SubgraphMesh:
    '''Triangulation of the subgraph of a profile.

    Attributes:
        points         Node coordinates, shape (n, 2).
        triangles      Counterclockwise node indices, shape (m, 3).
        dirichlet      Mask of substrate nodes, where u = x.
        fibre_node     Profile node each mesh node belongs to.
        fibre_weight   Relative height s_k of each mesh node, so that
                       moving the profile node by dh moves it by s_k dh.
        triangle_cell  Profile cell (column) of each triangle.
        triangle_layer Layer index of each triangle, 0 at the substrate.
        layers         Number of layers per column.
        n_profile      Number of profile nodes.
        dx             Profile grid spacing.
    '''
    points: Array
    triangles: Array
    dirichlet: Array
    fibre_node: Array
    fibre_weight: Array
    triangle_cell: Array
    triangle_layer: Array
    layers: int
    n_profile: int
    dx: float

    @property
    def n_nodes(self) -> int:
        '''Number of mesh nodes.'''
        return len(self.points)


@dataclass(frozen=True, eq=False)
class ElasticSolution:
    '''Discrete minimizer of the Dirichlet energy on a SubgraphMesh.

    Attributes:
        mesh              Mesh the problem was solved on.
        nodal_values      Value of u at each mesh node.
        energy            Dirichlet energy, dx_energy + dy_energy.
        dx_energy         Integral of (d_x u)^2.
        dy_energy         Integral of (d_y u)^2.
        gradients         Constant gradient of u in each triangle.
        areas             Area of each triangle.
        top_trace_gradsq  Per profile node |grad u|^2 of the topmost
                          elements (0 on void nodes).
        bottom_flux       Per profile node d_y u of the substrate elements.
        shape_gradient    Per profile node derivative of the energy with
                          respect to the height, divided by dx. It is the
                          discrete |grad u|^2(x, h(x)); void nodes take the
                          thin film value 1.
        residual          Relative residual of the linear solve.
        iterations        Iterations of the linear solver (0 if direct).
    '''
    mesh: SubgraphMesh
    nodal_values: Array
    energy: float
    dx_energy: float
    dy_energy: float
    gradients: Array
    areas: Array
    top_trace_gradsq: Array
    bottom_flux: Array
    shape_gradient: Array
    residual: float
    iterations: int


@dataclass(frozen=True)
class CorrectorResult:
    '''Estimate of the corrector constant from truncated strips.

    Attributes:
        truncation_heights  Heights L of the truncated strips.
        energies            Energy of the unit strip of height L.
        extrapolated        Estimate of the infinite strip energy.
        error_estimate      Distance to the tallest strip plus the fit
                            residual.
    '''
    truncation_heights: List[float]
    energies: List[float]
    extrapolated: float
    error_estimate: float


def build_mesh(x: Array, heights: Array, resolution: Resolution,
               floor: float,
               fractions: Optional[Array] = None) -> SubgraphMesh:
    '''Builds the column mesh below the piecewise-linear interpolant of
    (x, heights). Nodes with heights <= floor are void. The relative
    heights of the layers default to those of the resolution.'''
    n = len(x)
    assert n == len(heights) and n >= 2
    if fractions is None:
        fractions = resolution.layer_fractions()
    n_layers = len(fractions) - 1
    solid = heights > floor

    # Every solid node owns layers + 1 mesh nodes, a void node only one.
    counts = np.where(solid, n_layers + 1, 1)
    offsets = np.concatenate(([0], np.cumsum(counts)[:-1]))
    k = np.arange(n_layers + 1)
    ids = offsets[:, None] + np.where(solid[:, None], k[None, :], 0)

    total = int(counts.sum())
    fibre_node = np.repeat(np.arange(n), counts)
    fibre_weight = np.zeros(total)
    px = x[fibre_node].astype(float)
    py = np.zeros(total)
    solid_ids = ids[solid]
    fibre_weight[solid_ids] = fractions[None, :]
    py[solid_ids] = heights[solid][:, None] * fractions[None, :]
    dirichlet = fibre_weight == 0.0

    # Quads (a, b, c, d) counterclockwise from the lower left corner of
    # cell j and layer k, split along the a-c diagonal.
    a = ids[:-1, :-1]
    b = ids[1:, :-1]
    c = ids[1:, 1:]
    d = ids[:-1, 1:]
    cell = np.broadcast_to(np.arange(n - 1)[:, None], a.shape)
    layer = np.broadcast_to(np.arange(n_layers)[None, :], a.shape)
    tri = np.concatenate([
        np.stack([a, b, c], axis=-1).reshape(-1, 3),
        np.stack([a, c, d], axis=-1).reshape(-1, 3)])
    tri_cell = np.concatenate([cell.ravel(), cell.ravel()])
    tri_layer = np.concatenate([layer.ravel(), layer.ravel()])

    # Drop triangles with repeated nodes (collapsed fibres) and flat ones.
    keep = (tri[:, 0] != tri[:, 1]) & (tri[:, 1] != tri[:, 2]) \
        & (tri[:, 0] != tri[:, 2])
    tri = tri[keep]
    tri_cell = tri_cell[keep]
    tri_layer = tri_layer[keep]
    if len(tri) > 0:
        e1 = np.stack([px[tri[:, 1]] - px[tri[:, 0]],
                       py[tri[:, 1]] - py[tri[:, 0]]], axis=-1)
        e2 = np.stack([px[tri[:, 2]] - px[tri[:, 0]],
                       py[tri[:, 2]] - py[tri[:, 0]]], axis=-1)
        twice_area = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        scale = float(np.max(np.abs(twice_area)))
        keep = twice_area > 1e-14 * scale
        tri = tri[keep]
        tri_cell = tri_cell[keep]
        tri_layer = tri_layer[keep]
    if len(tri) == 0:
        raise errors.EmptyFilm('no column above the height floor')

    # Renumber so that only nodes used by some triangle remain.
    used = np.unique(tri)
    renumber = np.full(total, -1)
    renumber[used] = np.arange(len(used))
    return SubgraphMesh(
        points=np.column_stack([px[used], py[used]]),
        triangles=renumber[tri],
        dirichlet=dirichlet[used],
        fibre_node=fibre_node[used],
        fibre_weight=fibre_weight[used],
        triangle_cell=tri_cell,
        triangle_layer=tri_layer,
        layers=n_layers,
        n_profile=n,
        dx=float(x[1] - x[0]))


def _geometry(mesh: SubgraphMesh):
    '''Returns per triangle (b, c, area) with grad lambda_a = (b_a, c_a)/2A.
    '''
    pts = mesh.points[mesh.triangles]
    xs = pts[:, :, 0]
    ys = pts[:, :, 1]
    b = np.roll(ys, -1, axis=1) - np.roll(ys, -2, axis=1)
    c = np.roll(xs, -2, axis=1) - np.roll(xs, -1, axis=1)
    twice_area = (xs[:, 1] - xs[:, 0]) * (ys[:, 2] - ys[:, 0]) \
        - (xs[:, 2] - xs[:, 0]) * (ys[:, 1] - ys[:, 0])
    assert np.all(twice_area > 0.0)
    return b, c, 0.5 * twice_area


def assemble(mesh: SubgraphMesh) -> scipy.sparse.csr_matrix:
    '''Returns the stiffness matrix of the Dirichlet energy.'''
    b, c, area = _geometry(mesh)
    local = (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]) \
        / (4.0 * area[:, None, None])
    rows = np.repeat(mesh.triangles, 3, axis=1)
    cols = np.tile(mesh.triangles, (1, 3))
    n = mesh.n_nodes
    return scipy.sparse.coo_matrix(
        (local.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n)).tocsr()


def _solve_system(matrix, rhs: Array, resolution: Resolution,
                  x0: Optional[Array]):
    if resolution.backend == enums.SolverBackend.DIRECT:
        sol = scipy.sparse.linalg.spsolve(matrix.tocsc(), rhs)
        return np.asarray(sol, dtype=float), 0
    diag = matrix.diagonal()
    precond = scipy.sparse.diags(1.0 / diag)
    iterations = [0]

    def count(_):
        iterations[0] += 1

    sol, info = scipy.sparse.linalg.cg(
        matrix, rhs, x0=x0, rtol=resolution.tol, atol=0.0,
        maxiter=resolution.max_iter, M=precond, callback=count)
    if info != 0:
        res = np.linalg.norm(matrix @ sol - rhs) / max(np.linalg.norm(rhs),
                                                       1e-300)
        raise errors.SolverFailure('conjugate gradients did not converge',
                                   iterations[0], float(res))
    return sol, iterations[0]


def _per_node(values: Array, weights: Array, cells: Array,
              n_profile: int) -> Array:
    '''Averages triangle values over columns, then columns over their two
    end nodes.'''
    n_cells = n_profile - 1
    wsum = np.bincount(cells, weights=weights, minlength=n_cells)
    vsum = np.bincount(cells, weights=weights * values, minlength=n_cells)
    filled = wsum > 0.0
    per_cell = np.zeros(n_cells)
    per_cell[filled] = vsum[filled] / wsum[filled]
    total = np.zeros(n_profile)
    count = np.zeros(n_profile)
    for side in (0, 1):
        np.add.at(total, np.arange(n_cells) + side, per_cell * filled)
        np.add.at(count, np.arange(n_cells) + side, filled.astype(float))
    out = np.zeros(n_profile)
    out[count > 0] = total[count > 0] / count[count > 0]
    return out


def solve_mesh(mesh: SubgraphMesh, resolution: Resolution,
               x0: Optional[Array] = None) -> ElasticSolution:
    '''Solves the elastic problem on the given mesh. x0, when given and of
    matching size, seeds the iterative solver.'''
    matrix = assemble(mesh)
    u = np.zeros(mesh.n_nodes)
    fixed = mesh.dirichlet
    free = ~fixed
    u[fixed] = mesh.points[fixed, 0]
    a_ff = matrix[free][:, free]
    rhs = -(matrix[free][:, fixed] @ u[fixed])
    start = None
    if x0 is not None and len(x0) == mesh.n_nodes:
        start = np.asarray(x0, dtype=float)[free]
    iterations = 0
    residual = 0.0
    if free.any():
        u[free], iterations = _solve_system(a_ff, rhs, resolution, start)
        norm = np.linalg.norm(rhs)
        if norm > 0.0:
            residual = float(np.linalg.norm(a_ff @ u[free] - rhs) / norm)

    b, c, area = _geometry(mesh)
    vals = u[mesh.triangles]
    gx = np.sum(b * vals, axis=1) / (2.0 * area)
    gy = np.sum(c * vals, axis=1) / (2.0 * area)
    dx_energy = float(np.sum(area * gx * gx))
    dy_energy = float(np.sum(area * gy * gy))
    gradsq = gx * gx + gy * gy

    # Derivative of A |g|^2 with respect to the y coordinate of each vertex
    # with nodal values held fixed.
    dedy = 0.5 * (gradsq[:, None] * c
                  - 2.0 * gy[:, None] * (gx[:, None] * b + gy[:, None] * c))
    node_dedy = np.bincount(mesh.triangles.ravel(), weights=dedy.ravel(),
                            minlength=mesh.n_nodes)
    dedh = np.bincount(mesh.fibre_node,
                       weights=mesh.fibre_weight * node_dedy,
                       minlength=mesh.n_profile)
    solid = np.bincount(mesh.fibre_node, weights=mesh.fibre_weight,
                        minlength=mesh.n_profile) > 0.0
    shape_gradient = np.where(solid, dedh / mesh.dx, 1.0)

    top = mesh.triangle_layer == mesh.layers - 1
    bottom = mesh.triangle_layer == 0
    top_trace = _per_node(gradsq[top], area[top], mesh.triangle_cell[top],
                          mesh.n_profile)
    bottom_flux = _per_node(gy[bottom], area[bottom],
                            mesh.triangle_cell[bottom], mesh.n_profile)
    top_trace[~solid] = 0.0

    LOG.debug('elastic solve: %d nodes, %d triangles, E=%.10g, '
              'iterations=%d, residual=%.2e', mesh.n_nodes,
              len(mesh.triangles), dx_energy + dy_energy, iterations,
              residual)
    return ElasticSolution(
        mesh=mesh, nodal_values=u, energy=dx_energy + dy_energy,
        dx_energy=dx_energy, dy_energy=dy_energy,
        gradients=np.column_stack([gx, gy]), areas=area,
        top_trace_gradsq=top_trace, bottom_flux=bottom_flux,
        shape_gradient=shape_gradient, residual=residual,
        iterations=iterations)


def solve_elastic(p: profile.Profile, resolution: Resolution,
                  x0: Optional[Array] = None) -> ElasticSolution:
    '''Returns the discrete elastic minimizer of the profile.'''
    if profile.volume(p) <= 0.0:
        raise errors.EmptyFilm('profile has no volume')
    mesh = build_mesh(p.x, p.heights, resolution, p.floor())
    return solve_mesh(mesh, resolution, x0)


def solve_strip(width: float, height: float, resolution: Resolution,
                fractions: Optional[Array] = None) -> ElasticSolution:
    '''Returns the elastic minimizer on the rectangle [0, width] x
    [0, height], with u = x on the bottom side and natural conditions on
    the three others.'''
    if not (width > 0.0 and height > 0.0):
        raise errors.InvalidParameter('strip sides must be positive')
    x = np.linspace(0.0, width, resolution.cells + 1)
    heights = np.full(len(x), float(height))
    mesh = build_mesh(x, heights, resolution, 0.0, fractions)
    return solve_mesh(mesh, resolution)


def corrector_series(height: float, terms: int = 100000) -> float:
    '''Returns the energy of the unit strip of the given height from its
    cosine series, (8/pi^3) sum over odd k of tanh(k pi L) / k^3.'''
    k = np.arange(1, 2 * terms, 2, dtype=float)
    return float(8.0 / math.pi ** 3 * np.sum(np.tanh(k * math.pi * height)
                                            / k ** 3))


def strip_fractions(height: float, base: float,
                    resolution: Resolution) -> Array:
    '''Returns the relative node heights of a strip of the given height:
    the graded layers of the resolution on [0, base], then layers of
    thickness about base / layers up to the height. Strips sharing the
    base have nested meshes, hence energies increasing with the height.'''
    if not 0.0 < base <= height:
        raise errors.InvalidParameter('strip base must be in (0, height]')
    nodes = base * resolution.layer_fractions()
    if height > base:
        step = base / resolution.layers
        count = max(1, int(round((height - base) / step)))
        upper = base + (height - base) * np.arange(1, count + 1) / count
        nodes = np.concatenate((nodes, upper))
    fractions = nodes / height
    fractions[-1] = 1.0
    return fractions


def corrector_cw(truncations: Sequence[float],
                 resolution: Resolution) -> CorrectorResult:
    '''Estimates the corrector constant by solving unit strips truncated at
    the given heights and extrapolating with the model
    E(L) = E_inf - A exp(-2 pi L). All strips share the graded mesh of
    the lowest one, with a fixed layer density above it.'''
    heights = [float(t) for t in truncations]
    if len(heights) < 2:
        raise errors.InvalidParameter('at least 2 truncations are needed')
    if any(t <= 0.0 for t in heights) or \
            any(b <= a for a, b in zip(heights, heights[1:])):
        raise errors.InvalidParameter(
            'truncations must be positive and increasing')
    energies = []
    for height in heights:
        fractions = strip_fractions(height, heights[0], resolution)
        energies.append(solve_strip(1.0, height, resolution,
                                    fractions).energy)
        LOG.info('corrector: L=%g layers=%d E=%.8f', height,
                 len(fractions) - 1, energies[-1])
    decay = np.exp(-2.0 * math.pi * np.array(heights))
    design = np.column_stack([np.ones(len(heights)), -decay])
    coef, *_ = np.linalg.lstsq(design, np.array(energies), rcond=None)
    fit_residual = float(np.sqrt(np.mean(
        (design @ coef - np.array(energies)) ** 2)))
    extrapolated = float(coef[0])
    error = abs(extrapolated - energies[-1]) + fit_residual
    return CorrectorResult(heights, energies, extrapolated, error)


def balance_ratio(sol: ElasticSolution, p: profile.Profile,
                  kind: profile.SurfaceEnergyKind) -> float:
    '''Returns the integral of (d_y u)^2 over the surface energy.'''
    surf = profile.surface_energy(p, kind.reporting())
    if surf <= 0.0:
        raise errors.UndefinedRatio('profile has no surface energy')
    return sol.dy_energy / surf


def flux_identity_gap(sol: ElasticSolution, p: profile.Profile) -> float:
    '''Returns |E - (V - integral of d_y u h')| / E. Galerkin orthogonality
    against u - x makes the identity hold up to the solver tolerance.'''
    slopes = np.diff(p.heights) / p.grid.dx
    flux = float(np.sum(sol.areas * sol.gradients[:, 1]
                        * slopes[sol.mesh.triangle_cell]))
    return abs(sol.energy - (profile.volume(p) - flux)) / sol.energy


def summary_dict(sol: ElasticSolution, p: profile.Profile) -> dict:
    '''Returns the energy summary exported next to nodal dumps.'''
    return {'E': sol.energy, 'dx_energy': sol.dx_energy,
            'dy_energy': sol.dy_energy, 'V': profile.volume(p)}


def write_nodes_csv(sol: ElasticSolution, path) -> None:
    '''Writes the nodal values as CSV with header `x,y,u`.'''
    np.savetxt(path, np.column_stack([sol.mesh.points, sol.nodal_values]),
               delimiter=',', header='x,y,u', comments='', fmt='%.17g')


def write_summary_json(sol: ElasticSolution, p: profile.Profile,
                       path) -> None:
    '''Writes the energy summary as JSON.'''
    storage.write_json(path, summary_dict(sol, p))

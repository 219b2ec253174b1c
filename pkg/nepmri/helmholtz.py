"""
Helmholtz resonator with a parameter-dependent neck

The physical domain is the box [-1/4, 5] x [-2, 2] minus two unit disks
centered at (1, +-2), with the neck region 0 < x < 2 stretched vertically
by the parameter z. The problem is pulled back to the fixed reference
domain through

    phi_z(x, y) = (x, s(z, x) y),   s(z, x) = (2+z)/4 + (2-z)/4 cos(pi x)

in the neck (identity elsewhere), so T(z) is the mapped Helmholtz operator
-div(A^T A grad) - k^2 with A = J^-T and metric weight det J = s. It is
discretized with bilinear elements on a structured grid; elements whose
centroid lies inside a disk are removed. Walls carry homogeneous Dirichlet
conditions and the inlet x = -1/4 a Neumann condition.
"""
from pathlib import Path
from typing import Tuple, Union
import logging

import numpy as np
import scipy.sparse
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.sparse.linalg import splu

from nepmri.cache import OperatorCache
from nepmri.config import OPERATOR_CACHE_SIZE
from nepmri.errors import DomainError, SolveError
from nepmri.problems import NEPProblem, as_block

logger = logging.getLogger(__name__)

# Reference geometry
X_RANGE = (-0.25, 5.0)
Y_RANGE = (-2.0, 2.0)
NECK_RANGE = (0.0, 2.0)
DISK_CENTERS = ((1.0, 2.0), (1.0, -2.0))
DISK_RADIUS = 1.0
MIN_NECK_ELEMENTS = 8

# |s| below this means z is outside the analyticity domain of the map
_SCALE_FLOOR = 1e-12

# 2x2 Gauss rule on the unit square
_GAUSS_1D = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
_GAUSS_XI, _GAUSS_ETA = (grid.ravel() for grid in np.meshgrid(_GAUSS_1D, _GAUSS_1D, indexing='ij'))

ArrayLike = Union[float, np.ndarray]


def _in_neck(x: np.ndarray) -> np.ndarray:
    return (x > NECK_RANGE[0]) & (x < NECK_RANGE[1])


def _neck_scale(z: complex, x: np.ndarray) -> np.ndarray:
    return np.where(_in_neck(x), (2 + z) / 4 + (2 - z) / 4 * np.cos(np.pi * x), 1.0)


def _neck_shear(z: complex, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.where(_in_neck(x), np.pi * (z - 2) / 4 * np.sin(np.pi * x) * y, 0.0)


def map_phi(z: complex, point: Tuple[ArrayLike, ArrayLike]) -> Tuple[ArrayLike, ArrayLike]:
    """phi_z(x, y) = (x, s(z, x) y), the identity outside the neck"""
    x, y = np.asarray(point[0]), np.asarray(point[1])
    return x[()], (_neck_scale(z, x) * y)[()]


def map_jacobian(z: complex, point: Tuple[float, float]) -> np.ndarray:
    """Jacobian [[1, 0], [ds/dx y, s]] of phi_z at a single point"""
    x, y = float(point[0]), float(point[1])
    dtype = complex if np.iscomplexobj(z) and complex(z).imag != 0 else float
    return np.array([
        [1.0, 0.0],
        [_neck_shear(z, np.asarray(x), np.asarray(y))[()], _neck_scale(z, np.asarray(x))[()]],
    ], dtype=dtype)


def map_coefficients(z: complex, point: Tuple[ArrayLike, ArrayLike]) -> Tuple[ArrayLike, ArrayLike, ArrayLike, ArrayLike]:
    """
    Entries (a1, a2, a3, a4) of [[a1, a2], [a3, a4]] = J^-T

    a1 = 1 and a3 = 0 everywhere; a2 = -shear/s and a4 = 1/s.

    Raises:
        DomainError: If s vanishes (z outside the analyticity domain)
    """
    x, y = np.asarray(point[0]), np.asarray(point[1])
    scale = _neck_scale(z, x)
    if np.any(np.abs(scale) < _SCALE_FLOOR):
        raise DomainError(f"Map degenerates at z={z}: the neck scale vanishes")

    a2 = -_neck_shear(z, x, y) / scale
    a4 = 1.0 / scale
    return np.ones_like(a4)[()], a2[()], np.zeros_like(a4)[()], a4[()]


class ResonatorGeometry(BaseModel):
    """Discretization parameters of the resonator"""
    model_config = ConfigDict(frozen=True)

    nx: int = Field(default=84, ge=1, description="Elements along x over [-1/4, 5]")
    ny: int = Field(default=64, ge=4, description="Elements along y over [-2, 2]")
    wavenumber: float = Field(default=10.0, ge=0, description="Wavenumber k")
    wall_only: bool = Field(default=False, description="Dirichlet on the inlet as well")

    @model_validator(mode='after')
    def validate_resolution(self) -> 'ResonatorGeometry':
        neck_elements = (NECK_RANGE[1] - NECK_RANGE[0]) / self.hx
        if neck_elements < MIN_NECK_ELEMENTS:
            raise ValueError(
                f"Mesh too coarse: {neck_elements:.2f} elements across the neck, need {MIN_NECK_ELEMENTS}"
            )
        return self

    @property
    def hx(self) -> float:
        return (X_RANGE[1] - X_RANGE[0]) / self.nx

    @property
    def hy(self) -> float:
        return (Y_RANGE[1] - Y_RANGE[0]) / self.ny

    @property
    def h(self) -> float:
        return max(self.hx, self.hy)


class ResonatorMesh:
    """
    Structured bilinear mesh of the reference domain

    Attributes:
        coordinates: (N, 2) grid node coordinates, disk nodes included
        elements: (E, 4) kept elements, counterclockwise node indices
        tags: (N,) 'interior', 'inlet', 'wall' or 'removed'
        dofs: (N,) unknown index of each node, -1 for Dirichlet and removed
        inlet_edges: (F, 2) boundary edges on x = -1/4
    """

    def __init__(self, geometry: ResonatorGeometry):
        nx, ny = geometry.nx, geometry.ny
        x = X_RANGE[0] + geometry.hx * np.arange(nx + 1)
        y = Y_RANGE[0] + geometry.hy * np.arange(ny + 1)
        x[-1], y[-1] = X_RANGE[1], Y_RANGE[1]
        grid_x, grid_y = np.meshgrid(x, y)
        self.coordinates = np.column_stack([grid_x.ravel(), grid_y.ravel()])

        i, j = (index.ravel() for index in np.meshgrid(np.arange(nx), np.arange(ny)))
        first = j * (nx + 1) + i
        elements = np.column_stack([first, first + 1, first + nx + 2, first + nx + 1])

        centroid_x = x[i] + 0.5 * geometry.hx
        centroid_y = y[j] + 0.5 * geometry.hy
        inside = np.zeros(i.size, dtype=bool)
        for cx, cy in DISK_CENTERS:
            inside |= (centroid_x - cx) ** 2 + (centroid_y - cy) ** 2 < DISK_RADIUS ** 2
        self.elements = elements[~inside]
        self.element_origin = np.column_stack([x[i], y[j]])[~inside]

        self._tag_boundary(geometry.wall_only)
        logger.debug(f"Resonator mesh: {len(self.elements)} elements, {self.size} unknowns")

    def _tag_boundary(self, wall_only: bool):
        edges = np.sort(np.concatenate([self.elements[:, [k, (k + 1) % 4]] for k in range(4)]), axis=1)
        unique, counts = np.unique(edges, axis=0, return_counts=True)
        boundary = unique[counts == 1]

        on_inlet = np.all(self.coordinates[boundary, 0] == X_RANGE[0], axis=1)
        self.inlet_edges = boundary[on_inlet]

        tags = np.full(len(self.coordinates), 'removed', dtype=object)
        tags[np.unique(self.elements)] = 'interior'
        tags[self.inlet_edges.ravel()] = 'inlet'
        wall_edges = boundary if wall_only else boundary[~on_inlet]
        tags[wall_edges.ravel()] = 'wall'
        self.tags = tags

        free = np.flatnonzero((tags == 'interior') | (tags == 'inlet'))
        self.dofs = np.full(len(self.coordinates), -1, dtype=int)
        self.dofs[free] = np.arange(free.size)

    @property
    def size(self) -> int:
        return int(np.count_nonzero(self.dofs >= 0))

    def dump(self, path: Path) -> Path:
        """Write node coordinates, connectivity and boundary tags as plain text"""
        path = Path(path)
        lines = [f"# nodes {len(self.coordinates)}: index x y tag dof"]
        lines += [
            f"{index} {x:.17g} {y:.17g} {tag} {dof}"
            for index, ((x, y), tag, dof) in enumerate(zip(self.coordinates, self.tags, self.dofs))
        ]
        lines.append(f"# elements {len(self.elements)}: index n0 n1 n2 n3")
        lines += [f"{index} " + " ".join(str(node) for node in element) for index, element in enumerate(self.elements)]
        lines.append(f"# inlet_edges {len(self.inlet_edges)}: n0 n1")
        lines += [f"{a} {b}" for a, b in self.inlet_edges]
        path.write_text("\n".join(lines) + "\n")
        return path


class HelmholtzResonatorProblem(NEPProblem):
    """T(z) = K(z) - k^2 M(z) of the mapped resonator, factorized with SuperLU"""

    name = "helmholtz_resonator"

    def __init__(self, geometry: ResonatorGeometry, cache_size: int = OPERATOR_CACHE_SIZE):
        self.geometry = geometry
        self.mesh = ResonatorMesh(geometry)
        self.cache = OperatorCache(max_size=cache_size)

        hx, hy = geometry.hx, geometry.hy
        self._weight = 0.25 * hx * hy
        xi, eta = _GAUSS_XI[:, None], _GAUSS_ETA[:, None]
        # Bilinear shape functions and reference-domain gradients at the Gauss points, shape (G, 4)
        self._basis = np.hstack([(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta])
        self._basis_dx = np.hstack([-(1 - eta), 1 - eta, eta, -eta]) / hx
        self._basis_dy = np.hstack([-(1 - xi), -xi, xi, 1 - xi]) / hy

        origin = self.mesh.element_origin
        self._points_x = origin[:, [0]] + hx * _GAUSS_XI[None, :]
        self._points_y = origin[:, [1]] + hy * _GAUSS_ETA[None, :]

        rows = self.mesh.dofs[self.mesh.elements]
        self._rows = np.broadcast_to(rows[:, :, None], (len(rows), 4, 4))
        self._cols = np.broadcast_to(rows[:, None, :], (len(rows), 4, 4))
        self._kept = (self._rows >= 0) & (self._cols >= 0)

    def dim(self) -> int:
        return self.mesh.size

    def _assemble_with(self, scale: np.ndarray, a2: np.ndarray, a4: np.ndarray) -> scipy.sparse.csc_matrix:
        mapped_x = self._basis_dx[None, :, :] + a2[:, :, None] * self._basis_dy[None, :, :]
        mapped_y = a4[:, :, None] * self._basis_dy[None, :, :]
        stiffness = np.einsum('eg,ega,egb->eab', scale, mapped_x, mapped_x)
        stiffness += np.einsum('eg,ega,egb->eab', scale, mapped_y, mapped_y)
        mass = np.einsum('eg,ga,gb->eab', scale, self._basis, self._basis)
        local = self._weight * (stiffness - self.geometry.wavenumber ** 2 * mass)

        n = self.dim()
        matrix = scipy.sparse.coo_matrix(
            (local[self._kept].astype(complex), (self._rows[self._kept], self._cols[self._kept])),
            shape=(n, n),
        )
        return matrix.tocsc()

    def assemble(self, z: complex) -> scipy.sparse.csc_matrix:
        """Sparse complex-symmetric T(z)"""
        scale = _neck_scale(z, self._points_x)
        _, a2, _, a4 = map_coefficients(z, (self._points_x, self._points_y))
        return self._assemble_with(scale, a2, a4)

    def assemble_unmapped(self) -> scipy.sparse.csc_matrix:
        """Plain Helmholtz discretization of the reference domain (no map)"""
        ones = np.ones_like(self._points_x)
        return self._assemble_with(ones, np.zeros_like(ones), ones)

    @staticmethod
    def _factorize(matrix):
        try:
            return splu(matrix)
        except RuntimeError as e:
            raise SolveError(complex('nan'), str(e)) from e

    def apply_T(self, z, X):
        return self.cache.matrix(z, self.assemble) @ as_block(X)

    def solve(self, z, B):
        try:
            factorization = self.cache.factorization(z, self.assemble, self._factorize)
        except SolveError as e:
            raise SolveError(z, e.reason) from e
        solution = factorization.solve(np.ascontiguousarray(as_block(B), dtype=complex))
        if not np.all(np.isfinite(solution)):
            raise SolveError(z, "non-finite solution")
        return solution

    def inlet_load(self) -> np.ndarray:
        """Neumann load of a unit inflow on the inlet, sum over edges of hy/2 per node"""
        load = np.zeros(self.dim(), dtype=complex)
        half = 0.5 * self.geometry.hy
        for edge in self.mesh.inlet_edges:
            for node in edge:
                dof = self.mesh.dofs[node]
                if dof >= 0:
                    load[dof] += half
        return load

    def dump_mesh(self, path: Path) -> Path:
        return self.mesh.dump(path)

    def analyticity_hint(self):
        return "non-positive real axis (the neck scale vanishes for some z <= 0)"


def make_helmholtz_resonator(geometry: ResonatorGeometry = None) -> HelmholtzResonatorProblem:
    return HelmholtzResonatorProblem(geometry or ResonatorGeometry())

"""Plane-stress constant-strain-triangle beam and its inverse material estimation.

The beam is the 10 x 5 rectangle with nodes 1 (0, 0), 2 (0, 5), 3 (10, 5),
4 (10, 0) and centre node 5 (5, 2.5); each of the four triangles joins
one rectangle edge to node 5. Nodes 1 and 2 are clamped and node 4
carries a unit downward load. Node and element numbers in docstrings are
1-based, arrays are 0-based.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from loguru import logger
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from bioopt.encoding import FieldSpec
from bioopt.pa import PaConfig, pa_optimize
from bioopt.problems import Problem
from bioopt.rand_core import RandomSource
from bioopt.trace import RunTrace

BEAM_NODES = ((0.0, 0.0), (0.0, 5.0), (10.0, 5.0), (10.0, 0.0), (5.0, 2.5))
BEAM_ELEMENTS = ((0, 4, 1), (1, 4, 2), (2, 4, 3), (3, 4, 0))
BEAM_FIXED_NODES = (0, 1)

BEAM_TARGET_Y = (600.0, 0.25, 400.0, 0.35, 450.0, 0.30, 350.0, 0.32)
PRINTED_ESTIMATE_Y = (580.0, 0.24, 400.0, 0.31, 460.0, 0.29, 346.0, 0.26)
# printed measurements; they come from a different mesh and are kept for comparison only
PRINTED_MEASURED_U = (0.0, 0.0, 0.0, 0.0, -0.0066, -0.0246, 0.0828, -0.2606, 0.0002, -0.0110)

E_BOUNDS = (100.0, 1000.0)
NU_BOUNDS = (0.05, 0.45)


class SingularSystemError(ArithmeticError):
    pass


@dataclass(frozen=True)
class PointLoad:
    node: int
    direction: int  # 0 = x, 1 = y
    magnitude: float


@dataclass(frozen=True)
class FemModel:
    nodes: np.ndarray  # (n, 2)
    elements: np.ndarray  # (m, 3) node indices, counter-clockwise
    materials: np.ndarray  # (m, 2) rows of (E, nu)
    fixed_nodes: tuple[int, ...]
    loads: tuple[PointLoad, ...]
    thickness: float = 1.0

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        elements = np.array(self.elements, dtype=int)
        materials = np.asarray(self.materials, dtype=float).reshape(len(elements), 2)
        for e, tri in enumerate(elements):
            if len(set(tri.tolist())) != 3 or tri.min() < 0 or tri.max() >= len(nodes):
                raise ValueError(f"element {e + 1} references invalid nodes {tri.tolist()}")
            area2 = _signed_area2(nodes[tri])
            if abs(area2) <= 1e-12:
                raise ValueError(f"element {e + 1} has zero area")
            if area2 < 0:
                elements[e, [1, 2]] = elements[e, [2, 1]]
        if np.any(materials[:, 0] <= 0):
            raise ValueError("every E must be positive")
        if np.any((materials[:, 1] <= 0) | (materials[:, 1] >= 0.5)):
            raise ValueError("every nu must lie in (0, 0.5)")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "materials", materials)

    @property
    def n_dofs(self) -> int:
        return 2 * len(self.nodes)

    @property
    def fixed_dofs(self) -> np.ndarray:
        return np.array(sorted(2 * n + d for n in self.fixed_nodes for d in (0, 1)), dtype=int)

    @property
    def free_dofs(self) -> np.ndarray:
        return np.setdiff1d(np.arange(self.n_dofs), self.fixed_dofs)

    def load_vector(self) -> np.ndarray:
        f = np.zeros(self.n_dofs)
        for load in self.loads:
            f[2 * load.node + load.direction] += load.magnitude
        return f

    def with_materials(self, Y: Sequence[float]) -> FemModel:
        """Copy with materials taken from a flat (E1, nu1, ..., Em, num) vector."""
        return replace(self, materials=np.asarray(Y, dtype=float).reshape(-1, 2))


def beam_model(Y: Sequence[float] = BEAM_TARGET_Y, load: float = -1.0) -> FemModel:
    return FemModel(
        nodes=np.array(BEAM_NODES),
        elements=np.array(BEAM_ELEMENTS),
        materials=np.asarray(Y, dtype=float).reshape(-1, 2),
        fixed_nodes=BEAM_FIXED_NODES,
        loads=(PointLoad(node=3, direction=1, magnitude=load),),
    )


def _signed_area2(coords: np.ndarray) -> float:
    (x1, y1), (x2, y2), (x3, y3) = coords
    return (x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1)


def element_stiffness(coords, E: float, nu: float, thickness: float = 1.0) -> np.ndarray:
    """6 x 6 CST stiffness t * A * B^T D B under plane stress, dofs ordered (u1, v1, u2, v2, u3, v3)."""
    coords = np.asarray(coords, dtype=float)
    area2 = _signed_area2(coords)
    if abs(area2) <= 1e-12:
        raise ValueError("degenerate triangle")
    x, y = coords[:, 0], coords[:, 1]
    b = np.array([y[1] - y[2], y[2] - y[0], y[0] - y[1]])
    c = np.array([x[2] - x[1], x[0] - x[2], x[1] - x[0]])
    B = np.zeros((3, 6))
    B[0, 0::2] = b
    B[1, 1::2] = c
    B[2, 0::2] = c
    B[2, 1::2] = b
    B /= area2
    D = E / (1.0 - nu * nu) * np.array([[1.0, nu, 0.0], [nu, 1.0, 0.0], [0.0, 0.0, (1.0 - nu) / 2.0]])
    return thickness * abs(area2) / 2.0 * B.T @ D @ B


def assemble(model: FemModel) -> np.ndarray:
    K = np.zeros((model.n_dofs, model.n_dofs))
    for tri, (E, nu) in zip(model.elements, model.materials):
        dofs = np.ravel([[2 * n, 2 * n + 1] for n in tri])
        K[np.ix_(dofs, dofs)] += element_stiffness(model.nodes[tri], E, nu, model.thickness)
    return K


def solve_displacements(model: FemModel) -> np.ndarray:
    """Full displacement vector U; clamped dofs are exactly zero."""
    K = assemble(model)
    free = model.free_dofs
    K_ff = K[np.ix_(free, free)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(K_ff)
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= 1e-12 * pivots.max():
        raise SingularSystemError("constrained stiffness matrix is singular")
    U = np.zeros(model.n_dofs)
    U[free] = lu_solve((lu, piv), model.load_vector()[free])
    return U


def material_fields(n_elements: int, bits: int, e_bounds=E_BOUNDS, nu_bounds=NU_BOUNDS) -> list[FieldSpec]:
    fields = []
    for _ in range(n_elements):
        fields.append(FieldSpec("continuous", bits, *e_bounds))
        fields.append(FieldSpec("continuous", bits, *nu_bounds))
    return fields


def inverse_problem(measured: Sequence[float], model: FemModel, e_bounds=E_BOUNDS, nu_bounds=NU_BOUNDS) -> Problem:
    """Sum of squared displacement misfits over the free dofs, as a function of Y."""
    measured = np.asarray(measured, dtype=float)
    free = model.free_dofs
    if measured.shape != (model.n_dofs,):
        raise ValueError(f"measured vector needs {model.n_dofs} entries, got {measured.size}")
    if np.any(measured[model.fixed_dofs] != 0):
        raise ValueError("measured displacements must be zero on clamped dofs")

    def misfit(Y: np.ndarray) -> float:
        U = solve_displacements(model.with_materials(Y))
        return float(np.sum((U[free] - measured[free]) ** 2))

    bounds = []
    for _ in range(len(model.elements)):
        bounds += [tuple(e_bounds), tuple(nu_bounds)]
    return Problem(name="fem-inverse", dimension=len(bounds), sense="minimize", objective=misfit, bounds=tuple(bounds))


def fem_inverse(
    measured: Sequence[float],
    cfg: PaConfig,
    src: RandomSource,
    model: FemModel | None = None,
    e_bounds=E_BOUNDS,
    nu_bounds=NU_BOUNDS,
) -> tuple[np.ndarray, RunTrace]:
    """Estimate (E_i, nu_i) of every element from one displacement measurement with the PA."""
    model = model or beam_model()
    problem = inverse_problem(measured, model, e_bounds, nu_bounds)
    fields = material_fields(len(model.elements), cfg.string_bits, e_bounds, nu_bounds)
    trace = pa_optimize(problem, fields, cfg, src)
    logger.info(f"fem inverse: misfit {trace.best_objective:.3e}, estimate {np.round(trace.best_vector, 4).tolist()}")
    return trace.best_vector, trace

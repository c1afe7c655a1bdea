"""Extension of harmonic primitive forms along a Beltrami deformation.

Given a harmonic primitive ``σ₀`` of bidegree ``(p, q)`` and an integrable
``φ`` with ``sup‖φ‖ < 1``, solve ``σ = σ₀ − T i_φ σ`` by fixed-point
iteration.  ``e^{i_φ} σ`` is then d-closed and its harmonic primitive parts give
the coordinates of the deformed class in the base-point basis.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil, log

import numpy as np

from . import dolbeault as ops
from .errors import ContractionViolationError, DegreeError, InadmissibleProblemError, NonConvergenceError
from .torus import BeltramiDifferential, FourierForm, GradedForm

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10_000
PRIMITIVE_TOL = 1e-12
INTEGRABILITY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class ExtensionProblem:
    sigma0: FourierForm
    phi: BeltramiDifferential
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    band: int | None = None

    @property
    def working_band(self) -> int:
        return self.band if self.band is not None else max(2 * self.phi.band, self.sigma0.band)

    def validate(self) -> float:
        """Check the input invariants; returns the supremum norm of ``φ``."""
        s0 = self.sigma0
        p, q = s0.bidegree
        if p + q > s0.geometry.dimension:
            raise DegreeError(f"bidegree {s0.bidegree} exceeds the middle dimension")
        if (ops.primitive_projection(s0) - s0).norm() > PRIMITIVE_TOL:
            raise InadmissibleProblemError("sigma0 is not harmonic and primitive")
        mc = ops.maurer_cartan_residual(self.phi)
        if mc > INTEGRABILITY_TOL:
            raise InadmissibleProblemError(f"phi is not integrable (Maurer-Cartan residual {mc:.3e})")
        sup = ops.sup_operator_norm(self.phi)
        if sup >= 1.0:
            raise ContractionViolationError(sup)
        return sup


@dataclass(frozen=True, eq=False)
class ExtensionSolution:
    sigma: FourierForm
    iterations: int
    fixed_point_residual: float
    obstruction_residual_partial: float
    obstruction_residual_dbar: float
    d_closed_residual: float
    truncation_residual: float
    sup_norm: float = field(default=0.0)

    def as_row(self) -> dict[str, float]:
        return {
            "iterations": self.iterations,
            "fixed_point": self.fixed_point_residual,
            "obstruction_partial": self.obstruction_residual_partial,
            "obstruction_dbar": self.obstruction_residual_dbar,
            "d_closed": self.d_closed_residual,
            "truncation": self.truncation_residual,
        }


def _step(phi: BeltramiDifferential, sigma: FourierForm, band: int) -> FourierForm:
    """``T P_K i_φ σ``."""
    return ops.t_operator(ops.contract(phi, sigma, band=band))


def neumann_partial_sum(problem: ExtensionProblem, order: int) -> FourierForm:
    """``Σ_{k=0}^{order} (−T i_φ)^k σ₀`` on the working band."""
    band = problem.working_band
    term = problem.sigma0.padded(band)
    total = term
    for _ in range(order):
        term = -_step(problem.phi, term, band)
        total = total + term
    return FourierForm(total.geometry, total.bidegree, total.coeffs)


def neumann_order(sup_norm: float, tol: float) -> int:
    if sup_norm <= 0.0:
        return 0
    # guard against log-ratio round-off pushing an integer order up by one
    return max(1, ceil(log(tol) / log(sup_norm) - 1e-9))


def band_tail_residual(phi: BeltramiDifferential, sigma: FourierForm, band: int) -> float:
    """Frequency-weighted mass of ``i_φ σ`` outside the band: ``‖d R‖ + ‖R‖``."""
    full = ops.contract(phi, sigma, exact=True)
    if full.band <= band:
        return 0.0
    kept = full.truncated(band).padded(full.band)
    tail = full - kept
    return tail.norm() + ops.d_operator(tail).norm()


def obstruction_residuals(sigma: FourierForm, phi: BeltramiDifferential) -> tuple[float, float]:
    """``(‖∂σ‖, ‖∂̄σ + ∂(φ⌟σ)‖)``, evaluated without truncation."""
    r1 = ops._partial(sigma).norm()
    contracted = ops.contract(phi, sigma, exact=True)
    lhs = ops._dbar(sigma)
    rhs = ops._partial(contracted)
    if lhs.coeffs.size == 0:
        return r1, rhs.norm()
    return r1, (lhs + rhs).norm()


def solve_extension(problem: ExtensionProblem) -> ExtensionSolution:
    sup = problem.validate()
    band = problem.working_band
    phi = problem.phi
    sigma0 = problem.sigma0.padded(band)
    sigma = sigma0
    diff = np.inf
    for it in range(1, problem.max_iter + 1):
        new = sigma0 - _step(phi, sigma, band)
        new = FourierForm(new.geometry, new.bidegree, new.coeffs)
        diff = (new - sigma).norm()
        sigma = new
        if diff <= problem.tol:
            break
    else:
        raise NonConvergenceError(problem.max_iter, diff)
    fixed = (sigma - sigma0 + _step(phi, sigma, band)).norm()
    r_partial, r_dbar = obstruction_residuals(sigma, phi)
    closed = ops.d_graded(ops.exp_contraction(phi, sigma)).norm()
    return ExtensionSolution(
        sigma=sigma,
        iterations=it,
        fixed_point_residual=fixed,
        obstruction_residual_partial=r_partial,
        obstruction_residual_dbar=r_dbar,
        d_closed_residual=closed,
        truncation_residual=band_tail_residual(phi, sigma, band),
        sup_norm=sup,
    )


def dense_solve(problem: ExtensionProblem) -> FourierForm:
    """Solve ``(I + T P_K i_φ) σ = σ₀`` by assembling the operator; small bands only."""
    band = problem.working_band
    s0 = problem.sigma0.padded(band)
    flat0 = s0.coeffs.ravel()
    n = flat0.size
    cols = np.empty((n, n), dtype=complex)
    for j in range(n):
        e = np.zeros(n, dtype=complex)
        e[j] = 1.0
        basis = FourierForm(s0.geometry, s0.bidegree, e.reshape(s0.coeffs.shape))
        cols[:, j] = _step(problem.phi, basis, band).coeffs.ravel()
    sol = np.linalg.solve(np.eye(n) + cols, flat0)
    return FourierForm(s0.geometry, s0.bidegree, sol.reshape(s0.coeffs.shape))


def extended_form(problem: ExtensionProblem, solution: ExtensionSolution | None = None) -> GradedForm:
    """``e^{i_φ} σ`` for the solution ``σ`` of the extension equation."""
    solution = solve_extension(problem) if solution is None else solution
    return ops.exp_contraction(problem.phi, solution.sigma)


def cohomology_class(
    problem: ExtensionProblem, solution: ExtensionSolution | None = None
) -> dict[tuple[int, int], np.ndarray]:
    """Primitive-basis coordinates of ``ℍ_pr`` of each graded piece of ``e^{i_φ} σ``.

    Keys run over bidegrees ``(n, 0), …, (0, n)``; pieces that vanish get zero
    vectors.  The leading ``(p, q)`` piece is read off ``σ₀`` itself, since the
    iteration preserves the harmonic part exactly.
    """
    solution = solve_extension(problem) if solution is None else solution
    geom = problem.sigma0.geometry
    p0, q0 = problem.sigma0.bidegree
    n = p0 + q0
    ext_form = extended_form(problem, solution)
    centre = (solution.sigma.band,) * (2 * geom.dimension)
    if not np.array_equal(solution.sigma.coeffs[centre], problem.sigma0.constant_part()):
        raise AssertionError("harmonic part of the solution drifted from sigma0")
    out: dict[tuple[int, int], np.ndarray] = {}
    for p in range(n, -1, -1):
        key = (p, n - p)
        size = ops.primitive_basis(geom, *key).shape[0]
        if key == (p0, q0):
            vec = problem.sigma0.constant_part().ravel()
        elif key in ext_form:
            vec = ops.primitive_projection(ext_form[key]).constant_part().ravel()
        else:
            out[key] = np.zeros(size, dtype=complex)
            continue
        out[key] = ops.basis_coordinates(geom, *key, vec) if size else np.zeros(0, dtype=complex)
    return out


def class_vector(classes: dict[tuple[int, int], np.ndarray]) -> np.ndarray:
    return np.concatenate([classes[k] for k in sorted(classes, key=lambda k: -k[0])])


def section_tilde(p: int, t, family, tol: float = DEFAULT_TOL, band: int | None = None) -> np.ndarray:
    """Rows ``Ω̃_{(p)}(t)``: extended classes of the base basis elements of type ``(n−p, p)``.

    The ``(n−p, p)`` block is the identity by construction.
    """
    geom = family.geometry
    n = family.weight
    key = (n - p, p)
    basis = ops.primitive_basis(geom, *key)
    phi = family.phi(t)
    rows = []
    for i, vec in enumerate(basis):
        sigma0 = FourierForm.constant(geom, key, vec.reshape(-1, ops._dim(geom.dimension, p)))
        problem = ExtensionProblem(sigma0, phi, tol=tol, band=band)
        classes = cohomology_class(problem)
        unit = np.zeros(len(basis), dtype=complex)
        unit[i] = 1.0
        classes[key] = unit
        rows.append(class_vector(classes))
    return np.array(rows)

"""Solvers for the affine linear generators.

Three routes, all over the same :class:`~codecay.generator.LinearGenerator`
contract:

* exact eigendecomposition with initial-condition fitting (the default for
  time-independent systems),
* matrix-exponential stepping (scaling-and-squaring) as the fallback for
  defective or near-defective generators,
* a fixed-step classic RK4 integrator that also supports time-dependent
  parameters and arbitrary drives.

Fixed steps keep outputs bit-reproducible; every system here is small and
free of stiffness at the enforced step bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from collections.abc import Sequence

import numpy as np
import scipy.linalg

from .generator import LinearGenerator, check_excitation_cap
from .network import DriveSpec

#: Populations above this (negative) floor are clamped to zero as roundoff;
#: anything below it indicates a generator bug and raises.
POPULATION_FLOOR = -1e-9

#: Eigenvector condition number beyond which a generator is treated as
#: defective and eigendecomposition refuses to proceed.
CONDITION_LIMIT = 1e8

#: Maximum admissible step, as a fraction of the fastest rate in the system.
STEP_FRACTION = 0.05


class SolveError(RuntimeError):
    pass


class DefectiveMatrix(SolveError):
    """Eigenvector basis too ill-conditioned; use matrix-exponential stepping."""


class StepTooLarge(SolveError):
    pass


class NonfiniteState(SolveError):
    pass


class NoUniqueSteadyState(SolveError):
    pass


class NegativePopulation(SolveError):
    pass


def time_grid(t_max: float, dt: float) -> np.ndarray:
    """Uniform grid from 0 to (approximately) ``t_max`` inclusive."""
    steps = int(round(t_max / dt))
    if steps < 1:
        raise ValueError(f"empty time grid: t_max={t_max}, dt={dt}")
    return np.arange(steps + 1) * dt


def _grid_step(times: np.ndarray) -> float:
    diffs = np.diff(times)
    h = diffs[0]
    if not np.allclose(diffs, h, rtol=1e-9, atol=0.0):
        raise ValueError("time grid must be uniform")
    return float(h)


@dataclass
class TimeSeries:
    """Sampled expectation-value traces over a uniform time grid.

    ``channels`` maps a basis label (``c_1``, ``N_2``, ``O_12``, ...) to a
    real or complex trace of the same length as ``times``.
    """

    times: np.ndarray
    channels: dict[str, np.ndarray] = field(default_factory=dict)

    def channel(self, name: str) -> np.ndarray:
        return self.channels[name]

    @property
    def step(self) -> float:
        return _grid_step(self.times)

    def number_channels(self) -> dict[str, np.ndarray]:
        return {k: v for k, v in self.channels.items() if k.startswith("N_")}

    def to_csv(self, path) -> None:
        """Write ``t_gamma0`` plus one column per channel (complex channels
        split into ``re_``/``im_``), 15 significant digits."""
        headers = ["t_gamma0"]
        columns = [self.times]
        for name, values in self.channels.items():
            if np.iscomplexobj(values):
                headers += [f"re_{name}", f"im_{name}"]
                columns += [values.real, values.imag]
            else:
                headers.append(name)
                columns.append(values)
        _write_csv(path, headers, columns)


def _write_csv(path, headers: list[str], columns: list[np.ndarray]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(headers) + "\n")
        for row in zip(*columns):
            fh.write(",".join(f"{v:.15g}" for v in row) + "\n")


def clamp_populations(values: np.ndarray, floor: float = POPULATION_FLOOR,
                      label: str = "population") -> np.ndarray:
    """Zero out roundoff-negative populations; reject anything below ``floor``."""
    values = np.asarray(values)
    worst = values.min() if values.size else 0.0
    if worst < floor:
        raise NegativePopulation(f"{label} reached {worst:.3e} (< {floor:.0e})")
    return np.where(values < 0.0, 0.0, values)


# --------------------------------------------------------------------------
# Eigendecomposition route
# --------------------------------------------------------------------------

@dataclass
class ModalSolution:
    """Spectrum of a time-independent generator, optionally fitted to
    initial conditions so that ``x(t) = V (coeffs * exp(lambda t)) + offset``.

    ``offset`` is the particular solution absorbed for a constant source
    (zero in the homogeneous case).
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    condition_number: float
    basis_labels: tuple[str, ...]
    sector: str
    coefficients: np.ndarray | None = None
    offset: np.ndarray | None = None
    excitation_cap: float | None = None

    @property
    def fitted(self) -> bool:
        return self.coefficients is not None

    def fit(self, init: np.ndarray) -> "ModalSolution":
        """Fit modal coefficients to an initial state vector."""
        init = np.asarray(init, dtype=complex)
        target = init if self.offset is None else init - self.offset
        coeffs = np.linalg.solve(self.eigenvectors, target)
        return ModalSolution(
            eigenvalues=self.eigenvalues,
            eigenvectors=self.eigenvectors,
            condition_number=self.condition_number,
            basis_labels=self.basis_labels,
            sector=self.sector,
            coefficients=coeffs,
            offset=self.offset,
            excitation_cap=self.excitation_cap,
        )

    def reconstruct(self, times: np.ndarray) -> np.ndarray:
        """State trajectory, shape ``(D, T)``."""
        if not self.fitted:
            raise SolveError("modal solution not fitted to initial conditions")
        phases = np.exp(np.outer(self.eigenvalues, times))
        out = self.eigenvectors @ (self.coefficients[:, None] * phases)
        if self.offset is not None:
            out = out + self.offset[:, None]
        return out


def eigensolve(gen: LinearGenerator, init: np.ndarray | None = None,
               *, condition_limit: float = CONDITION_LIMIT) -> ModalSolution:
    """Full spectrum of a time-independent generator.

    Raises :class:`DefectiveMatrix` when the eigenvector condition number
    exceeds ``condition_limit``; callers should fall back to
    :func:`evolve_matrix_exp` or :func:`integrate_rk4`.
    """
    if gen.time_dependent:
        raise SolveError("eigensolve requires a time-independent generator")
    eigenvalues, eigenvectors = np.linalg.eig(gen.matrix)
    cond = float(np.linalg.cond(eigenvectors))
    if cond > condition_limit:
        raise DefectiveMatrix(
            f"eigenvector condition number {cond:.3e} exceeds {condition_limit:.0e}")
    modal = ModalSolution(
        eigenvalues=eigenvalues,
        eigenvectors=eigenvectors,
        condition_number=cond,
        basis_labels=gen.basis_labels,
        sector=gen.sector,
        excitation_cap=gen.excitation_cap,
    )
    if init is not None:
        modal = modal.fit(init)
    return modal


def _series_from_state(states: np.ndarray, times: np.ndarray,
                       labels: Sequence[str], sector: str,
                       excitation_cap: float | None) -> TimeSeries:
    if excitation_cap is not None:
        occ = np.abs(states) ** 2 if sector == "amplitude" else states.real
        if sector == "number":
            rows = [d for d, lab in enumerate(labels) if lab.startswith("N_")]
            occ = occ[rows]
            check_excitation_cap(occ, excitation_cap,
                                 [labels[d] for d in rows], times)
        else:
            check_excitation_cap(occ, excitation_cap, list(labels), times)
    channels: dict[str, np.ndarray] = {}
    for d, label in enumerate(labels):
        row = states[d]
        channels[label] = row.copy() if sector == "amplitude" else row.real.copy()
    return TimeSeries(times=np.asarray(times, dtype=float), channels=channels)


def evolve_closed_form(modal: ModalSolution, times: np.ndarray) -> TimeSeries:
    """Evaluate a fitted modal solution on a time grid (exact for
    time-independent systems with at most a constant source)."""
    states = modal.reconstruct(np.asarray(times, dtype=float))
    return _series_from_state(states, times, modal.basis_labels, modal.sector,
                              modal.excitation_cap)


# --------------------------------------------------------------------------
# Matrix-exponential stepping (fallback for defective generators)
# --------------------------------------------------------------------------

def evolve_matrix_exp(gen: LinearGenerator, init: np.ndarray, times: np.ndarray,
                      drive: DriveSpec | None = None) -> TimeSeries:
    """Step a constant-coefficient affine system with ``expm``.

    Exact (to roundoff) for any constant generator and constant source,
    including defective and exactly-degenerate cases; the constant source is
    handled by the standard one-column augmentation, which remains valid for
    singular generators.
    """
    if gen.time_dependent:
        raise SolveError("matrix-exponential stepping requires a constant generator")
    times = np.asarray(times, dtype=float)
    h = _grid_step(times)
    dim = gen.dimension
    source = gen.source_at(times[0], drive)
    augmented = np.zeros((dim + 1, dim + 1), dtype=complex)
    augmented[:dim, :dim] = gen.matrix
    augmented[:dim, dim] = source
    propagator = scipy.linalg.expm(augmented * h)
    step_matrix = propagator[:dim, :dim]
    step_source = propagator[:dim, dim]

    states = np.empty((dim, times.size), dtype=complex)
    x = np.asarray(init, dtype=complex).copy()
    states[:, 0] = x
    for k in range(1, times.size):
        x = step_matrix @ x + step_source
        states[:, k] = x
    return _series_from_state(states, times, gen.basis_labels, gen.sector,
                              gen.excitation_cap)


# --------------------------------------------------------------------------
# RK4 route (time-dependent parameters and drives)
# --------------------------------------------------------------------------

def integrate_rk4(gen: LinearGenerator, init: np.ndarray, drive: DriveSpec | None,
                  times: np.ndarray) -> TimeSeries:
    """Classic fixed-step RK4 for ``dx/dt = A(t) x + s(t)``.

    The step must satisfy ``h <= 0.05 / rate_scale`` (raises
    :class:`StepTooLarge` otherwise); time-dependent generators are rebuilt
    at every stage.
    """
    times = np.asarray(times, dtype=float)
    h = _grid_step(times)
    if gen.rate_scale > 0.0 and h > STEP_FRACTION / gen.rate_scale:
        raise StepTooLarge(
            f"step {h:.3g} exceeds {STEP_FRACTION}/rate_scale = "
            f"{STEP_FRACTION / gen.rate_scale:.3g}")

    static = not gen.time_dependent
    a_const = gen.matrix

    def rhs(t: float, x: np.ndarray) -> np.ndarray:
        a = a_const if static else gen.matrix_fn(t)
        return a @ x + gen.source_at(t, drive)

    states = np.empty((gen.dimension, times.size), dtype=complex)
    x = np.asarray(init, dtype=complex).copy()
    states[:, 0] = x
    for k in range(1, times.size):
        t = times[k - 1]
        k1 = rhs(t, x)
        k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2)
        k4 = rhs(t + h, x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x.view(float))):
            raise NonfiniteState(f"state became non-finite at t = {times[k]:.6g}")
        states[:, k] = x
    return _series_from_state(states, times, gen.basis_labels, gen.sector,
                              gen.excitation_cap)


# --------------------------------------------------------------------------
# Steady state and the method dispatcher
# --------------------------------------------------------------------------

def steady_state(gen: LinearGenerator, constant_source: np.ndarray) -> np.ndarray:
    """Fixed point ``A x = -s`` of a strictly dissipative generator.

    Raises :class:`NoUniqueSteadyState` when any eigenvalue has a
    non-negative real part (e.g. an exact dark state).
    """
    if gen.time_dependent:
        raise SolveError("steady state requires a constant generator")
    eigenvalues = np.linalg.eigvals(gen.matrix)
    if np.max(eigenvalues.real) > -1e-12:
        raise NoUniqueSteadyState(
            f"max Re(lambda) = {np.max(eigenvalues.real):.3e} is not strictly negative")
    return np.linalg.solve(gen.matrix, -np.asarray(constant_source, dtype=complex))


def evolve(gen: LinearGenerator, init: np.ndarray, times: np.ndarray,
           drive: DriveSpec | None = None) -> TimeSeries:
    """Evolve by the best applicable method.

    Time-dependent generators or coherent (time-dependent) inputs go to RK4.
    Constant systems use the eigendecomposition (with a constant-source
    offset when the generator is invertible) and fall back to
    matrix-exponential stepping when defective or singular-with-source.
    """
    times = np.asarray(times, dtype=float)
    if gen.time_dependent or (drive is not None and drive.has_coherent_input):
        return integrate_rk4(gen, init, drive, times)

    source = gen.source_at(times[0], drive)
    try:
        modal = eigensolve(gen)
        if np.any(source != 0.0):
            if np.min(np.abs(modal.eigenvalues)) < 1e-12 * max(gen.rate_scale, 1.0):
                return evolve_matrix_exp(gen, init, times, drive)
            modal.offset = np.linalg.solve(gen.matrix, -source)
        return evolve_closed_form(modal.fit(init), times)
    except DefectiveMatrix:
        return evolve_matrix_exp(gen, init, times, drive)

"""Affine linear generators for the amplitude and number sectors.

The amplitude sector evolves the mean mode amplitudes ``<c_i>`` under

    d<c_i>/dt = -i omega_i <c_i> - i sum_j g_ij <c_j>
                - sum_j Gamma_ij <c_j> - sum_c sqrt(gamma_i^c) <b_in^c(t)>

where ``Gamma_ij = sum_c sqrt(gamma_i^c gamma_j^c)/2`` carries the
cross-damping induced by shared (global) continua.  Local continua
contribute only the familiar diagonal ``gamma_i/2``.

The number sector evolves the Hermitian quadratic observables
``N_i = <c_i^dag c_i>``, ``O_ij = <c_i^dag c_j + c_j^dag c_i>`` and
``Y_ij = i<c_i^dag c_j - c_j^dag c_i>``.  Its generator is *derived*, not
transcribed: writing ``P_ij = <c_i^dag c_j>``, the amplitude generator ``A``
induces ``dP/dt = conj(A) P + P A^T`` by the product rule, and the real
matrix acting on the ``(N, O, Y)`` coordinates is read off column by column.
Thermal continua add the source ``gamma_i N_th`` to the ``N_i`` rows and
``2 sqrt(gamma_i gamma_j) N_th`` to the ``O_ij`` rows (never to ``Y_ij``).

Basis ordering (fixed, so exported traces are stable):
``N_1 .. N_N`` then, for each pair ``i < j`` in lexicographic order, ``O_ij``
followed by ``Y_ij``.  Dimension ``N + N(N-1) = N**2``.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass, replace

import numpy as np

from .network import DriveSpec, ValidatedNetwork, GLOBAL

#: Excitation expectations may exceed the weak-field cap by this much before
#: the fermionic reduction is declared invalid.
WEAK_FIELD_TOL = 1e-6


class WeakFieldViolation(RuntimeError):
    """An excitation expectation exceeded the single-excitation cap."""


@dataclass(frozen=True)
class LinearGenerator:
    """Affine ODE system ``dx/dt = A(t) x + s(t)``.

    ``matrix`` is the constant generator; when ``matrix_fn`` is set the
    system is time-dependent and ``matrix_fn(t)`` supersedes it.
    ``source_map(t, drive)`` evaluates the inhomogeneity for a given drive
    (``drive=None`` falls back to the drive baked in at build time).
    ``rate_scale`` is the largest rate/frequency in the system and bounds the
    admissible integrator step.  ``excitation_cap`` marks generators obtained
    from the fermionic weak-field reduction: excitation expectations above
    the cap invalidate the reduction.
    """

    matrix: np.ndarray
    basis_labels: tuple[str, ...]
    sector: str
    source_map: Callable[[float, DriveSpec | None], np.ndarray]
    rate_scale: float
    matrix_fn: Callable[[float], np.ndarray] | None = None
    excitation_cap: float | None = None

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @property
    def time_dependent(self) -> bool:
        return self.matrix_fn is not None

    def matrix_at(self, t: float) -> np.ndarray:
        return self.matrix_fn(t) if self.matrix_fn is not None else self.matrix

    def source_at(self, t: float, drive: DriveSpec | None = None) -> np.ndarray:
        return self.source_map(t, drive)

    def to_debug_dict(self) -> dict:
        """JSON-serializable dump of the generator structure."""
        return {
            "sector": self.sector,
            "dimension": self.dimension,
            "basis_labels": list(self.basis_labels),
            "matrix_re": self.matrix.real.tolist(),
            "matrix_im": self.matrix.imag.tolist(),
            "rate_scale": self.rate_scale,
            "excitation_cap": self.excitation_cap,
            "time_dependent": self.time_dependent,
        }


def amplitude_labels(n: int) -> tuple[str, ...]:
    return tuple(f"c_{i + 1}" for i in range(n))


def number_labels(n: int) -> tuple[str, ...]:
    labels = [f"N_{i + 1}" for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            labels.append(f"O_{i + 1}{j + 1}")
            labels.append(f"Y_{i + 1}{j + 1}")
    return tuple(labels)


def mode_pairs(n: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def _rate_scale(net: ValidatedNetwork) -> float:
    return float(max(
        np.max(np.abs(net.omegas)),
        np.max(net.total_gammas),
        np.max(np.abs(net.couplings)),
        1e-12,
    ))


def _amplitude_matrix(omegas: np.ndarray, gammas: np.ndarray,
                      couplings: np.ndarray, topologies) -> np.ndarray:
    n = omegas.shape[0]
    damping = np.zeros((n, n))
    for c, topo in enumerate(topologies):
        v = np.sqrt(gammas[:, c])
        if topo == GLOBAL:
            damping += 0.5 * np.outer(v, v)
        else:
            damping += 0.5 * np.diag(v * v)
    return -1j * np.diag(omegas) - 1j * couplings - damping


def build_amplitude_generator(net: ValidatedNetwork) -> LinearGenerator:
    """Mean-amplitude generator with cross-damping and input-field source."""
    matrix = _amplitude_matrix(net.omegas, net.gammas, net.couplings, net.topologies)
    coupling_vectors = [net.coupling_vector(c) for c in range(net.continuum_count)]

    def source_map(t: float, drive: DriveSpec | None) -> np.ndarray:
        out = np.zeros(net.mode_count, dtype=complex)
        if drive is None or not drive.has_coherent_input:
            return out
        for c, v in enumerate(coupling_vectors):
            out -= v * drive.mean_input(c, t)
        return out

    return LinearGenerator(
        matrix=matrix,
        basis_labels=amplitude_labels(net.mode_count),
        sector="amplitude",
        source_map=source_map,
        rate_scale=_rate_scale(net),
    )


def build_time_dependent_amplitude_generator(
        net: ValidatedNetwork,
        omegas_fn: Callable[[float], Sequence[float]] | None = None,
        gammas_fn: Callable[[float], np.ndarray] | None = None) -> LinearGenerator:
    """Amplitude generator with time-dependent frequencies and/or rates.

    ``omegas_fn(t)`` returns the ``N`` frequencies, ``gammas_fn(t)`` the
    ``(N, C)`` rate matrix; either may be omitted to keep the static value.
    The step-size guard uses the rates at ``t=0``; callers sweeping rates far
    above their initial values must tighten the step themselves.
    """
    base = build_amplitude_generator(net)

    def matrix_fn(t: float) -> np.ndarray:
        omegas = np.asarray(omegas_fn(t), dtype=float) if omegas_fn else net.omegas
        gammas = np.atleast_2d(np.asarray(gammas_fn(t), dtype=float)) if gammas_fn else net.gammas
        return _amplitude_matrix(omegas, gammas, net.couplings, net.topologies)

    def source_map(t: float, drive: DriveSpec | None) -> np.ndarray:
        out = np.zeros(net.mode_count, dtype=complex)
        if drive is None or not drive.has_coherent_input:
            return out
        gammas = np.atleast_2d(np.asarray(gammas_fn(t), dtype=float)) if gammas_fn else net.gammas
        for c in range(net.continuum_count):
            out -= np.sqrt(gammas[:, c]) * drive.mean_input(c, t)
        return out

    return replace(base, matrix_fn=matrix_fn, source_map=source_map)


# --------------------------------------------------------------------------
# Hermitian observable basis <-> matrix of second moments
# --------------------------------------------------------------------------

def vector_to_moment_matrix(vec: np.ndarray, n: int) -> np.ndarray:
    """Map ``(N, O, Y)`` coordinates to the Hermitian matrix ``P_ij = <c_i^dag c_j>``."""
    p = np.diag(np.asarray(vec[:n], dtype=complex))
    for k, (i, j) in enumerate(mode_pairs(n)):
        o = vec[n + 2 * k]
        y = vec[n + 2 * k + 1]
        p[i, j] = 0.5 * (o - 1j * y)
        p[j, i] = 0.5 * (o + 1j * y)
    return p


def moment_matrix_to_vector(p: np.ndarray) -> np.ndarray:
    """Inverse of :func:`vector_to_moment_matrix` (imaginary parts of the
    diagonal are discarded; they vanish for Hermitian input)."""
    n = p.shape[0]
    out = np.empty(n * n)
    out[:n] = np.diag(p).real
    for k, (i, j) in enumerate(mode_pairs(n)):
        out[n + 2 * k] = 2.0 * p[i, j].real
        out[n + 2 * k + 1] = -2.0 * p[i, j].imag
    return out


def _thermal_pump_matrix(net: ValidatedNetwork, drive: DriveSpec) -> np.ndarray:
    """Second-moment pump ``F_ij = sum_c sqrt(gamma_i^c gamma_j^c) n_th^c``."""
    n = net.mode_count
    pump = np.zeros((n, n))
    for c in range(net.continuum_count):
        occ = drive.thermal_occupancy(c)
        if occ == 0.0:
            continue
        v = net.coupling_vector(c)
        if net.topologies[c] == GLOBAL:
            pump += occ * np.outer(v, v)
        else:
            pump += occ * np.diag(v * v)
    return pump


def build_number_generator(net: ValidatedNetwork, n_th: float | Sequence[float] = 0.0
                           ) -> LinearGenerator:
    """Number-sector generator derived from the amplitude generator.

    The matrix is obtained by pushing each ``(N, O, Y)`` basis element
    through the product rule ``P -> conj(A) P + P A^T`` — no printed
    closed form is transcribed, so the construction is valid for any mode
    count and continuum layout.  The source carries only the thermal pump;
    the contribution of a coherent input enters through the mean-field
    amplitudes and is handled by the simulation pipeline, since it is not a
    function of the drive alone.
    """
    n = net.mode_count
    dim = n * n
    a = build_amplitude_generator(net).matrix
    a_conj = a.conj()
    a_t = a.T

    matrix = np.empty((dim, dim))
    basis = np.eye(dim)
    for k in range(dim):
        p = vector_to_moment_matrix(basis[k], n)
        q = a_conj @ p + p @ a_t
        matrix[:, k] = moment_matrix_to_vector(q)

    default_drive = DriveSpec(n_th=n_th)

    def source_map(t: float, drive: DriveSpec | None) -> np.ndarray:
        active = drive if drive is not None else default_drive
        return moment_matrix_to_vector(_thermal_pump_matrix(net, active))

    return LinearGenerator(
        matrix=matrix,
        basis_labels=number_labels(n),
        sector="number",
        source_map=source_map,
        rate_scale=2.0 * _rate_scale(net),
    )


def build_fermion_weakfield_generator(net: ValidatedNetwork) -> LinearGenerator:
    """Weak-field reduction for fermionic modes.

    In the few-excitation limit the qubit lowering operators obey the bosonic
    amplitude equation entry for entry, so the generator is identical; the
    returned generator carries a single-excitation cap and solvers raise
    :class:`WeakFieldViolation` whenever any ``<N_i(t)>`` exceeds
    ``1 + 1e-6`` during evolution.
    """
    return replace(build_amplitude_generator(net), excitation_cap=1.0)


def check_excitation_cap(values: np.ndarray, cap: float, labels: Sequence[str],
                         times: np.ndarray) -> None:
    """Raise :class:`WeakFieldViolation` if any occupation exceeds ``cap``.

    ``values`` holds per-channel occupation traces, shape ``(D, T)``.
    """
    excess = values.real - (cap + WEAK_FIELD_TOL)
    if np.any(excess > 0.0):
        flat = np.argwhere(excess > 0.0)
        d, k = flat[0]
        raise WeakFieldViolation(
            f"{labels[d]} = {values[d, k].real:.6g} exceeds the weak-field cap "
            f"{cap} at t = {times[k]:.6g}")

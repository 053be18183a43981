"""Independent brute-force validation by continuum discretization.

Instead of the Markov-limit generators, this module represents each
continuum literally as ``K`` monochromatic modes spanning a band of width
``W`` around the mean system frequency, with the flat coupling
``kappa_i = sqrt(gamma_i / 2 pi)`` realized as matrix elements
``i kappa_i sqrt(d omega)``.  The total Hamiltonian is quadratic, so the
single-particle unitary ``U(t) = exp(-i h t)`` propagates everything:

* mean amplitudes      ``<c_i(t)> = sum_j U_ij(t) alpha_j``
* second moments       ``<c_i^dag c_j>(t) = sum_mn U*_im U_jn P_mn(0)``

valid until excitations wrap around the frequency comb at the recurrence
time ``2 pi K / W``.  Every Markov-approximation result in this package is
checked against these exact dynamics.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .generator import mode_pairs
from .network import InitialState, ValidatedNetwork


class OracleError(RuntimeError):
    pass


class EmptyContinuum(OracleError):
    pass


class RecurrenceHorizonExceeded(OracleError):
    pass


class BandwidthTooSmall(UserWarning):
    """The band is too narrow for the flat-coupling limit to be accurate."""


#: Fraction of the recurrence time beyond which propagation refuses to run.
RECURRENCE_GUARD = 0.8


@dataclass(frozen=True)
class DiscretizedSystem:
    """Single-particle Hamiltonian of the network plus discretized continua."""

    network: ValidatedNetwork
    modes_per_continuum: int
    bandwidth: float
    hamiltonian: np.ndarray

    @property
    def dimension(self) -> int:
        return self.hamiltonian.shape[0]

    @property
    def recurrence_time(self) -> float:
        return 2.0 * np.pi * self.modes_per_continuum / self.bandwidth


def discretize_continuum(net: ValidatedNetwork, modes_per_continuum: int,
                         bandwidth: float) -> DiscretizedSystem:
    """Build the block Hamiltonian ``[system | coupling; coupling^dag | band]``.

    Each continuum contributes ``K`` band modes on a midpoint grid over
    ``[mean(omega) - W/2, mean(omega) + W/2]``.  Warns (:class:`BandwidthTooSmall`)
    when ``W`` is below ten times the fastest system scale.
    """
    k = int(modes_per_continuum)
    if k < 1:
        raise EmptyContinuum(f"continuum needs at least one mode, got {k}")
    n = net.mode_count
    center = float(np.mean(net.omegas))
    scale = max(float(np.max(net.total_gammas)),
                2.0 * float(np.max(np.abs(net.omegas - center))), 1e-12)
    if bandwidth < 10.0 * scale:
        warnings.warn(
            f"bandwidth {bandwidth:.3g} below 10x the fastest rate {scale:.3g}; "
            "the flat-band limit will be inaccurate", BandwidthTooSmall)

    c = net.continuum_count
    d_omega = bandwidth / k
    size = n + c * k
    h = np.zeros((size, size), dtype=complex)
    h[:n, :n] = np.diag(net.omegas) + net.couplings
    band = center - 0.5 * bandwidth + (np.arange(k) + 0.5) * d_omega
    for ci in range(c):
        start = n + ci * k
        stop = start + k
        h[start:stop, start:stop] = np.diag(band)
        kappa = np.sqrt(net.gammas[:, ci] * d_omega / (2.0 * np.pi))
        for i in range(n):
            h[start:stop, i] = 1j * kappa[i]
            h[i, start:stop] = -1j * kappa[i]
    return DiscretizedSystem(
        network=net,
        modes_per_continuum=k,
        bandwidth=float(bandwidth),
        hamiltonian=h,
    )


def _initial_moments(init: InitialState, n: int) -> tuple[np.ndarray, dict]:
    """Mean amplitudes and the sparse fluctuation second moments."""
    init.check_indices()
    if init.mode_count != n:
        raise ValueError(f"initial state has {init.mode_count} modes, network has {n}")
    amplitudes = init.amplitudes()
    moments: dict[tuple[int, int], complex] = {}
    for i, occ in enumerate(init.occupations()):
        if occ != 0.0:
            moments[(i, i)] = occ
    for (i, j), (o, y) in init.coherences.items():
        moments[(i, j)] = moments.get((i, j), 0.0) + 0.5 * (o - 1j * y)
        moments[(j, i)] = moments.get((j, i), 0.0) + 0.5 * (o + 1j * y)
    return amplitudes, moments


def oracle_evolve(system: DiscretizedSystem, init: InitialState,
                  times: np.ndarray):
    """Exact expectation traces from one diagonalization.

    Returns a :class:`~codecay.solve.TimeSeries` with the same channel names
    as the main pipeline (``c_i``, ``N_i``, ``O_ij``, ``Y_ij``), so traces
    compare directly.  The continuum starts in vacuum.  Grids reaching
    beyond ``0.8`` of the recurrence time raise
    :class:`RecurrenceHorizonExceeded`.
    """
    from .solve import TimeSeries  # local import to avoid a cycle

    times = np.asarray(times, dtype=float)
    horizon = RECURRENCE_GUARD * system.recurrence_time
    if times[-1] > horizon:
        raise RecurrenceHorizonExceeded(
            f"grid extends to {times[-1]:.3g}, beyond {horizon:.3g} "
            f"(= {RECURRENCE_GUARD} of the recurrence time)")

    net = system.network
    n = net.mode_count
    evals, evecs = np.linalg.eigh(system.hamiltonian)
    amplitudes, moments = _initial_moments(init, n)

    phases = np.exp(-1j * np.outer(evals, times))  # (M, T)
    sys_rows = evecs[:n, :]  # (N, M)

    # Mean field: x(t) = U(t) x0 restricted to system rows.
    x_full = np.zeros(system.dimension, dtype=complex)
    x_full[:n] = amplitudes
    w0 = evecs.conj().T @ x_full
    mean = sys_rows @ (phases * w0[:, None])  # (N, T)

    # Fluctuations: propagate the sparse initial second moments through the
    # relevant unitary columns, u^(m)(t) = U(t) e_m on the system rows.
    columns: dict[int, np.ndarray] = {}
    for (a, b) in moments:
        for m in (a, b):
            if m not in columns:
                columns[m] = sys_rows @ (phases * evecs.conj()[m, :][:, None])
    p_fluct = np.zeros((n, n, times.size), dtype=complex)
    for (a, b), value in moments.items():
        p_fluct += value * columns[a].conj()[:, None, :] * columns[b][None, :, :]

    p_total = mean.conj()[:, None, :] * mean[None, :, :] + p_fluct

    channels: dict[str, np.ndarray] = {}
    for i in range(n):
        channels[f"c_{i + 1}"] = mean[i].copy()
    for i in range(n):
        channels[f"N_{i + 1}"] = p_total[i, i].real.copy()
    for (i, j) in mode_pairs(n):
        channels[f"O_{i + 1}{j + 1}"] = 2.0 * p_total[i, j].real
        channels[f"Y_{i + 1}{j + 1}"] = -2.0 * p_total[i, j].imag
    return TimeSeries(times=times, channels=channels)


def total_excitation(system: DiscretizedSystem, init: InitialState,
                     times: np.ndarray) -> np.ndarray:
    """System + continuum excitation number over time (conserved exactly)."""
    net = system.network
    n = net.mode_count
    evals, evecs = np.linalg.eigh(system.hamiltonian)
    amplitudes, moments = _initial_moments(init, n)
    phases = np.exp(-1j * np.outer(evals, times))

    x_full = np.zeros(system.dimension, dtype=complex)
    x_full[:n] = amplitudes
    w0 = evecs.conj().T @ x_full
    mean_full = evecs @ (phases * w0[:, None])  # (M, T)
    total = np.sum(np.abs(mean_full) ** 2, axis=0)

    for (a, b), value in moments.items():
        ua = evecs @ (phases * evecs.conj()[a, :][:, None])
        if a == b:
            total = total + value.real * np.sum(np.abs(ua) ** 2, axis=0)
        else:
            ub = evecs @ (phases * evecs.conj()[b, :][:, None])
            total = total + np.sum(value * ua.conj() * ub, axis=0).real
    return total


def relative_sup_error(reference, candidate, channels=None) -> float:
    """Worst relative sup-norm difference across shared channels."""
    if channels is None:
        channels = [k for k in reference.channels if k in candidate.channels]
    worst = 0.0
    for name in channels:
        ref = np.asarray(reference.channels[name])
        cand = np.asarray(candidate.channels[name])
        scale = max(float(np.max(np.abs(ref))), 1e-30)
        worst = max(worst, float(np.max(np.abs(ref - cand))) / scale)
    return worst

"""Frequency-domain response, inter-mode correlations and transmission.

For a monochromatic unit input on one continuum the stationary amplitudes
solve, per frequency,

    (-i Delta_i) c_i = -i sum_j g_ij c_j - sum_j Gamma_ij c_j - sqrt(gamma_i)

with ``Delta_i = omega - omega_i``.  When all modes share a single global
continuum and ``g = 0`` the right-hand side is mode-independent up to the
common factor ``sqrt(gamma_i)``, which forces

    Delta_i c_i / sqrt(gamma_i) = Delta_j c_j / sqrt(gamma_j)   for all i, j

— maximal amplitude correlation, and complete suppression of every other
mode when the input sits exactly on one mode's resonance.  The same identity
holds with detunings shifted by ``eta * gamma_i`` when ``g_ij`` has the
evanescent form ``eta * sqrt(gamma_i gamma_j)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import ValidatedNetwork, GLOBAL

#: Relative singular-value threshold below which a grid point is flagged
#: as singular and excluded instead of regularized.
SINGULAR_RTOL = 1e-12


class SpectralError(RuntimeError):
    pass


class NotApplicable(SpectralError):
    """The correlation identity does not hold for this network."""


class WrongContinuumCount(SpectralError):
    pass


@dataclass
class SpectralResponse:
    """Per-frequency complex amplitudes for unit input.

    ``omegas`` is stored relative to ``reference`` (for two-mode networks the
    natural reference is the mean resonance).  ``amplitudes[i]`` is the trace
    of mode ``i`` over the grid; ``singular`` flags grid points where the
    response matrix was numerically singular (amplitudes there are NaN).
    ``transmission``/``reflection`` are filled by :func:`transmission` only.
    """

    omegas: np.ndarray
    reference: float
    amplitudes: np.ndarray
    detunings: np.ndarray
    singular: np.ndarray
    network: ValidatedNetwork
    drive_continuum: int = 0
    transmission: np.ndarray | None = None
    reflection: np.ndarray | None = None

    @property
    def mode_count(self) -> int:
        return self.amplitudes.shape[0]

    def to_csv(self, path) -> None:
        headers = ["omega_rel"]
        columns = [self.omegas]
        if self.transmission is not None:
            headers += ["T", "R"]
            columns += [self.transmission, self.reflection]
        for i in range(self.mode_count):
            headers += [f"re_c_{i + 1}", f"im_c_{i + 1}"]
            columns += [self.amplitudes[i].real, self.amplitudes[i].imag]
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(headers) + "\n")
            for row in zip(*columns):
                fh.write(",".join(f"{v:.15g}" for v in row) + "\n")


def spectral_response(net: ValidatedNetwork, omegas: np.ndarray, *,
                      reference: float | None = None,
                      drive_continuum: int = 0) -> SpectralResponse:
    """Solve the stationary response on a frequency grid.

    ``omegas`` is interpreted relative to ``reference`` (default: the mean
    mode frequency).  Singular grid points are flagged, not fatal.
    """
    omegas = np.asarray(omegas, dtype=float)
    if reference is None:
        reference = float(np.mean(net.omegas))
    n = net.mode_count
    damping = net.damping_matrix()
    drive = net.coupling_vector(drive_continuum)
    rhs = -drive.astype(complex)

    amplitudes = np.empty((n, omegas.size), dtype=complex)
    detunings = np.empty((n, omegas.size))
    singular = np.zeros(omegas.size, dtype=bool)
    base = 1j * net.couplings + damping
    for k, w in enumerate(omegas):
        absolute = reference + w
        delta = absolute - net.omegas
        detunings[:, k] = delta
        m = base - 1j * np.diag(delta)
        svals = np.linalg.svd(m, compute_uv=False)
        if svals[-1] < SINGULAR_RTOL * max(svals[0], 1e-300):
            singular[k] = True
            amplitudes[:, k] = np.nan
            continue
        amplitudes[:, k] = np.linalg.solve(m, rhs)
    return SpectralResponse(
        omegas=omegas,
        reference=reference,
        amplitudes=amplitudes,
        detunings=detunings,
        singular=singular,
        network=net,
        drive_continuum=drive_continuum,
    )


def _evanescent_coupling_scale(net: ValidatedNetwork) -> float:
    """Return ``eta`` such that ``g_ij = eta sqrt(gamma_i gamma_j)``.

    ``eta = 0`` for uncoupled networks; raises :class:`NotApplicable` when
    the couplings have any other shape.
    """
    g = net.couplings
    if not np.any(g):
        return 0.0
    v = np.sqrt(net.total_gammas)
    outer = np.outer(v, v)
    np.fill_diagonal(outer, 0.0)
    mask = outer > 0.0
    if np.any(g[~mask & ~np.eye(net.mode_count, dtype=bool)]):
        raise NotApplicable("couplings between undamped modes break the correlation identity")
    ratios = g[mask] / outer[mask]
    eta = float(ratios[0])
    if not np.allclose(ratios, eta, rtol=1e-12, atol=1e-15):
        raise NotApplicable("couplings are not proportional to sqrt(gamma_i gamma_j)")
    return eta


def correlation_residual(resp: SpectralResponse, i: int, j: int,
                         *, eps: float = 1e-30) -> np.ndarray:
    """Pointwise violation of the amplitude-correlation identity.

    Returns ``|D_i c_i/sqrt(g_i) - D_j c_j/sqrt(g_j)|`` normalized by the
    larger magnitude, with NaN at singular grid points.  The contract for a
    single shared global continuum (``g = 0`` or evanescent ``g``) is a
    residual below 1e-9 at every non-singular point.
    """
    net = resp.network
    if net.continuum_count != 1 or net.topologies[0] != GLOBAL:
        raise NotApplicable("identity requires a single shared global continuum")
    eta = _evanescent_coupling_scale(net)
    gammas = net.total_gammas
    if gammas[i] <= 0.0 or gammas[j] <= 0.0:
        raise NotApplicable("both modes must couple to the continuum")

    lhs = (resp.detunings[i] + eta * gammas[i]) * resp.amplitudes[i] / np.sqrt(gammas[i])
    rhs = (resp.detunings[j] + eta * gammas[j]) * resp.amplitudes[j] / np.sqrt(gammas[j])
    scale = np.maximum(np.maximum(np.abs(lhs), np.abs(rhs)), eps)
    out = np.abs(lhs - rhs) / scale
    out[resp.singular] = np.nan
    return out


def effective_single_mode_response(net: ValidatedNetwork, omegas: np.ndarray, i: int,
                                   *, reference: float | None = None) -> np.ndarray:
    """Closed-form single-mode response via the correlation identity.

    Eliminating the partners through the identity gives
    ``c_i = -sqrt(gamma_i) / (-i Dt_i + sum_j (gamma_j/2) Dt_i/Dt_j)`` with
    shifted detunings ``Dt_i = Delta_i + eta gamma_i``.  Independent of the
    direct linear solve; used to cross-check it.
    """
    if net.continuum_count != 1 or net.topologies[0] != GLOBAL:
        raise NotApplicable("identity requires a single shared global continuum")
    eta = _evanescent_coupling_scale(net)
    omegas = np.asarray(omegas, dtype=float)
    if reference is None:
        reference = float(np.mean(net.omegas))
    gammas = net.total_gammas
    absolute = reference + omegas
    shifted = absolute[None, :] - net.omegas[:, None] + eta * gammas[:, None]
    zeta = 0.5 + 1j * eta
    damping = zeta * np.sum(gammas[:, None] / shifted, axis=0) * shifted[i]
    return -np.sqrt(gammas[i]) / (-1j * shifted[i] + damping)


def transmission(net: ValidatedNetwork, omegas: np.ndarray, *,
                 reference: float | None = None) -> SpectralResponse:
    """Two-sided transmission and reflection spectra.

    Requires exactly two global continua (left = 0, right = 1).  Unit input
    enters from the left; the input-output boundary relation
    ``b_out = b_in + sum_j sqrt(gamma_j) c_j`` gives
    ``T = |sum_j sqrt(gamma_j^R) c_j|^2`` and
    ``R = |1 + sum_j sqrt(gamma_j^L) c_j|^2`` with ``T + R = 1``.
    """
    if net.continuum_count != 2:
        raise WrongContinuumCount(
            f"transmission requires exactly 2 continua, got {net.continuum_count}")
    if any(topo != GLOBAL for topo in net.topologies):
        raise WrongContinuumCount("both transmission continua must be global")
    resp = spectral_response(net, omegas, reference=reference, drive_continuum=0)
    v_left = net.coupling_vector(0)
    v_right = net.coupling_vector(1)
    b_out_right = v_right @ resp.amplitudes
    b_out_left = 1.0 + v_left @ resp.amplitudes
    resp.transmission = np.abs(b_out_right) ** 2
    resp.reflection = np.abs(b_out_left) ** 2
    return resp

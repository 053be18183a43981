"""Single-mode memory kernel from integrating out the partner modes.

With the partners initially in vacuum, eliminating them from the coupled
amplitude equations exactly yields a time-convolution equation for the
remaining mode,

    dc_i/dt = -i omega_i c_i - r c_i - int_0^t K(t - t') c_i(t') dt',

with instantaneous rate ``r = gamma_i / 2`` and an oscillatory part built
from the eigenmodes ``mu_k`` of the partner block:

    K(u) = sum_k a_k exp(mu_k u),    a_k = -(A_ip v_k)(v_k^-1 A_pi).

The partner eigenvalues carry both an oscillation frequency and a damping
rate; keeping the damping is what makes the reduction reproduce the full
network solution exactly (the defining contract of this module).  A partner
that is exactly degenerate with mode ``i`` instead decouples into a dark /
bright pair, and its entire effect is a modified instantaneous rate
``+gamma_j/2`` — the kernel then has no time-nonlocal part at all, and the
single-mode evolution is a pure exponential.

The reduction carries no partner initial conditions, so equivalence with the
full network holds only for vacuum partners; with a populated partner the
kernel equation is missing a source and the two solutions legitimately
differ.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .generator import build_amplitude_generator
from .network import ValidatedNetwork, GLOBAL
from .solve import StepTooLarge, TimeSeries, _grid_step
from .spectral import NotApplicable, _evanescent_coupling_scale

#: Oscillatory terms with amplitudes below this are dropped (e.g. partners
#: with zero decay rate).
AMPLITUDE_FLOOR = 1e-30

STEP_FRACTION = 0.05


@dataclass(frozen=True)
class OscillatoryTerm:
    """One time-nonlocal kernel component ``amplitude * exp(-(damping + i*frequency) u)``.

    ``detuning`` records the partner-eigenmode frequency minus the tagged
    mode's resonance.
    """

    amplitude: complex
    frequency: float
    damping: float
    detuning: float


@dataclass(frozen=True)
class MemoryKernel:
    mode_index: int
    instantaneous_rate: float
    oscillatory_terms: tuple[OscillatoryTerm, ...]
    causal: bool = True

    def oscillatory_value(self, u: np.ndarray) -> np.ndarray:
        """Evaluate the time-nonlocal part on nonnegative offsets."""
        u = np.asarray(u, dtype=float)
        out = np.zeros(u.shape, dtype=complex)
        for term in self.oscillatory_terms:
            out += term.amplitude * np.exp(-(term.damping + 1j * term.frequency) * u)
        return out


def memory_kernel(net: ValidatedNetwork, i: int) -> MemoryKernel:
    """Reduce an uncoupled network to a single-mode kernel for mode ``i``.

    Requires a single shared global continuum and couplings that are either
    zero or of the evanescent form ``eta * sqrt(gamma_i gamma_j)`` (anything
    else raises :class:`NotApplicable`).  Exactly degenerate partners are
    folded into the instantaneous rate; the remaining partner block is
    eliminated exactly through its eigendecomposition.
    """
    if net.continuum_count != 1 or net.topologies[0] != GLOBAL:
        raise NotApplicable("memory kernel requires a single shared global continuum")
    _evanescent_coupling_scale(net)  # raises NotApplicable for general couplings
    n = net.mode_count
    if not 0 <= i < n:
        raise IndexError(f"mode index {i} out of range for N={n}")

    gammas = net.total_gammas
    tol = net.degeneracy_tol
    degenerate = [j for j in range(n) if j != i and abs(net.omegas[j] - net.omegas[i]) < tol]
    partners = [j for j in range(n) if j != i and j not in degenerate]

    instantaneous = 0.5 * gammas[i] + 0.5 * sum(gammas[j] for j in degenerate)

    terms: list[OscillatoryTerm] = []
    if partners:
        a = build_amplitude_generator(net).matrix
        app = a[np.ix_(partners, partners)]
        a_ip = a[i, partners]
        a_pi = a[partners, i]
        mus, vecs = np.linalg.eig(app)
        weights_left = a_ip @ vecs
        weights_right = np.linalg.solve(vecs, a_pi)
        for k, mu in enumerate(mus):
            amp = -(weights_left[k] * weights_right[k])
            if abs(amp) < AMPLITUDE_FLOOR:
                continue
            frequency = -mu.imag
            terms.append(OscillatoryTerm(
                amplitude=complex(amp),
                frequency=float(frequency),
                damping=float(-mu.real),
                detuning=float(frequency - net.omegas[i]),
            ))

    return MemoryKernel(
        mode_index=i,
        instantaneous_rate=float(instantaneous),
        oscillatory_terms=tuple(terms),
    )


def _kernel_scale(kernel: MemoryKernel, omega_i: float) -> float:
    scale = max(abs(omega_i), kernel.instantaneous_rate)
    for term in kernel.oscillatory_terms:
        scale = max(scale, float(np.hypot(term.frequency, term.damping)))
    return scale


def _evolve_sampled(omega_i: float, instantaneous: float, samples: np.ndarray,
                    c0: complex, times: np.ndarray) -> np.ndarray:
    """Heun (RK2 predictor-corrector) stepping with trapezoidal history
    convolution over kernel values sampled on the grid offsets."""
    h = _grid_step(times)
    steps = times.size
    local = -1j * omega_i - instantaneous
    c = np.empty(steps, dtype=complex)
    c[0] = c0
    for n in range(steps - 1):
        if n == 0:
            conv_n = 0.0
        else:
            full = np.dot(samples[n::-1], c[:n + 1])
            conv_n = h * (full - 0.5 * samples[n] * c[0] - 0.5 * samples[0] * c[n])
        f_n = local * c[n] - conv_n
        predicted = c[n] + h * f_n
        full_p = np.dot(samples[n + 1:0:-1], c[:n + 1]) + samples[0] * predicted
        conv_p = h * (full_p - 0.5 * samples[n + 1] * c[0] - 0.5 * samples[0] * predicted)
        f_p = local * predicted - conv_p
        c[n + 1] = c[n] + 0.5 * h * (f_n + f_p)
    return c


def evolve_with_kernel(kernel: MemoryKernel, omega_i: float, init_amplitude: complex,
                       times: np.ndarray) -> TimeSeries:
    """Integrate the single-mode convolution equation on a uniform grid.

    The step must resolve the fastest kernel component:
    ``h <= 0.05 / max(|omega|, rates)``, else :class:`StepTooLarge`.
    Only causal kernel arguments ``0 <= u <= t`` are ever evaluated.
    """
    times = np.asarray(times, dtype=float)
    h = _grid_step(times)
    scale = _kernel_scale(kernel, omega_i)
    if scale > 0.0 and h > STEP_FRACTION / scale:
        raise StepTooLarge(
            f"step {h:.3g} exceeds {STEP_FRACTION}/scale = {STEP_FRACTION / scale:.3g}")
    samples = kernel.oscillatory_value(times - times[0])
    trace = _evolve_sampled(omega_i, kernel.instantaneous_rate, samples,
                            complex(init_amplitude), times)
    label = f"c_{kernel.mode_index + 1}"
    return TimeSeries(times=times, channels={label: trace})

"""Derived observables and detectors on computed time series."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import InitialState, ValidatedNetwork, GLOBAL
from .solve import TimeSeries

#: Centered-difference slope above which a population rise counts as genuine
#: backflow rather than numerical noise.
BACKFLOW_THRESHOLD = 1e-8


class ObservableError(RuntimeError):
    pass


class MissingChannel(ObservableError):
    pass


class NotDegenerate(ObservableError):
    pass


def _require_channel(series: TimeSeries, name: str) -> np.ndarray:
    try:
        return series.channels[name]
    except KeyError:
        raise MissingChannel(f"series has no channel {name!r}") from None


def electric_field(series: TimeSeries, i: int) -> np.ndarray:
    """Field amplitude trace ``E_i(t) = 2 Re <c_i(t)>``.

    The physical field is only proportional to ``c + c^dag``; the constant
    is fixed to one so a real coherent amplitude ``alpha`` starts at
    ``2 alpha``.  Identically zero for Fock initial data.
    """
    return 2.0 * np.real(_require_channel(series, f"c_{i + 1}"))


def total_number(series: TimeSeries) -> tuple[np.ndarray, float]:
    """Summed population trace and its maximum positive finite-difference slope.

    For drive-free, zero-temperature evolution the slope must not exceed
    1e-9: the total decay is monotonic even when subsystems revive.
    """
    numbers = series.number_channels()
    if not numbers:
        raise MissingChannel("series has no number channels")
    total = np.sum(list(numbers.values()), axis=0)
    h = series.step
    slopes = np.diff(total) / h
    return total, float(np.max(slopes)) if slopes.size else 0.0


def detect_backflow(series: TimeSeries, i: int,
                    threshold: float = BACKFLOW_THRESHOLD) -> list[tuple[float, float]]:
    """Maximal intervals where ``<N_i>`` grows (centered difference > threshold)."""
    values = _require_channel(series, f"N_{i + 1}")
    times = series.times
    if values.size < 3:
        return []
    h = series.step
    slopes = (values[2:] - values[:-2]) / (2.0 * h)
    rising = slopes > threshold
    intervals: list[tuple[float, float]] = []
    start = None
    for k, flag in enumerate(rising):
        t = times[k + 1]
        if flag and start is None:
            start = t
        elif not flag and start is not None:
            intervals.append((start, times[k]))
            start = None
    if start is not None:
        intervals.append((start, times[-1]))
    return intervals


def dark_state_population(net: ValidatedNetwork, init: InitialState) -> float:
    """Conserved population of the decoupled (antisymmetric) mode.

    Only defined for two exactly degenerate modes sharing one global
    continuum: the combination
    ``(gamma_2 N_1 + gamma_1 N_2 - sqrt(gamma_1 gamma_2) O_12) / (gamma_1 + gamma_2)``
    is a constant of motion and equals the long-time limit of the total
    population.
    """
    if net.mode_count != 2:
        raise NotDegenerate("dark-state population is defined for two modes")
    if (0, 1) not in net.degenerate_pairs:
        raise NotDegenerate(
            f"modes are not degenerate within {net.degeneracy_tol:g}")
    if net.continuum_count != 1 or net.topologies[0] != GLOBAL:
        raise NotDegenerate("dark state requires a single shared global continuum")
    g1, g2 = net.total_gammas
    if g1 + g2 <= 0.0:
        raise NotDegenerate("modes do not decay")

    alphas = init.amplitudes()
    occupations = init.occupations()
    n1 = abs(alphas[0]) ** 2 + occupations[0]
    n2 = abs(alphas[1]) ** 2 + occupations[1]
    o12 = 2.0 * np.real(np.conj(alphas[0]) * alphas[1])
    if (0, 1) in init.coherences:
        o12 += init.coherences[(0, 1)][0]
    return float((g2 * n1 + g1 * n2 - np.sqrt(g1 * g2) * o12) / (g1 + g2))


@dataclass
class ObservableReport:
    """Post-processing summary attached to a simulation run."""

    n_total: np.ndarray
    max_total_slope: float
    e_fields: dict[str, np.ndarray]
    backflow_intervals: dict[str, list[tuple[float, float]]]
    subradiance_flags: dict[str, bool] = field(default_factory=dict)
    dark_plateau: float | None = None

    def to_dict(self) -> dict:
        return {
            "n_total_final": float(self.n_total[-1]),
            "max_total_slope": self.max_total_slope,
            "backflow_intervals": {
                k: [[float(a), float(b)] for a, b in v]
                for k, v in self.backflow_intervals.items()
            },
            "subradiance_flags": self.subradiance_flags,
            "dark_plateau": self.dark_plateau,
        }


def build_report(series: TimeSeries, net: ValidatedNetwork, init: InitialState,
                 *, reference_time: float = 1.0) -> ObservableReport:
    """Evaluate all standard detectors on a finished run.

    ``subradiance_flags[i]`` is true when mode ``i`` holds more population at
    ``reference_time`` than it would decaying independently at its own total
    rate.
    """
    n = net.mode_count
    n_total, max_slope = total_number(series)
    fields = {}
    for i in range(n):
        if f"c_{i + 1}" in series.channels:
            fields[f"E_{i + 1}"] = electric_field(series, i)
    backflow = {f"N_{i + 1}": detect_backflow(series, i) for i in range(n)}

    flags: dict[str, bool] = {}
    k_ref = int(np.argmin(np.abs(series.times - reference_time)))
    gammas = net.total_gammas
    n0 = init.occupations() + np.abs(init.amplitudes()) ** 2
    for i in range(n):
        name = f"N_{i + 1}"
        if name not in series.channels or n0[i] == 0.0:
            continue
        independent = n0[i] * np.exp(-gammas[i] * series.times[k_ref])
        flags[name] = bool(series.channels[name][k_ref] > independent + 1e-12)

    plateau = None
    try:
        plateau = dark_state_population(net, init)
    except NotDegenerate:
        pass
    return ObservableReport(
        n_total=n_total,
        max_total_slope=max_slope,
        e_fields=fields,
        backflow_intervals=backflow,
        subradiance_flags=flags,
        dark_plateau=plateau,
    )

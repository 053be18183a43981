"""Model definition for multi-mode, multi-continuum decay networks.

A network is a set of discrete harmonic modes (cavity modes, or qubits in the
weak-field limit) with resonance frequencies ``omega_i``, decaying into one or
more one-dimensional Markovian continua at rates ``gamma_i^(c)``, optionally
with direct real couplings ``g_ij``.  A continuum is "global" when several
modes radiate into it (which induces cross-damping between them) and "local"
when it is private to a single mode.

All rates and frequencies are dimensionless multiples of a reference rate
``gamma_0``; times are in units of ``1/gamma_0``.
"""

from __future__ import annotations

from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

#: Two mode frequencies closer than this (in gamma_0 units) are treated as
#: exactly degenerate: the antisymmetric combination decouples and is tracked
#: as a dark state rather than as a near-degenerate pair.
DEGENERACY_TOL = 1e-9

GLOBAL = "global"
LOCAL = "local"


class NetworkError(ValueError):
    """Base class for model-validation failures."""


class EmptyNetwork(NetworkError):
    pass


class NegativeRate(NetworkError):
    pass


class AsymmetricCoupling(NetworkError):
    pass


class NonzeroSelfCoupling(NetworkError):
    pass


class NonFiniteValue(NetworkError):
    pass


class InvalidTopology(NetworkError):
    pass


def _as_float_array(values, shape_name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ModeNetwork:
    """Raw (unvalidated) network definition.

    Parameters
    ----------
    omegas:
        Mode resonance frequencies, shape ``(N,)``.
    gammas:
        Decay rates into each continuum, shape ``(N, C)``; ``gammas[i, c]``
        is the rate of mode ``i`` into continuum ``c``.
    couplings:
        Real symmetric direct couplings ``g_ij`` with zero diagonal, shape
        ``(N, N)``.  Defaults to no coupling.
    topologies:
        One of ``"global"``/``"local"`` per continuum.  Defaults to all
        global.
    """

    omegas: np.ndarray
    gammas: np.ndarray
    couplings: np.ndarray | None = None
    topologies: tuple[str, ...] = ()

    def __post_init__(self):
        omegas = _as_float_array(self.omegas, "omegas")
        gammas = np.atleast_2d(_as_float_array(self.gammas, "gammas"))
        if gammas.shape[0] != omegas.shape[0] and gammas.shape[1] == omegas.shape[0]:
            # accept (C, N) input from per-continuum row lists
            gammas = gammas.T
        gammas = gammas.copy()
        gammas.setflags(write=False)
        n = omegas.shape[0]
        if self.couplings is None:
            couplings = np.zeros((n, n))
        else:
            couplings = np.array(self.couplings, dtype=float)
        couplings.setflags(write=False)
        topologies = tuple(self.topologies) or (GLOBAL,) * gammas.shape[1]
        object.__setattr__(self, "omegas", omegas)
        object.__setattr__(self, "gammas", gammas)
        object.__setattr__(self, "couplings", couplings)
        object.__setattr__(self, "topologies", topologies)

    @property
    def mode_count(self) -> int:
        return self.omegas.shape[0]

    @property
    def continuum_count(self) -> int:
        return self.gammas.shape[1]


def two_mode(delta: float, gamma_1: float, gamma_2: float, *, g: float = 0.0,
             topology: str = GLOBAL) -> ModeNetwork:
    """Two modes split symmetrically by ``delta``, sharing one continuum."""
    couplings = np.array([[0.0, g], [g, 0.0]])
    if topology == LOCAL:
        gammas = np.array([[gamma_1, 0.0], [0.0, gamma_2]])
        return ModeNetwork(
            omegas=np.array([delta / 2.0, -delta / 2.0]),
            gammas=gammas,
            couplings=couplings,
            topologies=(LOCAL, LOCAL),
        )
    return ModeNetwork(
        omegas=np.array([delta / 2.0, -delta / 2.0]),
        gammas=np.array([[gamma_1], [gamma_2]]),
        couplings=couplings,
        topologies=(GLOBAL,),
    )


def two_sided(omegas: Sequence[float], gammas_left: Sequence[float],
              gammas_right: Sequence[float]) -> ModeNetwork:
    """Network with two shared continua (left/right transmission ports)."""
    gl = np.asarray(gammas_left, dtype=float)
    gr = np.asarray(gammas_right, dtype=float)
    return ModeNetwork(
        omegas=np.asarray(omegas, dtype=float),
        gammas=np.column_stack([gl, gr]),
        topologies=(GLOBAL, GLOBAL),
    )


@dataclass(frozen=True, eq=False)
class ValidatedNetwork:
    """A :class:`ModeNetwork` whose invariants have been checked.

    Carries the degeneracy flags computed at validation time; every solver
    in this package requires a validated network.
    """

    omegas: np.ndarray
    gammas: np.ndarray
    couplings: np.ndarray
    topologies: tuple[str, ...]
    degenerate_pairs: tuple[tuple[int, int], ...]
    degeneracy_tol: float

    @property
    def mode_count(self) -> int:
        return self.omegas.shape[0]

    @property
    def continuum_count(self) -> int:
        return self.gammas.shape[1]

    @property
    def total_gammas(self) -> np.ndarray:
        """Per-mode decay rate summed over all continua."""
        return self.gammas.sum(axis=1)

    def coupling_vector(self, continuum: int) -> np.ndarray:
        """``sqrt(gamma_i^(c))`` for one continuum."""
        return np.sqrt(self.gammas[:, continuum])

    def damping_matrix(self, continuum: int | None = None) -> np.ndarray:
        """Cross-damping matrix ``Gamma_ij = sum_c sqrt(gamma_i^c gamma_j^c)/2``.

        Local continua contribute only to the diagonal.  Restrict to a single
        continuum by passing its index.
        """
        n = self.mode_count
        out = np.zeros((n, n))
        continua = range(self.continuum_count) if continuum is None else [continuum]
        for c in continua:
            v = self.coupling_vector(c)
            if self.topologies[c] == GLOBAL:
                out += 0.5 * np.outer(v, v)
            else:
                out += 0.5 * np.diag(v * v)
        return out

    def as_network(self) -> ModeNetwork:
        return ModeNetwork(self.omegas, self.gammas, self.couplings, self.topologies)


def validate_network(net: ModeNetwork | ValidatedNetwork, *,
                     degeneracy_tol: float = DEGENERACY_TOL) -> ValidatedNetwork:
    """Check every model invariant and return a validated network.

    Raises
    ------
    EmptyNetwork, NegativeRate, AsymmetricCoupling, NonzeroSelfCoupling,
    NonFiniteValue, InvalidTopology
        Each error message names the offending index.
    """
    if isinstance(net, ValidatedNetwork):
        net = net.as_network()
    n = net.mode_count
    if n < 1:
        raise EmptyNetwork("network has no modes")
    if net.gammas.shape[0] != n:
        raise NetworkError(
            f"gammas has {net.gammas.shape[0]} rows for {n} modes")
    if net.couplings.shape != (n, n):
        raise NetworkError(f"couplings must be {n}x{n}, got {net.couplings.shape}")
    if len(net.topologies) != net.continuum_count:
        raise InvalidTopology(
            f"{len(net.topologies)} topology flags for {net.continuum_count} continua")

    for name, arr in (("omegas", net.omegas), ("gammas", net.gammas),
                      ("couplings", net.couplings)):
        bad = np.argwhere(~np.isfinite(arr))
        if bad.size:
            raise NonFiniteValue(f"{name} entry {tuple(bad[0])} is not finite")

    bad = np.argwhere(net.gammas < 0.0)
    if bad.size:
        i, c = bad[0]
        raise NegativeRate(f"gamma[{i},{c}] = {net.gammas[i, c]} < 0")

    asym = np.argwhere(net.couplings != net.couplings.T)
    if asym.size:
        i, j = asym[0]
        raise AsymmetricCoupling(f"g[{i},{j}] != g[{j},{i}]")
    diag = np.argwhere(np.diag(net.couplings) != 0.0)
    if diag.size:
        i = diag[0][0]
        raise NonzeroSelfCoupling(f"g[{i},{i}] must be zero")

    for c, topo in enumerate(net.topologies):
        if topo not in (GLOBAL, LOCAL):
            raise InvalidTopology(f"continuum {c}: unknown topology {topo!r}")
        if topo == LOCAL:
            coupled = np.nonzero(net.gammas[:, c] > 0.0)[0]
            if coupled.size != 1:
                raise InvalidTopology(
                    f"local continuum {c} couples to {coupled.size} modes "
                    "(must be exactly one)")

    pairs = []
    for i in range(n):
        for j in range(i + 1, n):
            if abs(net.omegas[i] - net.omegas[j]) < degeneracy_tol:
                pairs.append((i, j))

    return ValidatedNetwork(
        omegas=net.omegas,
        gammas=net.gammas,
        couplings=net.couplings,
        topologies=net.topologies,
        degenerate_pairs=tuple(pairs),
        degeneracy_tol=degeneracy_tol,
    )


def localize(net: ModeNetwork | ValidatedNetwork) -> ModeNetwork:
    """Independent-decay baseline: give each mode its own private continuum.

    Per-mode total rates are preserved, so the diagonal damping is unchanged
    while every cross-damping term vanishes.  Idempotent.
    """
    validated = net if isinstance(net, ValidatedNetwork) else validate_network(net)
    totals = validated.total_gammas
    coupled = [i for i in range(validated.mode_count) if totals[i] > 0.0]
    n = validated.mode_count
    gammas = np.zeros((n, max(len(coupled), 1)))
    for c, i in enumerate(coupled):
        gammas[i, c] = totals[i]
    return ModeNetwork(
        omegas=validated.omegas,
        gammas=gammas,
        couplings=validated.couplings,
        topologies=(LOCAL,) * gammas.shape[1],
    )


# --------------------------------------------------------------------------
# Initial conditions and drives
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Coherent:
    """Coherent state with complex amplitude ``alpha``."""
    alpha: complex


@dataclass(frozen=True)
class Fock:
    """Number state with ``n`` excitations."""
    n: int

    def __post_init__(self):
        if self.n < 0 or int(self.n) != self.n:
            raise ValueError(f"Fock occupation must be a nonnegative integer, got {self.n}")


ModeInit = Coherent | Fock


@dataclass(frozen=True)
class InitialState:
    """Per-mode initial data plus optional extra pair coherences.

    ``coherences`` maps an index pair ``(i, j)`` with ``i < j`` to initial
    values ``(O_ij, Y_ij)`` of the symmetric/antisymmetric pair coherences
    *beyond* those implied by coherent amplitudes.  In their absence all
    extra coherences are zero.
    """

    modes: tuple[ModeInit, ...]
    coherences: Mapping[tuple[int, int], tuple[float, float]] = field(default_factory=dict)

    @classmethod
    def all_fock(cls, occupations: Sequence[int]) -> "InitialState":
        return cls(tuple(Fock(n) for n in occupations))

    @classmethod
    def all_coherent(cls, alphas: Sequence[complex]) -> "InitialState":
        return cls(tuple(Coherent(a) for a in alphas))

    @property
    def mode_count(self) -> int:
        return len(self.modes)

    def amplitudes(self) -> np.ndarray:
        """Mean-field initial amplitudes (zero for Fock modes)."""
        return np.array(
            [m.alpha if isinstance(m, Coherent) else 0.0 for m in self.modes],
            dtype=complex)

    def occupations(self) -> np.ndarray:
        """Fluctuation occupations (Fock numbers; zero for coherent modes)."""
        return np.array(
            [float(m.n) if isinstance(m, Fock) else 0.0 for m in self.modes])

    def check_indices(self) -> None:
        n = self.mode_count
        for (i, j) in self.coherences:
            if not (0 <= i < j < n):
                raise ValueError(f"coherence index pair ({i},{j}) out of range for N={n}")


@dataclass(frozen=True)
class DriveSpec:
    """Coherent and thermal input for each continuum.

    ``b_in_mean`` is the expectation value of the input field: a single
    callable ``t -> complex`` applied to every continuum, a sequence with one
    entry (or ``None``) per continuum, or ``None`` for vacuum input.
    ``n_th`` is the mean thermal occupancy seen by each continuum; a scalar
    broadcasts.
    """

    b_in_mean: Callable[[float], complex] | Sequence | None = None
    n_th: float | Sequence[float] = 0.0

    def __post_init__(self):
        n_th = self.n_th
        values = np.atleast_1d(np.asarray(n_th, dtype=float))
        if np.any(values < 0.0):
            raise ValueError(f"thermal occupancy must be nonnegative, got {n_th}")

    def thermal_occupancy(self, continuum: int) -> float:
        values = np.atleast_1d(np.asarray(self.n_th, dtype=float))
        if values.size == 1:
            return float(values[0])
        return float(values[continuum])

    def mean_input(self, continuum: int, t: float) -> complex:
        if self.b_in_mean is None:
            return 0.0
        if callable(self.b_in_mean):
            return complex(self.b_in_mean(t))
        fn = self.b_in_mean[continuum]
        return complex(fn(t)) if fn is not None else 0.0

    @property
    def has_coherent_input(self) -> bool:
        if self.b_in_mean is None:
            return False
        if callable(self.b_in_mean):
            return True
        return any(fn is not None for fn in self.b_in_mean)


ZERO_DRIVE = DriveSpec()

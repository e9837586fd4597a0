"""Synthetic load time-series generator with weekly mode structure.

The week is partitioned into operating modes (time-of-day windows on
weekday/weekend day groups). Each mode carries its own per-load level
pattern, so the generated (p, q) series genuinely occupies distinct
regions of input space. Transitions between modes are sharp steps;
within a mode, loads vary smoothly (low-order Fourier components) plus
seeded multiplicative noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .netmodel import Network
from .solver import SolverSettings, solve_newton_raphson

WEEKDAYS = (0, 1, 2, 3, 4)
WEEKEND = (5, 6)
MINUTES_PER_DAY = 1440
MINUTES_PER_WEEK = 7 * MINUTES_PER_DAY

# 2024-01-01 is a Monday; keeps day-of-week clustering aligned with day 0
DEFAULT_START = np.datetime64("2024-01-01T00:00:00")


class LoadSpecError(ValueError):
    """Raised for invalid load profile specifications."""


class GenerationError(RuntimeError):
    """Raised when generated loads are infeasible on the target network."""


@dataclass(frozen=True)
class ModeSpec:
    name: str
    days: tuple[int, ...]          # weekday indices, Monday = 0
    start_minute: int              # minute of day, inclusive
    end_minute: int                # minute of day, exclusive
    level: float                   # mean per-load real power, pu
    variability: float = 0.05      # relative amplitude of intra-mode variation


@dataclass
class LoadProfileSpec:
    n_loads: int
    resolution_minutes: int = 5
    duration_days: int = 28
    modes: list[ModeSpec] = field(default_factory=lambda: default_modes())
    noise_scale: float = 0.02
    seed: int = 12345
    min_power_factor: float = 0.90
    start: np.datetime64 = DEFAULT_START


@dataclass
class LoadSeries:
    timestamps: np.ndarray  # datetime64[s], strictly increasing, uniform
    P: np.ndarray           # [T, n_loads] real power, pu, consumption positive
    Q: np.ndarray           # [T, n_loads] reactive power, pu

    @property
    def n_steps(self) -> int:
        return len(self.timestamps)


def default_modes(base_level: float = 0.01) -> list[ModeSpec]:
    """Seven weekly modes: four weekday and three weekend regimes."""
    b = base_level
    return [
        ModeSpec("wd_night", WEEKDAYS, 0, 360, 0.40 * b),
        ModeSpec("wd_morning", WEEKDAYS, 360, 540, 0.95 * b),
        ModeSpec("wd_day", WEEKDAYS, 540, 1020, 0.70 * b),
        ModeSpec("wd_evening", WEEKDAYS, 1020, 1440, 1.30 * b),
        ModeSpec("we_night", WEEKEND, 0, 480, 0.50 * b),
        ModeSpec("we_day", WEEKEND, 480, 1080, 0.85 * b),
        ModeSpec("we_evening", WEEKEND, 1080, 1440, 1.10 * b),
    ]


def validate_spec(spec: LoadProfileSpec) -> None:
    if spec.duration_days < 1:
        raise LoadSpecError("duration_days must be >= 1")
    if spec.n_loads < 1:
        raise LoadSpecError("n_loads must be >= 1")
    if MINUTES_PER_DAY % spec.resolution_minutes != 0:
        raise LoadSpecError(f"resolution {spec.resolution_minutes} min does not divide 1440")
    if not (0.0 < spec.min_power_factor <= 1.0):
        raise LoadSpecError("min_power_factor must be in (0, 1]")
    coverage = np.full(MINUTES_PER_WEEK, -1, dtype=int)
    for m, mode in enumerate(spec.modes):
        if not (0 <= mode.start_minute < mode.end_minute <= MINUTES_PER_DAY):
            raise LoadSpecError(f"mode {mode.name!r} has invalid window "
                                f"[{mode.start_minute}, {mode.end_minute})")
        for day in mode.days:
            lo = day * MINUTES_PER_DAY + mode.start_minute
            hi = day * MINUTES_PER_DAY + mode.end_minute
            clash = coverage[lo:hi] >= 0
            if clash.any():
                other = spec.modes[coverage[lo:hi][clash][0]].name
                raise LoadSpecError(f"modes {mode.name!r} and {other!r} overlap")
            coverage[lo:hi] = m
    if (coverage < 0).any():
        minute = int(np.argmin(coverage >= 0))
        raise LoadSpecError(f"minute-of-week {minute} is covered by no mode")


def mode_table(spec: LoadProfileSpec) -> np.ndarray:
    """Mode index for every minute of the week."""
    table = np.full(MINUTES_PER_WEEK, -1, dtype=int)
    for m, mode in enumerate(spec.modes):
        for day in mode.days:
            lo = day * MINUTES_PER_DAY + mode.start_minute
            hi = day * MINUTES_PER_DAY + mode.end_minute
            table[lo:hi] = m
    return table


def minute_of_week(timestamps: np.ndarray) -> np.ndarray:
    # datetime64 epoch (1970-01-01) is a Thursday; shift so Monday = 0
    minutes = timestamps.astype("datetime64[m]").astype(np.int64)
    return (minutes + 3 * MINUTES_PER_DAY) % MINUTES_PER_WEEK


def mode_labels(spec: LoadProfileSpec, timestamps: np.ndarray) -> np.ndarray:
    """Ground-truth generator mode index per timestamp."""
    return mode_table(spec)[minute_of_week(timestamps)]


def generate(spec: LoadProfileSpec, network: Network | None = None,
             check_feasibility: bool = False) -> LoadSeries:
    """Generate a deterministic (seeded) load series for the spec.

    With check_feasibility, every timestamp is solved with the NR solver
    on `network` and the first non-convergent timestamp raises.
    """
    validate_spec(spec)
    if network is not None and spec.n_loads != network.n_loads:
        raise LoadSpecError(f"spec has {spec.n_loads} loads but network has "
                            f"{network.n_loads} load-attached buses")

    n_modes = len(spec.modes)
    rng = np.random.default_rng(spec.seed)
    # Structural draws first: per-mode load patterns, Fourier shapes, power factors
    weights = 0.6 + 0.8 * rng.random((n_modes, spec.n_loads))
    fourier_phase = rng.uniform(0.0, 2.0 * np.pi, size=(n_modes, 2))
    pf = rng.uniform(spec.min_power_factor, 0.99, size=spec.n_loads)
    tan_phi = np.tan(np.arccos(pf))

    steps_per_day = MINUTES_PER_DAY // spec.resolution_minutes
    n_steps = spec.duration_days * steps_per_day
    timestamps = (spec.start.astype("datetime64[s]")
                  + np.arange(n_steps) * np.timedelta64(spec.resolution_minutes * 60, "s"))

    week_min = minute_of_week(timestamps)
    labels = mode_table(spec)[week_min]
    minute_of_day = week_min % MINUTES_PER_DAY

    levels = np.array([m.level for m in spec.modes])
    variabilities = np.array([m.variability for m in spec.modes])
    # Smooth intra-mode variation: two Fourier harmonics of the day cycle
    angle = 2.0 * np.pi * minute_of_day / MINUTES_PER_DAY
    shape = (np.sin(angle + fourier_phase[labels, 0])
             + 0.5 * np.sin(2.0 * angle + fourier_phase[labels, 1])) / 1.5
    factor = levels[labels] * (1.0 + variabilities[labels] * shape)

    noise = rng.standard_normal((n_steps, spec.n_loads))
    P = factor[:, None] * weights[labels] * (1.0 + spec.noise_scale * noise)
    np.clip(P, 0.0, None, out=P)
    Q = P * tan_phi[None, :]

    series = LoadSeries(timestamps=timestamps, P=P, Q=Q)
    if check_feasibility:
        if network is None:
            raise LoadSpecError("check_feasibility requires a network")
        settings = SolverSettings()
        guess = None
        for t in range(n_steps):
            sol = solve_newton_raphson(network, P[t], Q[t], guess, settings)
            if not sol.converged:
                raise GenerationError(f"load at timestamp {timestamps[t]} "
                                      f"(row {t}) does not converge")
            guess = sol
    return series


def scaled_spec(spec: LoadProfileSpec, factor: float) -> LoadProfileSpec:
    """Copy of spec with all mode levels scaled by factor."""
    modes = [replace(m, level=m.level * factor) for m in spec.modes]
    return replace(spec, modes=modes)

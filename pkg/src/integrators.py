"""Time steppers for linear (possibly affine) ODEs y' = G(t) y."""

import math
from typing import Callable, List, Literal, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.linalg import expm

from .exceptions import IntegrationError

Generator = Callable[[float], np.ndarray]

_GAUSS_OFFSET = math.sqrt(3.0) / 6.0


def rk4_step(f: Callable[[float, np.ndarray], np.ndarray], t: float, y: np.ndarray, dt: float) -> np.ndarray:
    """Classic fourth-order Runge-Kutta step."""
    k1 = f(t, y)
    k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0


def midpoint_exponent(G: Generator, t: float, dt: float) -> np.ndarray:
    """Second-order exponential midpoint: dt * G(t + dt/2)."""
    return dt * G(t + 0.5 * dt)


def magnus4_exponent(G: Generator, t: float, dt: float) -> np.ndarray:
    """Fourth-order Magnus exponent from two Gauss-Legendre nodes."""
    A1 = G(t + (0.5 - _GAUSS_OFFSET) * dt)
    A2 = G(t + (0.5 + _GAUSS_OFFSET) * dt)
    return 0.5 * dt * (A1 + A2) + (math.sqrt(3.0) / 12.0) * dt * dt * (A2 @ A1 - A1 @ A2)


class ExponentialIntegrator:
    """Exponential stepper with step-doubling error control.

    Each step exponentiates a Magnus (or midpoint) exponent exactly, so
    properties preserved by the generator's structure (trace, probability)
    hold to round-off whatever the step size.
    """

    def __init__(
        self,
        generator: Generator,
        scheme: Literal["magnus4", "midpoint"] = "magnus4",
        tol: float = 1e-9,
        dt_max: float = math.inf,
        dt_min: float = 1e-6,
    ):
        self.generator = generator
        self.scheme = scheme
        self.tol = tol
        self.dt_max = dt_max
        self.dt_min = dt_min
        self._order = 4 if scheme == "magnus4" else 2
        self._exponent = magnus4_exponent if scheme == "magnus4" else midpoint_exponent
        self.accepted = 0
        self.rejected = 0

    def propagator(self, t: float, dt: float) -> np.ndarray:
        return expm(self._exponent(self.generator, t, dt))

    def integrate(
        self,
        y0: np.ndarray,
        t0: float,
        t1: float,
        dt: float,
        sample_times: Optional[Sequence[float]] = None,
    ) -> Tuple[np.ndarray, List[np.ndarray]]:
        """Advance y0 from t0 to t1; returns the final state and states at sample_times."""
        y = np.array(y0, dtype=complex)
        t = t0
        targets = sorted(float(s) for s in (sample_times or []) if t0 <= s <= t1)
        samples: List[np.ndarray] = []
        while targets and targets[0] <= t0:
            samples.append(y.copy())
            targets.pop(0)

        dt = min(dt, self.dt_max, t1 - t0) if t1 > t0 else dt
        while t1 - t > 1e-12 * max(1.0, abs(t1)):
            stop = targets[0] if targets else t1
            h = min(dt, stop - t)
            full = self.propagator(t, h) @ y
            half = self.propagator(t + 0.5 * h, 0.5 * h) @ (self.propagator(t, 0.5 * h) @ y)
            error = float(np.max(np.abs(full - half)))
            if error <= self.tol or h <= self.dt_min:
                if error > self.tol:
                    logger.debug(f"Accepting step at dt_min={h:.3g} ns with error {error:.3g}")
                y = half
                t += h
                self.accepted += 1
                if targets and abs(t - targets[0]) <= 1e-12 * max(1.0, abs(t)):
                    samples.append(y.copy())
                    targets.pop(0)
            else:
                self.rejected += 1
            factor = 5.0 if error == 0.0 else 0.9 * (self.tol / error) ** (1.0 / (self._order + 1))
            dt = min(max(h * min(5.0, max(0.2, factor)), self.dt_min), self.dt_max)
        while targets:
            samples.append(y.copy())
            targets.pop(0)
        return y, samples


def fixed_step_count(t_a: float, dt: float) -> Tuple[int, float]:
    """Number of steps covering [0, t_a] and the adjusted step size."""
    if dt <= 0:
        raise IntegrationError(f"Time step must be positive, got {dt}")
    if t_a <= 0:
        raise IntegrationError(f"Annealing time must be positive, got {t_a}")
    steps = max(1, int(math.ceil(t_a / dt - 1e-9)))
    return steps, t_a / steps

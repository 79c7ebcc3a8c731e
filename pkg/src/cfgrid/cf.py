"""
Complex-frequency algebra.

A complex quantity ``u = exp(kappa + j*theta)`` with non-null magnitude has the
time derivative ``du/dt = (rho + j*omega) * u`` where ``rho = d(ln|u|)/dt`` and
``omega = d(theta)/dt``.  The pair ``(rho, omega)`` is its complex frequency (CF).
The same container is used for the CF of voltages, currents and admittances.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import MagnitudeUnderflow, TooFewSamples, UnwrapAliasing

#: default magnitude guard (pu) below which a CF is undefined
EPS_MAG = 1e-9
#: default guard for denominators of admittance and CF formulas
EPS_SING = 1e-9


@dataclass(frozen=True)
class ComplexFrequency:
    """CF ``rho + j*omega``; ``rho`` in 1/s, ``omega`` in rad/s."""

    rho: float
    omega: float
    singular: bool = False

    def __post_init__(self):
        if not self.singular and not (math.isfinite(self.rho) and math.isfinite(self.omega)):
            raise ValueError("non-singular complex frequency must be finite")

    @classmethod
    def from_complex(cls, value):
        value = complex(value)
        if not (math.isfinite(value.real) and math.isfinite(value.imag)):
            return cls.flagged()
        return cls(value.real, value.imag)

    @classmethod
    def flagged(cls):
        return cls(math.nan, math.nan, singular=True)

    def __complex__(self):
        return complex(self.rho, self.omega)

    def as_complex(self):
        return complex(self.rho, self.omega)


@dataclass(frozen=True)
class PolarComplex:
    """Log-polar form ``exp(kappa + j*theta)`` of a complex number."""

    kappa: float
    theta: float

    @property
    def magnitude(self):
        return math.exp(self.kappa)

    def to_complex(self):
        return complex(math.exp(self.kappa) * math.cos(self.theta),
                       math.exp(self.kappa) * math.sin(self.theta))


@dataclass(frozen=True)
class ComplexSignal:
    """Uniformly sampled complex signal (per-unit samples, step ``dt`` in s)."""

    samples: np.ndarray
    dt: float

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples))
        if not self.dt > 0:
            raise ValueError("dt must be positive")


@dataclass(frozen=True)
class CfSeries:
    """Per-sample CF estimates with a singular-sample mask."""

    rho: np.ndarray
    omega: np.ndarray
    singular: np.ndarray

    def __len__(self):
        return len(self.rho)

    def __getitem__(self, k):
        if self.singular[k]:
            return ComplexFrequency.flagged()
        return ComplexFrequency(float(self.rho[k]), float(self.omega[k]))

    def __iter__(self):
        for k in range(len(self)):
            yield self[k]

    def as_complex(self):
        out = self.rho + 1j * self.omega
        out[self.singular] = np.nan
        return out


def to_log_polar(u, eps_mag=EPS_MAG):
    u = complex(u)
    mag = abs(u)
    if not mag > eps_mag:
        raise MagnitudeUnderflow(f"|u| = {mag:.3e} is below the magnitude guard {eps_mag:.1e}")
    theta = math.atan2(u.imag, u.real)
    if theta <= -math.pi:
        theta = math.pi
    return PolarComplex(math.log(mag), theta)


def apply_cf(u, cf):
    """Time derivative of ``u`` implied by its complex frequency ``cf``."""
    return complex(cf) * complex(u)


def _derivative(f, dt, axis=0):
    """Second-order finite difference along ``axis`` (one-sided at the ends)."""
    f = np.moveaxis(np.asarray(f), axis, 0)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2 * dt)
    out[0] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * dt)
    out[-1] = (3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * dt)
    return np.moveaxis(out, 0, axis)


def differentiate(f, dt, axis=0):
    """Second-order accurate derivative of uniformly sampled data."""
    if np.shape(f)[axis] < 3:
        raise TooFewSamples("at least 3 samples are required for differentiation")
    return _derivative(f, dt, axis)


def cf_rates(u, dt, eps_mag=EPS_MAG, max_step_phase=math.pi, axis=0):
    """
    Vectorized CF estimate of sampled complex data.

    Works on log-polar coordinates: ``rho`` is the derivative of ``ln|u|`` and
    ``omega`` the derivative of the unwrapped angle.  Returns ``(rho, omega,
    singular)``; singular entries carry NaN.
    """
    u = np.moveaxis(np.asarray(u), axis, 0)
    if u.shape[0] < 3:
        raise TooFewSamples("at least 3 samples are required for differentiation")
    mag = np.abs(u)
    bad = ~(mag > eps_mag)
    with np.errstate(divide="ignore", invalid="ignore"):
        kappa = np.where(bad, np.nan, np.log(np.where(bad, 1.0, mag)))
    rho = _derivative(kappa, dt)
    if not np.iscomplexobj(u) or not np.any(u.imag):
        omega = np.zeros_like(rho)
    else:
        theta = np.angle(u)
        step = np.diff(theta, axis=0)
        step = (step + np.pi) % (2 * np.pi) - np.pi
        ambiguous = np.abs(step) >= max_step_phase - 1e-12
        if max_step_phase >= math.pi:
            ambiguous &= ~(bad[1:] | bad[:-1])
        if np.any(ambiguous):
            k = int(np.argwhere(ambiguous)[0][0])
            raise UnwrapAliasing(f"phase step at sample {k} is {step.flat[k]:.4f} rad")
        theta = np.concatenate([theta[:1], theta[:1] + np.cumsum(step, axis=0)], axis=0)
        theta = np.where(bad, np.nan, theta)
        omega = _derivative(theta, dt)
    singular = bad | ~(np.isfinite(rho) & np.isfinite(omega))
    rho = np.where(singular, np.nan, rho)
    omega = np.where(singular, np.nan, omega)
    return (np.moveaxis(rho, 0, axis), np.moveaxis(omega, 0, axis),
            np.moveaxis(singular, 0, axis))


def estimate_cf(signal, eps_mag=EPS_MAG, max_step_phase=math.pi):
    """
    Estimate the CF of every sample of ``signal``.

    Interior samples use central differences, the two end samples one-sided
    second-order stencils.  Samples whose stencil touches a magnitude below
    ``eps_mag`` are flagged singular rather than filled in.
    """
    if not isinstance(signal, ComplexSignal):
        raise TypeError("estimate_cf expects a ComplexSignal")
    rho, omega, singular = cf_rates(signal.samples, signal.dt, eps_mag, max_step_phase)
    return CfSeries(rho, omega, singular)

"""Model catalogue and the closed-form jump quantities of the stable subordinator.

Lévy density ``phi(w) = beta w^(-beta-1) / Gamma(1-beta)``, tail
``Phi[v, inf) = v^(-beta) / Gamma(1-beta)``, the conditional jump law ``K_v``
(the jump law given that the temporal jump exceeds ``v``), and the occupation
(0-potential) measure of the space-time process for each model.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gamma, gammaln

from .errors import DomainError, ParameterError, UnsupportedModelError
from .stable_core import StableParams, stable_pdf


class ModelKind(enum.Enum):
    EXAMPLE1 = "Example1"  # A_u = chi + u, D_u = tau + stable subordinator
    EXAMPLE2 = "Example2"  # A_u = chi + stable subordinator, D_u = tau + the same subordinator
    PURE_DRIFT = "PureDrift"  # A_u = chi + u, D_u = tau + u


@dataclass(frozen=True)
class ModelSpec:
    kind: ModelKind
    stable: StableParams | None = None
    spatial_dimension: int = 1

    def __post_init__(self):
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", ModelKind(self.kind))
        if self.spatial_dimension != 1:
            raise ParameterError("only spatial_dimension = 1 is supported")
        if self.kind is ModelKind.PURE_DRIFT:
            if self.stable is not None:
                raise ParameterError("PureDrift takes no stable parameters")
        elif self.stable is None:
            raise ParameterError(f"{self.kind.value} needs StableParams")

    @classmethod
    def example1(cls, beta: float) -> "ModelSpec":
        return cls(ModelKind.EXAMPLE1, StableParams(beta))

    @classmethod
    def example2(cls, beta: float) -> "ModelSpec":
        return cls(ModelKind.EXAMPLE2, StableParams(beta))

    @classmethod
    def pure_drift(cls) -> "ModelSpec":
        return cls(ModelKind.PURE_DRIFT)

    @property
    def beta(self) -> float:
        if self.stable is None:
            raise UnsupportedModelError("PureDrift has no stability index")
        return self.stable.beta

    @property
    def coupled(self) -> bool:
        return self.kind is ModelKind.EXAMPLE2


def _arr(*xs):
    arrs = [np.asarray(x, dtype=float) for x in xs]
    scalar = all(a.ndim == 0 for a in arrs)
    return scalar, np.broadcast_arrays(*arrs)


def _out(x, scalar):
    return float(x) if scalar else x


def levy_density(params: StableParams, w):
    """beta w^(-beta-1) / Gamma(1-beta) for w > 0, else 0."""
    scalar, (w,) = _arr(w)
    b = params.beta
    with np.errstate(divide="ignore"):
        out = np.where(w > 0, np.exp(np.log(b) - (b + 1) * np.log(np.where(w > 0, w, 1.0)) - gammaln(1 - b)), 0.0)
    return _out(out, scalar)


def levy_tail(params: StableParams, v):
    """Phi([v, inf)) = v^(-beta) / Gamma(1-beta)."""
    scalar, (v,) = _arr(v)
    if np.any(~(v > 0)):
        raise DomainError("levy_tail needs v > 0")
    return _out(v ** -params.beta / gamma(1 - params.beta), scalar)


def conditional_jump_tail(params: StableParams, v, t):
    """K_v(R x [v+t, inf)) = ((v+t)/v)^(-beta); K_0 is the unit mass at the origin."""
    scalar, (v, t) = _arr(v, t)
    if np.any(~(v >= 0)) or np.any(~(t >= 0)):
        raise DomainError("conditional_jump_tail needs v >= 0 and t >= 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(v > 0, (v / (v + t)) ** params.beta, np.where(t == 0, 1.0, 0.0))
    return _out(out, scalar)


def conditional_jump_density(model: ModelSpec, v, w):
    """Density in w of the temporal jump under K_v: beta w^(-beta-1) v^beta on w >= v."""
    if model.kind is ModelKind.PURE_DRIFT:
        raise UnsupportedModelError("PureDrift has no jumps")
    scalar, (v, w) = _arr(v, w)
    if np.any(~(v > 0)):
        raise DomainError("conditional_jump_density needs v > 0")
    b = model.beta
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(w >= v, b * np.exp(-(b + 1) * np.log(np.where(w > 0, w, 1.0)) + b * np.log(v)), 0.0)
    return _out(out, scalar)


def jump_displacement(model: ModelSpec, w):
    """Spatial jump accompanying a temporal jump w: 0 (Example1) or w itself (Example2)."""
    if model.kind is ModelKind.PURE_DRIFT:
        raise UnsupportedModelError("PureDrift has no jumps")
    w = np.asarray(w, dtype=float)
    return w.copy() if model.coupled else np.zeros_like(w)


class PotentialKind(enum.Enum):
    ABSOLUTELY_CONTINUOUS = "AbsolutelyContinuous"
    SPATIALLY_SINGULAR = "SpatiallySingular"


@dataclass
class PotentialMeasure:
    """Occupation measure U^{chi,tau}(dx, dt) of the space-time process.

    AbsolutelyContinuous: ``density(x, t)``.  SpatiallySingular: mass only on
    the line ``x = atom_location(t)`` with density ``temporal_density(t)`` in t.
    """
    kind: PotentialKind
    chi: float
    tau: float
    density: Callable | None = None
    temporal_density: Callable | None = None
    atom_location: Callable | None = field(default=None)


def potential(model: ModelSpec, chi: float, tau: float) -> PotentialMeasure:
    if model.kind is ModelKind.PURE_DRIFT:
        raise UnsupportedModelError("PureDrift: the occupation measure is a line measure without a density")
    p = model.stable
    b = p.beta
    if model.kind is ModelKind.EXAMPLE1:
        def density(x, t):
            scalar, (x, t) = _arr(x, t)
            s, u = t - tau, x - chi
            ok = (s > 0) & (u > 0)
            out = np.zeros(s.shape)
            if np.any(ok):
                out[ok] = stable_pdf(p, s[ok], u[ok])
            return _out(out, scalar)

        return PotentialMeasure(PotentialKind.ABSOLUTELY_CONTINUOUS, chi, tau, density=density)

    def temporal(t):
        scalar, (t,) = _arr(t)
        s = t - tau
        out = np.where(s > 0, np.abs(s) ** (b - 1) / gamma(b), 0.0)
        return _out(out, scalar)

    def where(t):
        return chi + (np.asarray(t, dtype=float) - tau)

    return PotentialMeasure(PotentialKind.SPATIALLY_SINGULAR, chi, tau, temporal_density=temporal,
                            atom_location=where)

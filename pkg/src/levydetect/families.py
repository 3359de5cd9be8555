"""Parametric Levy process families.

A process is described by its Brownian volatility ``sigma``, its drift ``b``
under the usual |x| <= 1 truncation convention, and a jump part. Four families
are supported:

* ``brownian``        -- sigma > 0, no jumps
* ``compound_poisson``-- finite-activity jumps, sigma = 0
* ``jump_diffusion``  -- Brownian part plus compound-Poisson jumps
* ``gamma``           -- gamma subordinator (infinite activity, pure jump)

Compound-Poisson jump sizes come from one of three parametric laws
(:class:`GaussianJumps`, :class:`ExponentialJumps`,
:class:`TwoSidedExponentialJumps`); these are exactly the laws whose
jump-measure density ratios are affine per half-line, so every downstream
likelihood object has a closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.stats import norm

from .errors import SpecValidationError

__all__ = [
    "GaussianJumps",
    "ExponentialJumps",
    "TwoSidedExponentialJumps",
    "JumpLaw",
    "LevySpec",
]


@dataclass(frozen=True)
class GaussianJumps:
    """Jump sizes drawn from N(mean, sd^2), supported on the whole line."""

    mean: float
    sd: float

    kind = "gaussian"
    support = "real"

    def validate(self) -> None:
        if not (self.sd > 0.0) or not math.isfinite(self.sd):
            raise SpecValidationError(f"gaussian jump sd must be positive, got {self.sd}")
        if not math.isfinite(self.mean):
            raise SpecValidationError("gaussian jump mean must be finite")

    def density(self, x):
        return norm.pdf(x, loc=self.mean, scale=self.sd)

    def mean_value(self) -> float:
        return self.mean

    def truncated_mean(self) -> float:
        """E[X 1{|X| <= 1}] in closed form via the standard normal cdf/pdf."""
        a = (-1.0 - self.mean) / self.sd
        b = (1.0 - self.mean) / self.sd
        return self.mean * (norm.cdf(b) - norm.cdf(a)) - self.sd * (norm.pdf(b) - norm.pdf(a))


@dataclass(frozen=True)
class ExponentialJumps:
    """Jump sizes Exp(rate), supported on (0, inf)."""

    rate: float

    kind = "exponential"
    support = "positive"

    def validate(self) -> None:
        if not (self.rate > 0.0) or not math.isfinite(self.rate):
            raise SpecValidationError(f"exponential jump rate must be positive, got {self.rate}")

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0.0, self.rate * np.exp(-self.rate * np.abs(x)), 0.0)

    def mean_value(self) -> float:
        return 1.0 / self.rate

    def truncated_mean(self) -> float:
        r = self.rate
        return (1.0 - math.exp(-r) * (1.0 + r)) / r


@dataclass(frozen=True)
class TwoSidedExponentialJumps:
    """Mixture of an Exp(rate_pos) jump up (weight_pos) and an Exp(rate_neg) jump down."""

    rate_pos: float
    rate_neg: float
    weight_pos: float

    kind = "two_sided_exponential"
    support = "two_sided"

    def validate(self) -> None:
        if not (self.rate_pos > 0.0 and self.rate_neg > 0.0):
            raise SpecValidationError("two-sided exponential rates must be positive")
        if not (0.0 < self.weight_pos < 1.0):
            raise SpecValidationError(
                f"two-sided exponential weight must lie in (0, 1), got {self.weight_pos}")

    def density(self, x):
        x = np.asarray(x, dtype=float)
        pos = self.weight_pos * self.rate_pos * np.exp(-self.rate_pos * np.abs(x))
        neg = (1.0 - self.weight_pos) * self.rate_neg * np.exp(-self.rate_neg * np.abs(x))
        return np.where(x > 0.0, pos, np.where(x < 0.0, neg, 0.0))

    def mean_value(self) -> float:
        return self.weight_pos / self.rate_pos - (1.0 - self.weight_pos) / self.rate_neg

    def truncated_mean(self) -> float:
        def one_sided(rate: float) -> float:
            return (1.0 - math.exp(-rate) * (1.0 + rate)) / rate

        return (self.weight_pos * one_sided(self.rate_pos)
                - (1.0 - self.weight_pos) * one_sided(self.rate_neg))


JumpLaw = Union[GaussianJumps, ExponentialJumps, TwoSidedExponentialJumps]


@dataclass(frozen=True)
class LevySpec:
    """One process: volatility, truncation-convention drift, and jump block.

    ``drift_b`` is the drift relative to the |x| <= 1 truncation, so the
    observable linear drift of a finite-variation path is
    ``drift_b - integral of x over |x| <= 1 against the jump measure``
    (see :meth:`linear_drift`).
    """

    family: str
    sigma: float = 0.0
    drift_b: float = 0.0
    intensity: Optional[float] = None       # compound-Poisson jump rate
    jumps: Optional[JumpLaw] = None
    activity: Optional[float] = None        # gamma subordinator activity a
    scale: Optional[float] = None           # gamma subordinator scale theta

    # ------------------------------------------------------------------ #
    # constructors
    # ------------------------------------------------------------------ #

    @classmethod
    def brownian(cls, sigma: float, drift: float = 0.0) -> "LevySpec":
        return cls(family="brownian", sigma=float(sigma), drift_b=float(drift))

    @classmethod
    def compound_poisson(cls, intensity: float, jumps: JumpLaw,
                         drift: float = 0.0) -> "LevySpec":
        return cls(family="compound_poisson", sigma=0.0, drift_b=float(drift),
                   intensity=float(intensity), jumps=jumps)

    @classmethod
    def jump_diffusion(cls, sigma: float, intensity: float, jumps: JumpLaw,
                       drift: float = 0.0) -> "LevySpec":
        return cls(family="jump_diffusion", sigma=float(sigma), drift_b=float(drift),
                   intensity=float(intensity), jumps=jumps)

    @classmethod
    def gamma_subordinator(cls, activity: float, scale: float,
                           drift: Optional[float] = None) -> "LevySpec":
        """Gamma subordinator; ``drift=None`` means a pure subordinator.

        The pure subordinator has zero linear drift, i.e. its
        truncation-convention drift equals the small-jump first moment
        a * theta * (1 - exp(-1/theta)).
        """
        a = float(activity)
        theta = float(scale)
        if drift is None:
            if a > 0.0 and theta > 0.0:
                drift = a * theta * (1.0 - math.exp(-1.0 / theta))
            else:
                drift = 0.0
        return cls(family="gamma", sigma=0.0, drift_b=float(drift),
                   activity=a, scale=theta)

    # ------------------------------------------------------------------ #
    # validation and derived quantities
    # ------------------------------------------------------------------ #

    def validate(self) -> None:
        if self.family not in ("brownian", "compound_poisson", "jump_diffusion", "gamma"):
            raise SpecValidationError(f"unknown family {self.family!r}")
        if self.sigma < 0.0 or not math.isfinite(self.sigma):
            raise SpecValidationError(f"sigma must be nonnegative, got {self.sigma}")
        if not math.isfinite(self.drift_b):
            raise SpecValidationError("drift must be finite")
        if self.family == "brownian":
            if self.sigma <= 0.0:
                raise SpecValidationError("brownian family needs sigma > 0")
            if self.intensity is not None or self.jumps is not None:
                raise SpecValidationError("brownian family carries no jump block")
        if self.family in ("compound_poisson", "jump_diffusion"):
            if self.intensity is None or not (self.intensity > 0.0):
                raise SpecValidationError(
                    f"jump intensity must be positive, got {self.intensity}")
            if self.jumps is None:
                raise SpecValidationError("jump size law is required")
            self.jumps.validate()
            if self.family == "compound_poisson" and self.sigma != 0.0:
                raise SpecValidationError(
                    "compound_poisson has sigma = 0; use jump_diffusion for sigma > 0")
        if self.family == "gamma":
            if self.sigma != 0.0:
                raise SpecValidationError("gamma subordinator is pure jump (sigma = 0)")
            if self.activity is None or not (self.activity > 0.0):
                raise SpecValidationError(f"gamma activity must be positive, got {self.activity}")
            if self.scale is None or not (self.scale > 0.0):
                raise SpecValidationError(f"gamma scale must be positive, got {self.scale}")

    @property
    def has_jumps(self) -> bool:
        return self.family in ("compound_poisson", "jump_diffusion", "gamma")

    def jump_truncated_mean(self) -> float:
        """Closed form of the |x| <= 1 first moment of the jump measure."""
        if self.family in ("compound_poisson", "jump_diffusion"):
            return self.intensity * self.jumps.truncated_mean()
        if self.family == "gamma":
            a, theta = self.activity, self.scale
            return a * theta * (1.0 - math.exp(-1.0 / theta))
        return 0.0

    def linear_drift(self) -> float:
        """Drift of the path once jumps are taken raw (finite-variation form).

        For the Brownian family this is just ``drift_b``; for jump families it
        is ``drift_b`` minus the truncated first moment of the jump measure.
        """
        if self.family == "brownian":
            return self.drift_b
        return self.drift_b - self.jump_truncated_mean()

    def levy_density(self, x):
        """Jump-measure density at x (intensity-weighted for finite activity)."""
        x = np.asarray(x, dtype=float)
        if self.family in ("compound_poisson", "jump_diffusion"):
            return self.intensity * self.jumps.density(x)
        if self.family == "gamma":
            a, theta = self.activity, self.scale
            safe = np.where(x > 0.0, x, 1.0)
            return np.where(x > 0.0, a * np.exp(-safe / theta) / safe, 0.0)
        return np.zeros_like(x)

    def jump_support(self) -> str:
        """Support label of the jump measure: real / positive / two_sided / none."""
        if self.family == "gamma":
            return "positive"
        if self.jumps is not None:
            return self.jumps.support
        return "none"

    # ------------------------------------------------------------------ #
    # serialization (consumed by the CLI config layer)
    # ------------------------------------------------------------------ #

    def to_dict(self) -> dict:
        out: dict = {"family": self.family, "sigma": self.sigma, "drift": self.drift_b}
        if self.family in ("compound_poisson", "jump_diffusion"):
            j = self.jumps
            block = {"kind": j.kind}
            if isinstance(j, GaussianJumps):
                block.update(mean=j.mean, sd=j.sd)
            elif isinstance(j, ExponentialJumps):
                block.update(rate=j.rate)
            else:
                block.update(rate_pos=j.rate_pos, rate_neg=j.rate_neg,
                             weight_pos=j.weight_pos)
            out.update(intensity=self.intensity, jumps=block)
        if self.family == "gamma":
            out.update(activity=self.activity, scale=self.scale)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "LevySpec":
        try:
            family = data["family"]
        except KeyError as exc:
            raise SpecValidationError("process block needs a 'family' key") from exc
        if family == "brownian":
            spec = cls.brownian(sigma=data.get("sigma", 1.0), drift=data.get("drift", 0.0))
        elif family in ("compound_poisson", "jump_diffusion"):
            jumps = _jump_law_from_dict(data.get("jumps"))
            if family == "compound_poisson":
                spec = cls.compound_poisson(intensity=data.get("intensity", 0.0),
                                            jumps=jumps, drift=data.get("drift", 0.0))
            else:
                spec = cls.jump_diffusion(sigma=data.get("sigma", 0.0),
                                          intensity=data.get("intensity", 0.0),
                                          jumps=jumps, drift=data.get("drift", 0.0))
        elif family == "gamma":
            spec = cls.gamma_subordinator(activity=data.get("activity", 0.0),
                                          scale=data.get("scale", 0.0),
                                          drift=data.get("drift"))
        else:
            raise SpecValidationError(f"unknown family {family!r}")
        spec.validate()
        return spec


def _jump_law_from_dict(block: Optional[dict]) -> JumpLaw:
    if not block:
        raise SpecValidationError("jump family requires a 'jumps' block")
    kind = block.get("kind")
    if kind == "gaussian":
        return GaussianJumps(mean=float(block.get("mean", 0.0)), sd=float(block.get("sd", 1.0)))
    if kind == "exponential":
        return ExponentialJumps(rate=float(block.get("rate", 1.0)))
    if kind == "two_sided_exponential":
        return TwoSidedExponentialJumps(rate_pos=float(block.get("rate_pos", 1.0)),
                                        rate_neg=float(block.get("rate_neg", 1.0)),
                                        weight_pos=float(block.get("weight_pos", 0.5)))
    raise SpecValidationError(f"unknown jump kind {kind!r}")

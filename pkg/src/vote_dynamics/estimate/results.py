from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..core import InputError


@dataclass
class FitResult:
    """Outcome of a maximum-likelihood (or MAP) fit."""

    estimate: np.ndarray
    log_likelihood: float
    converged: bool
    iterations: int = 0
    stderr: Optional[np.ndarray] = None
    names: Sequence[str] = ()
    grad_norm: float = 0.0
    message: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.estimate = np.atleast_1d(np.asarray(self.estimate, dtype=float))
        if self.stderr is not None:
            self.stderr = np.atleast_1d(np.asarray(self.stderr, dtype=float))

    def __getitem__(self, name: str) -> float:
        return float(self.estimate[list(self.names).index(name)])

    def as_dict(self) -> dict:
        def clean(x):
            x = float(x)
            return x if math.isfinite(x) else None

        out = {
            "parameters": {
                n: {
                    "estimate": clean(v),
                    "stderr": None if self.stderr is None else clean(self.stderr[i]),
                }
                for i, (n, v) in enumerate(zip(self.names, self.estimate))
            },
            "log_likelihood": clean(self.log_likelihood),
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "grad_norm": clean(self.grad_norm),
        }
        if self.message:
            out["message"] = self.message
        if self.extra:
            out["extra"] = self.extra
        return out


@dataclass(frozen=True)
class LognormalPrior:
    """Lognormal density on a probability-valued parameter."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise InputError("prior sigma must be positive")

    def logpdf(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            lr = np.log(r)
        out = -lr - math.log(self.sigma * math.sqrt(2 * math.pi)) - (lr - self.mu) ** 2 / (2 * self.sigma**2)
        return np.where(r > 0, out, -np.inf)

    def to_dict(self):
        return {"mu": self.mu, "sigma": self.sigma}


# lognormal fits to the fan / non-fan interestingness of promoted stories
REFERENCE_FAN_PRIOR = LognormalPrior(-1.8, 0.75)
REFERENCE_NONFAN_PRIOR = LognormalPrior(-4.0, 0.63)

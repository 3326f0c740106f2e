"""Site-wide parameter sets for the two voting models."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

from .core import UPCOMING_LIFETIME, InputError
from .visibility import LogisticPromotion, PromotionModel, ThresholdPromotion, promotion_model_from_dict

# Synthetic default for the per-vote promotion hazard. The published fit is
# only shown graphically, so this is a stand-in that promotes typical stories
# after a few tens of votes.
DEFAULT_LOGISTIC = LogisticPromotion(intercept=-5.0, slope=0.1)


@dataclass(frozen=True)
class GlobalParamsV1:
    """Single-interestingness model; rates per wall hour."""

    nu: float = 600.0
    c: float = 0.3
    omega: float = 0.12
    surf_mu: float = 0.6
    surf_lambda: float = 0.6
    a: float = 51.0
    b: float = 0.62
    h: int = 40
    k_upcoming: float = 3.60
    k_front: float = 0.18
    lifetime: float = UPCOMING_LIFETIME

    def __post_init__(self):
        for name in ("nu", "omega", "surf_mu", "surf_lambda", "a", "k_upcoming", "k_front", "lifetime"):
            if not getattr(self, name) > 0:
                raise InputError(f"{name} must be positive")
        if not 0 < self.c <= 1:
            raise InputError("c must lie in (0, 1]")
        if not 0 < self.b < 1:
            raise InputError("b must lie in (0, 1)")
        if int(self.h) != self.h or self.h < 2:
            raise InputError("h must be an integer >= 2")

    @classmethod
    def reference(cls) -> "GlobalParamsV1":
        return cls()

    @property
    def promotion(self) -> ThresholdPromotion:
        return ThresholdPromotion(int(self.h))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GlobalParamsV1":
        return cls(**d)


@dataclass(frozen=True)
class GlobalParamsV2:
    """Fan/non-fan model; all rates per Digg hour."""

    omega: float = 0.2
    U: int = 70_000
    c: float = 0.065
    surf_mu: float = 6.3
    surf_lambda: float = 0.14
    rho: float = 9.48e-6
    k_upcoming: float = 3.60
    k_front: float = 0.18
    promotion: PromotionModel = field(default=DEFAULT_LOGISTIC)
    lifetime: float = UPCOMING_LIFETIME

    def __post_init__(self):
        for name in ("omega", "surf_mu", "surf_lambda", "k_upcoming", "k_front", "lifetime"):
            if not getattr(self, name) > 0:
                raise InputError(f"{name} must be positive")
        if int(self.U) != self.U or self.U < 2:
            raise InputError("U must be an integer >= 2")
        if not 0 < self.c <= 1:
            raise InputError("c must lie in (0, 1]")
        if not 0 < self.rho < 1:
            raise InputError("rho must lie in (0, 1)")
        if self.rho * (self.U - 1) >= 1:
            raise InputError("rho * (U - 1) must be < 1")
        if isinstance(self.promotion, dict):
            object.__setattr__(self, "promotion", promotion_model_from_dict(self.promotion))

    @classmethod
    def reference(cls, promotion: PromotionModel | None = None) -> "GlobalParamsV2":
        return cls() if promotion is None else cls(promotion=promotion)

    def with_(self, **changes) -> "GlobalParamsV2":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["promotion"] = self.promotion.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GlobalParamsV2":
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InputError(f"unknown global parameter(s): {sorted(unknown)}")
        if "promotion" in d:
            d["promotion"] = promotion_model_from_dict(d["promotion"])
        return cls(**d)

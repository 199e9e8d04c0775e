from typing import Dict, Mapping, NamedTuple

from pydantic import BaseModel, ConfigDict, Field

from diffengine import ops

from .errors import NonFiniteLoss

TERMS = ("rgb", "warp", "flow", "depth", "normal", "eikonal")


class LossWeights(BaseModel):
    model_config = ConfigDict(frozen=True)

    rgb: float = Field(1.0, ge=0)
    warp: float = Field(0.5, ge=0)
    flow: float = Field(0.001, ge=0)
    depth: float = Field(0.1, ge=0)
    normal: float = Field(0.05, ge=0)
    eikonal: float = Field(0.1, ge=0)

    @classmethod
    def from_config(cls, losses) -> "LossWeights":
        return cls(**{term: getattr(losses, f"weight_{term}") for term in TERMS})

    @classmethod
    def rgb_only(cls) -> "LossWeights":
        return cls(rgb=1.0, warp=0.0, flow=0.0, depth=0.0, normal=0.0, eikonal=0.0)


class LossBreakdown(NamedTuple):
    terms: Dict[str, float]
    total: float
    objective: ops.Scalar

    def line(self) -> str:
        parts = [f"total={self.total:.6g}"] + [f"{name}={self.terms[name]:.6g}" for name in TERMS]
        return " ".join(parts)


def mapping_loss(terms: Mapping[str, ops.Scalar], weights: LossWeights) -> LossBreakdown:
    """Weighted sum of the loss terms. Missing terms count as 0; zero weights drop out of the objective."""
    values = {}
    for name in TERMS:
        value = ops.value(terms.get(name, 0.0))
        if not ops.is_finite(value):
            raise NonFiniteLoss(name, value)
        values[name] = value
    weighted = [getattr(weights, name) * terms[name] for name in TERMS
                if name in terms and getattr(weights, name) != 0.0]
    total = sum(getattr(weights, name) * values[name] for name in TERMS)
    return LossBreakdown(values, total, ops.total(weighted))

from typing import Dict, Optional

from pydantic import BaseModel, Field

FIELDS = ("ate_rmse", "accuracy", "completion", "completion_ratio", "normal_consistency", "psnr", "ssim")


class MetricReport(BaseModel):
    """Every metric is optional; a command fills in the ones it computes."""

    ate_rmse: Optional[float] = Field(None, ge=0)
    accuracy: Optional[float] = Field(None, ge=0)
    completion: Optional[float] = Field(None, ge=0)
    completion_ratio: Optional[float] = Field(None, ge=0, le=100)
    normal_consistency: Optional[float] = Field(None, ge=0)
    psnr: Optional[float] = None
    ssim: Optional[float] = Field(None, ge=-1, le=1)

    def values(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in FIELDS if getattr(self, name) is not None}

    def merged(self, other: "MetricReport") -> "MetricReport":
        return MetricReport(**{**self.values(), **other.values()})

from typing import Iterable, List, Optional

import numpy as np

from diffengine import ops
from diffengine.tape import Tape
from fields.model import BoundField, SdfEval, Stage

from .scene import AnalyticScene


class AnalyticField:
    """An AnalyticScene behind the same interface as SceneModel.

    Only the SDF value carries derivatives with respect to the query point;
    gradients and colours are evaluated on plain values.
    """

    beta = None

    def __init__(self, scene: AnalyticScene):
        self.scene = scene
        self.sign_convention = scene.sign_convention

    def bind(self, tape: Optional[Tape] = None, trainable: Iterable[str] = ()) -> "AnalyticBound":
        return AnalyticBound(self)

    def sdf_batch(self, points: np.ndarray, stage: Stage = Stage.FULL) -> np.ndarray:
        return self.scene.sdf_batch(points)

    def gradient_batch(self, points: np.ndarray, stage: Stage = Stage.FULL) -> np.ndarray:
        return self.scene.sdf_gradient_batch(points)

    def color_batch(self, points: np.ndarray, view_dirs: np.ndarray, stage: Stage = Stage.FULL) -> np.ndarray:
        return self.scene.color_batch(points)

    def shade_batch(self, points: np.ndarray, view_dirs: np.ndarray, stage: Stage = Stage.FULL,
                    with_color: bool = True):
        colors = self.scene.color_batch(points) if with_color else None
        return self.scene.sdf_batch(points), self.scene.sdf_gradient_batch(points), colors


class AnalyticBound(BoundField):
    def __init__(self, field: AnalyticField):
        self.field = field
        self.sign_convention = field.sign_convention

    def sdf(self, x, stage: Stage, with_grad: bool = False) -> SdfEval:
        s = self.field.scene.sdf(x)
        grad = None
        if with_grad:
            point = np.array([[ops.value(c) for c in x]])
            grad = self.field.scene.sdf_gradient_batch(point)[0].tolist()
        return SdfEval(s, grad, [], None)

    def color(self, x, normal, view_dir, evaluated: SdfEval, stage: Stage) -> List[float]:
        point = np.array([[ops.value(c) for c in x]])
        return self.field.scene.color_batch(point)[0].tolist()

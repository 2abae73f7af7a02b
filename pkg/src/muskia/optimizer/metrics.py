"""Static cost proxy for a program at a given viewport."""
from __future__ import annotations

from dataclasses import asdict, dataclass

from ..commands import Clip, Draw, NoOp, Program, Restore, Save, SaveLayer
from ..shapes import FULL, _bounds, shape_intersect

#: Each SaveLayer costs one viewport for the allocation/clear and one for the final blend.
LAYER_PASSES = 2


@dataclass(frozen=True)
class CostMetrics:
    savelayer_count: int
    draw_count: int
    clip_count: int
    est_pixel_ops: float

    def to_json(self) -> dict:
        return asdict(self)


def _viewport_area(shape, width: float, height: float) -> float:
    box, empty = _bounds(shape)
    if empty:
        return 0.0
    if box is None:
        return float(width * height)
    w = min(box.right, width) - max(box.left, 0.0)
    h = min(box.bottom, height) - max(box.top, 0.0)
    return max(w, 0.0) * max(h, 0.0)


def cost_metrics(program: Program, width: int, height: int) -> CostMetrics:
    layers = draws = clips = 0
    ops = 0.0
    stack = [FULL]
    for rec in program.records:
        if isinstance(rec, Draw):
            draws += 1
            ops += _viewport_area(shape_intersect(rec.shape, stack[-1]), width, height)
        elif isinstance(rec, Clip):
            clips += 1
            stack[-1] = shape_intersect(stack[-1], rec.shape)
        elif isinstance(rec, SaveLayer):
            layers += 1
            ops += LAYER_PASSES * width * height
            stack.append(stack[-1])
        elif isinstance(rec, Save):
            stack.append(stack[-1])
        elif isinstance(rec, Restore):
            stack.pop()
        elif not isinstance(rec, NoOp):
            raise TypeError(f"not a command: {rec!r}")
    return CostMetrics(layers, draws, clips, ops)


def speedup_proxy(before: CostMetrics, after: CostMetrics) -> float:
    if after.est_pixel_ops > 0:
        return before.est_pixel_ops / after.est_pixel_ops
    return 1.0 if before.est_pixel_ops == 0 else float("inf")

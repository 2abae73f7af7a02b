"""Peephole optimizer over flat command buffers."""
from .buffer import Insertion, RecordBuffer, materialize, merge_records
from .harness import INLINE_FRAMES, Firing, Frame, FrameStack, RewritePass, transform
from .metrics import CostMetrics, cost_metrics, speedup_proxy
from .passes import PASSES, DstInToClip, GradientMask, SrcOverSaveLayer, SubsumeLuma
from .pipeline import OptimizeConfig, optimize, parse_passes
from .rewrites import DSTIN, GRADIENT, LUMA, PASS_ORDER, SRCOVER
from .trace import RewriteTrace, TraceEntry, load_trace, replay, trace_from_json

__all__ = [
    "CostMetrics", "DSTIN", "DstInToClip", "Firing", "Frame", "FrameStack", "GRADIENT",
    "GradientMask", "INLINE_FRAMES", "Insertion", "LUMA", "OptimizeConfig", "PASSES",
    "PASS_ORDER", "RecordBuffer", "RewritePass", "RewriteTrace", "SRCOVER",
    "SrcOverSaveLayer", "SubsumeLuma", "TraceEntry", "cost_metrics", "load_trace",
    "materialize", "merge_records", "optimize", "parse_passes", "replay", "speedup_proxy",
    "trace_from_json", "transform",
]

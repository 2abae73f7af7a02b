"""Executable semantics for a small 2D rasterization command language,
with a peephole optimizer and a translation validator."""
from .color import (
    OPAQUE_BLACK,
    OPAQUE_EPS,
    OPAQUE_WHITE,
    TRANSPARENT,
    BlendMode,
    Color,
    FilterKind,
    LinearGradient,
    Point,
    RadialGradient,
    Solid,
    blend_eval,
    fill_eval,
    filter_eval,
    gradient_all_stops_opaque,
    is_opaque,
)
from .commands import (
    NOOP,
    RESTORE,
    SAVE,
    Clip,
    Draw,
    NoOp,
    Program,
    Restore,
    Save,
    SaveLayer,
    UnbalancedError,
    check_balanced,
    initial_state,
    run,
    step,
)
from .layers import EMPTY, BlendLayer, DrawShape, Empty, Paint, clip_all, denote, layer_equiv_sampled
from .raster import RasterImage, image_diff_ae, rasterize, write_image
from .shapes import FULL, Circle, EmptyShape, Full, Intersect, Rect, Union, shape_bounds, shape_contains, shape_intersect
from .skplite import load_program, save_program

__version__ = "0.1.0"

"""Differentiable splat rasterizer: projection, compositing and backward pass."""

from core.render.backward import ParamGrads, accumulate, backward_render
from core.render.rasterizer import Contributors, RenderedFrame, composite, depth_order, render_frame
from core.render.splats import Splat2D, SplatBatch, project_cloud, project_gaussian_2d

__all__ = [
    'ParamGrads',
    'accumulate',
    'backward_render',
    'Contributors',
    'RenderedFrame',
    'composite',
    'depth_order',
    'render_frame',
    'Splat2D',
    'SplatBatch',
    'project_cloud',
    'project_gaussian_2d',
]

"""Datasets, file formats and the synthetic scene generator."""

from core.io.colmap import load_colmap_text, write_colmap_text
from core.io.dataset import Dataset, View
from core.io.images import read_png, write_png
from core.io.pfm import read_pfm, write_pfm
from core.io.ply import load_gaussians_ply, ply_property_names, save_gaussians_ply
from core.io.store import load_dataset, save_dataset
from core.io.synth import (
    BoxSpec,
    CameraRingSpec,
    PlaneSpec,
    SynthSceneSpec,
    TextureSpec,
    gen_synth_scene,
    load_synth_spec,
    ring_cameras,
    two_plane_spec,
)

__all__ = [
    'load_colmap_text',
    'write_colmap_text',
    'Dataset',
    'View',
    'read_png',
    'write_png',
    'read_pfm',
    'write_pfm',
    'load_gaussians_ply',
    'ply_property_names',
    'save_gaussians_ply',
    'load_dataset',
    'save_dataset',
    'BoxSpec',
    'CameraRingSpec',
    'PlaneSpec',
    'SynthSceneSpec',
    'TextureSpec',
    'gen_synth_scene',
    'load_synth_spec',
    'ring_cameras',
    'two_plane_spec',
]

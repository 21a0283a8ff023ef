"""
animalbox - orientation-aware 3D bounding box labels for animals.

Pipeline: anatomical frame from landmarks -> tight oriented box around the
mesh -> EPnP/RANSAC camera pose -> joint keypoint + mask-bbox refinement ->
face visibility percentages -> degeneracy check.
"""

from animalbox.config import PipelineConfig, load_config
from animalbox.errors import AnimalBoxError, StageError
from animalbox.labels import Label3D, read_label, write_label
from animalbox.pipeline import evaluate_scenes, run_label
from animalbox.scene_io import SceneInput, parse_scene

__all__ = [
    "AnimalBoxError",
    "Label3D",
    "PipelineConfig",
    "SceneInput",
    "StageError",
    "evaluate_scenes",
    "load_config",
    "parse_scene",
    "read_label",
    "run_label",
    "write_label",
]

__version__ = "0.1.0"

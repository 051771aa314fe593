"""Tactile grasp-quality metric, self-labelled visual-tactile data and a two-phase grasp planner."""

from .tactile import StabilityCategory, assess, categorize, grasp_score, slip_magnitude
from .shake import ContactScenario, Mode, endurance_score, sample_scenarios, simulate_shake
from .scene import (GraspConfiguration, KNOWN_OBJECTS, NOVEL_OBJECTS, ObjectSpec, Pose, Scene,
                    ground_truth_outcome, place_objects_random, render_scene)
from .dataset import Dataset, LabelScheme, build_vpt, load_dataset, project_labels, save_dataset
from .learning import ReferenceModel, TrainConfig, evaluate, load_model, preset_config, save_model, train
from .pipeline import NoGraspableRegion, NoStableConfiguration, PlanningError, plan, plan_bayesian, plan_vision

__version__ = "0.1.0"

__all__ = [
    "StabilityCategory",
    "assess",
    "categorize",
    "grasp_score",
    "slip_magnitude",
    "ContactScenario",
    "Mode",
    "endurance_score",
    "sample_scenarios",
    "simulate_shake",
    "GraspConfiguration",
    "KNOWN_OBJECTS",
    "NOVEL_OBJECTS",
    "ObjectSpec",
    "Pose",
    "Scene",
    "ground_truth_outcome",
    "place_objects_random",
    "render_scene",
    "Dataset",
    "LabelScheme",
    "build_vpt",
    "load_dataset",
    "project_labels",
    "save_dataset",
    "ReferenceModel",
    "TrainConfig",
    "evaluate",
    "load_model",
    "preset_config",
    "save_model",
    "train",
    "NoGraspableRegion",
    "NoStableConfiguration",
    "PlanningError",
    "plan",
    "plan_bayesian",
    "plan_vision",
]

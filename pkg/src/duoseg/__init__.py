"""Dual-resolution promptable segmentation on dyadic image pyramids."""

from .pyramid import PyramidImage, PatchPair, build_pyramid, extract_pair
from .synth import SynthConfig, synth_dataset, save_dataset, load_dataset, sample_pairs
from .prompts import BoxPrompt, PointPrompt, CoarseMask, simulate_box, sample_points, degrade_mask
from .encoder import EncoderConfig, ImageEncoder
from .decoder import AggregationMode, DecodeTarget, AggPlacement, MaskPrediction, aggregate_tokens
from .model import ModelConfig, DuoSegModel, build_model, save_checkpoint, load_checkpoint
from .training import LossConfig, TrainConfig, seg_loss, total_loss, train
from .evaluation import Protocol, dice_score, evaluate, run_ablation_grid, point_sweep

__version__ = "0.1.0"

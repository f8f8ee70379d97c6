"""Optimal solutions of Dice and soft-Dice under soft labels."""

from .descent import DescentConfig, DescentTrace, init_logits, run_ce_descent, run_descent, soft_dice_gradient
from .grid import (
    Grid,
    HardSegmentation,
    LogitField,
    MarginalMap,
    Rng,
    average_masks,
    l1_distance,
    l1_norm,
    read_grid,
    threshold,
    write_grid,
)
from .metrics import ErrorPair, cross_entropy, dice, error_pair, sigmoid, soft_dice, soft_dice_extension
from .optimal import (
    OptimalDiceSolution,
    brute_force_optimal,
    construct_extremal,
    optimal_segmentation,
    solve_optimal_dice,
    volume_bounds_check,
)
from .synth import SynthConfig, gaussian_blur, make_ball, make_synthetic, random_deformation

__version__ = "0.1.0"

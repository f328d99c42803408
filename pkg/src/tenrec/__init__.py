"""Randomized Tucker compression and gradient-domain FCTN tensor recovery."""
from .degrade import Observation, observe, quantize, quantize_dithered, sample_mask, smooth_lowrank
from .io import ingest_image_stack, read_observation, read_tensor, write_observation, write_tensor
from .metrics import MetricReport, evaluate, mpsnr, mssim, rse
from .prox import PenaltySpec, prox_entrywise, prox_scalar, prox_tube, svt_generalized, svt_randomized
from .rcompress import (FixedAccuracyConfig, FixedRankConfig, TuckerApprox, compress_fixed_accuracy,
                        compress_fixed_rank, sthosvd)
from .regularizer import GntctvSpec, balanced_unfoldings, gntctv
from .sketch import SketchSpec, make_sketch
from .solvers import SolverConfig, SolverReport, solve_gnqrtc, solve_gnqtc, solve_gnrtc, solve_gntc
from .tensor import FctnFactors, fctn_contract, fold, gradient, permute, unfold

__version__ = "0.1.0"

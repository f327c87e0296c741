"""Probabilistic amplitude shaping with a 4D look-up-table distribution matcher."""

from .ccdm import CcdmCodec, Composition, fit_mb_entropy, mb_pmf, quantize_composition
from .channel import SnrSpec, add_noise, moment_ratio, normalize
from .constellation import AskAlphabet, Labeling4D, brgc, build_ask, build_labeling, quadrant_enumerate
from .kernels import BACKEND
from .lut import LutDm, ShapedSource, build_lut, lut_decode, lut_encode, lut_source, uniform_source
from .pas import PasMode, draw_symbols, gamma, mode_from_target_se, se_set, uniform_qam_mode
from .rates import achievable_rate, exact_rate_oracle, gaussian_capacity, make_metric, summand_moments

__version__ = "0.1.0"

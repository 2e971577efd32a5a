"""Multipath-diversity certification and Monte Carlo experiments for linear
modulation with random constellation rotation."""

from .alphabet import (DifferenceSet, MappingAlphabet, RotationPattern,
                       difference_set, make_alphabet, random_rotation)
from .channel import (ContinuousDelayProfile, DoublyDispersiveChannel,
                      TimeChannel, apply_channel, build_shift_matrix,
                      draw_channel, equivalent_channels)
from .diversity import (DiversityReport, EnumerationCapError, JudgmentMatrix,
                        PepBound, algorithm1_inequality_total,
                        check_full_diversity_condition, construct_rotation,
                        diversity_continuous_delays, exhaustive_diversity,
                        forbidden_rotation_points, judgment_matrix,
                        lemma1_root_count, nonzero_spread_check,
                        pep_upper_bound)
from .linalg import det_poly_coeffs, numerical_rank, random_unitary
from .modulation import (ModulationScheme, Precoder,
                         adjust_prefix_for_diversity2, build_scheme,
                         dft_matrix, scheme_from_json, scheme_to_json,
                         transmit)
from .seeding import derive_rng
from .simulate import (BerCurve, PaprCcdf, SimConfig, SingularChannelError,
                       ber_sweep, lzf_detect, ml_detect, papr_ccdf,
                       papr_of_frame, slope_estimate)

__version__ = "0.1.0"

__all__ = [
    "MappingAlphabet", "DifferenceSet", "RotationPattern",
    "make_alphabet", "difference_set", "random_rotation",
    "ModulationScheme", "Precoder", "build_scheme", "transmit",
    "adjust_prefix_for_diversity2", "dft_matrix", "scheme_from_json",
    "scheme_to_json",
    "TimeChannel", "DoublyDispersiveChannel", "ContinuousDelayProfile",
    "build_shift_matrix", "draw_channel", "apply_channel",
    "equivalent_channels",
    "JudgmentMatrix", "DiversityReport", "PepBound", "EnumerationCapError",
    "judgment_matrix", "check_full_diversity_condition",
    "exhaustive_diversity", "nonzero_spread_check", "construct_rotation",
    "diversity_continuous_delays", "pep_upper_bound", "lemma1_root_count",
    "algorithm1_inequality_total", "forbidden_rotation_points",
    "numerical_rank", "det_poly_coeffs", "random_unitary",
    "SimConfig", "BerCurve", "PaprCcdf", "SingularChannelError",
    "ml_detect", "lzf_detect", "ber_sweep", "papr_ccdf", "papr_of_frame",
    "slope_estimate",
    "derive_rng",
]

"""Chaos diagnostics: form factors, sector decompositions, frame potentials,
k-invariance, OTOCs and the density of states."""
from .decomposition import (general_r2k_partition, r2_decomposition_check, r4_decomposition_check,
                            sff_morphology)
from .dos import EdgeFit, density_of_states, edge_exponent
from .form_factors import FORM_FACTOR_KINDS, FormFactor, form_factor, form_factor_series, power_sums
from .frame import (f1_analytic, f1_decomposition_check, frame_potential, frame_potential_series,
                    haar_frame_potential, k_invariance)
from .otoc import (OtocResult, haar_four_point, otoc, otoc_kinv_approx, otoc_series,
                   pauli_two_point_u1, two_point_invariant, u1_haar_otoc, u1_haar_two_point)

__all__ = [
    "EdgeFit", "FORM_FACTOR_KINDS", "FormFactor", "OtocResult", "density_of_states",
    "edge_exponent", "f1_analytic", "f1_decomposition_check", "form_factor", "form_factor_series",
    "frame_potential", "frame_potential_series", "general_r2k_partition", "haar_four_point",
    "haar_frame_potential", "k_invariance", "otoc", "otoc_kinv_approx", "otoc_series",
    "pauli_two_point_u1", "power_sums", "r2_decomposition_check", "r4_decomposition_check",
    "sff_morphology", "two_point_invariant", "u1_haar_otoc", "u1_haar_two_point",
]

"""Carnot group arithmetic, nets, frame extension and snowflake embeddings."""
from .algebra import (BUNDLED, OperatorWord, RootSum, StratifiedAlgebra, ValidationReport, Violation,
                      algebra_from_json, bch_series, heisenberg, load_algebra)
from .embedding import (EmbeddingConfig, EmbeddingMap, IsometryField, LacunaryFamily, assemble_weierstrass,
                        assouad_baseline, bilinear_form_B, build_isometry_field, concatenate_scales,
                        explicit_solve, holder_diagnostics, lowpass, mollifier_lowpass, predicted_holder_M)
from .frames import (ExtensionConfig, ExtensionReport, FrameExtensionError, FrameField, extend_frame,
                     extend_frame_repeated, lll_resample, quadratic_partition, sample_orthocomplement_unit)
from .geodesic import PathBound, cc_upper_bound
from .harness import (DistortionReport, SlopeFit, SweepRow, build_report, distortion, fit_loglog_slope,
                      generate_heisenberg_ball, sweep_epsilon)
from .multilinear import (DegeneratePrefixError, SingularMapError, gram_determinant, gram_schmidt,
                          polarized_wedge_inner, pseudoinverse, wedge_cauchy_schwarz_check, wedge_norm)
from .nets import (Coloring, Net, PointCloud, calibrate_equivalence, color_net, doubling_profile,
                   greedy_maximal_net, quasimetric, verify_net)
from .oscillator import OscillatorMap, as_vector_map, paste_oscillator, veronese_map, veronese_wedge_exact
from .polynomial import Polynomial, PolynomialMap

__all__ = [name for name in dir() if not name.startswith("_")]

"""Numerical laboratory for circle skew products over hyperbolic toral
automorphisms: su-holonomies and accessibility, the conservative three-case
classification with ergodic-decomposition validation, translation-number
machinery for line actions, and the dynamically incoherent 3-torus example."""

from .circle import (CircleMeasure, MonotoneCircleLift, RotationNumber,
                     Semiconjugacy, invariant_measure, rotation_number,
                     semiconjugacy_to_rotation)
from .classification import (CASE_ACCESSIBLE, CASE_INTEGRABLE, CASE_LAMINATED,
                             ClassificationReport, ComponentResult,
                             DecompositionReport, InconclusiveClassification,
                             ProjectionMap, TrigMonomial, birkhoff_average,
                             birkhoff_average_with_error, build_projection,
                             classification_is_stable, classify, decompose,
                             default_test_family)
from .holonomy import (CompactClassReport, HolonomyMap, SuLoop,
                       accessibility_group, detect_compact_classes,
                       holonomy_derivative, stable_holonomy, su_loop_map,
                       unstable_holonomy)
from .incoherent import (GraphConvergenceError, Incoherent3DSystem,
                         IncoherentParameters, InvariantGraph, LeafCensus,
                         build_3d_system, build_stable_graph,
                         build_unstable_graph, c_series, compact_leaf_census,
                         cone_check, oddness_defect, sample_splitting,
                         slope_at, slope_refinement, u_series)
from .line_actions import (AffineMap, LineAction, MasterData,
                           MeasureDescriptor, UnsupportedInstanceError,
                           commuting_fixed_point, conjugation_scaling,
                           load_action, master_semiconjugacy, parse_action,
                           translation_coset_bijection, translation_number)
from .systems import (ConjugatedFiberFamily, FiberMapFamily, SkewProductSystem,
                      TrigTerm, load_system, make_prototype, make_system,
                      parse_system, perturb, restrict_to_invariant_circle,
                      save_system, step)
from .torus import (MappingTorusPoint, ToralAutomorphism, TorusPoint,
                    canonicalize_coords, check_commuting, check_hyperbolic,
                    compute_splitting, parse_int_matrix)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]

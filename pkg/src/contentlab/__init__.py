"""Bounds on mapping content of sampled Lipschitz maps, seminorm fits and metric trees."""
from .content import (ContentEstimate, CoverWeighting, DPResult, FaceCertificate, content_exact_small,
                      content_upper, faces_lower_bound, kinneberg_check, lifted_cover,
                      mapping_content_upper)
from .dyadic import DyadicCube, Face, RotatedCube, children, face_lattice_points, inscribe_rotated_cube
from .linalg import john_matrix, svd_small
from .metric import (FiniteMetric, GridMap, MapPair, SupCloud, TreeSpace, distance, kuratowski_embed,
                     lipschitz_check, map_distance, postcompose, set_distance)
from .seminorm import (AdaptedBasis, GoodCubeWitness, SeminormFit, adapted_basis, good_cube_search,
                       md_fit_lp, md_fit_matrix, positive_content_certificate, quantdiff_sum)
from .trees import MetricTree, TreeFactorization, compose_factorization, factor_check, validate_tree
from .zoo import zoo

__version__ = "0.1.0"

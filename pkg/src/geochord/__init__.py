"""Orthogonal geodesic chords in concave disks and brake orbits."""

from ._kernels import USE_NUMBA
from .domain import (Domain, DomainError, build_domain, certify_domain,
                     choose_delta1, compute_delta0, compute_K0,
                     concavity_margin, scan_special_geodesics_2d)
from .metric import (MetricField, PotentialWell, christoffel_at,
                     euclidean_metric, conformal_metric, general_metric,
                     integrate_geodesic, jacobi_metric_from_well,
                     oscillator_well, polynomial_well, well_from_descriptor)
from .paths import (ContactSet, DiscretePath, chord_family, contact_set,
                    dist_star, energy_gradient, path_energy, reverse_path,
                    strip_min)
from .flow import (CriticalCurve, FlowConfig, classify, eta_flow,
                   multiplier_profile, v_minus_step, v_plus_escape,
                   CLS_TRIVIAL, CLS_OGC, CLS_WEAK_OGC, CLS_OBSTACLE,
                   CLS_UNCONVERGED)
from .brake import (BrakeOrbit, brake_orbit_from_ogc, build_omega_delta,
                    dist_E_approx, maupertuis_time)
from .minimax import MinimaxReport, dedup_geometric, family_sweep
from .oracle import oscillator_reference, shoot_ogc_2d

__version__ = "0.1.0"

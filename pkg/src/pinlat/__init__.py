"""Standing waves, pinning thresholds and direction-dependent depinning for
bistable lattice reaction-diffusion equations."""
from __future__ import annotations

__version__ = "0.1.0"

from .nonlinearity import NormalFamily, cubic, custom, perturb, validate, family_from_config
from .profile import (
    LatticeProfile,
    FoldResult,
    PinningInterval,
    Side,
    solve_standing_wave,
    damped_flow,
    continue_to_fold,
    pinning_interval,
    planar_map_step,
    trace_manifold,
)
from .spectral import assemble, lambda0, kernel_vector, decay_rate, positive_spectrum_check
from .condition_b import compute_B, reduced_map_iterate, prop52_ordering_check, BReport, Verdict
from .dynamics import Direction, measure_speed, estimate_a_plus, sweep_theta, epsilon_regime_probe

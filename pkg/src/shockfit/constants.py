"""Locked numerical defaults.

Every tolerance, threshold and grid size used by the solvers lives here.
Scenario configs may override the ones exposed under `numerics`, `oracle`
and `checks`; everything else is fixed.
"""

from __future__ import annotations

from typing_extensions import Final

# ── Model predicates ──────────────────────────────────────────────────────────
EQUILIBRIUM_TOL: Final = 1e-10
SLOPE_SWITCH: Final = 1e-8
OLEINIK_SAMPLES: Final = 257
OLEINIK_TIE_TOL: Final = 1e-9

# ── Extension ─────────────────────────────────────────────────────────────────
DELTA_CAP_FACTOR: Final = 10.0
EXTREMA_GRID_POINTS: Final = 20001
DEFAULT_AMPLIFICATION: Final = 1.5

# ── Characteristics ───────────────────────────────────────────────────────────
DEFAULT_DT: Final = 1e-3
DEFAULT_N_CURVES: Final = 2049
MIN_CURVES: Final = 16
BLOWUP_THRESHOLD: Final = 1e6
BLOWUP_TIME_TOL: Final = 1e-6
BLOWUP_SUBSTEPS: Final = 8
BLOWUP_STEP_SLACK: Final = 0.5
BLOWUP_MAX_REFINE: Final = 60
MAX_STORED_SLICES: Final = 500
SAMPLE_WINDOW: Final = 3

# ── Shock tracking ────────────────────────────────────────────────────────────
MERGE_TIME_TOL_FACTOR: Final = 1e-3
RH_RESIDUAL_TOL: Final = 1e-8
PHASE_RATE_MISMATCH: Final = 0.5

# ── Resolvent ─────────────────────────────────────────────────────────────────
RESOLVENT_NODES: Final = 8193
RESOLVENT_MAX_NODES: Final = 10000
RESOLVENT_WIDTH_FACTOR: Final = 40.0
ELLIPTICITY_FLOOR: Final = 1e-12
LAMBDA_ZERO_TOL: Final = 1e-14

# ── Finite-volume oracle ──────────────────────────────────────────────────────
CFL_MAX: Final = 0.9
DEFAULT_CFL: Final = 0.8
MERGE_CELLS: Final = 2
LOCUS_MIN_JUMP: Final = 1e-6
MERGE_FIT_MIN_CELLS: Final = 24
MERGE_FIT_SAMPLES: Final = 40

# ── Rate fitting / reporting ──────────────────────────────────────────────────
VALUE_FLOOR: Final = 1e-14
FIT_MIN_SAMPLES: Final = 8
SUMMARY_SIG_DIGITS: Final = 12

# ── Scenario checks ───────────────────────────────────────────────────────────
FAN_PAD: Final = 10.0                # default fan span beyond data and travel
ORACLE_EDGE_CELLS: Final = 10        # cells dropped at each end of a comparison window
ENVELOPE_WINDOW: Final = (0.5, 5.0)  # times at which the sup envelope is checked
BOUNDED_SLOPE_SLACK: Final = 1e-3
GLUING_STEP: Final = 1e-7
EXTENSION_CHECK_POINTS: Final = 20001
BOUND_SLACK: Final = 1e-12           # relative slack on exact extension bounds
POSITIVITY_SLACK: Final = 1e-10
PSI_CHECK_TOL: Final = 1e-10
SNAPSHOT_SLICES: Final = 11
TV_SAMPLES: Final = 200

# ── Exit codes ────────────────────────────────────────────────────────────────
EXIT_PASS: Final = 0
EXIT_FAIL: Final = 2
EXIT_ERROR: Final = 3

"""Constants for the diqkdsps package."""

ARTIFACT_VERSION = "1.0.0"
"""Version string written into every output file for provenance."""

PROB_TOL = 1e-9
"""Tolerance for normalization and no-signaling checks on behaviors."""

NONLOCAL_TOL = 1e-9
"""Margin above 2 a CHSH symmetrization must reach to count as nonlocal."""

GRAM_TOL = 1e-10
"""Smallest eigenvalue accepted for a Gram matrix (negated)."""

SIGNALING_TOL = 1e-7
"""Signaling tolerated by the moment-problem builder before it refuses a behavior."""

TSIRELSON = 2.0 * 2.0 ** 0.5
"""Maximal quantum CHSH score."""

DEFAULT_L0_KM = 22.0
"""Attenuation length of telecom fiber."""

DEFAULT_NU_HZ = 7.5e7
"""Source repetition rate of a quantum-dot single-photon source."""

DEFAULT_EPS_SOUND = 1e-2
"""Soundness target of the finite-key analysis."""

DEFAULT_EPS_COMPLETE = 1e-6
"""Completeness target of the finite-key analysis."""

DEFAULT_PENALTY_C1 = 236.0
"""Scale of the square-root finite-size penalty k (k = 608 bits at eps_sound = 1e-2)."""

DEFAULT_PENALTY_C2 = 0.0
"""Offset of the square-root finite-size penalty k."""

DEFAULT_PENALTY_C3 = 4.84e5
"""Scale of the constant overhead delta (9.65e6 bits at eps_complete = 1e-6).

Together with c1 this puts the 0.1 bit/s reach near 230 km (ideal source,
n = 3e7 heralded rounds) and 144 km (realistic source, n = 6e7), and leaves
no key for any rate at n <= 1e7 since k / sqrt(n) + delta / n > 1 there.
"""

DEFAULT_ROUNDS_SEMANTICS = "heralded"
"""Round counting of the finite-key analysis: n is the number of heralded rounds."""

SDP_TOL = 1e-7
"""Residual and relative-gap tolerance of the embedded SDP solver."""

SDP_MAX_ITER = 500
"""Iteration cap of the embedded SDP solver."""

GOLDEN_TOL = 1e-4
"""Tolerance of the preprocessing-probability search."""

Q_MAX = 0.5
"""Largest meaningful bit-flip probability."""

Q_SEARCH_MAX = 0.499
"""Upper end of every search over q; at q = 1/2 the key carries no information and the rate is exactly 0."""

Q_GRID_POINTS = 100
"""Grid size of the coarse pass of the preprocessing search."""

POSITIVE_RATE_TOL = 1e-9
"""Rates at or below this value count as no key."""

SIMPLEX_FRACTION = 0.15
"""Edge of the optimizer's initial simplex as a fraction of each coordinate's range."""

BIG_T_BOUNDS = (1e-4, 0.5)
"""Search interval of the tap transmittance when it is optimized."""

KEY_INPUTS = (0, 2)
"""Key-generating inputs (x', y'): Alice's A0 and Bob's B2."""

DEFAULT_Y_SET = (0, 1, 2)
"""Bob inputs whose statistics constrain the entropy relaxation."""

CSV_FLOAT_FORMAT = ".17g"
"""Float format of every CSV cell."""

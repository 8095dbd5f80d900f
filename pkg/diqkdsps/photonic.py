"""Photonic model of the heralded single-photon-source setup.

Four photons take part in every round: 1H and 2V at Alice, 3H and 4V at Bob.
When g2 > 0 a fifth, fully distinguishable photon duplicates the mode of one
of them. Each photon either reaches the central heralding station (CHS), is
kept and detected locally, or is lost. The CHS interferes the two stations on
a splitter of transmittance t and analyses each output in the diagonal basis
(a half-wave plate at 22.5 degrees before an H/V polarizing splitter);
a round is heralded when exactly D2 and D3 click.

Probabilities are computed in first quantization: for every assignment of
photons to destinations and every permutation of photon labels the amplitude
product is weighted by the corresponding Gram-matrix entries of the internal
photon states. Only terms with exactly two photons at the CHS are kept.
"""

import logging
from dataclasses import dataclass, field, replace
from functools import lru_cache
from itertools import permutations, product
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import erfcx

from diqkdsps.constants import GRAM_TOL, KEY_INPUTS, PROB_TOL
from diqkdsps.enums import ErrorCode
from diqkdsps.exceptions import DiqkdError

logger = logging.getLogger(__name__)

ALICE, BOB = 0, 1
H, V = 0, 1

D2, D3, PLUS, MINUS, LOST = 0, 1, 2, 3, 4
"""Destination codes of a photon; PLUS/MINUS are the local detectors of its own station."""

BASE_PHOTONS: Tuple[Tuple[int, int], ...] = ((ALICE, H), (ALICE, V), (BOB, H), (BOB, V))
"""(station, polarization) of photons 1H, 2V, 3H, 4V."""

NO_CLICK, PLUS_ONLY, MINUS_ONLY, BOTH = 0, 1, 2, 3
"""Click classes of a local station."""

HERALD_PATTERN = "D2D3"

FOUR_PHOTON_LABELS = (
    "p_2110", "p_2101", "p_2011", "p_2002",
    "p_2200_SD", "p_2200_DD", "p_2020_SD", "p_2020_DD",
)
FIVE_PHOTON_LABELS = (
    "p_2111", "p_2210_SD", "p_2210_DD", "p_2120_SD", "p_2120_DD",
    "p_2102", "p_2012", "p_2003",
    "p_2201_SD", "p_2201_DD", "p_2021_SD", "p_2021_DD",
    "p_2300_SD", "p_2300_DD", "p_2030_SD", "p_2030_DD",
)
TABLE_LABELS = FOUR_PHOTON_LABELS + FIVE_PHOTON_LABELS
"""Every accepted contribution, four-photon rows first."""

_SQRT_HALF = 2.0 ** -0.5
_ANALYSER = {D2: (_SQRT_HALF, -_SQRT_HALF), D3: (_SQRT_HALF, _SQRT_HALF)}


def _check_unit(name: str, value: float) -> None:
    if not np.isfinite(value) or value < 0.0 or value > 1.0:
        raise DiqkdError(f"{name} must lie in [0, 1], got {value}", ErrorCode.INVALID_PARAMETER)


def _check_nonnegative(name: str, value: float) -> None:
    if not np.isfinite(value) or value < 0.0:
        raise DiqkdError(f"{name} must be finite and >= 0, got {value}", ErrorCode.INVALID_PARAMETER)


@dataclass(frozen=True)
class PhysicalParams:
    """Source, channel and detector parameters of one experiment.

    Attributes:
        eta1: Efficiency from the source to the tap splitter.
        eta2: Efficiency of the local detection arm.
        eta_t: Channel transmission to the CHS.
        big_t: Tap transmittance T toward the CHS.
        small_t: CHS splitter transmittance t.
        gamma: Spontaneous decay rate.
        gamma_d: Pure dephasing rate (same time unit as gamma).
        sigma: Spectral-wandering width (same time unit as gamma).
        g2: Second-order autocorrelation at zero delay.
    """
    eta1: float = 1.0
    eta2: float = 1.0
    eta_t: float = 1.0
    big_t: float = 1e-3
    small_t: float = 0.5
    gamma: float = 1.0
    gamma_d: float = 0.0
    sigma: float = 0.0
    g2: float = 0.0

    def __post_init__(self) -> None:
        for name in ("eta1", "eta2", "eta_t", "big_t", "small_t"):
            _check_unit(name, getattr(self, name))
        if not np.isfinite(self.gamma) or self.gamma <= 0.0:
            raise DiqkdError(f"gamma must be > 0, got {self.gamma}", ErrorCode.INVALID_PARAMETER)
        _check_nonnegative("gamma_d", self.gamma_d)
        _check_nonnegative("sigma", self.sigma)
        _check_nonnegative("g2", self.g2)
        if self.g2 > 0.5:
            raise DiqkdError(f"g2 must lie in [0, 0.5], got {self.g2}", ErrorCode.INVALID_PARAMETER)

    @property
    def eta_l(self) -> float:
        """Total local efficiency eta1 * eta2."""
        return self.eta1 * self.eta2


@dataclass(frozen=True, eq=False)
class OverlapModel:
    """Pairwise overlaps of the photons' internal states.

    Attributes:
        v_alpha: Same-station overlap |alpha_ij|^2.
        v_beta: Cross-station overlap |beta_ij|^2.
        gram: Real Gram matrix of the 4 (or 5) internal states, unit diagonal.
    """
    v_alpha: float
    v_beta: float
    gram: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        _check_unit("v_alpha", self.v_alpha)
        _check_unit("v_beta", self.v_beta)
        gram = np.asarray(self.gram, dtype=float)
        if gram.shape not in ((4, 4), (5, 5)):
            raise DiqkdError(f"Gram matrix must be 4x4 or 5x5, got {gram.shape}", ErrorCode.MODEL_ERROR)
        if not np.allclose(gram, gram.T, atol=GRAM_TOL) or not np.allclose(np.diag(gram), 1.0, atol=GRAM_TOL):
            raise DiqkdError("Gram matrix must be symmetric with unit diagonal", ErrorCode.MODEL_ERROR)
        if np.linalg.eigvalsh(gram).min() < -GRAM_TOL:
            raise DiqkdError("Gram matrix is not positive semidefinite", ErrorCode.MODEL_ERROR)
        if gram.shape == (5, 5) and np.any(np.abs(gram[4, :4]) > GRAM_TOL):
            raise DiqkdError("the extra photon must be fully distinguishable", ErrorCode.MODEL_ERROR)
        gram.setflags(write=False)
        object.__setattr__(self, "gram", gram)

    @property
    def has_extra_photon(self) -> bool:
        return self.gram.shape[0] == 5

    def with_extra_photon(self) -> "OverlapModel":
        """Return the 5x5 version of this model (no-op if already 5x5)."""
        if self.has_extra_photon:
            return self
        gram = np.eye(5)
        gram[:4, :4] = self.gram
        return OverlapModel(self.v_alpha, self.v_beta, gram)


@dataclass(frozen=True)
class MeasurementSettings:
    """Wave-plate angles of Alice's two and Bob's three inputs, in radians."""
    theta_a: Tuple[float, float]
    theta_b: Tuple[float, float, float]

    def __post_init__(self) -> None:
        if len(self.theta_a) != 2 or len(self.theta_b) != 3:
            raise DiqkdError("settings need 2 Alice angles and 3 Bob angles", ErrorCode.INVALID_PARAMETER)
        angles = [float(a) for a in (*self.theta_a, *self.theta_b)]
        if not all(np.isfinite(angles)):
            raise DiqkdError("setting angles must be finite", ErrorCode.INVALID_PARAMETER)
        wrapped = [a % (2.0 * np.pi) for a in angles]
        object.__setattr__(self, "theta_a", tuple(wrapped[:2]))
        object.__setattr__(self, "theta_b", tuple(wrapped[2:]))


@dataclass(frozen=True)
class EventTable:
    """Probability of every accepted contribution, keyed by its table label."""
    entries: Dict[str, float]
    herald_pattern: str = HERALD_PATTERN

    @property
    def total(self) -> float:
        return float(sum(self.entries.values()))


@dataclass(frozen=True, eq=False)
class Behavior:
    """Heralded conditional distribution p(a, b | x, y).

    ``p[a, b, x, y]`` with outcome index 0 for +1 and 1 for -1, x in {0, 1},
    y in {0, 1, 2}. ``p_herald`` is the heralding probability per round.
    """
    p: np.ndarray = field(repr=False)
    p_herald: float = 1.0

    def __post_init__(self) -> None:
        p = np.asarray(self.p, dtype=float)
        if p.shape != (2, 2, 2, 3):
            raise DiqkdError(f"behavior table must have shape (2, 2, 2, 3), got {p.shape}",
                             ErrorCode.INVALID_PARAMETER)
        if p.min() < -PROB_TOL:
            raise DiqkdError("behavior has negative probabilities", ErrorCode.INVALID_PARAMETER)
        if not np.allclose(p.sum(axis=(0, 1)), 1.0, atol=PROB_TOL):
            raise DiqkdError("behavior is not normalized for every (x, y)", ErrorCode.INVALID_PARAMETER)
        p = np.clip(p, 0.0, None)
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    def alice_marginal(self, x: int, y: int) -> np.ndarray:
        return self.p[:, :, x, y].sum(axis=1)

    def bob_marginal(self, x: int, y: int) -> np.ndarray:
        return self.p[:, :, x, y].sum(axis=0)


def visibility_from_dephasing(gamma: float, gamma_d: float) -> float:
    """HOM visibility gamma / (gamma + 2 gamma_d) of photons from the same emitter.

    Examples:
        >>> visibility_from_dephasing(1.0, 0.5)
        0.5
    """
    if not np.isfinite(gamma) or gamma <= 0.0:
        raise DiqkdError(f"gamma must be > 0, got {gamma}", ErrorCode.INVALID_PARAMETER)
    _check_nonnegative("gamma_d", gamma_d)
    return gamma / (gamma + 2.0 * gamma_d)


def cross_visibility(gamma: float, gamma_d: float, sigma: float) -> float:
    """Overlap |beta|^2 of photons from different emitters with spectral wandering.

    Evaluates sqrt(pi/2) (gamma/sigma) exp(x^2) erfc(x) with
    x = (gamma + 2 gamma_d) / (sqrt(2) sigma) through the scaled
    complementary error function, which stays finite as sigma -> 0. At
    sigma = 0 the limit gamma / (gamma + 2 gamma_d) is returned.
    """
    base = visibility_from_dephasing(gamma, gamma_d)
    _check_nonnegative("sigma", sigma)
    if sigma == 0.0:
        return base
    x = (gamma + 2.0 * gamma_d) / (np.sqrt(2.0) * sigma)
    return float(np.sqrt(np.pi / 2.0) * (gamma / sigma) * erfcx(x))


def g2_to_p2(g2: float, p1: float = 1.0) -> float:
    """Two-photon probability P2 = g2 P1^2 / 2, first order in P2."""
    _check_nonnegative("g2", g2)
    if not np.isfinite(p1) or p1 <= 0.0 or p1 > 1.0:
        raise DiqkdError(f"p1 must lie in (0, 1], got {p1}", ErrorCode.INVALID_PARAMETER)
    p2 = g2 * p1 * p1 / 2.0
    # p1 == 1 is the normalized convention: P2 is carved out of P1 to first order.
    if p1 < 1.0 and p2 > 1.0 - p1:
        raise DiqkdError(f"P2 = {p2} exceeds 1 - P1 = {1.0 - p1}", ErrorCode.INVALID_PARAMETER)
    return p2


def g2_from_p2(p1: float, p2: float) -> float:
    """Exact g2 = 2 P2 / (P1 + 2 P2)^2."""
    if p1 + 2.0 * p2 <= 0.0:
        raise DiqkdError("P1 + 2 P2 must be positive", ErrorCode.INVALID_PARAMETER)
    return 2.0 * p2 / (p1 + 2.0 * p2) ** 2


def transmission_efficiency(distance_km: float, l0_km: float = 22.0) -> float:
    """Channel transmission exp(-L / (2 L0)) to a CHS halfway between the parties.

    Args:
        distance_km: Total Alice-Bob separation L in kilometres.
        l0_km: Attenuation length of the fibre.

    Returns:
        The single-arm transmission eta_t in (0, 1].

    Raises:
        DiqkdError: If ``l0_km`` is not positive or ``distance_km`` is negative.

    Examples:
        >>> transmission_efficiency(0.0)
        1.0
        >>> round(transmission_efficiency(44.0), 6)
        0.367879
    """
    if not np.isfinite(l0_km) or l0_km <= 0.0:
        raise DiqkdError(f"L0 must be positive, got {l0_km}", ErrorCode.INVALID_PARAMETER)
    _check_nonnegative("L", distance_km)
    return float(np.exp(-distance_km / (2.0 * l0_km)))


def overlaps_from_visibility(v_alpha: float, v_beta: float, extra_photon: bool = False) -> OverlapModel:
    """Build the default Gram matrix from same- and cross-station visibilities.

    Photons 1 and 2 leave Alice's emitter, 3 and 4 Bob's. Same-emitter pairs
    overlap by sqrt(v_alpha), cross-emitter pairs by sqrt(v_beta).

    Args:
        v_alpha: HOM visibility of two photons from one emitter.
        v_beta: HOM visibility of photons from different emitters.
        extra_photon: Append the distinguishable fifth mode used when g2 > 0.

    Raises:
        DiqkdError: If either visibility lies outside [0, 1].
    """
    _check_unit("v_alpha", v_alpha)
    _check_unit("v_beta", v_beta)
    a, b = np.sqrt(v_alpha), np.sqrt(v_beta)
    gram = np.array([
        [1.0, a, b, b],
        [a, 1.0, b, b],
        [b, b, 1.0, a],
        [b, b, a, 1.0],
    ])
    model = OverlapModel(v_alpha, v_beta, gram)
    return model.with_extra_photon() if extra_photon else model


def default_overlaps(params: PhysicalParams) -> OverlapModel:
    """Overlaps implied by the dephasing and wandering rates of ``params``."""
    v_alpha = visibility_from_dephasing(params.gamma, params.gamma_d)
    v_beta = cross_visibility(params.gamma, params.gamma_d, params.sigma)
    return overlaps_from_visibility(v_alpha, v_beta, extra_photon=params.g2 > 0.0)


def local_efficiency_params(params: PhysicalParams, eta_l: float) -> PhysicalParams:
    """Return ``params`` with eta2 chosen so that eta1 * eta2 = eta_l."""
    _check_unit("eta_l", eta_l)
    if params.eta1 == 0.0 or eta_l > params.eta1:
        raise DiqkdError(f"eta_l = {eta_l} is unreachable with eta1 = {params.eta1}",
                         ErrorCode.INVALID_PARAMETER)
    return replace(params, eta2=eta_l / params.eta1)


# ---------------------------------------------------------------------------
# CHS amplitudes


def chs_amplitude(station: int, pol: int, dest: int, small_t: float) -> float:
    """Amplitude for a photon entering the CHS to reach detector D2 or D3."""
    if station == ALICE:
        port = (np.sqrt(1.0 - small_t), np.sqrt(small_t))
    else:
        port = (-np.sqrt(small_t), np.sqrt(1.0 - small_t))
    out = 0 if dest == D2 else 1
    return float(port[out] * _ANALYSER[dest][pol])


def chs_pair_moment(i: int, j: int, k: int, l: int, small_t: float, overlaps: OverlapModel) -> float:
    """Four-photon CHS moment <O_i O_j O_k^dag O_l^dag> computed from the amplitudes.

    Photon indices are 1-based (1H, 2V, 3H, 4V). The value is the overlap of
    the D2D3-projected two-photon states of pairs (i, j) and (k, l), rescaled
    by the analyser factor 4.
    """
    gram = overlaps.gram

    def assignments(u: int, w: int) -> List[Tuple[int, int, float]]:
        out = []
        for at_d2, at_d3 in ((u, w), (w, u)):
            s2, p2 = BASE_PHOTONS[at_d2 - 1]
            s3, p3 = BASE_PHOTONS[at_d3 - 1]
            amp = chs_amplitude(s2, p2, D2, small_t) * chs_amplitude(s3, p3, D3, small_t)
            out.append((at_d2 - 1, at_d3 - 1, amp))
        return out

    total = 0.0
    for x, y, bra in assignments(i, j):
        for x2, y2, ket in assignments(k, l):
            total += bra * ket * gram[x, x2] * gram[y, y2]
    return 4.0 * total


def chs_moments(small_t: float, overlaps: OverlapModel) -> Dict[str, float]:
    """Closed-form CHS moments for the D2D3 heralding combination.

    The CHS analyser projects each output on the diagonal basis (D2 on
    (H - V)/sqrt 2, D3 on (H + V)/sqrt 2). This is the same measurement as an
    H/V polarizing splitter behind a half-wave plate at 22.5 degrees, so the
    moments below are those of the wave-plate-and-PBS station: the
    same-station pairs cancel for identical photons and the cross-station
    pairs carry the 1 +- |beta|^2 interference terms.

    Keys spell the operator string, e.g. ``"O1O3O1*O4*"`` for
    <O1 O3 O1^dag O4^dag>.

    Raises:
        DiqkdError: INVALID_PARAMETER for t outside [0, 1].

    Examples:
        >>> from diqkdsps.photonic import overlaps_from_visibility
        >>> float(chs_moments(0.5, overlaps_from_visibility(1.0, 1.0))["O1O2O1*O2*"])
        0.0
    """
    _check_unit("small_t", small_t)
    g = overlaps.gram
    a12, a34 = g[0, 1], g[2, 3]
    b13, b14, b23, b24 = g[0, 2], g[0, 3], g[1, 2], g[1, 3]
    tt = 2.0 * small_t * (1.0 - small_t)
    odd = 1.0 - 2.0 * small_t
    return {
        "O1O2O1*O2*": tt * (1.0 - a12 ** 2),
        "O3O4O3*O4*": tt * (1.0 - a34 ** 2),
        "O1O3O1*O3*": 1.0 - tt * (1.0 + b13 ** 2),
        "O1O4O1*O4*": 1.0 - tt * (1.0 - b14 ** 2),
        "O2O3O2*O3*": 1.0 - tt * (1.0 - b23 ** 2),
        "O2O4O2*O4*": 1.0 - tt * (1.0 + b24 ** 2),
        "O1O4O2*O3*": -a12 * a34 + tt * (a12 * a34 - b13 * b24),
        "O1O3O2*O4*": -a12 * a34 + tt * (a12 * a34 + b14 * b23),
        "O1O3O1*O4*": odd * a34,
        "O2O3O2*O4*": odd * a34,
        "O1O4O2*O4*": -odd * a12,
        "O1O3O2*O3*": -odd * a12,
    }


# ---------------------------------------------------------------------------
# Term enumeration


@dataclass(frozen=True)
class _TermStructure:
    direct: np.ndarray    # (terms, photons) destination of photon k under d
    permuted: np.ndarray  # (terms, photons) destination d[perm[k]]
    perm: np.ndarray      # (terms, photons)
    outcome: np.ndarray   # (terms,) 4 * alice_class + bob_class
    label: np.ndarray     # (terms,) index into TABLE_LABELS


def _click_class(dests: Sequence[int]) -> int:
    plus = any(d == PLUS for d in dests)
    minus = any(d == MINUS for d in dests)
    if plus and minus:
        return BOTH
    if plus:
        return PLUS_ONLY
    if minus:
        return MINUS_ONLY
    return NO_CLICK


def _label_index(alice: Sequence[int], bob: Sequence[int], lost: int) -> int:
    label = f"p_2{len(alice)}{len(bob)}{lost}"
    if len(alice) >= 2:
        label += "_DD" if _click_class(alice) == BOTH else "_SD"
    elif len(bob) >= 2:
        label += "_DD" if _click_class(bob) == BOTH else "_SD"
    return TABLE_LABELS.index(label)


@lru_cache(maxsize=None)
def _herald_terms(photons: Tuple[Tuple[int, int], ...], fixed: Tuple[int, ...]) -> _TermStructure:
    n = len(photons)
    direct, permuted, perms, outcome, label = [], [], [], [], []
    for d in product(range(5), repeat=n):
        if d.count(D2) != 1 or d.count(D3) != 1:
            continue
        alice = [d[k] for k in range(n) if photons[k][0] == ALICE and d[k] in (PLUS, MINUS)]
        bob = [d[k] for k in range(n) if photons[k][0] == BOB and d[k] in (PLUS, MINUS)]
        code = 4 * _click_class(alice) + _click_class(bob)
        lab = _label_index(alice, bob, d.count(LOST))
        for perm in permutations(range(n)):
            valid = True
            for k, j in enumerate(perm):
                if j != k and (k in fixed or d[j] == LOST):
                    valid = False
                    break
                if d[j] in (PLUS, MINUS) and photons[j][0] != photons[k][0]:
                    valid = False
                    break
            if not valid:
                continue
            direct.append(d)
            permuted.append(tuple(d[j] for j in perm))
            perms.append(perm)
            outcome.append(code)
            label.append(lab)
    logger.debug("enumerated %d herald terms for %d photons", len(direct), n)
    return _TermStructure(
        direct=np.array(direct, dtype=np.intp),
        permuted=np.array(permuted, dtype=np.intp),
        perm=np.array(perms, dtype=np.intp),
        outcome=np.array(outcome, dtype=np.intp),
        label=np.array(label, dtype=np.intp),
    )


def _scenarios(params: PhysicalParams, overlaps: OverlapModel):
    """Yield (weight, photons, fixed, gram) for the four- and five-photon rounds."""
    p2 = g2_to_p2(params.g2, 1.0)
    if 4.0 * p2 >= 1.0:
        raise DiqkdError(f"g2 = {params.g2} leaves no single-photon weight", ErrorCode.MODEL_ERROR)
    yield 1.0 - 4.0 * p2, BASE_PHOTONS, (), overlaps.gram[:4, :4]
    if p2 > 0.0:
        gram5 = overlaps.with_extra_photon().gram
        for k in range(4):
            yield p2, BASE_PHOTONS + (BASE_PHOTONS[k],), (4,), gram5


def _amplitudes(params: PhysicalParams, photons, theta_a: float, theta_b: float) -> np.ndarray:
    """Per-photon amplitude to each destination for one pair of wave-plate angles."""
    p_chs = params.eta1 * params.eta_t * params.big_t
    p_loc = params.eta1 * params.eta2 * (1.0 - params.big_t)
    chs = np.sqrt(p_chs)
    loc = 1j * np.sqrt(p_loc)
    lost = np.sqrt(max(0.0, 1.0 - p_chs - p_loc))
    amp = np.zeros((len(photons), 5), dtype=complex)
    for k, (station, pol) in enumerate(photons):
        theta = theta_a if station == ALICE else theta_b
        c, s = np.cos(2.0 * theta), np.sin(2.0 * theta)
        rotation = ((c, -s), (s, c))
        amp[k, D2] = chs * chs_amplitude(station, pol, D2, params.small_t)
        amp[k, D3] = chs * chs_amplitude(station, pol, D3, params.small_t)
        amp[k, PLUS] = loc * rotation[0][pol]
        amp[k, MINUS] = loc * rotation[1][pol]
        amp[k, LOST] = lost
    return amp


def _term_values(structure: _TermStructure, amp: np.ndarray, gram: np.ndarray) -> np.ndarray:
    rows = np.arange(amp.shape[0])[None, :]
    left = amp[rows, structure.direct]
    right = np.conj(amp[rows, structure.permuted])
    overlap = np.prod(gram[rows, structure.perm], axis=1)
    return (np.prod(left * right, axis=1) * overlap).real


def _click_table(params: PhysicalParams, overlaps: OverlapModel,
                 theta_a: Sequence[float], theta_b: Sequence[float]) -> np.ndarray:
    """Unnormalized probabilities of the 4x4 click classes for every input pair."""
    table = np.zeros((len(theta_a), len(theta_b), 4, 4))
    for weight, photons, fixed, gram in _scenarios(params, overlaps):
        if weight == 0.0:
            continue
        structure = _herald_terms(photons, fixed)
        for x, ta in enumerate(theta_a):
            for y, tb in enumerate(theta_b):
                values = _term_values(structure, _amplitudes(params, photons, ta, tb), gram)
                table[x, y] += weight * np.bincount(structure.outcome, weights=values, minlength=16).reshape(4, 4)
    return table


def enumerate_events(params: PhysicalParams, overlaps: OverlapModel,
                     settings: Optional[MeasurementSettings] = None,
                     pair: Tuple[int, int] = KEY_INPUTS) -> EventTable:
    """Split the heralding probability into its labeled contributions.

    Labels follow ``p_2lmn``: two photons at the CHS, l detected at Alice, m
    at Bob, n undetected, with an SD/DD tag when a station sees two or more
    photons. The SD/DD split depends on the local bases, so it is evaluated
    at input pair ``pair`` of ``settings`` (computational basis if None).
    """
    theta_a = settings.theta_a[pair[0]] if settings is not None else 0.0
    theta_b = settings.theta_b[pair[1]] if settings is not None else 0.0
    totals = np.zeros(len(TABLE_LABELS))
    for weight, photons, fixed, gram in _scenarios(params, overlaps):
        if weight == 0.0:
            continue
        structure = _herald_terms(photons, fixed)
        values = _term_values(structure, _amplitudes(params, photons, theta_a, theta_b), gram)
        totals += weight * np.bincount(structure.label, weights=values, minlength=len(TABLE_LABELS))
    entries = {label: max(0.0, float(v)) for label, v in zip(TABLE_LABELS, totals)}
    return EventTable(entries=entries)


def heralding_probability(params: PhysicalParams, overlaps: OverlapModel) -> float:
    """Probability per round that the CHS announces D2D3.

    One photon from each station has to reach the CHS, so the result falls
    off as T^2 eta_t^2 in the low-transmission regime. The value does not
    depend on the measurement settings.

    Args:
        params: Source, channel and detector parameters.
        overlaps: Photon overlap model.

    Returns:
        P_h, clipped below at zero.
    """
    return max(0.0, float(_click_table(params, overlaps, (0.0,), (0.0,)).sum()))


def behavior_from_clicks(clicks: np.ndarray, p_herald: float) -> Behavior:
    """Coarse-grain click classes to binary outcomes and normalize.

    Only a lone click of the minus detector gives -1; no click and clicks in
    both detectors are assigned +1.
    """
    binary = np.zeros((4, 2))
    binary[:, 0] = 1.0
    binary[MINUS_ONLY] = (0.0, 1.0)
    p = np.einsum("xyij,ia,jb->abxy", clicks, binary, binary) / p_herald
    return Behavior(p=p, p_herald=p_herald)


def behavior(params: PhysicalParams, overlaps: OverlapModel, settings: MeasurementSettings) -> Behavior:
    """Heralded behavior p(a, b | x, y) for the given wave-plate settings.

    Args:
        params: Source, channel and detector parameters.
        overlaps: Photon overlap model, four or five modes.
        settings: Wave-plate angles for Alice's and Bob's inputs.

    Returns:
        A normalized :class:`Behavior` carrying the heralding probability.

    Raises:
        DiqkdError: With ``MODEL_ERROR`` when the CHS never heralds.
    """
    clicks = _click_table(params, overlaps, settings.theta_a, settings.theta_b)
    p_herald = float(clicks[0, 0].sum())
    if p_herald <= 0.0:
        raise DiqkdError("the CHS never heralds with these parameters", ErrorCode.MODEL_ERROR)
    return behavior_from_clicks(clicks, p_herald)

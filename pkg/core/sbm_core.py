"""Data model for the covariate SBM and a reproducible synthetic generator."""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.spatial.distance import cdist
from scipy.special import expit

from config.settings import ADJACENCY_BLOCK_ROWS, PROBABILITY_TOLERANCE, SIMPLEX_TOLERANCE
from core.errors import ModelSpecError
from utils.helpers import membership_matrix, rng_stream

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Region:
    """Axis-aligned box S inside the covariate support."""
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]

    def __post_init__(self):
        if len(self.lower) != len(self.upper) or not self.lower:
            raise ModelSpecError("region bounds must be non-empty and of equal length")
        if any(hi <= lo for lo, hi in zip(self.lower, self.upper)):
            raise ModelSpecError(f"degenerate region {self.lower} -> {self.upper}")

    @classmethod
    def unit_cube(cls, d: int) -> 'Region':
        return cls(tuple([0.0] * d), tuple([1.0] * d))

    @property
    def d(self) -> int:
        return len(self.lower)

    @property
    def sides(self) -> np.ndarray:
        return np.asarray(self.upper, dtype=float) - np.asarray(self.lower, dtype=float)

    @property
    def volume(self) -> float:
        return float(np.prod(self.sides))

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.sides))

    def contains(self, x: np.ndarray) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= np.asarray(self.lower)) and np.all(x <= np.asarray(self.upper)))

    def normalize(self, X: np.ndarray) -> np.ndarray:
        """Map points of S onto the unit cube."""
        return (np.atleast_2d(X) - np.asarray(self.lower)) / self.sides


# ---------------------------------------------------------------------------
# Edge-probability fields
# ---------------------------------------------------------------------------

class EdgeField:
    """Base class for B: (x, x') -> G x G matrix of edge probabilities."""

    name = 'abstract'

    def __init__(self, G: int, d: int):
        self.G = int(G)
        self.d = int(d)

    def block(self, X1: np.ndarray, X2: np.ndarray) -> np.ndarray:
        """B evaluated at every (X1[a], X2[b]); shape (n1, n2, G, G)."""
        raise NotImplementedError

    def pairwise(self, X1: np.ndarray, g1: np.ndarray, X2: np.ndarray, g2: np.ndarray) -> np.ndarray:
        """Entries B_{g1[a] g2[b]}(X1[a], X2[b]); shape (n1, n2)."""
        full = self.block(X1, X2)
        g1 = np.asarray(g1, dtype=np.int64)
        g2 = np.asarray(g2, dtype=np.int64)
        return full[np.arange(len(g1))[:, None], np.arange(len(g2))[None, :], g1[:, None], g2[None, :]]

    def matrix(self, x: np.ndarray, xp: np.ndarray) -> np.ndarray:
        """B(x, x') as a G x G matrix."""
        x = np.asarray(x, dtype=float).reshape(1, -1)
        xp = np.asarray(xp, dtype=float).reshape(1, -1)
        return self.block(x, xp)[0, 0]


class PlantedPartitionField(EdgeField):
    """Constant field: rho * p on the diagonal, rho * q off the diagonal."""

    name = 'planted-partition'

    def __init__(self, G: int, d: int, p: float, q: float, rho: float = 1.0):
        super().__init__(G, d)
        self.p, self.q, self.rho = float(p), float(q), float(rho)
        for label, value in (('p', self.p), ('q', self.q), ('rho', self.rho)):
            if value < 0:
                raise ModelSpecError(f"planted-partition parameter {label}={value} is negative")
        if self.rho * max(self.p, self.q) > 1.0:
            raise ModelSpecError(
                f"planted-partition values rho*p={self.rho * self.p}, rho*q={self.rho * self.q} exceed 1")
        self._base = self.rho * (self.q * np.ones((self.G, self.G)) + (self.p - self.q) * np.eye(self.G))

    def block(self, X1, X2):
        n1, n2 = len(np.atleast_2d(X1)), len(np.atleast_2d(X2))
        return np.broadcast_to(self._base, (n1, n2, self.G, self.G)).copy()

    def pairwise(self, X1, g1, X2, g2):
        same = np.asarray(g1)[:, None] == np.asarray(g2)[None, :]
        return np.where(same, self.rho * self.p, self.rho * self.q)


class LogisticHomophilyField(EdgeField):
    """B_gh(x, x') = rho * sigmoid(alpha_gh - beta * ||x - x'||)."""

    name = 'logistic-homophily'

    def __init__(self, G: int, d: int, alpha: np.ndarray, beta: float, rho: float = 1.0):
        super().__init__(G, d)
        self.alpha = np.asarray(alpha, dtype=float)
        self.beta = float(beta)
        self.rho = float(rho)
        if self.alpha.shape != (self.G, self.G):
            raise ModelSpecError(f"alpha must be {self.G}x{self.G}, got shape {self.alpha.shape}")
        if not np.allclose(self.alpha, self.alpha.T):
            raise ModelSpecError("alpha must be symmetric so that B_gh(x,x') = B_hg(x',x)")
        if not 0.0 <= self.rho <= 1.0:
            raise ModelSpecError(f"rho={self.rho} puts logistic-homophily values outside [0,1]")

    def block(self, X1, X2):
        dist = cdist(np.atleast_2d(X1), np.atleast_2d(X2))
        return self.rho * expit(self.alpha[None, None, :, :] - self.beta * dist[:, :, None, None])

    def pairwise(self, X1, g1, X2, g2):
        dist = cdist(np.atleast_2d(X1), np.atleast_2d(X2))
        alpha = self.alpha[np.asarray(g1)[:, None], np.asarray(g2)[None, :]]
        return self.rho * expit(alpha - self.beta * dist)


class CallableEdgeField(EdgeField):
    """User-supplied field, symmetrized as (B(x,x') + B(x',x)^T) / 2."""

    name = 'callable'

    def __init__(self, func: Callable[[np.ndarray, np.ndarray], np.ndarray], G: int, d: int):
        super().__init__(G, d)
        self.func = func
        self._warned = False

    def _symmetric(self, x, xp):
        forward = np.asarray(self.func(x, xp), dtype=float)
        backward = np.asarray(self.func(xp, x), dtype=float).T
        if not self._warned and not np.allclose(forward, backward):
            logger.warning("user edge field is not symmetric; using (B(x,x') + B(x',x)^T)/2")
            self._warned = True
        return (forward + backward) / 2.0

    def block(self, X1, X2):
        X1, X2 = np.atleast_2d(X1), np.atleast_2d(X2)
        out = np.empty((len(X1), len(X2), self.G, self.G))
        for a, x in enumerate(X1):
            for b, xp in enumerate(X2):
                out[a, b] = self._symmetric(x, xp)
        return out


# ---------------------------------------------------------------------------
# Community-probability fields
# ---------------------------------------------------------------------------

class PiField:
    """Base class for pi: x -> probability vector over G communities."""

    name = 'abstract'

    def __init__(self, G: int):
        self.G = int(G)

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        """pi at every row of X; shape (n, G)."""
        raise NotImplementedError

    def uniform_mean(self) -> np.ndarray:
        """E[pi(x)] for x uniform on the region."""
        raise NotImplementedError

    def range_on_region(self) -> Tuple[np.ndarray, np.ndarray]:
        """Per-community (min, max) of pi over the region."""
        raise NotImplementedError

    lipschitz = 0.0


class ConstantPiField(PiField):
    name = 'constant'

    def __init__(self, weights):
        weights = np.asarray(weights, dtype=float)
        super().__init__(weights.size)
        _check_simplex(weights[None, :], context='constant pi weights')
        self.weights = weights
        self.lipschitz = 0.0

    def evaluate(self, X):
        return np.tile(self.weights, (len(np.atleast_2d(X)), 1))

    def uniform_mean(self):
        return self.weights.copy()

    def range_on_region(self):
        return self.weights.copy(), self.weights.copy()


class LinearPiField(PiField):
    """pi(x) = intercept + slope * u(x), u the mean of box-normalized coordinates."""

    name = 'linear'

    def __init__(self, intercept, slope, region: Region):
        intercept = np.asarray(intercept, dtype=float)
        slope = np.asarray(slope, dtype=float)
        if intercept.shape != slope.shape:
            raise ModelSpecError("linear pi needs intercept and slope of equal length")
        super().__init__(intercept.size)
        if abs(slope.sum()) > SIMPLEX_TOLERANCE:
            raise ModelSpecError(f"linear pi slopes must sum to 0, got {slope.sum()}")
        self.intercept, self.slope, self.region = intercept, slope, region
        low, high = self.range_on_region()
        if np.any(low < 0) or np.any(high > 1):
            raise ModelSpecError("linear pi leaves [0,1] somewhere on the region")
        weights = 1.0 / (region.d * region.sides)
        self.lipschitz = float(np.max(np.abs(slope)) * np.linalg.norm(weights))

    def evaluate(self, X):
        u = self.region.normalize(X).mean(axis=1)
        return self.intercept[None, :] + u[:, None] * self.slope[None, :]

    def uniform_mean(self):
        return self.intercept + 0.5 * self.slope

    def range_on_region(self):
        ends = np.vstack([self.intercept, self.intercept + self.slope])
        return ends.min(axis=0), ends.max(axis=0)


def _check_simplex(pi: np.ndarray, context: str) -> None:
    if np.any(pi < -SIMPLEX_TOLERANCE):
        row = int(np.argwhere(pi < -SIMPLEX_TOLERANCE)[0, 0])
        raise ModelSpecError(f"{context}: negative probability at row {row}: {pi[row].tolist()}")
    sums = pi.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > SIMPLEX_TOLERANCE)
    if bad.size:
        row = int(bad[0])
        raise ModelSpecError(f"{context}: row {row} sums to {sums[row]!r}, not 1")


# ---------------------------------------------------------------------------
# Covariate law and constants
# ---------------------------------------------------------------------------

class UniformCovariateLaw:
    """x(i) uniform on the region S."""

    name = 'uniform'

    def __init__(self, region: Region):
        self.region = region

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(np.asarray(self.region.lower), np.asarray(self.region.upper),
                           size=(n, self.region.d))

    def density(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        inside = np.all((X >= np.asarray(self.region.lower)) & (X <= np.asarray(self.region.upper)), axis=1)
        return np.where(inside, 1.0 / self.region.volume, 0.0)


@dataclass
class ModelConstants:
    """Declared constants of the assumptions; None means not supplied."""
    c: Optional[float] = None
    T: Optional[float] = None
    b_X: Optional[float] = None
    U_X: Optional[float] = None
    b_bar_X: Optional[float] = None
    U_bar_X: Optional[float] = None
    l_B: Optional[float] = None
    l_B_raw: Optional[float] = None
    l_pi: Optional[float] = None
    Delta: Optional[float] = None
    pi_min: Optional[float] = None
    rho: float = 1.0

    REQUIRED = ('c', 'T', 'b_X', 'U_X', 'U_bar_X', 'l_B', 'l_pi', 'Delta', 'pi_min')

    def missing(self) -> List[str]:
        return [name for name in self.REQUIRED if getattr(self, name) is None]

    def as_dict(self) -> Dict[str, Optional[float]]:
        return {name: getattr(self, name) for name in
                ('c', 'T', 'b_X', 'U_X', 'b_bar_X', 'U_bar_X', 'l_B', 'l_B_raw', 'l_pi', 'Delta', 'pi_min', 'rho')}


@dataclass
class FieldPair:
    """Output of the built-in field catalog: fields plus their true constants."""
    B: EdgeField
    pi: PiField
    l_B: float
    l_B_raw: float
    Delta: float
    l_pi: float
    rho: float


@dataclass
class ModelSpec:
    """Full generative specification of a covariate SBM."""
    G: int
    d: int
    B: EdgeField
    pi: PiField
    region: Region
    covariate_law: UniformCovariateLaw
    constants: ModelConstants = field(default_factory=ModelConstants)
    config: Optional['ModelConfig'] = None

    @property
    def rho(self) -> float:
        return self.constants.rho

    @property
    def bounds_enabled(self) -> bool:
        """Bound evaluation needs every declared constant."""
        return not self.constants.missing()


def uniform_law_constants(pi: PiField, region: Region) -> Dict[str, float]:
    """Assumption constants for uniform covariates and a catalog pi field.

    f(x|g) = pi_g(x) / (vol(S) * E[pi_g]); the ranges of pi over S give the
    density envelopes exactly for constant and linear pi.
    """
    mean = pi.uniform_mean()
    low, high = pi.range_on_region()
    vol = region.volume
    with np.errstate(divide='ignore', invalid='ignore'):
        f_low = np.where(mean > 0, low / (vol * mean), 0.0)
        f_high = np.where(mean > 0, high / (vol * mean), np.inf)
    return {
        'c': 2.0 ** (-region.d),
        'T': float(region.sides.min()),
        'b_X': float(f_low.min()),
        'U_X': float(f_high.min()),
        'b_bar_X': float(f_low.max()),
        'U_bar_X': float(f_high.max()),
        'pi_min': float(mean.min()),
    }


# ---------------------------------------------------------------------------
# Built-in field catalog
# ---------------------------------------------------------------------------

FIELD_CATALOG = ('planted-partition', 'logistic-homophily')


def _max_sigmoid_slope(low: float, high: float) -> float:
    """max of sigmoid'(z) for z in [low, high]."""
    z = min(max(0.0, low), high)
    s = expit(z)
    return float(s * (1.0 - s))


def _build_pi(pi_params: Optional[Dict[str, Any]], G: int, region: Region) -> PiField:
    pi_params = dict(pi_params or {})
    kind = pi_params.get('kind', 'constant')
    if kind == 'constant':
        weights = pi_params.get('weights') or [1.0 / G] * G
        field_ = ConstantPiField(weights)
    elif kind == 'linear':
        field_ = LinearPiField(pi_params['intercept'], pi_params['slope'], region)
    else:
        raise ModelSpecError(f"unknown pi kind {kind!r}; expected 'constant' or 'linear'")
    if field_.G != G:
        raise ModelSpecError(f"pi field has {field_.G} communities, model has G={G}")
    return field_


def builtin_fields(name: str, params: Dict[str, Any], region: Optional[Region] = None) -> FieldPair:
    """Build a catalog (B, pi) pair and report its true constants.

    Catalog:
      planted-partition  params p, q, rho, G
      logistic-homophily params alpha (G x G) or alpha_in/alpha_out, beta, rho, G
    Both accept 'pi' = {'kind': 'constant', 'weights': [...]} or
    {'kind': 'linear', 'intercept': [...], 'slope': [...]}.
    """
    key = name.replace('_', '-').lower()
    if key not in FIELD_CATALOG:
        raise ModelSpecError(f"unknown field {name!r}; catalog: {', '.join(FIELD_CATALOG)}")
    params = dict(params or {})
    G = int(params.get('G', 2))
    region = region or Region.unit_cube(int(params.get('d', 1)))
    d = region.d
    rho = float(params.get('rho', 1.0))

    if key == 'planted-partition':
        B = PlantedPartitionField(G, d, params['p'], params['q'], rho)
        l_B = l_B_raw = 0.0
        Delta = rho * (max(B.p, B.q) if G > 1 else B.p)
    else:
        if 'alpha' in params:
            alpha = np.asarray(params['alpha'], dtype=float)
            if alpha.ndim == 0:
                alpha = np.full((G, G), float(alpha))
        else:
            a_in, a_out = float(params.get('alpha_in', 0.0)), float(params.get('alpha_out', 0.0))
            alpha = np.full((G, G), a_out) + (a_in - a_out) * np.eye(G)
        beta = float(params.get('beta', 0.0))
        B = LogisticHomophilyField(G, d, alpha, beta, rho)
        diam = region.diameter
        slopes = [_max_sigmoid_slope(min(a, a - beta * diam), max(a, a - beta * diam)) for a in alpha.ravel()]
        l_B_raw = abs(beta) * np.sqrt(2.0) * max(slopes)
        l_B = rho * l_B_raw
        ends = [expit(alpha - beta * dist) for dist in (0.0, diam)]
        Delta = rho * min(float(end.max(axis=1).min()) for end in ends)

    pi = _build_pi(params.get('pi'), G, region)
    return FieldPair(B=B, pi=pi, l_B=float(l_B), l_B_raw=float(l_B_raw),
                     Delta=float(Delta), l_pi=float(pi.lipschitz), rho=rho)


# ---------------------------------------------------------------------------
# model.json configuration
# ---------------------------------------------------------------------------

class FieldConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')
    name: str
    params: Dict[str, Any] = Field(default_factory=dict)


class PiConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')
    kind: Literal['constant', 'linear'] = 'constant'
    weights: Optional[List[float]] = None
    intercept: Optional[List[float]] = None
    slope: Optional[List[float]] = None


class CovariateLawConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')
    name: Literal['uniform'] = 'uniform'


class ModelConfig(BaseModel):
    """Serializable description of a ModelSpec (model.json)."""
    model_config = ConfigDict(extra='forbid')

    G: int = Field(ge=1)
    d: int = Field(default=1, ge=1)
    lower: Optional[List[float]] = None
    upper: Optional[List[float]] = None
    field: FieldConfig
    pi: PiConfig = Field(default_factory=PiConfig)
    covariate_law: CovariateLawConfig = Field(default_factory=CovariateLawConfig)
    rho: float = Field(default=1.0, ge=0.0)
    constants: Dict[str, float] = Field(default_factory=dict)

    @field_validator('constants')
    @classmethod
    def _known_constants(cls, value):
        allowed = set(ModelConstants().as_dict())
        unknown = set(value) - allowed
        if unknown:
            raise ValueError(f"unknown constants: {sorted(unknown)}")
        return value

    @model_validator(mode='after')
    def _region_dimension(self):
        for bound in (self.lower, self.upper):
            if bound is not None and len(bound) != self.d:
                raise ValueError(f"region bounds must have length d={self.d}")
        return self

    def region(self) -> Region:
        lower = self.lower if self.lower is not None else [0.0] * self.d
        upper = self.upper if self.upper is not None else [1.0] * self.d
        return Region(tuple(float(v) for v in lower), tuple(float(v) for v in upper))

    def build(self) -> ModelSpec:
        region = self.region()
        params = dict(self.field.params)
        params.update({'G': self.G, 'rho': self.rho,
                       'pi': self.pi.model_dump(exclude_none=True)})
        pair = builtin_fields(self.field.name, params, region)
        law = UniformCovariateLaw(region)
        derived = uniform_law_constants(pair.pi, region)
        derived.update({'l_B': pair.l_B, 'l_B_raw': pair.l_B_raw, 'l_pi': pair.l_pi,
                        'Delta': pair.Delta, 'rho': pair.rho})
        derived.update(self.constants)
        constants = ModelConstants(**derived)
        return ModelSpec(G=self.G, d=self.d, B=pair.B, pi=pair.pi, region=region,
                         covariate_law=law, constants=constants, config=self)


def model_from_fields(B: EdgeField, pi: PiField, region: Region,
                      constants: Optional[Dict[str, float]] = None) -> ModelSpec:
    """ModelSpec around user fields; bounds stay disabled unless constants are given."""
    if B.G != pi.G or B.d != region.d:
        raise ModelSpecError("B, pi and region disagree on G or d")
    values = dict(constants or {})
    return ModelSpec(G=B.G, d=region.d, B=B, pi=pi, region=region,
                     covariate_law=UniformCovariateLaw(region),
                     constants=ModelConstants(**values))


# ---------------------------------------------------------------------------
# Network and sampling
# ---------------------------------------------------------------------------

@dataclass
class Network:
    """Observed covariates and adjacency, plus hidden labels when known."""
    X: np.ndarray
    A: np.ndarray
    g: Optional[np.ndarray] = None
    G: Optional[int] = None

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        if self.X.shape[0] == 1 and np.asarray(self.A).shape[0] != 1:
            self.X = self.X.T
        self.A = np.asarray(self.A, dtype=np.uint8)
        if self.g is not None:
            self.g = np.asarray(self.g, dtype=np.int64)
            if self.G is None:
                self.G = int(self.g.max()) + 1 if self.g.size else 1

    @property
    def N(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def labels_known(self) -> bool:
        return self.g is not None

    @property
    def Theta(self) -> np.ndarray:
        if self.g is None:
            raise ModelSpecError("network has no hidden labels")
        return membership_matrix(self.g, self.G)

    def validate(self) -> None:
        A = self.A
        if A.shape != (self.N, self.N):
            raise ModelSpecError(f"adjacency shape {A.shape} does not match N={self.N}")
        if not np.array_equal(A, A.T):
            raise ModelSpecError("adjacency is not symmetric")
        if np.any(np.diag(A) != 0):
            raise ModelSpecError("adjacency has self-loops")
        if np.any(A > 1):
            raise ModelSpecError("adjacency is not binary")
        if self.g is not None and (self.g.size != self.N or np.any(self.g < 0) or np.any(self.g >= self.G)):
            raise ModelSpecError("labels do not match N or lie outside [G]")


def sample_communities(spec: ModelSpec, X: np.ndarray, seed: int,
                       replication: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """Draw g(i) independently with P(g(i) = h) = pi_h(x(i))."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    pi = spec.pi.evaluate(X)
    _check_simplex(pi, context='pi field')
    rng = rng_stream(seed, replication, 'communities')
    u = rng.random(X.shape[0])
    cumulative = np.cumsum(pi, axis=1)
    labels = np.minimum((u[:, None] >= cumulative).sum(axis=1), spec.G - 1).astype(np.int64)
    return labels, membership_matrix(labels, spec.G)


def sample_adjacency(spec: ModelSpec, X: np.ndarray, g: np.ndarray, seed: int,
                     replication: int = 0, noiseless: bool = False) -> np.ndarray:
    """Sample the upper triangle of A, mirror it, and leave a zero diagonal.

    With noiseless=True entries are B rounded (B >= 1/2 gives an edge).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    g = np.asarray(g, dtype=np.int64)
    N = X.shape[0]
    if np.any(g < 0) or np.any(g >= spec.G):
        raise ModelSpecError(f"labels must lie in [0, {spec.G - 1}]")
    rng = rng_stream(seed, replication, 'adjacency')
    upper = np.zeros((N, N), dtype=np.uint8)
    for start in range(0, N, ADJACENCY_BLOCK_ROWS):
        stop = min(start + ADJACENCY_BLOCK_ROWS, N)
        P = spec.B.pairwise(X[start:stop], g[start:stop], X[start:], g[start:])
        bad = (P < -PROBABILITY_TOLERANCE) | (P > 1 + PROBABILITY_TOLERANCE) | np.isnan(P)
        if np.any(bad):
            a, b = np.argwhere(bad)[0]
            raise ModelSpecError(
                f"B value {P[a, b]!r} outside [0,1] at pair ({start + a}, {start + b})")
        if noiseless:
            draws = P >= 0.5
        else:
            draws = rng.random(P.shape) < P
        rows = np.arange(stop - start)[:, None]
        cols = np.arange(N - start)[None, :]
        upper[start:stop, start:] = (draws & (cols > rows)).astype(np.uint8)
    return upper + upper.T


def generate_network(spec: ModelSpec, N: int, seed: int, replication: int = 0,
                     noiseless: bool = False) -> Network:
    """Covariates, communities and edges drawn on separate purpose streams."""
    if N < 1:
        raise ModelSpecError(f"N must be >= 1, got {N}")
    X = spec.covariate_law.sample(rng_stream(seed, replication, 'covariates'), N)
    g, _ = sample_communities(spec, X, seed, replication)
    A = sample_adjacency(spec, X, g, seed, replication, noiseless=noiseless)
    logger.debug("generated network N=%d edges=%d (seed=%d, rep=%d)", N, int(A.sum() // 2), seed, replication)
    return Network(X=X, A=A, g=g, G=spec.G)


# ---------------------------------------------------------------------------
# Spot checks of declared constants
# ---------------------------------------------------------------------------

def empirical_lipschitz(B: EdgeField, grid: np.ndarray) -> float:
    """Largest finite-difference ratio of B over neighbouring pairs of a grid.

    grid is an ordered (m, d) array; pairs (a, b) are compared with
    (a+1, b), (a, b+1), (a+1, b+1) and (a+1, b-1), with distances measured on
    the concatenated 2d-vector.
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    values = B.block(grid, grid)
    best = 0.0
    for da, db in ((1, 0), (0, 1), (1, 1), (1, -1)):
        m = len(grid)
        a0 = np.arange(m - da)
        b0 = np.arange(max(0, -db), m - max(0, db))
        first = values[a0[:, None], b0[None, :]]
        second = values[(a0 + da)[:, None], (b0 + db)[None, :]]
        step = np.sqrt(np.sum((grid[a0 + da] - grid[a0]) ** 2, axis=1)[:, None]
                       + np.sum((grid[b0 + db] - grid[b0]) ** 2, axis=1)[None, :])
        diff = np.abs(second - first).max(axis=(2, 3))
        with np.errstate(divide='ignore', invalid='ignore'):
            ratio = np.where(step > 0, diff / step, 0.0)
        if ratio.size:
            best = max(best, float(ratio.max()))
    return best


def check_delta(B: EdgeField, grid: np.ndarray) -> float:
    """min over grid pairs of min_g max_h B_gh(x, x')."""
    values = B.block(grid, grid)
    return float(values.max(axis=3).min())

"""Distribution registry: log densities, simulation and parameterizations.

Every distribution has one canonical parameterization used at run time
(``dnorm(mean, sd)``, ``dgamma(shape, rate)``, ...). Alternative
parameterizations are written as model-language expressions over the
declared parameter names, e.g. ``rate = 1/scale``; the graph compiler
splices those expressions into the model so the transformation becomes a
lifted node.

BUGS compatibility: a positional ``dnorm(mu, tau)`` means mean and
*precision*, not standard deviation. Positional arguments always follow
``DistributionSpec.positional``, which for ``dnorm`` is ``(mean, tau)``.
"""

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.special import betaln, gammaln, xlog1py, xlogy

from .errors import DistributionError
from .expressions import evaluate
from .parser import parse_expression

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class Support(str, enum.Enum):
    REAL = "real"
    POSITIVE = "positive"
    UNIT_INTERVAL = "unit_interval"
    BOUNDED = "bounded"
    NONNEGATIVE_INTEGER = "nonnegative_integer"
    BOUNDED_INTEGER = "bounded_integer"
    SIMPLEX = "simplex"
    REAL_VECTOR = "real_vector"


@dataclass(frozen=True)
class Parameterization:
    """A named parameter set and the expressions mapping it to canonical form.

    ``transforms`` holds ``(canonical_name, expression)`` pairs; canonical
    parameters that are also given directly need no entry.
    """

    names: Tuple[str, ...]
    transforms: Tuple[Tuple[str, str], ...] = ()

    def transform_for(self, canonical_name: str) -> Optional[str]:
        for name, expression in self.transforms:
            if name == canonical_name:
                return expression
        return None


@dataclass(frozen=True)
class DistributionSpec:
    name: str
    canonical: Tuple[str, ...]
    alternatives: Tuple[Parameterization, ...] = ()
    positional: Optional[Tuple[str, ...]] = None
    support: Support = Support.REAL
    discrete: bool = False
    multivariate: bool = False
    valid: Optional[Callable[..., object]] = field(default=None, compare=False)

    @property
    def positional_names(self) -> Tuple[str, ...]:
        return self.positional or self.canonical

    @property
    def parameterizations(self) -> Tuple[Parameterization, ...]:
        return (Parameterization(self.canonical),) + self.alternatives


@dataclass(frozen=True)
class Distribution:
    """A registered distribution: its spec plus density and sampler."""

    spec: DistributionSpec
    log_density_fn: Callable[..., object]
    simulate_fn: Callable[..., object]

    @property
    def name(self) -> str:
        return self.spec.name

    def log_prob(self, value, params: Sequence):
        """Log density under the graph-execution policy.

        Invalid parameters give -inf instead of an error so that samplers
        reject proposals that move a parameter out of range. Works on
        scalars and on arrays (one entry per sample).
        """
        if self.spec.valid is None:
            return self.log_density_fn(value, *params)
        ok = self.spec.valid(*params)
        if np.ndim(ok) == 0:
            if not ok:
                return -math.inf
            return self.log_density_fn(value, *params)
        return np.where(ok, self.log_density_fn(value, *params), -np.inf)


# ---------------------------------------------------------------------------
# Built-in densities. Each accepts scalars or broadcastable arrays.
# ---------------------------------------------------------------------------


def _scalar(result):
    return float(result) if np.ndim(result) == 0 else result


def _is_integer(x):
    return np.floor(x) == x


def _dnorm(x, mean, sd):
    z = (x - mean) / sd
    return _scalar(-_LOG_SQRT_2PI - np.log(sd) - 0.5 * z * z)


def _dgamma(x, shape, rate):
    lp = xlogy(shape - 1.0, x) + shape * np.log(rate) - rate * x - gammaln(shape)
    return _scalar(np.where(x >= 0, lp, -np.inf))


def _dexp(x, rate):
    return _scalar(np.where(x >= 0, np.log(rate) - rate * x, -np.inf))


def _dpois(x, lam):
    lp = xlogy(x, lam) - lam - gammaln(x + 1.0)
    return _scalar(np.where((x >= 0) & _is_integer(x), lp, -np.inf))


def _dbin(x, prob, size):
    lp = (
        gammaln(size + 1.0)
        - gammaln(x + 1.0)
        - gammaln(size - x + 1.0)
        + xlogy(x, prob)
        + xlog1py(size - x, -prob)
    )
    return _scalar(np.where((x >= 0) & (x <= size) & _is_integer(x), lp, -np.inf))


def _dbeta(x, a, b):
    lp = xlogy(a - 1.0, x) + xlog1py(b - 1.0, -x) - betaln(a, b)
    return _scalar(np.where((x >= 0) & (x <= 1), lp, -np.inf))


def _dunif(x, lower, upper):
    inside = (x >= lower) & (x <= upper)
    return _scalar(np.where(inside, -np.log(upper - lower), -np.inf))


def _dlnorm(x, meanlog, sdlog):
    logx = np.log(np.where(x > 0, x, 1.0))
    z = (logx - meanlog) / sdlog
    lp = -_LOG_SQRT_2PI - np.log(sdlog) - logx - 0.5 * z * z
    return _scalar(np.where(x > 0, lp, -np.inf))


def _dnegbin(x, prob, size):
    lp = (
        gammaln(x + size)
        - gammaln(size)
        - gammaln(x + 1.0)
        + size * np.log(prob)
        + xlog1py(x, -prob)
    )
    return _scalar(np.where((x >= 0) & _is_integer(x), lp, -np.inf))


def _rbin(rng, prob, size):
    return float(rng.binomial(int(size), prob))


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------


class DistributionRegistry:
    """Name -> Distribution map, extensible with user distributions."""

    def __init__(self, distributions: Iterable[Distribution] = ()):
        self._distributions: Dict[str, Distribution] = {}
        for distribution in distributions:
            self._distributions[distribution.name] = distribution

    def register(
        self,
        spec: DistributionSpec,
        log_density: Callable[..., object],
        simulate: Callable[..., object],
        override: bool = False,
    ) -> None:
        if spec.name in self._distributions and not override:
            raise DistributionError(
                f"Distribution '{spec.name}' is already registered; pass override=True to replace it"
            )
        seen = set()
        for parameterization in spec.parameterizations:
            key = frozenset(parameterization.names)
            if key in seen:
                raise DistributionError(
                    f"Distribution '{spec.name}' declares the parameter set "
                    f"{sorted(key)} twice"
                )
            seen.add(key)
            for canonical_name, _ in parameterization.transforms:
                if canonical_name not in spec.canonical:
                    raise DistributionError(
                        f"Transform target '{canonical_name}' of '{spec.name}' "
                        "is not a canonical parameter"
                    )
            missing = [
                c
                for c in spec.canonical
                if c not in parameterization.names
                and parameterization.transform_for(c) is None
            ]
            if missing:
                raise DistributionError(
                    f"Parameterization {parameterization.names} of '{spec.name}' "
                    f"does not determine {missing}"
                )
        if len(spec.positional_names) > len(spec.canonical):
            raise DistributionError(f"Too many positional names for '{spec.name}'")
        self._distributions[spec.name] = Distribution(spec, log_density, simulate)

    def get(self, name: str) -> Distribution:
        try:
            return self._distributions[name]
        except KeyError:
            raise DistributionError(f"Unknown distribution '{name}'") from None

    def __contains__(self, name: str) -> bool:
        return name in self._distributions

    def names(self) -> Tuple[str, ...]:
        return tuple(sorted(self._distributions))

    def copy(self) -> "DistributionRegistry":
        return DistributionRegistry(self._distributions.values())

    def match_parameterization(self, name: str, given: Iterable[str]) -> Parameterization:
        spec = self.get(name).spec
        given_set = frozenset(given)
        matches = [p for p in spec.parameterizations if frozenset(p.names) == given_set]
        if not matches:
            options = "; ".join("(" + ", ".join(p.names) + ")" for p in spec.parameterizations)
            raise DistributionError(
                f"Parameters ({', '.join(sorted(given_set))}) do not match any "
                f"parameterization of '{name}': {options}"
            )
        if len(matches) > 1:
            raise DistributionError(f"Ambiguous parameter set for '{name}'")
        return matches[0]

    def to_canonical(self, name: str, given: Mapping[str, float]) -> Dict[str, float]:
        """Convert a named parameter set to canonical parameter values."""
        spec = self.get(name).spec
        parameterization = self.match_parameterization(name, given)
        canonical = {}
        for canonical_name in spec.canonical:
            if canonical_name in given:
                canonical[canonical_name] = given[canonical_name]
            else:
                expression = parse_expression(parameterization.transform_for(canonical_name))
                canonical[canonical_name] = evaluate(expression, given)
        return canonical

    def _canonical_list(self, name: str, params) -> list:
        spec = self.get(name).spec
        if isinstance(params, Mapping):
            params = self.to_canonical(name, params)
            return [params[p] for p in spec.canonical]
        params = list(params)
        if len(params) != len(spec.canonical):
            raise DistributionError(
                f"'{name}' expects {len(spec.canonical)} canonical parameters, got {len(params)}"
            )
        return params

    def log_density(self, name: str, value, params) -> float:
        """Log density or mass; raises DistributionError for invalid parameters."""
        distribution = self.get(name)
        values = self._canonical_list(name, params)
        if distribution.spec.valid is not None and not np.all(distribution.spec.valid(*values)):
            raise DistributionError(f"Invalid parameters for '{name}': {values}")
        with np.errstate(divide="ignore", invalid="ignore"):
            return distribution.log_density_fn(value, *values)

    def simulate(self, name: str, params, rng: np.random.Generator):
        distribution = self.get(name)
        values = self._canonical_list(name, params)
        if distribution.spec.valid is not None and not np.all(distribution.spec.valid(*values)):
            raise DistributionError(f"Invalid parameters for '{name}': {values}")
        return distribution.simulate_fn(rng, *values)


def default_registry() -> DistributionRegistry:
    registry = DistributionRegistry()
    registry.register(
        DistributionSpec(
            "dnorm",
            ("mean", "sd"),
            alternatives=(
                Parameterization(("mean", "tau"), (("sd", "1/sqrt(tau)"),)),
                Parameterization(("mean", "var"), (("sd", "sqrt(var)"),)),
            ),
            positional=("mean", "tau"),
            valid=lambda mean, sd: sd > 0,
        ),
        _dnorm,
        lambda rng, mean, sd: float(rng.normal(mean, sd)),
    )
    registry.register(
        DistributionSpec(
            "dgamma",
            ("shape", "rate"),
            alternatives=(
                Parameterization(("shape", "scale"), (("rate", "1/scale"),)),
                Parameterization(
                    ("mean", "sd"), (("shape", "mean^2/sd^2"), ("rate", "mean/sd^2"))
                ),
            ),
            support=Support.POSITIVE,
            valid=lambda shape, rate: (shape > 0) & (rate > 0),
        ),
        _dgamma,
        lambda rng, shape, rate: float(rng.gamma(shape, 1.0 / rate)),
    )
    registry.register(
        DistributionSpec(
            "dexp",
            ("rate",),
            alternatives=(Parameterization(("scale",), (("rate", "1/scale"),)),),
            support=Support.POSITIVE,
            valid=lambda rate: rate > 0,
        ),
        _dexp,
        lambda rng, rate: float(rng.exponential(1.0 / rate)),
    )
    registry.register(
        DistributionSpec(
            "dpois",
            ("lambda",),
            support=Support.NONNEGATIVE_INTEGER,
            discrete=True,
            valid=lambda lam: lam >= 0,
        ),
        _dpois,
        lambda rng, lam: float(rng.poisson(lam)),
    )
    registry.register(
        DistributionSpec(
            "dbin",
            ("prob", "size"),
            support=Support.BOUNDED_INTEGER,
            discrete=True,
            valid=lambda prob, size: (prob >= 0) & (prob <= 1) & (size >= 0) & _is_integer(size),
        ),
        _dbin,
        _rbin,
    )
    registry.register(
        DistributionSpec(
            "dbeta",
            ("a", "b"),
            alternatives=(
                Parameterization(("shape1", "shape2"), (("a", "shape1"), ("b", "shape2"))),
            ),
            support=Support.UNIT_INTERVAL,
            valid=lambda a, b: (a > 0) & (b > 0),
        ),
        _dbeta,
        lambda rng, a, b: float(rng.beta(a, b)),
    )
    registry.register(
        DistributionSpec(
            "dunif",
            ("min", "max"),
            support=Support.BOUNDED,
            valid=lambda lower, upper: lower < upper,
        ),
        _dunif,
        lambda rng, lower, upper: float(rng.uniform(lower, upper)),
    )
    registry.register(
        DistributionSpec(
            "dlnorm",
            ("meanlog", "sdlog"),
            alternatives=(Parameterization(("meanlog", "taulog"), (("sdlog", "1/sqrt(taulog)"),)),),
            positional=("meanlog", "taulog"),
            support=Support.POSITIVE,
            valid=lambda meanlog, sdlog: sdlog > 0,
        ),
        _dlnorm,
        lambda rng, meanlog, sdlog: float(rng.lognormal(meanlog, sdlog)),
    )
    registry.register(
        DistributionSpec(
            "dnegbin",
            ("prob", "size"),
            support=Support.NONNEGATIVE_INTEGER,
            discrete=True,
            valid=lambda prob, size: (prob > 0) & (prob <= 1) & (size > 0),
        ),
        _dnegbin,
        lambda rng, prob, size: float(rng.negative_binomial(size, prob)),
    )
    return registry


DEFAULT_REGISTRY = default_registry()


def register_distribution(
    spec: DistributionSpec,
    log_density: Callable[..., object],
    simulate: Callable[..., object],
    override: bool = False,
) -> None:
    DEFAULT_REGISTRY.register(spec, log_density, simulate, override=override)


def log_density(name: str, value, params) -> float:
    return DEFAULT_REGISTRY.log_density(name, value, params)


def simulate(name: str, params, rng: np.random.Generator):
    return DEFAULT_REGISTRY.simulate(name, params, rng)


def to_canonical(name: str, given: Mapping[str, float]) -> Dict[str, float]:
    return DEFAULT_REGISTRY.to_canonical(name, given)

"""Multiplicative-error simulation and Monte Carlo studies.

Data are generated as ``y_ik = tau_i * pi_ik * U_ik`` where ``pi_i`` follows
the compositional logit model and ``U_i`` has unit mean and covariance
``Phi``.

Seeding: replicate ``r`` of a scenario with master seed ``s`` draws from
``numpy.random.SeedSequence(s, spawn_key=(r,))``.  That sequence is split
into three child streams, one each for covariates, relative errors and
totals, so changing the totals law leaves covariates and errors untouched.
Replicates are therefore independent of each other and of execution order.
"""

import csv
import io
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from statistics import NormalDist

import numpy as np

from .errors import ConfigError, ConvergenceError
from .inference import fit_vcov
from .linalg import check_symmetric, sym_eig
from .model import SUM_TO_ZERO, CoefficientMatrix, CompositionalDataset, apply_constraint, logit_probabilities
from .solver import SolverConfig, fit
from .variance import ErrorDispersion

ERROR_KINDS = ("lognormal", "scaled_gamma", "zero_inflated")


@dataclass(frozen=True)
class ErrorLaw:
    """Unit-mean relative-error law.

    ``lognormal``: ``log U ~ N(-diag(Sigma)/2, Sigma)``.
    ``scaled_gamma``: independent ``Gamma(shape_k, scale=1/shape_k)``.
    ``zero_inflated``: ``base`` draws zeroed independently with probability
    ``zero_prob`` and divided by ``1 - zero_prob``.
    """

    kind: str
    sigma: np.ndarray = None
    shapes: np.ndarray = None
    base: "ErrorLaw" = None
    zero_prob: float = 0.0

    def __post_init__(self):
        if self.kind not in ERROR_KINDS:
            raise ConfigError(f"unknown error law {self.kind!r}")
        if self.kind == "lognormal":
            if self.sigma is None:
                raise ConfigError("lognormal law needs sigma")
            S = check_symmetric(np.atleast_2d(np.array(self.sigma, dtype=float)))
            vals = sym_eig(S).eigenvalues
            if vals.size and vals[-1] < -1e-12 * max(1.0, abs(vals[0])):
                raise ConfigError("lognormal sigma must be positive semidefinite")
            object.__setattr__(self, "sigma", S)
        elif self.kind == "scaled_gamma":
            shapes = np.array(self.shapes, dtype=float)
            if shapes.ndim != 1 or np.any(shapes <= 0):
                raise ConfigError("gamma shapes must be positive")
            object.__setattr__(self, "shapes", shapes)
        else:
            if self.base is None:
                raise ConfigError("zero_inflated law needs a base law")
            if not 0 <= self.zero_prob < 1:
                raise ConfigError("zero_prob must be in [0, 1)")

    @classmethod
    def lognormal(cls, sigma):
        return cls("lognormal", sigma=sigma)

    @classmethod
    def scaled_gamma(cls, shapes):
        return cls("scaled_gamma", shapes=shapes)

    @classmethod
    def zero_inflated(cls, base, zero_prob):
        return cls("zero_inflated", base=base, zero_prob=float(zero_prob))

    @property
    def D(self):
        if self.kind == "lognormal":
            return self.sigma.shape[0]
        if self.kind == "scaled_gamma":
            return self.shapes.size
        return self.base.D


def draw_errors(law, D, count, rng):
    """``count`` i.i.d. unit-mean error vectors (rows).

    ``rng`` is a ``numpy.random.Generator`` or an integer seed.
    """
    rng = np.random.default_rng(rng)
    if law.D != D:
        raise ConfigError(f"error law has dimension {law.D}, expected {D}")
    if law.kind == "lognormal":
        vals, vecs = sym_eig(law.sigma)
        L = vecs * np.sqrt(np.clip(vals, 0.0, None))
        Z = rng.standard_normal((count, D)) @ L.T - 0.5 * np.diag(law.sigma)
        return np.exp(Z)
    if law.kind == "scaled_gamma":
        return rng.gamma(law.shapes, 1.0 / law.shapes, size=(count, D))
    base = draw_errors(law.base, D, count, rng)
    keep = rng.random((count, D)) >= law.zero_prob
    return base * keep / (1.0 - law.zero_prob)


def phi_of_law(law):
    """Analytic covariance ``Phi`` of the relative errors."""
    if law.kind == "lognormal":
        return ErrorDispersion(np.expm1(law.sigma))
    if law.kind == "scaled_gamma":
        return ErrorDispersion(np.diag(1.0 / law.shapes))
    base = phi_of_law(law.base).Phi
    Phi = base.copy()
    d = (np.diag(base) + 1.0) / (1.0 - law.zero_prob) - 1.0
    np.fill_diagonal(Phi, d)
    return ErrorDispersion(Phi)


_LAW_RE = re.compile(r"^\s*(\w+)\s*(?:\(([^)]*)\))?\s*$")


def parse_law(text):
    """Parse ``name(a, b, ...)`` into ``(name, [a, b, ...])``."""
    m = _LAW_RE.match(str(text))
    if not m:
        raise ConfigError(f"cannot parse law {text!r}")
    args = [float(a) for a in m.group(2).split(",")] if m.group(2) and m.group(2).strip() else []
    return m.group(1), args


def _draw_from(law_text, size, rng):
    name, args = parse_law(law_text)
    if name == "constant":
        return np.full(size, args[0] if args else 1.0)
    if name == "normal":
        mu, sd = (args + [0.0, 1.0][len(args):])[:2]
        return rng.normal(mu, sd, size)
    if name == "uniform":
        lo, hi = (args + [0.0, 1.0][len(args):])[:2]
        return rng.uniform(lo, hi, size)
    if name == "lognormal":
        mu, sd = (args + [0.0, 1.0][len(args):])[:2]
        return rng.lognormal(mu, sd, size)
    raise ConfigError(f"unknown law {name!r}")


@dataclass(frozen=True)
class SimulationScenario:
    N: int
    true_B: CoefficientMatrix
    error_law: ErrorLaw
    covariate_law: str = "normal(0, 1)"
    tau_law: str = "constant(1)"
    seed: int = 0
    replicates: int = 1
    method: str = "gamma_trick"
    level: float = 0.95

    def __post_init__(self):
        B = self.true_B if isinstance(self.true_B, CoefficientMatrix) else CoefficientMatrix(self.true_B)
        object.__setattr__(self, "true_B", apply_constraint(B.B, B.constraint))
        if self.N < 1:
            raise ConfigError("N must be positive")
        if self.error_law.D != self.D:
            raise ConfigError(f"error law has dimension {self.error_law.D}, true_B has {self.D} parts")
        for text in (self.covariate_law, self.tau_law):
            parse_law(text)

    @property
    def D(self):
        return self.true_B.D

    @property
    def p(self):
        return self.true_B.p


@dataclass(frozen=True)
class SimulatedData:
    data: CompositionalDataset
    tau: np.ndarray
    errors: np.ndarray
    true_pi: np.ndarray
    resampled_rows: int = 0


def replicate_streams(seed, replicate):
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replicate),))
    return [np.random.default_rng(s) for s in ss.spawn(3)]


def simulate(scenario, replicate=0):
    """One dataset from ``scenario``, keeping the latent quantities."""
    rx, ru, rt = replicate_streams(scenario.seed, replicate)
    N, D, p = scenario.N, scenario.D, scenario.p
    X = _draw_from(scenario.covariate_law, (N, p), rx) if p else np.zeros((N, 0))
    pi = logit_probabilities(scenario.true_B, X)
    U = draw_errors(scenario.error_law, D, N, ru)
    resampled = 0
    while True:
        dead = np.flatnonzero(np.all(U == 0, axis=1))
        if not dead.size:
            break
        resampled += dead.size
        if resampled > 100 * N:
            raise ConfigError("error law produces all-zero rows almost surely")
        U[dead] = draw_errors(scenario.error_law, D, dead.size, ru)
    tau = _draw_from(scenario.tau_law, N, rt)
    if np.any(tau <= 0):
        raise ConfigError("tau law must produce positive totals")
    Y = tau[:, None] * pi * U
    data = CompositionalDataset(Y, X, covariate_names=tuple(f"x{r + 1}" for r in range(p)))
    return SimulatedData(data, tau, U, pi, resampled)


def simulate_dataset(scenario, replicate=0):
    return simulate(scenario, replicate).data


@dataclass
class ReplicateResult:
    replicate: int
    converged: bool
    iterations: int
    estimates: np.ndarray
    std_errors: np.ndarray
    covered: np.ndarray
    resampled_rows: int = 0


def run_replicate(scenario, replicate, config=None):
    config = config or SolverConfig(method=scenario.method, raise_on_failure=False)
    sim = simulate(scenario, replicate)
    q = len(scenario.true_B.vector)
    try:
        res = fit(sim.data, config, constraint=scenario.true_B.constraint)
    except ConvergenceError:
        nan = np.full(q, np.nan)
        return ReplicateResult(replicate, False, config.max_iterations, nan, nan, np.zeros(q, bool), sim.resampled_rows)
    se = fit_vcov(res, sim.data).std_errors
    zcrit = NormalDist().inv_cdf(0.5 + scenario.level / 2)
    beta = res.coefficients.vector
    covered = np.abs(beta - scenario.true_B.vector) <= zcrit * se
    return ReplicateResult(replicate, res.converged, res.iterations, beta, se, covered, sim.resampled_rows)


def _run_chunk(args):
    scenario, reps, config = args
    return [run_replicate(scenario, r, config) for r in reps]


def run_study(scenario, replicates=None, config=None, workers=1):
    """Run replicates ``0 .. replicates-1``; results are in replicate order.

    With ``workers > 1`` replicates are split across processes.  Each uses
    its own random stream, so the output does not depend on ``workers``.
    """
    n = scenario.replicates if replicates is None else replicates
    if workers <= 1:
        return [run_replicate(scenario, r, config) for r in range(n)]
    chunks = [(scenario, list(range(w, n, workers)), config) for w in range(workers)]
    with ProcessPoolExecutor(workers) as pool:
        results = [r for chunk in pool.map(_run_chunk, chunks) for r in chunk]
    return sorted(results, key=lambda r: r.replicate)


@dataclass
class StudySummary:
    labels: list
    truth: np.ndarray
    mean: np.ndarray
    mc_se: np.ndarray
    bias: np.ndarray
    coverage: np.ndarray
    n_converged: int
    n_replicates: int
    extra: dict = field(default_factory=dict)


def coefficient_labels(D, p):
    cols = ["(intercept)"] + [f"x{r + 1}" for r in range(p)]
    return [f"part{k + 1}:{c}" for k in range(D) for c in cols]


def summarize(scenario, results):
    ok = [r for r in results if r.converged]
    E = np.array([r.estimates for r in ok]) if ok else np.full((0, len(scenario.true_B.vector)), np.nan)
    Cv = np.array([r.covered for r in ok], dtype=float) if ok else E
    n = max(len(ok), 1)
    mean = E.mean(axis=0) if ok else np.full(E.shape[1], np.nan)
    sd = E.std(axis=0, ddof=1) if len(ok) > 1 else np.full(E.shape[1], np.nan)
    truth = scenario.true_B.vector
    return StudySummary(
        labels=coefficient_labels(scenario.D, scenario.p),
        truth=truth,
        mean=mean,
        mc_se=sd / math.sqrt(n),
        bias=mean - truth,
        coverage=Cv.mean(axis=0) if ok else np.full(E.shape[1], np.nan),
        n_converged=len(ok),
        n_replicates=len(results),
    )


def _fmt(v):
    return repr(float(v))


def results_csv(scenario, results):
    """Per-replicate estimates, standard errors and coverage indicators as CSV text."""
    labels = coefficient_labels(scenario.D, scenario.p)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(
        ["replicate", "converged", "iterations", "resampled_rows"]
        + [f"est[{l}]" for l in labels]
        + [f"se[{l}]" for l in labels]
        + [f"covered[{l}]" for l in labels]
    )
    for r in results:
        w.writerow(
            [r.replicate, int(r.converged), r.iterations, r.resampled_rows]
            + [_fmt(v) for v in r.estimates]
            + [_fmt(v) for v in r.std_errors]
            + [int(c) for c in r.covered]
        )
    return buf.getvalue()


def summary_csv(summary):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["coefficient", "truth", "mc_mean", "mc_se", "bias", "coverage", "n_converged", "n_replicates"])
    for j, label in enumerate(summary.labels):
        w.writerow(
            [label, _fmt(summary.truth[j]), _fmt(summary.mean[j]), _fmt(summary.mc_se[j]),
             _fmt(summary.bias[j]), _fmt(summary.coverage[j]), summary.n_converged, summary.n_replicates]
        )
    return buf.getvalue()


# scenario files -----------------------------------------------------------

SCENARIO_KEYS = {
    "N", "true_B", "constraint", "covariate_law", "tau_law", "seed", "replicates", "method", "level",
    "error_law", "sigma", "sigma_diag", "shapes", "zero_prob", "base_law",
}

_METHOD_ALIASES = {"gamma": "gamma_trick", "scoring": "fisher_scoring", "both": "both_crosscheck"}


def _matrix(text, key):
    try:
        rows = [[float(v) for v in row.split(",")] for row in text.split(";") if row.strip()]
    except ValueError:
        raise ConfigError(f"scenario key {key!r}: expected numbers separated by ',' and ';'") from None
    if len({len(r) for r in rows}) != 1:
        raise ConfigError(f"scenario key {key!r}: ragged matrix")
    return np.array(rows)


def _vector(text, key):
    return _matrix(text, key).ravel()


def parse_scenario(text):
    """Parse a ``key = value`` scenario file.

    Recognised keys: ``N``, ``true_B`` (rows separated by ``;``),
    ``constraint`` (``sum`` or ``ref:<k>``, 1-based), ``covariate_law``,
    ``tau_law``, ``seed``, ``replicates``, ``method``, ``level``,
    ``error_law`` (``lognormal``, ``gamma`` or ``zero_inflated``), ``sigma``,
    ``sigma_diag``, ``shapes``, ``zero_prob`` and ``base_law`` (the law
    inflated by ``zero_inflated``).  Lines starting with ``#`` are comments.
    """
    kv = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"scenario line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in SCENARIO_KEYS:
            raise ConfigError(f"unknown scenario key {key!r} (line {lineno})")
        kv[key] = value
    for key in ("N", "true_B", "error_law"):
        if key not in kv:
            raise ConfigError(f"scenario is missing required key {key!r}")
    try:
        N = int(kv["N"])
    except ValueError:
        raise ConfigError(f"scenario key 'N': not an integer: {kv['N']!r}") from None
    B = _matrix(kv["true_B"], "true_B")
    D = B.shape[0]
    constraint = SUM_TO_ZERO
    c = kv.get("constraint", "sum")
    if c.startswith("ref:"):
        from .model import IdentificationConstraint

        constraint = IdentificationConstraint.reference(int(c[4:]) - 1)
    elif c != "sum":
        raise ConfigError(f"scenario key 'constraint': expected 'sum' or 'ref:<k>', got {c!r}")

    def law(kind):
        if kind == "lognormal":
            if "sigma" in kv:
                return ErrorLaw.lognormal(_matrix(kv["sigma"], "sigma"))
            if "sigma_diag" in kv:
                return ErrorLaw.lognormal(np.diag(_vector(kv["sigma_diag"], "sigma_diag")))
            raise ConfigError("scenario key 'sigma' or 'sigma_diag' needed for a lognormal law")
        if kind in ("gamma", "scaled_gamma"):
            if "shapes" not in kv:
                raise ConfigError("scenario key 'shapes' needed for a gamma law")
            return ErrorLaw.scaled_gamma(_vector(kv["shapes"], "shapes"))
        raise ConfigError(f"scenario key 'error_law': unknown law {kind!r}")

    kind = kv["error_law"]
    if kind == "zero_inflated":
        try:
            zp = float(kv.get("zero_prob", "0"))
        except ValueError:
            raise ConfigError("scenario key 'zero_prob': not a number") from None
        error_law = ErrorLaw.zero_inflated(law(kv.get("base_law", "lognormal")), zp)
    else:
        error_law = law(kind)
    method = _METHOD_ALIASES.get(kv.get("method", "gamma"), kv.get("method", "gamma"))
    try:
        return SimulationScenario(
            N=N,
            true_B=CoefficientMatrix(B, constraint),
            error_law=error_law,
            covariate_law=kv.get("covariate_law", "normal(0, 1)"),
            tau_law=kv.get("tau_law", "constant(1)"),
            seed=int(kv.get("seed", "0")),
            replicates=int(kv.get("replicates", "1")),
            method=method,
            level=float(kv.get("level", "0.95")),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"scenario: {exc}") from None


def load_scenario(path):
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def with_seed(scenario, seed):
    return replace(scenario, seed=int(seed))

"""Synthetic quantile-function data from a location-scale model, and the
rejection-rate study built on it.

Each observation is ``Q(t) = V1 + V2*eta(Z) + V2*tau(Z)*Q0(t)`` with
``eta(z) = a0 + a1 z``, ``tau(z) = b0 + b1 z`` and ``Q0(t) = 70 + 240 t``.
``V1 = -20 + 40 U`` and ``V2 = 0.8 + 0.4 U'`` for uniforms ``U, U'``; for
complete pairs the uniforms at the two timepoints are correlated.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.special import expit
from scipy.stats import norm

from .data import PairedDataset, QuantileFunction, _frozen, midpoint_grid
from .errors import DegenerateScale, PairMMDError
from .testing import MarConfig, McarConfig, mar_test, mcar_test


@dataclass(frozen=True)
class LocationScaleModel:
    a: tuple = (0.0, 0.3)
    b: tuple = (0.0, 0.005)
    q0: tuple = (70.0, 240.0)  # intercept, slope of the base quantile function
    grid_size: int = 100

    @property
    def grid(self) -> np.ndarray:
        return midpoint_grid(self.grid_size)

    def base(self) -> np.ndarray:
        return self.q0[0] + self.q0[1] * self.grid

    def location(self, z):
        return self.a[0] + self.a[1] * np.asarray(z, dtype=float)

    def scale(self, z):
        return self.b[0] + self.b[1] * np.asarray(z, dtype=float)

    def values(self, v1, v2, z) -> np.ndarray:
        """Quantile values, one row per ``(v1, v2, z)`` triple."""
        v1 = np.atleast_1d(np.asarray(v1, dtype=float))
        v2 = np.atleast_1d(np.asarray(v2, dtype=float))
        z = np.atleast_1d(np.asarray(z, dtype=float))
        spread = v2 * self.scale(z)
        if np.any(spread <= 0) or self.q0[1] <= 0:
            raise DegenerateScale("V2 * tau(Z) must be positive for a valid quantile function")
        shift = v1 + v2 * self.location(z)
        return shift[:, None] + spread[:, None] * self.base()[None, :]


def sample_quantile_obs(model: LocationScaleModel, v1: float, v2: float,
                        z: float) -> QuantileFunction:
    return QuantileFunction(model.grid, model.values(v1, v2, z)[0])


def copula_correlation(rho: float) -> float:
    """Gaussian correlation giving uniforms with Pearson correlation ``rho``."""
    return 2.0 * math.sin(math.pi * rho / 6.0)


def correlated_uniforms(rho: float, n: int, rng: np.random.Generator):
    """``n`` pairs of U(0,1) variables with Pearson correlation ``rho`` (Gaussian copula)."""
    if not -1.0 < rho < 1.0:
        raise PairMMDError(f"rho must lie in (-1, 1), got {rho}")
    r = copula_correlation(rho)
    z = rng.standard_normal((2, n))
    x = z[0]
    y = r * z[0] + math.sqrt(1.0 - r * r) * z[1]
    return norm.cdf(x), norm.cdf(y)


def v_transforms(u_loc, u_scale):
    return -20.0 + 40.0 * np.asarray(u_loc), 0.8 + 0.4 * np.asarray(u_scale)


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str = "mcar"
    n1: int = 150
    n2: int = 150
    n3: int = 150
    n: int = 300
    rho: float = 0.0
    z1: tuple = (30.0, 50.0)
    z2: tuple = (30.0, 50.0)
    reps: int = 2000
    n_bootstrap: int = 2000
    seed: int = 0
    l_param: float | None = None
    alpha: float | None = None
    model: LocationScaleModel = field(default_factory=LocationScaleModel)

    def __post_init__(self):
        if self.scenario not in ("mcar", "mar"):
            raise PairMMDError(f"unknown scenario {self.scenario!r}")
        counts = (self.n1, self.n2, self.n3) if self.scenario == "mcar" else (self.n,)
        if any(c < 1 for c in counts):
            raise PairMMDError("sample sizes must be positive")
        if not -1.0 < self.rho < 1.0:
            raise PairMMDError(f"rho must lie in (-1, 1), got {self.rho}")
        for lo, hi in (self.z1, self.z2):
            if not lo <= hi:
                raise PairMMDError("age ranges must satisfy lo <= hi")

    @property
    def label(self) -> str:
        return "alternative" if tuple(self.z1) != tuple(self.z2) else "null"


def _ids(prefix, n):
    return tuple(f"{prefix}{i}" for i in range(n))


def _dataset(model, x1c, x2c, x1o, x2o, cov=None, cov_names=()):
    # values come from the model with positive spread, hence strictly increasing
    return PairedDataset(
        kind="quantile",
        complete_ids=_ids("c", x1c.shape[0]),
        first_ids=_ids("f", x1o.shape[0]),
        second_ids=_ids("s", x2o.shape[0]),
        x1_complete=_frozen(x1c), x2_complete=_frozen(x2c),
        x1_only=_frozen(x1o), x2_only=_frozen(x2o),
        grid=_frozen(model.grid),
        covariates=None if cov is None else _frozen(cov),
        covariate_names=tuple(cov_names),
    )


def _complete_pairs(config: ScenarioConfig, n: int, rng: np.random.Generator):
    m = config.model
    u1, u2 = correlated_uniforms(config.rho, n, rng)
    s1, s2 = correlated_uniforms(config.rho, n, rng)
    z1 = rng.uniform(*config.z1, size=n)
    z2 = rng.uniform(*config.z2, size=n)
    v1a, v2a = v_transforms(u1, s1)
    v1b, v2b = v_transforms(u2, s2)
    return m.values(v1a, v2a, z1), m.values(v1b, v2b, z2)


def _singles(config: ScenarioConfig, n: int, z_range, rng: np.random.Generator):
    v1, v2 = v_transforms(rng.uniform(size=n), rng.uniform(size=n))
    z = rng.uniform(*z_range, size=n)
    return config.model.values(v1, v2, z) if n else np.empty((0, config.model.grid_size))


def generate_mcar(config: ScenarioConfig, rng: np.random.Generator) -> PairedDataset:
    x1c, x2c = _complete_pairs(config, config.n1, rng)
    x1o = _singles(config, config.n2, config.z1, rng)
    x2o = _singles(config, config.n3, config.z2, rng)
    return _dataset(config.model, x1c, x2c, x1o, x2o)


def mar_mechanism(n: int, rng: np.random.Generator, noise=None):
    """Second-element observation flags and their true probabilities.

    The second element goes missing with probability
    ``1 / (1 + exp(-1 + Y1 + Y2))`` for independent standard normal ``Y1, Y2``.
    ``noise`` replaces the draws of ``(Y1, Y2)`` (scalars broadcast).
    Returns ``(observed, pi_observed, y1, y2)``.
    """
    if noise is None:
        y = rng.standard_normal((2, n))
        y1, y2 = y[0], y[1]
    else:
        y1 = np.broadcast_to(np.asarray(noise[0], dtype=float), (n,))
        y2 = np.broadcast_to(np.asarray(noise[1], dtype=float), (n,))
    p_missing = expit(1.0 - y1 - y2)
    missing = rng.uniform(size=n) < p_missing
    return ~missing, 1.0 - p_missing, y1, y2


def generate_mar(config: ScenarioConfig, rng: np.random.Generator, noise=None,
                 max_attempts: int = 10) -> PairedDataset:
    """``n`` latent pairs, second elements dropped by the logistic mechanism.

    The mechanism noise ``(Y1, Y2)`` is emitted as covariates ``y1, y2``.
    """
    for _ in range(max_attempts):
        x1, x2 = _complete_pairs(config, config.n, rng)
        observed, _, y1, y2 = mar_mechanism(config.n, rng, noise)
        if observed.any():
            break
    else:
        raise PairMMDError(f"no complete pairs after {max_attempts} attempts")
    cov = np.column_stack([y1, y2])
    order = np.r_[np.flatnonzero(observed), np.flatnonzero(~observed)]
    return _dataset(config.model, x1[observed], x2[observed], x1[~observed],
                    np.empty((0, x1.shape[1])), cov=cov[order], cov_names=("y1", "y2"))


def generate(config: ScenarioConfig, rng: np.random.Generator) -> PairedDataset:
    return generate_mcar(config, rng) if config.scenario == "mcar" else generate_mar(config, rng)


def replication_streams(seed: int, rep: int):
    """Independent data stream and bootstrap seed for replication ``rep``."""
    data_rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(rep), 0)))
    boot_seed = int(np.random.SeedSequence(int(seed), spawn_key=(int(rep), 1)).generate_state(1)[0])
    return data_rng, boot_seed


def run_replication(config: ScenarioConfig, rep: int):
    """p-value and realised counts for one replication."""
    data_rng, boot_seed = replication_streams(config.seed, rep)
    ds = generate(config, data_rng)
    if config.scenario == "mcar":
        res = mcar_test(ds, McarConfig(alpha=config.alpha, n_bootstrap=config.n_bootstrap,
                                       l_param=config.l_param, seed=boot_seed))
    else:
        res = mar_test(ds, MarConfig(n_bootstrap=config.n_bootstrap, l_param=config.l_param,
                                     seed=boot_seed))
    return res.p_value, (ds.n1, ds.n2, ds.n3)


def _run_block(args):
    config, start, stop = args
    return [run_replication(config, r) for r in range(start, stop)]


@dataclass(frozen=True)
class StudyRow:
    scenario: str
    hypothesis: str
    rho: float
    z1: tuple
    z2: tuple
    reps: int
    n_bootstrap: int
    level: float
    rejection_rate: float
    mean_n1: float
    mean_n2: float
    mean_n3: float
    p_values: np.ndarray = field(repr=False, compare=False)


def run_study(configs, level: float = 0.05, threads: int = 1, block: int = 25) -> list[StudyRow]:
    """Fraction of replications with ``p <= level`` for each configuration.

    Replication ``r`` of a configuration depends only on ``(config.seed, r)``;
    ``threads`` sets the number of worker processes and never changes results.
    """
    tasks = []
    for ci, cfg in enumerate(configs):
        tasks += [(ci, (cfg, s, min(s + block, cfg.reps))) for s in range(0, cfg.reps, block)]
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outputs = list(pool.map(_run_block, [t[1] for t in tasks]))
    else:
        outputs = [_run_block(t[1]) for t in tasks]
    per_config = [[] for _ in configs]
    for (ci, _), out in zip(tasks, outputs):
        per_config[ci].extend(out)

    rows = []
    for cfg, results in zip(configs, per_config):
        pvals = np.array([r[0] for r in results])
        counts = np.array([r[1] for r in results], dtype=float)
        rows.append(StudyRow(
            scenario=cfg.scenario, hypothesis=cfg.label, rho=cfg.rho,
            z1=tuple(cfg.z1), z2=tuple(cfg.z2), reps=cfg.reps, n_bootstrap=cfg.n_bootstrap,
            level=level, rejection_rate=float(np.mean(pvals <= level)),
            mean_n1=float(counts[:, 0].mean()), mean_n2=float(counts[:, 1].mean()),
            mean_n3=float(counts[:, 2].mean()), p_values=pvals))
    return rows


TABLE1_RHOS = (0.0, 0.2, 0.4, 0.6, 0.8)
NULL_AGES = (30.0, 50.0)
ALT_AGES = (50.0, 70.0)


def table1_configs(full_scale: bool = False, scenarios=("mcar", "mar"), rhos=TABLE1_RHOS,
                   seed: int = 0, reps: int | None = None,
                   n_bootstrap: int | None = None) -> list[ScenarioConfig]:
    """Every cell of the rejection-rate table.

    Full scale is n1 = n2 = n3 = 150 (MCAR), n = 300 (MAR), 2000 replications
    and 2000 bootstrap replicas.  Desk scale is n1 = n2 = n3 = 50, n = 100,
    500 replications and 300 replicas.
    """
    if full_scale:
        base = dict(n1=150, n2=150, n3=150, n=300, reps=2000, n_bootstrap=2000)
    else:
        base = dict(n1=50, n2=50, n3=50, n=100, reps=500, n_bootstrap=300)
    if reps is not None:
        base["reps"] = reps
    if n_bootstrap is not None:
        base["n_bootstrap"] = n_bootstrap
    out = []
    for scen in scenarios:
        for z2 in (NULL_AGES, ALT_AGES):
            for rho in rhos:
                out.append(ScenarioConfig(scenario=scen, rho=rho, z1=NULL_AGES, z2=z2,
                                          seed=seed, **base))
    return out


def rows_to_table(rows) -> list[dict]:
    out = []
    for r in rows:
        d = asdict(replace(r, p_values=np.empty(0)))
        d.pop("p_values")
        d["z1"] = f"{r.z1[0]:g}-{r.z1[1]:g}"
        d["z2"] = f"{r.z2[0]:g}-{r.z2[1]:g}"
        out.append(d)
    return out

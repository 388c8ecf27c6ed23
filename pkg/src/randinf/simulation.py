"""Monte-Carlo bias study for the strict-Q versus stratum-Q bound estimators.

Populations of 50 units in two strata (30/20) are drawn from six trivariate
normal generating models spanning strict additivity, stratum-level additivity,
and progressively stronger departures.  For each population the biases of the
two bound estimators are exact quadratic forms on the science table, so no
assignment draws are needed; the study reports per-population biases, medians,
and the median bias ratio per model.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .assignment import Stratified
from .estimation import HT, sampling_variance
from .population import Contrast, PotentialOutcomesTable, unit_contrasts
from .qframework import QMatrix, bias, q_strat, q_strict, v_q, v_q_hat

DEFAULT_SIZES = (30, 20)
DEFAULT_CONTRAST = (1.0, -2.0, 1.0)
TREATMENTS = ("1", "2", "3")


@dataclass(frozen=True)
class GeneratingModel:
    """Trivariate normal generating model with two strata.

    Each unit in stratum h draws its three potential outcomes from
    N3(mu[h], sigma2[h] * ((1 - rho[h]) I + rho[h] J)).
    """

    name: str
    mu: tuple[tuple[float, float, float], tuple[float, float, float]]
    sigma2: tuple[float, float]
    rho: tuple[float, float]

    def __post_init__(self):
        if len(self.mu) != 2 or any(len(m) != 3 for m in self.mu):
            raise ValueError("mu must give a length-3 mean vector per stratum")
        if len(self.sigma2) != 2 or len(self.rho) != 2:
            raise ValueError("sigma2 and rho must give one value per stratum")
        if any(s <= 0 for s in self.sigma2):
            raise ValueError("variances must be positive")
        # psd for the 3x3 equicorrelation matrix requires rho >= -1/2
        if any(not (-0.5 <= r <= 1.0) for r in self.rho):
            raise ValueError("equicorrelation must lie in [-0.5, 1]")


def builtin_models() -> list[GeneratingModel]:
    """The six study models, ordered by increasing departure from strict additivity."""
    mu_same = ((8.0, 7.0, 10.0), (8.0, 7.0, 10.0))
    mu_split = ((10.0, 12.0, 14.0), (8.0, 6.0, 10.0))
    return [
        GeneratingModel("I", mu_same, (2.0, 2.0), (1.0, 1.0)),
        GeneratingModel("II", mu_split, (2.0, 3.0), (1.0, 1.0)),
        GeneratingModel("III", mu_split, (2.0, 3.0), (0.2, 0.9)),
        GeneratingModel("IV", mu_split, (2.0, 3.0), (0.5, 0.5)),
        GeneratingModel("V", mu_split, (2.0, 3.0), (0.0, 0.0)),
        GeneratingModel("VI", mu_same, (3.0, 3.0), (-0.5, -0.5)),
    ]


def _equicorrelation_cholesky(rho: float) -> np.ndarray:
    """Explicit lower Cholesky factor of the 3x3 equicorrelation matrix,
    stable down to the psd boundary rho = -1/2."""
    l22 = math.sqrt(max(0.0, 1.0 - rho * rho))
    l32 = rho * (1.0 - rho) / l22 if l22 > 0.0 else 0.0
    l33 = math.sqrt(max(0.0, 1.0 - rho * rho - l32 * l32))
    return np.array([[1.0, 0.0, 0.0], [rho, l22, 0.0], [rho, l32, l33]])


def _draw_stratum(rng: np.random.Generator, n: int, mu, sigma2: float, rho: float) -> np.ndarray:
    mu = np.asarray(mu, dtype=float)
    sigma = math.sqrt(sigma2)
    if rho >= 0.0:
        # shared-factor form handles rho = 1 exactly
        eps = rng.standard_normal((n, 3))
        shared = rng.standard_normal((n, 1))
        noise = math.sqrt(1.0 - rho) * eps + math.sqrt(rho) * shared
    else:
        eps = rng.standard_normal((n, 3))
        noise = eps @ _equicorrelation_cholesky(rho).T
    return mu[None, :] + sigma * noise


def generate_population(
    model: GeneratingModel,
    sizes: tuple[int, int] = DEFAULT_SIZES,
    seed: int | np.random.SeedSequence = 0,
) -> PotentialOutcomesTable:
    """Draw one science table: sizes[0] units in stratum 1, sizes[1] in stratum 2."""
    if len(sizes) != 2 or any(s < 2 for s in sizes):
        raise ValueError("sizes must give two strata of at least 2 units")
    if isinstance(seed, np.random.SeedSequence):
        seq = seed
    else:
        seq = np.random.SeedSequence(int(seed))
    rng = np.random.Generator(np.random.Philox(seq))
    blocks = []
    stratum_of = {}
    units = []
    for h in range(2):
        blocks.append(_draw_stratum(rng, sizes[h], model.mu[h], model.sigma2[h], model.rho[h]))
        for k in range(sizes[h]):
            unit = f"u{len(units) + 1}"
            units.append(unit)
            stratum_of[unit] = str(h + 1)
    return PotentialOutcomesTable(
        units, TREATMENTS, np.vstack(blocks), stratum_of=stratum_of
    )


@dataclass(frozen=True)
class ModelStudy:
    """Per-model study output: one bias pair per generated population.

    Ratio entries are None where the strict-Q bias is exactly zero (the 0/0
    case under exact additivity); the median ratio skips those."""

    model: str
    bias_strict: tuple[float, ...]
    bias_strat: tuple[float, ...]
    ratio: tuple[float | None, ...]
    median_bias_strict: float
    median_bias_strat: float
    median_ratio: float | None
    quantiles_strict: tuple[float, float, float, float, float]
    quantiles_strat: tuple[float, float, float, float, float]

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "bias_strict": list(self.bias_strict),
            "bias_strat": list(self.bias_strat),
            "ratio": list(self.ratio),
            "median_bias_strict": self.median_bias_strict,
            "median_bias_strat": self.median_bias_strat,
            "median_ratio": self.median_ratio,
            "quantiles_strict": list(self.quantiles_strict),
            "quantiles_strat": list(self.quantiles_strat),
        }


@dataclass(frozen=True)
class StudyResult:
    seed: int
    reps: int
    sizes: tuple[int, int]
    contrast: tuple[float, float, float]
    models: tuple[ModelStudy, ...]

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "reps": self.reps,
            "sizes": list(self.sizes),
            "contrast": list(self.contrast),
            "models": [m.to_dict() for m in self.models],
        }

    def model(self, name: str) -> ModelStudy:
        for m in self.models:
            if m.model == name:
                return m
        raise KeyError(name)


def _five_number(values: np.ndarray) -> tuple[float, float, float, float, float]:
    qs = np.quantile(values, [0.0, 0.25, 0.5, 0.75, 1.0])
    return tuple(float(v) for v in qs)


def run_bias_study(
    models: Sequence[GeneratingModel] | None = None,
    reps: int = 100,
    contrast: Sequence[float] = DEFAULT_CONTRAST,
    sizes: tuple[int, int] = DEFAULT_SIZES,
    seed: int = 0,
) -> StudyResult:
    """Exact biases of the two bound estimators across generated populations.

    Population substreams are keyed by (model index, replicate), so results
    are identical for a given seed regardless of evaluation order.
    """
    if models is None:
        models = builtin_models()
    if reps < 1:
        raise ValueError("need at least one replicate")
    g = tuple(float(v) for v in contrast)
    if len(g) != 3:
        raise ValueError("the study contrast has one coefficient per treatment (3)")
    c = Contrast(dict(zip(TREATMENTS, g)))
    n = sum(sizes)
    strict = q_strict(n).matrix
    strat = q_strat(sizes).matrix
    out = []
    for m_idx, model in enumerate(models):
        b_strict = np.empty(reps)
        b_strat = np.empty(reps)
        for rep in range(reps):
            seq = np.random.SeedSequence(entropy=int(seed), spawn_key=(m_idx, rep))
            table = generate_population(model, sizes=sizes, seed=seq)
            tau = unit_contrasts(table, c)
            b_strict[rep] = float(tau @ strict @ tau)
            b_strat[rep] = float(tau @ strat @ tau)
        ratio = tuple(
            float(bt / bs) if bs != 0.0 else None for bs, bt in zip(b_strict, b_strat)
        )
        finite_ratios = [v for v in ratio if v is not None]
        out.append(
            ModelStudy(
                model=model.name,
                bias_strict=tuple(float(v) for v in b_strict),
                bias_strat=tuple(float(v) for v in b_strat),
                ratio=ratio,
                median_bias_strict=float(np.median(b_strict)),
                median_bias_strat=float(np.median(b_strat)),
                median_ratio=float(np.median(finite_ratios)) if finite_ratios else None,
                quantiles_strict=_five_number(b_strict),
                quantiles_strat=_five_number(b_strat),
            )
        )
    return StudyResult(
        seed=int(seed),
        reps=int(reps),
        sizes=tuple(int(s) for s in sizes),
        contrast=g,
        models=tuple(out),
    )


def _balanced_stratified_design(table: PotentialOutcomesTable) -> Stratified:
    r = {}
    for h, size in zip(table.stratum_labels, table.stratum_sizes):
        base, rem = divmod(size, len(table.treatments))
        r[h] = {z: base + (1 if j < rem else 0) for j, z in enumerate(table.treatments)}
    return Stratified.from_table(table, r)


def empirical_bound_check(
    table: PotentialOutcomesTable,
    mech: Stratified,
    c: Contrast,
    q: QMatrix,
    draws: int = 200,
    seed: int = 0,
) -> dict:
    """End-to-end demonstration: draw assignments, average the plug-in bound
    estimator, and report its gap to the exact sampling variance (which is the
    quadratic-form bias whenever generalized additivity fails)."""
    if draws < 2:
        raise ValueError("need at least 2 draws")
    values = np.empty(draws)
    for k, part in enumerate(mech.sample_many(seed, draws)):
        values[k] = v_q_hat(table, part, mech, HT, c, q)
    mean = float(values.mean())
    bound = v_q(table, mech, HT, c, q)
    var = sampling_variance(table, mech, HT, c)
    return {
        "draws": draws,
        "mean_v_q_hat": mean,
        "v_q": bound,
        "var": var,
        "bias": bias(q, unit_contrasts(table, c)),
        "mc_se": float(values.std(ddof=1) / math.sqrt(draws)),
    }


def run_empirical_demo(
    model: GeneratingModel,
    sizes: tuple[int, int] = DEFAULT_SIZES,
    contrast: Sequence[float] = DEFAULT_CONTRAST,
    draws: int = 200,
    seed: int = 0,
) -> dict:
    """Optional end-to-end mode: one generated population per model, a balanced
    stratified assignment, and Monte-Carlo averages of the plug-in bound for
    the strict and stratum Q choices."""
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=(0xE0, 0))
    table = generate_population(model, sizes=sizes, seed=seq)
    mech = _balanced_stratified_design(table)
    c = Contrast(dict(zip(TREATMENTS, (float(v) for v in contrast))))
    n = sum(sizes)
    out = {"model": model.name, "sizes": list(sizes)}
    for name, q in (("strict", q_strict(n)), ("strat", q_strat(sizes))):
        out[name] = empirical_bound_check(table, mech, c, q, draws=draws, seed=seed + 1)
    return out


def export_boxplot_data(result: StudyResult, path) -> int:
    """Long-format CSV (model, q_choice, replicate, bias); returns the row count."""
    rows = 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "q_choice", "replicate", "bias"])
        for m in result.models:
            for choice, values in (("strict", m.bias_strict), ("strat", m.bias_strat)):
                for rep, value in enumerate(values):
                    writer.writerow([m.model, choice, rep, repr(value)])
                    rows += 1
    return rows

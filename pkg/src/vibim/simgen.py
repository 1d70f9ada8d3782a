"""Simulated datasets: AR(1) latent Gaussians cut into categoricals.

Latent ``Z ~ N_p(0, Sigma)`` with ``Sigma_ij = rho^|i-j|`` is drawn by the
recursion ``Z_i = rho Z_{i-1} + sqrt(1 - rho^2) e_i``. The first ``q``
predictors are categorical: level ``j`` of predictor ``i`` is observed when
``Z_i`` falls in ``(Phi^-1((j-1)/J_i), Phi^-1(j/J_i)]``. The last level is
the reference level of the encoding.

Predictor indices here are 0-based; ``X1`` is predictor 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np

from .encoding import GroupedDesign, Predictor, PredictorSchema, encode

__all__ = [
    "SCENARIOS",
    "SimDesignSpec",
    "TruthRecord",
    "SimulatedData",
    "generate",
    "latent_ar1",
    "normal_cuts",
    "standin_schema",
    "standin_dataset",
]

# true main effects (1-based, as printed) and interaction pairs per scenario
_EX1_MAINS = (1, 3, 5, 7, 8, 9)
SCENARIOS = {
    "ex1_I": (_EX1_MAINS, ((7, 9),)),
    "ex1_II": (_EX1_MAINS, ((1, 8),)),
    "ex1_III": (_EX1_MAINS, ((1, 3),)),
    "ex1_IV": (_EX1_MAINS, ((7, 9), (1, 8))),
    "ex1_V": (_EX1_MAINS, ((7, 9), (1, 3))),
    "ex1_VI": (_EX1_MAINS, ((7, 9), (1, 8), (1, 3))),
    "ex2_I": ((1, 3, 5, 7, 8), ((7, 9),)),
    "ex2_II": ((1, 3, 5, 7, 9), ((1, 8),)),
    "ex2_III": ((3, 5, 7, 8, 9), ((1, 8),)),
    "ex2_IV": ((1, 5, 7, 8, 9), ((1, 3),)),
}

_MAIN_COEF = {1: (2.0,), 3: (3.0,), 5: (-2.0, -3.0, -4.0, -5.0, 0.0), 7: (2.0,), 8: (3.0,), 9: (-2.0,)}
_PAIR_COEF = {(7, 9): 1.5, (1, 8): 1.5, (1, 3): 2.0}


@dataclass(frozen=True)
class SimDesignSpec:
    n: int = 200
    p: int = 1000
    levels: tuple = (2, 2, 2, 2, 6, 6)
    rho: float = 0.5
    sigma: float = 1.0
    beta0: float = 1.0
    scenario: str = "ex1_I"
    seed: int | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; choose from {sorted(SCENARIOS)}")
        if self.p < 9:
            raise ValueError("p must be at least 9")
        if len(self.levels) > self.p or any(J < 2 for J in self.levels):
            raise ValueError("invalid categorical levels")
        if not abs(self.rho) < 1:
            raise ValueError("|rho| must be < 1")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.n < 2:
            raise ValueError("n must be at least 2")

    @property
    def q(self) -> int:
        return len(self.levels)


@dataclass(frozen=True)
class TruthRecord:
    """True model of a scenario, 0-based predictor indices."""

    main_groups: frozenset
    interaction_pairs: frozenset
    coefficients: dict = field(default_factory=dict)

    @property
    def terms(self) -> frozenset:
        return frozenset({(i,) for i in self.main_groups} | set(self.interaction_pairs))

    @property
    def size(self) -> int:
        return len(self.main_groups) + len(self.interaction_pairs)


@dataclass(frozen=True, eq=False)
class SimulatedData:
    schema: PredictorSchema
    raw: dict
    response: np.ndarray
    truth: TruthRecord
    latent: np.ndarray

    def __iter__(self):
        return iter((self.raw, self.response, self.truth))

    def design(self) -> GroupedDesign:
        return encode(self.schema, self.raw)


def normal_cuts(J: int) -> np.ndarray:
    """Interior standard-normal quantiles at ``1/J, ..., (J-1)/J``."""
    nd = NormalDist()
    return np.array([nd.inv_cdf(j / J) for j in range(1, J)])


def latent_ar1(n: int, p: int, rho: float, rng: np.random.Generator) -> np.ndarray:
    E = rng.standard_normal((n, p))
    Z = np.empty_like(E)
    Z[:, 0] = E[:, 0]
    scale = math.sqrt(1.0 - rho * rho)
    for i in range(1, p):
        Z[:, i] = rho * Z[:, i - 1] + scale * E[:, i]
    return Z


def truth_for(scenario: str, levels=(2, 2, 2, 2, 6, 6)) -> TruthRecord:
    mains, pairs = SCENARIOS[scenario]
    coef = {}
    for m in mains:
        c = _MAIN_COEF[m]
        width = levels[m - 1] - 1 if m - 1 < len(levels) else 1
        if len(c) != width:
            raise ValueError(f"scenario {scenario} needs X{m} with {len(c)} dummy columns")
        coef[(m - 1,)] = c
    for a, b in pairs:
        coef[(a - 1, b - 1)] = (_PAIR_COEF[(a, b)],)
    return TruthRecord(
        frozenset(m - 1 for m in mains),
        frozenset((a - 1, b - 1) for a, b in pairs),
        coef,
    )


def generate(spec: SimDesignSpec) -> SimulatedData:
    """Draw one dataset; identical ``spec`` (incl. seed) gives identical output."""
    rng = np.random.default_rng(spec.seed)
    Z = latent_ar1(spec.n, spec.p, spec.rho, rng)
    noise = rng.standard_normal(spec.n)

    schema_entries, raw, blocks = [], {}, {}
    for i in range(spec.p):
        name = f"X{i + 1}"
        if i < spec.q:
            J = spec.levels[i]
            codes = np.searchsorted(normal_cuts(J), Z[:, i], side="left")
            labels = tuple(str(j) for j in range(1, J + 1))
            schema_entries.append(Predictor.categorical(name, labels))
            raw[name] = np.array(labels, dtype=object)[codes]
            blocks[i] = (codes[:, None] == np.arange(J - 1)[None, :]).astype(float)
        else:
            schema_entries.append(Predictor.continuous(name))
            raw[name] = Z[:, i].copy()
            blocks[i] = Z[:, i : i + 1]

    truth = truth_for(spec.scenario, spec.levels)
    y = np.full(spec.n, spec.beta0)
    for term, coef in truth.coefficients.items():
        if len(term) == 1:
            block = blocks[term[0]]
        else:
            a, b = blocks[term[0]], blocks[term[1]]
            block = (a[:, :, None] * b[:, None, :]).reshape(spec.n, -1)
        y += block @ np.asarray(coef)
    y += spec.sigma * noise
    return SimulatedData(PredictorSchema(tuple(schema_entries)), raw, y, truth, Z)


# -- synthetic stand-in with the roster of the city-level outbreak data -------

_REGIONS = ("North", "East", "South", "Central", "Northwest", "Southwest", "Northeast")
_CONTINUOUS = (
    "Travel.Intensity", "Pop.2018", "Dis.WH", "Total.Flow", "PGRP", "3A.Hospital",
    "Arr.Time", "Temperature", "Enter.Date", "Bus.Date", "Railway.Date",
)
_BINARY = ("Enter.Resp", "Bus.Resp", "Railway.Resp")

# coefficients of the stand-in generator for log(Sevendays.Cucase)
STANDIN_COEF = {
    "Intercept": 6.0,
    "Dis.WH": -1.2,
    "3A.Hospital": 0.08,
    "Total.Flow": 5.2,
    "Dis.WH*Total.Flow": -1.55,
    "Pop.2018": 0.5,
    "3A.Hospital*Railway.Resp": 0.1,
    "Pop.2018*PGRP": 0.06,
    "PGRP*Temperature": 0.006,
}
STANDIN_SIGMA = 0.8


def standin_schema() -> PredictorSchema:
    entries = [
        Predictor.categorical("City.Tier", tuple(str(k) for k in range(1, 7))),
        Predictor.categorical("Region", _REGIONS),
    ]
    entries += [Predictor.continuous(c) for c in _CONTINUOUS]
    entries += [Predictor.continuous(b) for b in _BINARY]
    return PredictorSchema(tuple(entries))


def standin_dataset(n: int = 296, seed: int = 2020) -> tuple[dict, np.ndarray]:
    """Synthetic city table with the 16-predictor roster and a count response.

    Returns ``(columns, cases)`` where ``columns`` maps every predictor name
    to its cells and ``cases`` is the (positive) response on its natural
    scale. The generator has a distance-by-flow interaction that is almost
    collinear with the flow main effect, as in the real table.
    """
    rng = np.random.default_rng(seed)
    tier = rng.choice(6, size=n, p=[0.02, 0.05, 0.2, 0.25, 0.28, 0.2])
    region = rng.choice(7, size=n)
    dis = np.clip(rng.normal(2.95, 0.22, n), 2.0, 3.6)
    flow = np.clip(2.0 - 2.4 * (dis - 2.95) + rng.normal(0, 0.9, n) - 0.25 * tier, -3.0, 6.0)
    pop = np.clip(rng.normal(1.4, 0.55, n) - 0.12 * tier, -1.0, 3.5)
    hosp = rng.poisson(1.0 + 2.5 * np.exp(0.6 * pop)).astype(float)
    pgrp = np.round(np.clip(rng.normal(6.0 - 0.4 * tier, 2.2), 1.2, 20.0), 3)
    temp = np.round(rng.normal(8.0, 7.0, n) + 1.5 * (region == 2) - 2.0 * (region == 6), 2)
    travel = np.round(np.clip(rng.normal(5.0, 1.4, n), 0.5, None), 3)
    arr = rng.integers(19, 36, n).astype(float)
    resp = {b: (rng.random(n) < pr).astype(float) for b, pr in zip(_BINARY, (0.3, 0.2, 0.25))}
    dates = {
        d: resp[b] * rng.integers(1, 7, n)
        for d, b in zip(("Enter.Date", "Bus.Date", "Railway.Date"), _BINARY)
    }
    c = STANDIN_COEF
    eta = (
        c["Intercept"] + c["Dis.WH"] * dis + c["3A.Hospital"] * hosp + c["Total.Flow"] * flow
        + c["Pop.2018"] * pop + c["Dis.WH*Total.Flow"] * dis * flow
        + c["3A.Hospital*Railway.Resp"] * hosp * resp["Railway.Resp"]
        + c["Pop.2018*PGRP"] * pop * pgrp + c["PGRP*Temperature"] * pgrp * temp
    )
    cases = np.round(np.exp(eta + STANDIN_SIGMA * rng.standard_normal(n)), 6)
    cases = np.maximum(cases, 1.0)
    columns = {
        "City.Tier": np.array([str(t + 1) for t in tier], dtype=object),
        "Region": np.array([_REGIONS[r] for r in region], dtype=object),
        "Travel.Intensity": travel,
        "Pop.2018": np.round(pop, 4),
        "Dis.WH": np.round(dis, 4),
        "Total.Flow": np.round(flow, 4),
        "PGRP": pgrp,
        "3A.Hospital": hosp,
        "Arr.Time": arr,
        "Temperature": temp,
        **dates,
        **resp,
    }
    return columns, cases

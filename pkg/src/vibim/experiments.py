"""Replicated experiments: F/G simulation study, stability tables, guided simulation.

Every driver takes one integer seed and derives one child seed sequence per
task, so results do not depend on the number of workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
from joblib import Parallel, delayed

from .encoding import GroupedDesign, PredictorSchema, augment_interactions, encode
from .evaluation import fg_measure, pivs_many, sivs_many
from .procedure import VibimConfig, run_vibim, two_stage
from .regression import fit_ols, ols_inference
from .simgen import SimDesignSpec, generate
from .solvers import PenaltySpec

__all__ = [
    "METHODS",
    "baseline_spec",
    "simulate_replicate",
    "simulate",
    "summarize",
    "stability_experiment",
    "GuidedModel",
    "guided_simulation",
    "parse_term",
]

METHODS = ("vibim", "glasso", "gscad", "gmcp")
DEFAULT_SIZES = (5, 6, 7, 8, 9)


def baseline_spec(method: str) -> PenaltySpec:
    specs = {"glasso": PenaltySpec.lasso, "gscad": PenaltySpec.scad, "gmcp": PenaltySpec.mcp}
    if method not in specs:
        raise ValueError(f"unknown baseline {method!r}")
    return specs[method]()


def _run(fn: Callable, tasks: Sequence, threads: int) -> list:
    if threads <= 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    return Parallel(n_jobs=threads)(delayed(fn)(*t) for t in tasks)


def _int_seed(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1, dtype=np.uint32)[0])


# -- F/G simulation study -----------------------------------------------------

def simulate_replicate(scenario: str, n: int, p: int, seed_seq, methods=METHODS,
                       sizes=DEFAULT_SIZES, folds: int = 10,
                       config: VibimConfig = VibimConfig()) -> dict:
    """F and G per ``(method, size)`` on one generated dataset.

    Baselines are two-stage selectors tuned by ``folds``-fold CV; their
    size-``s`` model is read off the stage-2 path.
    """
    if not isinstance(seed_seq, np.random.SeedSequence):
        seed_seq = np.random.SeedSequence(seed_seq)
    data_ss, fit_ss = seed_seq.spawn(2)
    data = generate(SimDesignSpec(n=n, p=p, scenario=scenario, seed=_int_seed(data_ss)))
    design, y, truth = data.design(), data.response, data.truth.terms
    out = {}
    for method, child in zip(methods, fit_ss.spawn(len(methods))):
        if method == "vibim":
            report = run_vibim(design, y, config)
            pick = report.top_terms
        else:
            result = two_stage(design, y, baseline_spec(method), tuning="cv", folds=folds,
                               rng=np.random.default_rng(child))
            pick = result.terms_of_size
        for s in sizes:
            score = fg_measure(pick(s), truth)
            out[(method, s)] = (score.f, score.g)
    return out


def summarize(replicates: Sequence[Mapping], methods, sizes) -> list:
    """Mean and standard error of F and G per method and size."""
    rows = []
    reps = len(replicates)
    for m in methods:
        for s in sizes:
            vals = np.array([r[(m, s)] for r in replicates], dtype=float)
            mean = vals.mean(axis=0)
            se = vals.std(axis=0, ddof=1) / math.sqrt(reps) if reps > 1 else np.full(2, math.nan)
            rows.append({
                "method": m, "size": s, "reps": reps,
                "f_mean": float(mean[0]), "f_se": float(se[0]),
                "g_mean": float(mean[1]), "g_se": float(se[1]),
                "f": _cell(mean[0], se[0]), "g": _cell(mean[1], se[1]),
            })
    return rows


def _cell(mean, se) -> str:
    return f"{mean:.3f}" if not math.isfinite(se) else f"{mean:.3f} ({se:.3f})"


def simulate(scenario: str, n: int = 200, p: int = 1000, reps: int = 100, methods=METHODS,
             sizes=DEFAULT_SIZES, seed: int = 0, threads: int = 1, folds: int = 10,
             config: VibimConfig = VibimConfig()) -> list:
    if reps < 1:
        raise ValueError("reps must be >= 1")
    children = np.random.SeedSequence(seed).spawn(reps)
    tasks = [(scenario, n, p, ss, tuple(methods), tuple(sizes), folds, config) for ss in children]
    return summarize(_run(simulate_replicate, tasks, threads), methods, sizes)


# -- stability ------------------------------------------------------------------

def _selector(methods, vibim_sizes, config):
    def select(design, y, rng):
        out = {}
        for method in methods:
            if method == "vibim":
                report = run_vibim(design, y, config)
                for s in vibim_sizes:
                    out[f"vibim_s{s}"] = report.top_terms(s)
            elif method == "constant":
                out["constant"] = frozenset()
            else:
                out[method] = two_stage(design, y, baseline_spec(method), tuning="bic").selected_terms
        return out
    return select


def _row_labels(methods, vibim_sizes) -> list:
    labels = []
    for m in methods:
        if m == "vibim":
            labels.extend(f"vibim_s{s}" for s in vibim_sizes)
        else:
            labels.append(m)
    return labels


def _stability_task(kind, level, methods, vibim_sizes, design, y, reps, ss, sigma_hat, config):
    select = _selector(methods, vibim_sizes, config)
    rng = np.random.default_rng(ss)
    if kind == "pivs":
        return pivs_many(select, design, y, level, reps, rng, sigma_hat=sigma_hat)
    return sivs_many(select, design, y, level, reps, rng)


def stability_experiment(design: GroupedDesign, response, methods=("vibim", "gscad"),
                         vibim_sizes: Sequence[int] | None = None, taus=(0.1, 0.2),
                         fractions=(0.05, 0.1), reps: int = 10, seed: int = 0,
                         sigma_hat: float | None = None, threads: int = 1,
                         config: VibimConfig = VibimConfig()) -> list:
    """PIVS and SIVS per method; VIBIM contributes one row per fixed size.

    Baselines are two-stage selectors tuned by BIC. ``sigma_hat`` defaults to
    the residual scale of VIBIM's largest plausible model on the full data,
    and ``vibim_sizes`` to its plausible window.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    y = np.asarray(response, dtype=float)
    if sigma_hat is None or (vibim_sizes is None and "vibim" in methods):
        full = run_vibim(design, y, config)
        if vibim_sizes is None:
            vibim_sizes = tuple(range(full.lower, full.upper + 1))
        if sigma_hat is None:
            sigma_hat = math.sqrt(full.model(full.upper).fit.sigma2_hat)
    vibim_sizes = tuple(vibim_sizes or ())
    columns = [("pivs", t) for t in taus] + [("sivs", f) for f in fractions]
    children = np.random.SeedSequence(seed).spawn(len(columns))
    tasks = [(kind, level, tuple(methods), vibim_sizes, design, y, reps, ss, sigma_hat, config)
             for (kind, level), ss in zip(columns, children)]
    results = _run(_stability_task, tasks, threads)
    rows = []
    for label in _row_labels(methods, vibim_sizes):
        row = {"method": label}
        for (kind, level), res in zip(columns, results):
            score = res[label]
            row[f"{kind}_{level:g}"] = score.value
            row[f"{kind}_{level:g}_failures"] = score.failures
        rows.append(row)
    return rows


# -- guided simulation ------------------------------------------------------------

def parse_term(label: str, schema: PredictorSchema) -> tuple:
    """``"A"`` -> ``(i,)`` and ``"A*B"`` -> ``(i, j)`` with ``i < j``."""
    names = {n: k for k, n in enumerate(schema.names)}
    parts = label.split("*")
    try:
        idx = sorted(names[p.strip()] for p in parts)
    except KeyError as exc:
        raise ValueError(f"unknown predictor {exc.args[0]!r} in term {label!r}") from None
    if len(idx) not in (1, 2) or len(set(idx)) != len(idx):
        raise ValueError(f"bad term {label!r}")
    return tuple(idx)


@dataclass(frozen=True)
class GuidedModel:
    """Generating model for a guided simulation.

    ``coefficients`` maps column labels (and ``"(Intercept)"``) to values;
    when absent they and ``sigma`` come from an OLS fit on the data.
    """

    terms: tuple
    designated: tuple
    coefficients: dict | None = None
    sigma: float | None = None
    contrast: str | None = None

    @classmethod
    def from_mapping(cls, data: Mapping) -> "GuidedModel":
        terms = tuple(str(t) for t in data["terms"])
        designated = tuple(str(t) for t in data.get("designated", ()))
        if not set(designated) <= set(terms):
            raise ValueError("designated terms must be part of the model")
        contrast = data.get("contrast")
        if contrast is None:
            pairs = [t for t in designated if "*" in t]
            contrast = pairs[0] if len(pairs) == 1 else None
        sigma = data.get("sigma")
        return cls(terms, designated, data.get("coefficients"),
                   None if sigma is None else float(sigma), contrast)


@dataclass(frozen=True, eq=False)
class _Generator:
    design: GroupedDesign
    columns: np.ndarray
    intercept: float
    coef: np.ndarray
    sigma: float
    size: int


def _generator(main: GroupedDesign, y: np.ndarray, terms: Sequence[tuple],
               model: GuidedModel) -> _Generator:
    pairs = [t for t in terms if len(t) == 2]
    design = augment_interactions(main, pairs)
    groups = [design.group_index(t) for t in terms]
    cols = design.columns_of(groups)
    if model.coefficients is None:
        fit = fit_ols(design, cols, y)
        intercept, coef = fit.intercept, fit.coef
        sigma = math.sqrt(fit.sigma2_hat) if model.sigma is None else model.sigma
    else:
        c = model.coefficients
        intercept = float(c.get("(Intercept)", 0.0))
        coef = np.array([float(c.get(design.column_labels[k], 0.0)) for k in cols])
        if model.sigma is None:
            raise ValueError("sigma is required when coefficients are given")
        sigma = model.sigma
    return _Generator(design, cols, float(intercept), np.asarray(coef, float), float(sigma), len(terms))


def _guided_rep(gen: _Generator, main: GroupedDesign, designated: Sequence[tuple], alpha: float,
                ss, config: VibimConfig) -> bool:
    rng = np.random.default_rng(ss)
    X = gen.design.matrix[:, gen.columns]
    y = gen.intercept + X @ gen.coef + gen.sigma * rng.standard_normal(main.n)
    report = run_vibim(main, y, config)
    s = min(gen.size, len(report.ranking))
    top = report.ranking[:s]
    terms = report.design.terms_of(top)
    if not set(designated) <= terms:
        return False
    cols = report.design.columns_of(top)
    inf = ols_inference(report.design, cols, y)
    pvals = dict(zip(inf.columns.tolist(), inf.p_value[1:]))
    for t in designated:
        g = report.design.group_index(t)
        if not all(pvals[int(c)] < alpha for c in report.design.groups[g]):
            return False
    return True


def guided_simulation(schema: PredictorSchema, raw: Mapping, response, model: GuidedModel,
                      reps: int = 200, seed: int = 0, alpha: float = 0.05, threads: int = 1,
                      config: VibimConfig = VibimConfig()) -> list:
    """Count replicates where all designated terms are in VIBIM's top-``s`` model and significant.

    ``s`` is the number of terms in the generating model. With a contrast
    term, a second generator without it (coefficients refitted) is run with
    ``s - 1``.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    y = np.asarray(response, dtype=float)
    main = encode(schema, raw)
    terms = [parse_term(t, schema) for t in model.terms]
    designated = [parse_term(t, schema) for t in model.designated]
    variants = [("full", terms)]
    if model.contrast is not None:
        drop = parse_term(model.contrast, schema)
        variants.append((f"without {model.contrast}", [t for t in terms if t != drop]))
    rows = []
    streams = np.random.SeedSequence(seed).spawn(len(variants))
    for (name, ts), stream in zip(variants, streams):
        gen = _generator(main, y, ts, model)
        tasks = [(gen, main, designated, alpha, ss, config) for ss in stream.spawn(reps)]
        hits = _run(_guided_rep, tasks, threads)
        rows.append({"model": name, "size": gen.size, "reps": reps, "count": int(sum(hits)),
                     "sigma": gen.sigma})
    return rows

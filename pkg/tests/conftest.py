import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "repo", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")

DATA = Path(__file__).resolve().parents[1] / "src" / "vibim" / "data"


@pytest.fixture
def data_dir() -> Path:
    return DATA


def random_design(rng, n, n_cont, levels=()):
    """Mixed design with ``levels`` categoricals first, then continuous predictors."""
    from vibim.encoding import Predictor, PredictorSchema, encode

    entries, raw = [], {}
    for i, J in enumerate(levels):
        name = f"C{i}"
        labels = [str(k) for k in range(J)]
        entries.append(Predictor.categorical(name, labels))
        codes = np.arange(n) % J
        rng.shuffle(codes)
        raw[name] = np.array(labels, dtype=object)[codes]
    for i in range(n_cont):
        name = f"Z{i}"
        entries.append(Predictor.continuous(name))
        raw[name] = rng.standard_normal(n)
    return encode(PredictorSchema(tuple(entries)), raw)

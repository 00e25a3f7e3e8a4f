"""Shared, cached analyses for the test-suite."""
from __future__ import annotations

import functools

from nonsaddle.config import AnalysisConfig
from nonsaddle.pipeline import analyze

# outer-map time and RK4 step per example; None means the default tau policy
SETTINGS = {
    "torus_homoclinic": (0.5, 0.01),
    "saddle_node_torus": (0.5, 0.01),
    "product_circle": (None, 0.01),
    "planar_cycle": (1.0, 0.01),
    "annulus_nonsaddle": (1.0, 0.01),
    "planar_saddle": (1.0, 0.01),
    "linear_sink": (1.0, 0.01),
    "robust_family": (1.0, 0.01),
    "mendelson": (1.0, 0.01),
}

FULL = ("classify", "conley", "influence")


def config(flow_id, n=256, stages=FULL, reversed=False, **params) -> AnalysisConfig:
    tau, step = SETTINGS[flow_id]
    return AnalysisConfig(flow_id, params=params, reversed=reversed, resolution=n, tau=tau, step=step,
                          stages=tuple(stages), max_confirm=2, n_perturb=32)


@functools.lru_cache(maxsize=None)
def _cached(flow_id, n, stages, reversed, params):
    return analyze(config(flow_id, n, stages, reversed, **dict(params)))


def analysis(flow_id, n=256, stages=FULL, reversed=False, **params):
    return _cached(flow_id, n, tuple(stages), reversed, tuple(sorted(params.items())))

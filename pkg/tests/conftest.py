import pytest
import yaml

from trustdyn.models import IntegratorConfig
from trustdyn.services.payoffs import validate_params

BASE = {"r": 0.05, "R_T": 2, "N": 10, "t_v": 1}

# Phase-flow parameter sets, one per dynamical case
FIGURES = {
    "fig2": {**BASE, "alpha": 0.1, "lambda": 0.01},
    "fig3": {**BASE, "alpha": 0.2, "lambda": 0.01},
    "fig4": {**BASE, "alpha": 0.1, "lambda": 0.05},
    "fig5": {**BASE, "alpha": 0.2, "lambda": 0.05},
    "fig6": {**BASE, "alpha": 0.1, "lambda": 0.2},
    "fig7": {**BASE, "alpha": 0.1, "lambda": 0.2, "N": 20},
}

SWEEPS = {
    "fig9a": {"N": 7, "r": 0.05, "R_T": 3, "t_v": 1, "alpha": 0.5, "lambda": 0.14},
    "fig9b": {"N": 7, "r": 0.05, "R_T": 3, "t_v": 1, "alpha": 0.5, "lambda": 0.5},
    "fig10": {"N": 20, "r": 0.5, "R_T": 2, "t_v": 1, "alpha": 0.1, "lambda": 0.5},
}


def figure_params(name, **changes):
    raw = {**FIGURES.get(name, SWEEPS.get(name, {})), **changes}
    return validate_params(raw)


@pytest.fixture(params=sorted(FIGURES))
def any_figure(request):
    return request.param, figure_params(request.param)


@pytest.fixture
def fast_integrator():
    """Coarser than the defaults; enough for the smooth flows in the figure sets."""
    return IntegratorConfig(step=0.05, t_max=50000.0, convergence_eps=1e-9)


@pytest.fixture
def write_config(tmp_path):
    def _write(document, name="experiment.yaml"):
        path = tmp_path / name
        path.write_text(yaml.safe_dump(document), encoding="utf-8")
        return path
    return _write

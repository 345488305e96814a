import pytest

from rcpum import (
    AsfEvaluator,
    BundleModel,
    BundleScenario,
    DiscreteBeta,
    LogitModel,
    derivative_table,
)

DIMS_K2 = (1, 1)


@pytest.fixture(scope="session")
def logit_mixture():
    """The two-good logit with an outside option and the {(1,1),(1,3)}
    coefficient mixture used throughout the recovery tests."""
    model = LogitModel(dims=DIMS_K2, alphas=(0.0, 0.0), outside_good=True)
    beta = DiscreteBeta(DIMS_K2, [[1.0, 1.0], [1.0, 3.0]], [0.5, 0.5])
    return model, beta


@pytest.fixture(scope="session")
def logit_mixture_table(logit_mixture):
    model, beta = logit_mixture
    evaluator = AsfEvaluator(model, beta)
    return evaluator, derivative_table(evaluator, 3)


def bundle_scenarios():
    return (
        BundleScenario(0.20, (0.5, -0.3), ((1, 2, 0.4),)),
        BundleScenario(0.20, (-0.4, 0.6), ((1, 2, -0.5),)),
        BundleScenario(0.15, (0.8, 0.2), ((1, 2, 0.3),)),
        BundleScenario(0.15, (-0.2, -0.6), ((1, 2, 0.6),)),
        BundleScenario(0.15, (0.3, 0.9), ((1, 2, -0.2),)),
        BundleScenario(0.15, (1.0, -0.8), (), frozenset({(0.0, 0.0), (1.0, 0.0)})),
    )


@pytest.fixture(scope="session")
def smoothed_bundle():
    """Six-scenario bundle model (one restricted consideration set) with
    Gumbel smoothing and a four-point coefficient mixture."""
    model = BundleModel(dims=DIMS_K2, scenarios=bundle_scenarios(), smoothing=1.0)
    beta = DiscreteBeta(
        DIMS_K2, [[1.0, 1.0], [1.0, 3.0], [2.0, 1.0], [2.0, 2.0]], [0.25] * 4
    )
    return model, beta


@pytest.fixture(scope="session")
def smoothed_bundle_table(smoothed_bundle):
    model, beta = smoothed_bundle
    evaluator = AsfEvaluator(model, beta)
    return evaluator, derivative_table(evaluator, 2)

from ._fppi import (
    NonConvergenceError,
    SingularMatrixError,
    __version__,
    amse,
    estimate_glm,
    estimate_mean,
    fppi_mean_variance,
    generate,
    glm_gradient,
    glm_objective,
    lambda_star_glm,
    lambda_star_population,
    region_recovery,
    simulate,
)

__all__ = [
    "NonConvergenceError",
    "SingularMatrixError",
    "__version__",
    "amse",
    "estimate_glm",
    "estimate_mean",
    "fppi_mean_variance",
    "generate",
    "glm_gradient",
    "glm_objective",
    "lambda_star_glm",
    "lambda_star_population",
    "region_recovery",
    "simulate",
]

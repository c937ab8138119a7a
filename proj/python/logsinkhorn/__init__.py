"""Log-domain entropic optimal transport (C++ core via pybind11)."""

from ._core import (
    Error,
    Precision,
    Reduction,
    SinkhornConfig,
    contraction_rate_bound,
    generate_grid_problem,
    generate_rigid_pair,
    kkt_residual,
    log_sum_exp,
    match_point_clouds,
    materialize_plan,
    solve,
    solve_standard_domain,
    squared_euclidean_cost,
)


def config(**fields):
    """SinkhornConfig with the given fields set; precision may be a string."""
    c = SinkhornConfig()
    for name, value in fields.items():
        if name == "precision" and isinstance(value, str):
            value = getattr(Precision, value)
        if name == "reduction" and isinstance(value, str):
            value = getattr(Reduction, value)
        if not hasattr(c, name):
            raise TypeError(f"unknown config field {name!r}")
        setattr(c, name, value)
    c.validate()
    return c


__all__ = [
    "Error",
    "Precision",
    "Reduction",
    "SinkhornConfig",
    "config",
    "contraction_rate_bound",
    "generate_grid_problem",
    "generate_rigid_pair",
    "kkt_residual",
    "log_sum_exp",
    "match_point_clouds",
    "materialize_plan",
    "solve",
    "solve_standard_domain",
    "squared_euclidean_cost",
]

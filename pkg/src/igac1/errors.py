"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid run configuration or violated model assumption."""


class GeometryError(ValueError):
    """Geometry fails a structural requirement (C0 matching, regularity, ...)."""


class ProjectionError(RuntimeError):
    """Gluing-data projection failed (e.g. sign loss; refine the mesh)."""


class SolveError(RuntimeError):
    """Linear solve failed or did not converge."""

"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A configuration value violates its constraint."""

    def __init__(self, field, message, line=None):
        self.field = field
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{field}: {message}{where}")


class LinkInfeasibleError(ValueError):
    """The link budget cannot be closed within the node's power limit."""

    def __init__(self, distance_m, required_dbm, max_dbm):
        self.distance_m = distance_m
        self.required_dbm = required_dbm
        self.max_dbm = max_dbm
        super().__init__(
            f"link of {float(distance_m):.1f} m needs {float(required_dbm):.2f} dBm "
            f"> limit {float(max_dbm):.2f} dBm")


class StaleRouteError(RuntimeError):
    """A frame could not complete its route; the partial outcome is attached."""

    def __init__(self, message, reports=(), topology=None, failed_node=None):
        super().__init__(message)
        self.reports = list(reports)
        self.topology = topology
        self.failed_node = failed_node


class InfeasibleInstanceError(ValueError):
    """Some user cannot meet the SINR floor at any base station."""

    def __init__(self, users, best_sinr, min_sinr):
        self.users = list(users)
        self.best_sinr = best_sinr
        self.min_sinr = min_sinr
        super().__init__(
            f"{len(self.users)} user(s) below the SINR floor {min_sinr:.4g} even at "
            f"full power: {self.users[:10]}")


class UnassociableUserError(ValueError):
    """Every candidate base station offers zero capacity to a user."""

class ConfigurationError(ValueError):
    """Invalid or physically inconsistent parameters."""


class ValidationError(ValueError):
    """Malformed network graph or input document."""

    def __init__(self, message, offenders=()):
        super().__init__(message)
        self.offenders = list(offenders)


class RealizabilityError(ConfigurationError):
    pass


class DivergenceError(RuntimeError):
    def __init__(self, message, t_last=None):
        if t_last is not None:
            message = f"{message} (last valid time {t_last:.6g} ns)"
        super().__init__(message)
        self.t_last = t_last


class ChatterError(RuntimeError):
    def __init__(self, message, element=None, t=None):
        super().__init__(message)
        self.element = element
        self.t = t


class DocumentError(ValidationError):
    """Input document problem, located by a field path and, where known, a line."""

    def __init__(self, message, path="", line=None):
        where = path or "document"
        if line is not None:
            where = f"line {line}: {where}"
        super().__init__(f"{where}: {message}", [path] if path else [])
        self.path = path
        self.line = line

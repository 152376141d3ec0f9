"""Exception types raised by the registration engine."""


class RegistrationError(Exception):
    """Base class for all screwreg errors."""


class EmptyInput(RegistrationError, ValueError):
    pass


class AntipodalInput(RegistrationError, ValueError):
    """Raised when a minimal-geodesic rotation is requested between opposite vectors."""


class DegeneratePoint(RegistrationError, ValueError):
    pass


class NoConsensus(RegistrationError):
    """No model reached the minimum inlier count."""


class ParseError(RegistrationError, ValueError):
    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: {message}")


class UnsupportedFormat(RegistrationError, ValueError):
    pass


class IndexOutOfRange(RegistrationError, IndexError):
    pass

"""Exception hierarchy for carmsim."""


class CarmSimError(Exception):
    """Base class for all carmsim errors."""


class BehindCamera(CarmSimError):
    """A 3D point has non-positive depth in the camera frame."""


class InvalidRigConfig(CarmSimError):
    """Rig configuration is geometrically or numerically invalid."""


class DegenerateConfiguration(CarmSimError):
    """Point configuration does not constrain the requested estimate."""


class IllConditioned(CarmSimError):
    """Linear system is too close to rank-deficient to trust."""


class AtInfinity(CarmSimError):
    """Triangulated point has no finite physical solution."""


class InvalidPerturbation(CarmSimError):
    """Perturbation would produce invalid intrinsics (e.g. focal <= 0)."""


class LayoutNotVisible(CarmSimError):
    """A phantom marker fails the visibility filters under the given rig."""


class ConfigError(CarmSimError):
    """Experiment configuration failed validation.

    ``errors`` holds every violation found, not just the first.
    """

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class ParseError(ConfigError):
    """Config file is not syntactically valid."""


class IoError(CarmSimError):
    """Report could not be written or read."""

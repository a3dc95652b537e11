"""Exception hierarchy shared by all modules."""


class SdmCableError(Exception):
    """Base class for every error raised by sdmcable."""


class DomainError(SdmCableError, ValueError):
    """An argument lies outside the domain of the formula."""


class DegenerateLinkError(SdmCableError):
    """The droop-gain denominator vanished numerically."""


class UnsustainableSpanError(SdmCableError):
    """Noise added in one span is at least the launch power."""


class DispersionFreeError(SdmCableError):
    """The GN closed form is singular for zero dispersion."""


class InfeasibleGeometryError(SdmCableError):
    """No launch power in the search window sustains the link."""


class TargetTooHighError(SdmCableError):
    """A GSNR target cannot be met even at the shortest allowed span."""


class InfeasibleEntropyError(SdmCableError, ValueError):
    """Requested entropy is outside what the shaped constellation can reach."""


class CalibrationError(SdmCableError):
    """The power-feed calibration could not place the requested boundary."""


class ConfigError(SdmCableError):
    """A study configuration failed to parse or validate.

    ``problems`` holds every violation found, not only the first one.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("\n".join(self.problems))

class NetChemoError(Exception):
    """Base class for all errors raised by netchemo."""


class IncompatibleGrid(NetChemoError):
    """The time step does not produce an integer cell count on some arc."""


class BlowUp(NetChemoError):
    """The state became non-finite or exceeded the density cap."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class SingularSystem(NetChemoError):
    pass


class AssemblyError(NetChemoError):
    pass


class UnknownScenario(NetChemoError, KeyError):
    pass


class ConfigError(NetChemoError, ValueError):
    pass

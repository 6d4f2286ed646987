"""Exception hierarchy shared across the testbed components."""


class GridwireError(Exception):
    """Base class for all errors raised by this package."""


class FrameError(GridwireError):
    """A link frame is structurally invalid (bad length, oversize payload).

    ``consumed`` tells a streaming decoder how many octets to drop so it can
    resynchronize on the next start-of-frame pair; ``skipped`` counts garbage
    octets that preceded the sync pair.
    """

    def __init__(self, message: str, consumed: int = 0, skipped: int = 0):
        super().__init__(message)
        self.consumed = consumed
        self.skipped = skipped


class CrcMismatchError(FrameError):
    """A link frame failed CRC validation."""


class TransportError(GridwireError):
    """Transport reassembly failed (oversize fragment)."""


class UnsupportedObjectError(GridwireError):
    """An application object header names a (group, variation, qualifier)
    triple outside the supported set."""

    def __init__(self, group: int, variation: int, qualifier: int):
        super().__init__(
            f"unsupported object g{group}v{variation} qualifier 0x{qualifier:02X}"
        )
        self.group = group
        self.variation = variation
        self.qualifier = qualifier


class AppDecodeError(GridwireError):
    """An application fragment is malformed (truncated payload, bad counts)."""


class CaseError(GridwireError):
    """A grid case document violates the schema or its invariants."""


class DispatchError(GridwireError):
    """Droop dispatch infeasible for an island (capacity shortfall)."""


class MapError(GridwireError):
    """A point-map document violates the schema or its invariants."""


class DeviceError(GridwireError):
    """A simulator command references an unknown or unavailable device."""


class ConfigError(GridwireError):
    """Invalid CLI / session configuration."""

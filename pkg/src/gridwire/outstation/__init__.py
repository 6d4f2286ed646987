"""Field-side server: outstations over one TCP port, event buffers, command log."""

from .cmdlog import CommandLog, CommandLogEntry, read_jsonl
from .events import AnalogReportState, ClassBuffer, EventRecord, OutstationEvents, PointReading
from .server import DEFAULT_PORT, OutstationOptions, OutstationServer
from .values import read_point, read_station

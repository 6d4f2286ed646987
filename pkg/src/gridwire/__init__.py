"""gridwire: a software SCADA testbed — real-time grid simulation served as
DNP3 outstations over TCP, a polling DNP3 master with a tag database, and an
operator HTTP API."""

__version__ = "0.1.0"

"""Control-center side: polling sessions, tag database, health counters."""

from .master import Master, MasterConfig, TagView
from .session import MasterSession, SessionConfig, SessionHealth, TagEntry

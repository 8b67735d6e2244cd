"""Renewal theory for laws in the domain of geometric partial attraction of semistable laws."""

__version__ = "0.1.0"

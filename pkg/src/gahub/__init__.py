"""Distributed bitstring GA: clearinghouse server, client swarm, analytics."""

__version__ = "0.1.0"

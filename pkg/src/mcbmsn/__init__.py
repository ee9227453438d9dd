"""Simulation and optimisation toolkit for cache-enabled mobile sensor networks.

Modules
-------
topology     field, cells, channel model, node placement and mobility
beamforming  cooperative-hop energy and relay selection
adversary    evidence ledger and per-cell belief of a traffic analyst
routing      relay-aware link costs, routes, frame delivery, partition healing
optimizer    caching, association and power sharing at the base stations
harness      configuration, replications, confidence intervals and sweeps
"""

__version__ = "0.1.0"

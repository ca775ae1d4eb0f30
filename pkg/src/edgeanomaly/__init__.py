"""Labeled performance-anomaly dataset generator for microservice IoT apps on emulated edge-cloud topologies."""

__version__ = "0.1.0"

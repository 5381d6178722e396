"""CATOS: deterministic animal training/observing engine with a
hardware-in-the-loop rig simulator."""

__version__ = "0.1.0"

"""RIS-assisted mmWave simultaneous localization and communication simulator."""

__version__ = "0.1.0"

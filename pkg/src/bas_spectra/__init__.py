"""Bicharacteristic-amplitude cocycles and essential spectra of advective PDEs."""

__version__ = "0.1.0"

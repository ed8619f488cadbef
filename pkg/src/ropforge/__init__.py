"""Return-oriented chain synthesis for x86_64 gadget listings."""

__version__ = "0.1.0"

"""Build, check, evaluate and register Claims-Arguments-Evidence safety cases."""

__version__ = "0.1.0"

"""Coset-state copy-protection simulation lab.

Exact desk-scale simulation of coset states, the copy-protected PKE and FE
schemes built on them, their classical building blocks and the measurement
theory used to analyse pirates.
"""

__version__ = "0.1.0"


class CosetLabError(Exception):
    """Base class for library errors."""


class ParameterError(CosetLabError, ValueError):
    """Invalid or inconsistent parameters."""


class ResourceError(CosetLabError):
    """Requested simulation exceeds a configured resource cap."""


class RandomnessError(CosetLabError):
    """A finite randomness stream was exhausted."""


class PuncturedPointError(CosetLabError):
    """Evaluation requested at a punctured point."""


class IntegrityError(CosetLabError):
    """An obfuscated program blob failed its integrity check."""


class DecodeError(CosetLabError, ValueError):
    """Malformed serialized input."""


class SamplingError(CosetLabError):
    """A zero-probability measurement branch was requested."""

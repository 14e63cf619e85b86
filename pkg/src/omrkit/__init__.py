"""omrkit: optical mark recognition toolkit.

Registers scanned answer sheets against a reference, classifies each answer
box as confirmed / crossed-out / empty with pluggable classifiers, and grades
sheets with per-question review flags.
"""

__version__ = "0.1.0"

from .types import AnswerClass, RoiBox, RoiImage  # noqa: F401

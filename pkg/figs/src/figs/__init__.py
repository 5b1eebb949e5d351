"""Publication-style figures from axonesim run artifacts.

These scripts never recompute physics: every curve comes from the CSV
tables and JSON reports written by the simulator CLI, keyed together by
their manifests.
"""

from .loader import InputError, RunArtifact, load_artifact
from .render import FigureSpec, render

__all__ = ["FigureSpec", "InputError", "RunArtifact", "load_artifact",
           "render"]

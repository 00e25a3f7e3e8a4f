"""Combinatorial detection of non-saddle sets, dissonant points and regions of influence for planar and toroidal flows."""
from __future__ import annotations

__version__ = "0.1.0"

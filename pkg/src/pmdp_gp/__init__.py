"""Parameter synthesis for parametric Markov decision processes via geometric programming."""
from __future__ import annotations

__version__ = "0.1.0"

"""Figure rendering for the conservation-law laboratory's CSV outputs.

Reads only the documented CSV schemas; no physics is recomputed here.
"""

__version__ = "0.1.0"

"""semglab: an end-to-end workbench for gesture-free hand-intention decoding
from a simulated sEMG wristband."""

__version__ = "0.1.0"

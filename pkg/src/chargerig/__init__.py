"""chargerig: behavior-tree mission executive for a simulated explosive-charging rig."""

__version__ = "0.1.0"

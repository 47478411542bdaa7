"""UAS guidance with proximal policy optimization in continuous action space."""

__version__ = "0.1.0"

"""deskrl: a desk-scale actor-critic laboratory on toy pixel games."""

__version__ = "0.1.0"

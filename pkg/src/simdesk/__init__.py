"""simdesk: a desk-scale workbench for reproducible search-session simulation."""

__version__ = "0.1.0"

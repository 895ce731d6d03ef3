"""Interactive piano engine: streamed note events in, transformed piano output."""

__version__ = "0.1.0"

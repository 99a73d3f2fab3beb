"""Transformer sentence-embedding export for the argument mining pipeline."""

from .exporter import ExportError, ExportJob, ExportStats, export

__version__ = "0.1.0"
__all__ = ["ExportError", "ExportJob", "ExportStats", "export", "__version__"]

"""Offline figure renderer for spikelab CSV artifacts.

Reads the CSV files written by the ``spikelab`` experiment runner and turns
them into publication-style panels: MSE-versus-time curves with the
algorithmic-threshold line, and histograms of generated-sample Frobenius
norms.  The renderer only displays file contents; it never recomputes
statistics.
"""

__version__ = "0.1.0"

from .io import CsvArtifact, SchemaError, read_artifact
from .render import render_curve, render_histogram

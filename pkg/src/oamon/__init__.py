"""National open access monitoring pipeline.

Identify a country's publications from open metadata snapshots, label them
with a macro-discipline, track their open access status over time and
produce grouped OA-rate reports with sample-based error estimates.
"""

__version__ = "0.1.0"

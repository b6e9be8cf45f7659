"""schemnet: circuit schematic images -> SPICE netlists, with a synthetic
oracle corpus, evaluation harness, and human review server."""

__version__ = "0.1.0"

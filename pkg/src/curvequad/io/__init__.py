"""Input parsing, mesh writers and renderers."""

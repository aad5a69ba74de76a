"""molscale test suite."""

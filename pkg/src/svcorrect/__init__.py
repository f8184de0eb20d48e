"""Reference-based singing voice correction and its evaluation tools."""

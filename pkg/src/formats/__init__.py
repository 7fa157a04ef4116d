"""Text formats for problem files and certificates."""

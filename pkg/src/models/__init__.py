"""Models module for certificates, reports and problem files."""

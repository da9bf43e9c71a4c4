"""Gross-Pitaevskii ground states and focusing dynamics."""

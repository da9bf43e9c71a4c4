"""Focusing of Bose-Einstein condensates and atomic beams by optical standing waves."""

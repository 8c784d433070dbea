"""Unit test package for gasrepair."""

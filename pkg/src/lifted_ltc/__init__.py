"""Lifted codes on multilayer agreement samplers: testing, self-correction and audits."""

__version__ = "0.1.0"

"""Variational opponent modeling for partially observable Markov games."""

__version__ = "0.1.0"

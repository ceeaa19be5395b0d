"""Variational quantum topology optimization for heat-path ground structures."""

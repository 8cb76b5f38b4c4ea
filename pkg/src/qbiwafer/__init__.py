"""Quantum Bayesian inference for wafer bin map defect classification."""

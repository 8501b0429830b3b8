"""Adaptive-step Euler-Maruyama simulation for scalar SDEs with non-negative nonlinear coefficients."""

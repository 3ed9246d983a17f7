"""Recurrence/transience toolkit for normally reflected Brownian motion in
warped-product tube domains: integral test, hypothesis audit, Lyapunov
construction, and a Monte Carlo simulator of the reduced orbit diffusion."""

__version__ = "0.1.0"

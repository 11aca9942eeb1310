"""Symbolic checks for the renormalisation of the quasilinear equation
``d_t u - a(u) d_x^2 u = xi`` in the space-time white noise setting."""

__version__ = "0.1.0"

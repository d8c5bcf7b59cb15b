"""Path-integral propagators, Caldeira-Leggett bath kernels and damped-oscillator thermodynamics."""
__version__ = "0.1.0"

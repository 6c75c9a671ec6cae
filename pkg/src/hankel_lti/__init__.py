"""Hankel-operator analysis of linear time-invariant systems.

Submodules
----------
numerics       FFT, Jacobi SVD / Hermitian eigensolver, least squares, seeded streams
lti            diagonal and dense state-space systems, bilinear transform, simulation
hankel         Hankel matrices, Gramians, Hankel singular values, H-infinity checks
init_schemes   gamma1 / gamma2 / gamma3 initializations and random Markov parameters
hope           Markov-parameter kernels, sampler plans, FFT pipeline, Ho-Kalman
experiments    Monte-Carlo drivers behind the ``hankel-lti`` command line
"""
__version__ = "0.1.0"

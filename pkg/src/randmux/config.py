"""Shared numerical tolerances and simulator limits."""

#: Max-entry / spectral tolerance for matrix and state comparisons.
MATRIX_ATOL = 1e-12

#: Largest Hilbert-space dimension the dense channel simulator will build.
SIMULATOR_CAP = 2**12

#: Largest full-register dimension for semantic simulation of lowered circuits
#: (control, target, angle and phase-gradient registers together).
LOWERING_CAP = 2**16

#: Largest number of randomized angles the brute-force enumerator accepts.
MAX_ENUMERATED_ANGLES = 20

#: Upper limit on complex entries held by a materialized mixture channel.
MIXTURE_MAX_ENTRIES = 2**23

#: Number of bits in a fixed-point angle numerator.
ANGLE_BITS = 64

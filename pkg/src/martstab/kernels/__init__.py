"""Hot loops with a numba implementation and a numpy twin.

Each public entry point takes ``backend=None|"numba"|"numpy"``.
"""

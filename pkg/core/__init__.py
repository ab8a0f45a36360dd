# Numerical core of stepflow-lab
__version__ = "1.0.0"

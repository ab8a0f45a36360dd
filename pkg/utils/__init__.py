# Utilities package for stepflow-lab

# Batch driver for stepflow-lab

# Tests for stepflow-lab

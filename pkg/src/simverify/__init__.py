"""Forward-invariance verification for systems defined by fixed-step simulators."""

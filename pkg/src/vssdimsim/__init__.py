"""Variable-stepsize explicit second-derivative DIMSIMs."""

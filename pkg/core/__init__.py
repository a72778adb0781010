"""Core package of the depth-supervised Gaussian splatting engine."""

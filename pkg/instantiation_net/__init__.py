"""Single-image 3D mesh reconstruction with a spectral mesh decoder."""

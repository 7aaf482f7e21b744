"""Weighted Fock spaces, cell spectra and determinantal point processes."""

from .weights import (PowerAlpha, RadiusField, TabulatedRadial, disk_mass,
                      laplacian_density, load_weight_table)

__all__ = ["PowerAlpha", "RadiusField", "TabulatedRadial", "disk_mass", "laplacian_density",
           "load_weight_table"]
__version__ = "0.1.0"

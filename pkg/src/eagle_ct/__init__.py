"""Spectral edge loss (Scharr gradient patch variances in the frequency
domain) with analytic gradients, and the parallel-beam CT machinery used to
exercise it: FBP, regularized ART, and a trainable-filter FBP."""
from .eagle import (EagleConfig, LossBreakdown, combined_loss, combined_loss_gradient,
                    eagle_loss, eagle_loss_gradient, mse, tv_gradient, tv_value)
from .errors import (ConfigurationError, CorruptHeaderError, DimensionError, ImageFormatError,
                     ParameterError, SizeMismatchError)
from .tomo import ArtConfig, Geometry, Sinogram, art_reconstruct, fbp_reconstruct, radon_forward

__version__ = "0.1.0"

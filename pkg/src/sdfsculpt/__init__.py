"""Interactive sculpting of neural signed distance fields.

A small sinusoidal MLP represents a shape as the zero-level set of a
signed distance field (positive outside, negative inside).  Brush strokes
deform that level set by fine-tuning the network against a mix of samples
from the surface it currently represents and samples describing the
desired deformation, which keeps the edit local.
"""

__version__ = "0.1.0"

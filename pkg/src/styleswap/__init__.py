"""Content/style disentangled two-domain image adaptation.

Images from two visual domains are split into shared content and
domain-specific style by a small convolutional pipeline; swapping styles
across domains converts images between them.  Two interchangeable style
objectives (Gram matrices and sliced 1-D optimal transport over channel
statistics) can be compared under identical training randomness.
"""

__version__ = "0.1.0"

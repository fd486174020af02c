"""Subject-invariant representation learning for multi-channel time series.

The package couples a small reverse-mode autodiff core with mutual-information
estimators so that class-relevant and subject-dependent feature components can
be separated during training, then evaluated under within-subject and
leave-one-subject-out protocols and explained through layerwise relevance
propagation.
"""

__version__ = "0.1.0"

"""Online writer recognition under fatigue: DTW, multi-section VQ and allographic
text-dependent matchers with identification/verification evaluation."""

__version__ = "0.1.0"

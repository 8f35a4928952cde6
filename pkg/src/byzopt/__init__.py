"""Byzantine-resilient decentralized composite optimization simulator.

Penalized proximal updates with variance-reduced stochastic gradients,
four falsified-message attack models, screening/averaging baselines, and
calculators for the step-size and error-ball constants.
"""

__version__ = "0.1.0"

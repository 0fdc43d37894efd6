"""perturbench: desk-scale adversarial-example benchmarking toolkit.

Trains small convolutional classifiers from scratch on a reverse-mode
autodiff core, generates white-box FGSM/BIM adversarial examples under an
L-inf budget, measures confidence-gated fooling rates, and analyzes model
vulnerability and attack selectivity through feature embeddings.
"""

__version__ = "0.1.0"

"""mailab: a self-contained imitation-learning lab.

Adversarial imitation on a pixel-observation four-rooms navigation task,
with a behavior-cloning-pretrained frozen global encoder shared by policy,
critic and discriminator, penalized discriminator rewards, and optional
variational-bottleneck and latent-code variants.
"""

__version__ = "0.1.0"

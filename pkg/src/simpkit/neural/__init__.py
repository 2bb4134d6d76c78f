"""Minimal numpy-based neural substrate: reverse-mode autodiff, layers,
losses, Adam, checkpointing, and a small encoder-decoder transformer."""

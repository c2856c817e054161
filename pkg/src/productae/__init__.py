"""ProductAE laboratory: neural product autoencoders and classical coding baselines."""

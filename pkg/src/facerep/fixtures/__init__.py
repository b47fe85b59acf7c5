"""Packaged data files: tokenizer vocabulary and the mean face template."""

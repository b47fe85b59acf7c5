"""Visual-linguistic facial representation learning toolkit.

Dual-encoder contrastive pre-training on image-text pairs combined with
masked patch prediction, face-geometry preprocessing (similarity alignment,
tanh warping, heatmap rendering), downstream heads for parsing / alignment /
attributes, the full evaluation metric suite, and a streaming dataset
curation pipeline.  Everything is exposed through a FastAPI service; the
``facerep`` CLI is a thin client of that service.
"""

__version__ = "0.1.0"

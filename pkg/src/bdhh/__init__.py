"""Price-aware next-basket recommendation.

Pipeline: transaction logs -> basket sequences -> heterogeneous hypergraph
-> gated cross-feature encoder -> basket-guided augmentation -> price/
interest user modeling -> full-vocabulary scoring, trained with Adam and
evaluated with NDCG@K / Hit@K.
"""

from .kernels import BACKEND as KERNEL_BACKEND  # noqa: F401

__version__ = "0.1.0"

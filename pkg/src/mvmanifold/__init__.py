"""Multi-view manifold learning: multi-SNE, multi-LLE, multi-ISOMAP and their baselines."""

from .cluster import accuracy, ari, contingency, dbscan, kmeans, nmi, rand_index, silhouette
from .dataset import MultiViewDataset, SyntheticScenario, generate_synthetic, load_directory, load_multiview
from .errors import MVManifoldError
from .harness import SweepSpec, embed, run_sweep, view_ablation
from .isomap import run_isomap, run_misomap, run_multiisomap
from .lle import run_lle, run_mlle, run_multille
from .pretrain import PretrainConfig
from .sne import Embedding, SneConfig, run_msne, run_multisne, run_tsne

__version__ = "0.1.0"

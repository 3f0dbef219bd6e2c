"""Text-guided local feature mixup for long-tailed classification over
precomputed unit-norm embeddings."""

from .data import (ClassCatalog, DataError, EmbeddingSet, LongTailSpec,
                   SyntheticSpec, build_longtail_counts, generate_synthetic,
                   normalize_rows, subset_longtail)
from .fileio import read_catalog, read_embeddings, write_catalog, write_embeddings
from .metrics import EvalReport, ShotSplit, evaluate, shot_split
from .mixing import (MixedExample, ShiftParams, argmin_label_weight, label_shift,
                     mix, mixup_label_weight, remix_label_weight, sample_mix_weight)
from .model import (Schedule, TrainedHead, balanced_ce_adjust, cosine_anneal,
                    cosine_logits, forward, load_head, predict, save_head,
                    soft_ce_loss)
from .sampling import (LocalSamplingModel, PairStream, build_sampling_model,
                       effective_class_distribution, effective_imbalance_factor)
from .training import (StageConfig, TrainConfig, TrainingDiverged, draw_arm_mixes,
                    train)

__version__ = "0.1.0"

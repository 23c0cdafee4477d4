"""Single-attention-layer transformer for k-parity: exact risk, training and certificates."""

from .attention import AttentionHeads, target_heads, theorem2_bound, corollary20_bound
from .embedding import EmbeddingTable, build_table
from .errors import CapacityError, DomainError, NumericFailure, UnsupportedMode
from .heads import FixedTelescopingHead, ReLUParityNet, TrainableFFNN1, parameter_count
from .model import ParityTransformer
from .parity import ParitySpec, parity_label
from .training import TrainConfig, expected_risk, gd_train_attention, gd_train_ffnn, init_heads

__version__ = "0.1.0"

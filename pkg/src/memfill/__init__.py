"""memfill: slot-memory region completion toolkit.

Dense-array substrate, semantic region pooling, a disentangled slot
memory with EMA updates and soft-score reads, mask-gated patch
correlation enhancement, the full inpainting loss stack, image quality
metrics, and a deterministic synthetic-corpus harness.
"""

from .errors import ContractViolationError, DiagnosticError, FormatError, MemfillError
from .gradcheck import grad_check
from .losses import (
    IdentityExtractor,
    LossReport,
    LossWeights,
    SeededCritic,
    SeededFeatureExtractor,
    SeededRegionEncoder,
    adv_loss,
    gram,
    inco2_loss,
    inter_coord_loss,
    intra_coord_loss,
    perceptual_loss,
    rec_loss,
    rec_loss_grad,
    semantic_loss,
    style_loss,
    total_loss,
    tv_loss,
    tv_loss_grad,
)
from .masks import MASK_BANDS, band_for_coverage, coverage_fraction, generate_irregular_mask
from .metrics import l1_metric, psnr, ssim
from .patch_correlation import (
    CorrelationConfig,
    CorrelationMap,
    enhance_masked_regions,
    fuse_and_enhance,
    patch_similarity,
)
from .regions import (
    LatentMatrix,
    SemanticMap,
    broadcast_latents,
    load_labels_pgm,
    load_mask_pgm,
    mask_fuse,
    region_avg_pool,
    save_labels_pgm,
    save_mask_pgm,
    validate_mask,
)
from .simulate import PipelineResult, SimReport, fill_unknown, run_memory_sim, run_pipeline
from .slot_memory import (
    MemoryState,
    ReadResult,
    cosine_similarity,
    init_memory,
    load_memory,
    read_memory,
    save_memory,
    update_memory,
)
from .synthetic import SyntheticSample, gen_corpus
from .tensor import (
    PatchSet,
    fold,
    load_matrix,
    load_tensor3,
    matmul,
    row_softmax,
    save_matrix,
    save_tensor3,
    unfold,
)

__version__ = "0.1.0"

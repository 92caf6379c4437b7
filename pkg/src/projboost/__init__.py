"""Multi-class boosting over per-class random Gaussian projections.

Two trainers share one projection bank abstraction: rank boosting learns
stumps on per-class projections of the data (stage-wise or totally
corrective), and proj boosting learns stumps on the raw features while a
single fixed-size coefficient vector weighs their randomly projected
outputs.  A verify module measures how often random projection preserves
norms, cosines, and multi-class margins against the closed-form bounds.
"""

from .data import (
    Dataset,
    SplitSpec,
    gen_diagonal_gaussians,
    load_csv,
    load_libsvm,
    split,
    write_csv,
    write_libsvm,
)
from .errors import DataError, NumericError
from .model_io import load_model, save_model
from .optim import SolverSpec, conjugate_loss_table, get_loss, minimize_bounded
from .proj_boost import ProjModel, predict_proj, predict_proj_batch, train_proj
from .projection import (
    ProjectionBank,
    bank_from_descriptor,
    build_bank,
    class_matrix,
    project,
    project_views,
)
from .rank_boost import (
    RankModel,
    predict_rank,
    predict_rank_batch,
    train_stagewise,
    train_totally_corrective,
)
from .verify import (
    FrequencyReport,
    check_cosine_preservation,
    check_margin_preservation,
    check_norm_preservation,
    check_single_vector,
    make_one_hot_instance,
)
from .weak import (
    LinearStump,
    Stump,
    StumpSearch,
    train_stump,
    train_wlda_stump,
    wlda_direction,
)

__all__ = [
    "Dataset",
    "SplitSpec",
    "gen_diagonal_gaussians",
    "load_csv",
    "load_libsvm",
    "split",
    "write_csv",
    "write_libsvm",
    "DataError",
    "NumericError",
    "load_model",
    "save_model",
    "SolverSpec",
    "conjugate_loss_table",
    "get_loss",
    "minimize_bounded",
    "ProjModel",
    "predict_proj",
    "predict_proj_batch",
    "train_proj",
    "ProjectionBank",
    "bank_from_descriptor",
    "build_bank",
    "class_matrix",
    "project",
    "project_views",
    "RankModel",
    "predict_rank",
    "predict_rank_batch",
    "train_stagewise",
    "train_totally_corrective",
    "FrequencyReport",
    "check_cosine_preservation",
    "check_margin_preservation",
    "check_norm_preservation",
    "check_single_vector",
    "make_one_hot_instance",
    "LinearStump",
    "Stump",
    "StumpSearch",
    "train_stump",
    "train_wlda_stump",
    "wlda_direction",
]

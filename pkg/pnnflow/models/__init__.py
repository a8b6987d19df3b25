from pnnflow.models.checkpoint import Checkpoint, list_checkpoints, load_checkpoint, save_checkpoint
from pnnflow.models.config import ExperimentConfig, ModelConfig, TrainConfig, build_config, load_config
from pnnflow.models.report import ComparisonRow, MetricReport, TrainingSummary

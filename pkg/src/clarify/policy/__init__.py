from .baselines import (
    GREEDY,
    NO_STATE_TRANSITION,
    SUPERVISED,
    BaselineModel,
    SupervisedTarget,
    greedy_cover_sequence,
    greedy_recommend,
    supervised_targets,
    train_greedy_classifier,
    train_no_state_transition,
    train_supervised,
)
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .model import (
    ClassifierModel,
    ModelConfig,
    NoActionError,
    PolicyError,
    PolicyModel,
    TrainingError,
    policy_forward,
    recommend,
)
from .train import (
    KL_MODEL_TO_TARGET,
    KL_TARGET_TO_MODEL,
    ClassifierExample,
    PolicyExample,
    TrainConfig,
    TrainingLog,
    build_token_vocab,
    classifier_loss_and_grads,
    episode_examples,
    kl_training_step,
    policy_loss_and_grads,
    train_policy,
)

__all__ = [
    "BaselineModel",
    "ClassifierExample",
    "ClassifierModel",
    "CheckpointError",
    "GREEDY",
    "KL_MODEL_TO_TARGET",
    "KL_TARGET_TO_MODEL",
    "ModelConfig",
    "NO_STATE_TRANSITION",
    "NoActionError",
    "PolicyError",
    "PolicyExample",
    "PolicyModel",
    "SUPERVISED",
    "SupervisedTarget",
    "TrainConfig",
    "TrainingError",
    "TrainingLog",
    "build_token_vocab",
    "classifier_loss_and_grads",
    "episode_examples",
    "greedy_cover_sequence",
    "greedy_recommend",
    "kl_training_step",
    "load_checkpoint",
    "policy_forward",
    "policy_loss_and_grads",
    "recommend",
    "save_checkpoint",
    "supervised_targets",
    "train_greedy_classifier",
    "train_no_state_transition",
    "train_policy",
    "train_supervised",
]

from .evaluate import evaluate_winrate, resolve_policy, round_robin
from .export import export_trajectories
from .train import TrainResult, Trainer, train

__all__ = ["evaluate_winrate", "resolve_policy", "round_robin", "export_trajectories",
           "TrainResult", "Trainer", "train"]

from instantiation_net.training.dataset import DatasetPair, load_dataset, make_dataset, write_dataset
from instantiation_net.training.losses import distance_error, l1_loss, per_vertex_error
from instantiation_net.training.optim import SGDState, learning_rate, sgd_step
from instantiation_net.training.trainer import leave_one_out, mean_shape_baseline, train_fold

__all__ = [
    'DatasetPair', 'SGDState', 'distance_error', 'l1_loss', 'learning_rate', 'leave_one_out',
    'load_dataset', 'make_dataset', 'mean_shape_baseline', 'per_vertex_error', 'sgd_step',
    'train_fold', 'write_dataset',
]

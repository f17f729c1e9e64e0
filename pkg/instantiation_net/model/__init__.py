from instantiation_net.model.network import count_parameters, forward, predict_mesh, shape_trace, trace_shapes
from instantiation_net.model.params import ModelParams, init_params, load_model, save_model

__all__ = [
    'ModelParams', 'count_parameters', 'forward', 'init_params', 'load_model', 'predict_mesh',
    'save_model', 'shape_trace', 'trace_shapes',
]

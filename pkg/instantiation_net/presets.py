ENCODER_PRESETS = {
    'full': {
        'growth_rate': 32,
        'block_lengths': (6, 12, 24, 16),
        'initial_channels': 64,
        'compression': 0.5,
        'bottleneck_factor': 4,
        'input_height': 192,
        'input_width': 256,
    },
    'desk': {
        'growth_rate': 8,
        'block_lengths': (2, 2, 2, 2),
        'initial_channels': 16,
        'compression': 0.5,
        'bottleneck_factor': 4,
        'input_height': 64,
        'input_width': 64,
    },
}

DECODER_PRESETS = {
    'large': {'feature_channels': 64, 'stride': 4, 'cheb_order': 3},
    'small': {'feature_channels': 16, 'stride': 3, 'cheb_order': 3},
}

CYCLE_PRESETS = {
    'ico162': {'subdivisions': 2, 'radius_mm': 30.0, 'frames': 20},
    'ico642': {'subdivisions': 3, 'radius_mm': 30.0, 'frames': 20},
}

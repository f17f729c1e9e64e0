from instantiation_net.sampling.hierarchy import (
    SamplingHierarchy,
    build_hierarchy,
    downsample,
    level_counts,
    load_hierarchy,
    load_or_build_hierarchy,
    save_hierarchy,
    upsample,
)
from instantiation_net.sampling.qem import SimplificationResult, SimplifyStrategy, qem_simplify

__all__ = [
    'SamplingHierarchy', 'SimplificationResult', 'SimplifyStrategy', 'build_hierarchy', 'downsample',
    'level_counts', 'load_hierarchy', 'load_or_build_hierarchy', 'qem_simplify', 'save_hierarchy', 'upsample',
]

"""Cancellative spin systems, parity-preserving duals, and their diagnostics.

The package simulates translation-invariant mod-2 interacting particle
systems on tori and on the infinite lattice: voter-type flip models, their
transposed dual annihilating walks with branching, an exact finite-torus
generator for cross-checks, and the block-renormalization bookkeeping used
to certify survival at low branching bias.
"""

from .lattice import (
    ConfigStats,
    LatticeShape,
    SpinConfig,
    config_statistics,
    from_pattern,
    interface_map,
    interval,
    make_config,
    ones,
    overlap_parity,
    product_random,
    single_site,
    sparse_config,
    zeros,
)
from .rules import (
    ModelSpec,
    RuleSet,
    RuleTemplate,
    analyze_ruleset,
    apply_rule,
    build_model,
    effective_flip_rate,
    gradient_basis,
    model,
    norm_b,
    point_basis,
    reduce_to_disagreement,
    ruleset_from_text,
    ruleset_to_text,
    total_exit_rate,
    transpose_dual,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigStats",
    "LatticeShape",
    "ModelSpec",
    "RuleSet",
    "RuleTemplate",
    "SpinConfig",
    "analyze_ruleset",
    "apply_rule",
    "build_model",
    "config_statistics",
    "effective_flip_rate",
    "from_pattern",
    "gradient_basis",
    "interface_map",
    "interval",
    "make_config",
    "model",
    "norm_b",
    "ones",
    "overlap_parity",
    "point_basis",
    "product_random",
    "reduce_to_disagreement",
    "ruleset_from_text",
    "ruleset_to_text",
    "single_site",
    "sparse_config",
    "total_exit_rate",
    "transpose_dual",
    "zeros",
    "__version__",
]

"""Python access to the lbpnet engine."""

import json

from ._lbpnet import (
    ConfigError,
    IoError,
    Network,
    NumericError,
    PackedModel,
    ShapeError,
    bilinear_sample,
    binarize,
    build_projection,
    energy_ratio,
    evaluate,
    format_kilobytes,
    gate_ratio,
    infer,
    init_patterns,
    lbp_forward_hard,
    lbp_forward_surrogate,
    load_run_config,
    packed_features,
    rounded_network,
    shifted_relu,
    train,
)
from . import _lbpnet


def _as_json(config):
    return config if isinstance(config, str) else json.dumps(config)


def create_network(config):
    """Network from a config dict (the "network" section of a run config) or JSON text."""
    return Network.create(_as_json(config))


def model_size(config):
    return _lbpnet.model_size(_as_json(config))


def cost_report(config, as_executed=False):
    return json.loads(_lbpnet.cost_report(_as_json(config), as_executed))


__all__ = [name for name in dir() if not name.startswith("_")]

"""Exact rule-list extraction from ReLU networks over categorical inputs."""
from .extraction import extract, extract_all, lin_rule, neuron_rule, select_weights, canonicalize
from .model import Network, Layer, predict, forward, train, TrainConfig, load_weights, save_weights
from .rules import Behavior, RuleList, conjoin, match
from .schema import Dataset, FeatureSchema, load_schema, encode_one_hot

__version__ = "0.1.0"

"""Functional and performance simulator for a LUT-based PIM CNN accelerator."""

from .binviz import GrayImage, bytes_to_image, generate_corpus, resize_to
from .cluster import Cluster, ClusterMicroprogram, mac8, mac_energy_pj
from .engine import infer_float, infer_lut, prepare_quantized
from .lut_core import FunctionTable, LutCore, OpTag, build_function_table
from .nets import NetworkSpec, get_network
from .perf import estimate, mac_count
from .quantizer import QuantParams, calibrate, dequantize, quantize
from .system import EnergyLedger, SystemConfig
from .weights import WeightSet, load_weights, save_weights

__all__ = [
    "GrayImage",
    "bytes_to_image",
    "generate_corpus",
    "resize_to",
    "Cluster",
    "ClusterMicroprogram",
    "mac8",
    "mac_energy_pj",
    "infer_float",
    "infer_lut",
    "prepare_quantized",
    "FunctionTable",
    "LutCore",
    "OpTag",
    "build_function_table",
    "NetworkSpec",
    "get_network",
    "estimate",
    "mac_count",
    "QuantParams",
    "calibrate",
    "dequantize",
    "quantize",
    "EnergyLedger",
    "SystemConfig",
    "WeightSet",
    "load_weights",
    "save_weights",
]

__version__ = "0.1.0"

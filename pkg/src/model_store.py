"""
Mridangam Stroke Transcriber - Model Storage Module

One little-endian array container shared by networks, template sets and
SVMs:

    magic (4 bytes) | version (uint16) | header length (uint32) | JSON header
    | array count (uint32) | per array: ndim (uint8), dims (uint32 each),
    data in the header's `dtype` (float32 for networks, float64 for baselines)

The JSON header is written with sorted keys so identical models produce
identical bytes.
"""

import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np

from src.baselines import SvmModel
from src.features import FeatureConfig, TemplateSet
from src.nn.layers import LayerSpec, validate_architecture
from src.nn.network import DenseLayer, Network

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
ARRAY_DTYPES = ("<f4", "<f8")
NETWORK_MAGIC = b"MRNN"
TEMPLATE_MAGIC = b"MRTP"
SVM_MAGIC = b"MRSV"


class ModelFormatError(Exception):
    """Raised when a model file is malformed or of the wrong kind."""

    pass


def write_array_file(
    path: Union[str, Path],
    magic: bytes,
    header: Dict[str, Any],
    arrays: Sequence[np.ndarray],
    dtype: str = "<f4",
) -> None:
    header = {**header, "dtype": dtype}
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [magic, struct.pack("<HI", FORMAT_VERSION, len(header_bytes)), header_bytes]
    parts.append(struct.pack("<I", len(arrays)))
    for arr in arrays:
        arr = np.asarray(arr)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.astype(dtype).tobytes(order="C"))
    Path(path).write_bytes(b"".join(parts))


def read_array_file(
    path: Union[str, Path], magic: bytes
) -> Tuple[Dict[str, Any], List[np.ndarray]]:
    """
    Raises:
        ModelFormatError: On wrong magic, unknown version or truncated data
    """
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise ModelFormatError(f"Cannot read model file {path}: {e}") from e

    if data[:4] != magic:
        raise ModelFormatError(
            f"{path}: expected a {magic.decode()} file, found magic {data[:4]!r}"
        )

    try:
        offset = 4
        version, header_len = struct.unpack_from("<HI", data, offset)
        offset += struct.calcsize("<HI")
        if version != FORMAT_VERSION:
            raise ModelFormatError(f"{path}: unsupported format version {version}")

        header = json.loads(data[offset:offset + header_len].decode("utf-8"))
        offset += header_len
        dtype = np.dtype(header.get("dtype", "<f4"))
        if dtype.str not in ARRAY_DTYPES:
            raise ModelFormatError(f"{path}: unsupported array type {dtype.str}")
        (count,) = struct.unpack_from("<I", data, offset)
        offset += 4

        arrays = []
        for _ in range(count):
            (ndim,) = struct.unpack_from("<B", data, offset)
            offset += 1
            shape = struct.unpack_from(f"<{ndim}I", data, offset)
            offset += 4 * ndim
            size = int(np.prod(shape)) if ndim else 1
            if offset + dtype.itemsize * size > len(data):
                raise ModelFormatError(f"{path}: truncated array data")
            arr = np.frombuffer(data, dtype=dtype, count=size, offset=offset).reshape(shape)
            arrays.append(arr.astype(dtype.newbyteorder("=")))
            offset += dtype.itemsize * size
    except (struct.error, ValueError, TypeError) as e:
        raise ModelFormatError(f"{path}: corrupt model file ({e})") from e

    return header, arrays


# =============================================================================
# NETWORK
# =============================================================================


def save_network(
    path: Union[str, Path], net: Network, feature_config: FeatureConfig = None
) -> None:
    """Write architecture, feature settings and weights/biases in layer order."""
    header = {
        "architecture": [spec.to_dict() for spec in net.architecture],
        "features": feature_config.to_dict() if feature_config else None,
    }
    write_array_file(path, NETWORK_MAGIC, header, net.parameters())
    logger.info(f"💾 Saved network ({len(net.layers)} layers) to {path}")


def load_network(path: Union[str, Path]) -> Tuple[Network, FeatureConfig]:
    """
    Returns:
        (network, feature settings it was trained with)
    """
    header, arrays = read_array_file(path, NETWORK_MAGIC)
    try:
        arch = [LayerSpec.from_dict(d) for d in header["architecture"]]
        validate_architecture(arch)
    except (KeyError, ValueError, TypeError) as e:
        raise ModelFormatError(f"{path}: invalid architecture header ({e})") from e

    if len(arrays) != 2 * len(arch):
        raise ModelFormatError(f"{path}: expected {2 * len(arch)} arrays, found {len(arrays)}")

    layers = []
    for i, spec in enumerate(arch):
        w, b = arrays[2 * i], arrays[2 * i + 1]
        if w.shape != (spec.out_dim, spec.in_dim) or b.shape != (spec.out_dim,):
            raise ModelFormatError(f"{path}: layer {i} arrays do not match the architecture")
        layers.append(DenseLayer(spec, w.copy(), b.copy()))

    features = FeatureConfig(**header["features"]) if header.get("features") else FeatureConfig()
    return Network(layers), features


# =============================================================================
# BASELINES
# =============================================================================


def save_templates(
    path: Union[str, Path], templates: TemplateSet, feature_config: FeatureConfig = None
) -> None:
    header = {
        "counts": [int(c) for c in templates.counts],
        "features": feature_config.to_dict() if feature_config else None,
    }
    write_array_file(path, TEMPLATE_MAGIC, header, [templates.templates], dtype="<f8")


def load_templates(path: Union[str, Path]) -> Tuple[TemplateSet, FeatureConfig]:
    header, arrays = read_array_file(path, TEMPLATE_MAGIC)
    if len(arrays) != 1 or arrays[0].ndim != 2:
        raise ModelFormatError(f"{path}: expected one 2-D template array")
    features = FeatureConfig(**header["features"]) if header.get("features") else FeatureConfig()
    return TemplateSet(arrays[0].astype(np.float64), np.asarray(header["counts"])), features


def save_svm(path: Union[str, Path], model: SvmModel, feature_config: FeatureConfig = None) -> None:
    header = {"features": feature_config.to_dict() if feature_config else None}
    write_array_file(path, SVM_MAGIC, header, [model.weights, model.bias], dtype="<f8")


def load_svm(path: Union[str, Path]) -> Tuple[SvmModel, FeatureConfig]:
    header, arrays = read_array_file(path, SVM_MAGIC)
    if len(arrays) != 2 or arrays[0].ndim != 2 or arrays[1].shape != (arrays[0].shape[0],):
        raise ModelFormatError(f"{path}: expected an SVM weight matrix and bias vector")
    features = FeatureConfig(**header["features"]) if header.get("features") else FeatureConfig()
    return SvmModel(arrays[0].astype(np.float64), arrays[1].astype(np.float64)), features

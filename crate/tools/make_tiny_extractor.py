"""Builds the small ONNX stand-in extractor and its golden pairs used by the
Rust test suite. The graph has the real extractor's signature,
(N,3,128,128) -> (N,1920,4,4), but is only an average pool, a 1x1 conv and a
ReLU, so tests run without the large pretrained model.

usage: python tools/make_tiny_extractor.py crates/core/tests/fixtures
"""

import hashlib
import json
import os
import sys

import numpy as np
import onnx
from onnx import TensorProto, helper, numpy_helper


def build(seed=7, pool=32):
    rng = np.random.default_rng(seed)
    w = (rng.standard_normal((1920, 3, 1, 1)) * 0.5).astype(np.float32)
    b = (rng.standard_normal(1920) * 0.1).astype(np.float32)
    nodes = [
        helper.make_node("AveragePool", ["input"], ["pooled"], kernel_shape=[pool, pool], strides=[pool, pool]),
        helper.make_node("Conv", ["pooled", "w", "b"], ["pre"], kernel_shape=[1, 1]),
        helper.make_node("Relu", ["pre"], ["features"]),
    ]
    graph = helper.make_graph(
        nodes,
        "tiny_extractor",
        [helper.make_tensor_value_info("input", TensorProto.FLOAT, ["N", 3, 128, 128])],
        [helper.make_tensor_value_info("features", TensorProto.FLOAT, ["N", 1920, 128 // pool, 128 // pool])],
        initializer=[numpy_helper.from_array(w, "w"), numpy_helper.from_array(b, "b")],
    )
    model = helper.make_model(graph, opset_imports=[helper.make_opsetid("", 13)])
    model.ir_version = 8
    onnx.checker.check_model(model)
    return model, w, b


def forward(x, w, b):
    pooled = x.reshape(3, 4, 32, 4, 32).mean(axis=(2, 4), dtype=np.float64)
    out = np.einsum("oc,chw->ohw", w[:, :, 0, 0].astype(np.float64), pooled) + b[:, None, None]
    return np.maximum(out, 0).astype(np.float32)


def sha(path):
    with open(path, "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()


def main(out_dir):
    model, w, b = build()
    os.makedirs(os.path.join(out_dir, "goldens"), exist_ok=True)
    onnx.save(model, os.path.join(out_dir, "tiny_extractor.onnx"))
    # same graph pooled to 2x2, for signature-mismatch tests
    onnx.save(build(pool=64)[0], os.path.join(out_dir, "wrong_signature.onnx"))
    rng = np.random.default_rng(11)
    inputs = [rng.standard_normal((3, 128, 128)).astype(np.float32), np.zeros((3, 128, 128), np.float32)]
    pairs = []
    gdir = os.path.join(out_dir, "goldens")
    for i, x in enumerate(inputs):
        name = f"golden_{i:03d}"
        np.save(os.path.join(gdir, name + "_input.npy"), x)
        np.save(os.path.join(gdir, name + "_output.npy"), forward(x, w, b))
        pairs.append({
            "name": name,
            "input": name + "_input.npy",
            "output": name + "_output.npy",
            "sha256_input": sha(os.path.join(gdir, name + "_input.npy")),
            "sha256_output": sha(os.path.join(gdir, name + "_output.npy")),
        })
    with open(os.path.join(gdir, "index.json"), "w") as f:
        json.dump({"pairs": pairs}, f, indent=2)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else ".")

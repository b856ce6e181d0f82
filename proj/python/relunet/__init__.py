"""Exact ReLU network constructions (bindings to the C++ core)."""

from ._relunet import (  # noqa: F401
    InputError,
    Network,
    Target,
    assemble_full,
    assemble_part,
    compose,
    decode,
    encode,
    extract_heads,
    extract_stream,
    identity,
    index_net,
    make_target,
    measure_rate,
    median_net,
    product_net,
    rep_net,
    synth_pwl,
)

__all__ = [
    "InputError",
    "Network",
    "Target",
    "assemble_full",
    "assemble_part",
    "compose",
    "decode",
    "encode",
    "extract_heads",
    "extract_stream",
    "identity",
    "index_net",
    "make_target",
    "measure_rate",
    "median_net",
    "product_net",
    "rep_net",
    "synth_pwl",
]

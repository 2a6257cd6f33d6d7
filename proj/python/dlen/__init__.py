"""Low-light image enhancement: model, metrics and image helpers."""

from ._dlen import (
    ContractError,
    FormatError,
    Model,
    NotFoundError,
    cli,
    dwt2d,
    idwt2d,
    load_image,
    procedural_image,
    psnr,
    save_image,
    selftest,
    set_num_threads,
    ssim,
    synth_lowlight,
)

__all__ = [
    "ContractError",
    "FormatError",
    "Model",
    "NotFoundError",
    "cli",
    "dwt2d",
    "idwt2d",
    "load_image",
    "procedural_image",
    "psnr",
    "save_image",
    "selftest",
    "set_num_threads",
    "ssim",
    "synth_lowlight",
]

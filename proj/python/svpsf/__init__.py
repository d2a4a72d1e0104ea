from ._svpsf import (
    SvpsfError,
    Regressor,
    add_noise,
    calibrate_depth,
    convolve,
    deconvolve,
    depth_from_params,
    load_model,
    render_psf,
    simulate_astigmatic_scene,
    snr,
    ssim,
    sv_convolve,
    __version__,
)

__all__ = [
    "SvpsfError",
    "Regressor",
    "add_noise",
    "calibrate_depth",
    "convolve",
    "deconvolve",
    "depth_from_params",
    "load_model",
    "render_psf",
    "simulate_astigmatic_scene",
    "snr",
    "ssim",
    "sv_convolve",
    "__version__",
]

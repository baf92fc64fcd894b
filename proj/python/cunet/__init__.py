"""Conditioned U-Net source separation: python bindings over the C++ core."""

from ._core import (
    CunetError,
    Model,
    bss_eval,
    film_apply,
    generator_film_values,
    istft,
    load_wav,
    one_hot,
    param_table,
    pearson,
    resample,
    save_wav,
    stft,
    synth_dataset,
)

__all__ = [
    "CunetError",
    "Model",
    "bss_eval",
    "film_apply",
    "generator_film_values",
    "istft",
    "load_wav",
    "one_hot",
    "param_table",
    "pearson",
    "resample",
    "save_wav",
    "stft",
    "synth_dataset",
]

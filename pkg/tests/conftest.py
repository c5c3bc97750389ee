"""Shared fixtures: deterministic synthetic records used across tests."""

import numpy as np
import pytest

from fwave.preprocess import prefilter
from fwave.synth import SynthConfig, generate


@pytest.fixture(scope="session")
def sinus_clean():
    """Perfectly periodic sinus record: 60 bpm, no jitter, no noise."""
    return generate(
        SynthConfig(
            rhythm="sinus",
            mean_hr_bpm=60.0,
            rr_jitter=0.0,
            beat_amp_cv=0.0,
            noise_rms_mv=0.0,
            rng_seed=3,
        )
    )


@pytest.fixture(scope="session")
def sinus_clean_filtered(sinus_clean):
    return prefilter(sinus_clean.ecg, sinus_clean.fs)


@pytest.fixture(scope="session")
def af_record():
    """AF record with a 6 Hz f-wave, light noise, steady beats."""
    return generate(
        SynthConfig(
            rhythm="AF",
            fwave_f0=6.0,
            mean_hr_bpm=75.0,
            beat_amp_cv=0.0,
            noise_rms_mv=0.005,
            rng_seed=11,
        )
    )


@pytest.fixture(scope="session")
def af_record_filtered(af_record):
    return prefilter(af_record.ecg, af_record.fs)


def gauss_train(fs, n, r_peaks, scales=None, bumps=((1.0, 0.0, 0.016),)):
    """Hand-built bump train for tests that need exact control of beats."""
    t = np.arange(n) / fs
    y = np.zeros(n)
    if scales is None:
        scales = np.ones(len(r_peaks))
    for amp, off, width in bumps:
        for r, s in zip(r_peaks, scales):
            c = r / fs + off
            y += s * amp * np.exp(-0.5 * ((t - c) / width) ** 2)
    return y

"""Dataset ingestion: CIFAR-10 binary files and synthetic generators.

The synthetic tasks are desk-scale stand-ins for the image-classification
and sequence-prediction experiments: oriented frequency gratings with random
phase (a task whose classes differ only in orientation, so the classifier
must be robust to phase shifts), and spatial maps of rotating complex
phasors whose next frame is an exact fixed phase rotation of the current
one.
"""

from __future__ import annotations

import numpy as np

CIFAR_RECORD_BYTES = 3073  # 1 label byte + 3 * 32 * 32 pixel bytes


def load_cifar_binary(path):
    """Read a CIFAR-10 binary batch file into ((N, 3, 32, 32) in [0,1], labels)."""
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size == 0 or raw.size % CIFAR_RECORD_BYTES != 0:
        n_full = raw.size // CIFAR_RECORD_BYTES
        raise ValueError(
            f"{path}: expected a multiple of {CIFAR_RECORD_BYTES} bytes per record, "
            f"got {raw.size} bytes ({n_full} full records plus "
            f"{raw.size - n_full * CIFAR_RECORD_BYTES} extra)")
    records = raw.reshape(-1, CIFAR_RECORD_BYTES)
    labels = records[:, 0].astype(np.int64)
    if labels.max(initial=0) > 9:
        raise ValueError(f"{path}: label {labels.max()} out of range [0, 9]")
    images = records[:, 1:].reshape(-1, 3, 32, 32).astype(np.float64) / 255.0
    return images, labels


def channel_stats(images):
    """Per-channel mean and std over (N, H, W), for train-split normalization."""
    mean = images.mean(axis=(0, 2, 3))
    std = images.std(axis=(0, 2, 3))
    return mean, np.where(std > 0, std, 1.0)


def normalize_images(images, mean, std):
    mean = np.asarray(mean).reshape(1, -1, 1, 1)
    std = np.asarray(std).reshape(1, -1, 1, 1)
    return (images - mean) / std


def synthetic_image_task(n, seed, hw=16, noise=0.3, freq=3.0):
    """Two-class oriented-grating images: (n, 1, hw, hw) float64, labels {0,1}.

    Class 0 gratings run at +45 degrees, class 1 at -45 degrees, with a
    uniformly random phase per sample, so orientation is the only usable
    cue. Deterministic for a given seed.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:hw, 0:hw].astype(np.float64)
    labels = rng.integers(0, 2, size=n)
    phases = rng.uniform(0, 2 * np.pi, size=n)
    angles = np.where(labels == 0, np.pi / 4, -np.pi / 4)
    images = np.empty((n, 1, hw, hw))
    for i in range(n):
        u = np.cos(angles[i]) * xx + np.sin(angles[i]) * yy
        images[i, 0] = np.cos(2 * np.pi * freq * u / hw + phases[i])
    images += noise * rng.standard_normal(images.shape)
    return images, labels


def synthetic_phasor_sequences(n, t_len, seed, hw=8, omega=np.pi / 4, noise=0.0):
    """Rotating-phasor frame sequences.

    Each sample is a (t_len + 1)-frame movie of z_t(x, y) = e^{i(omega t +
    phi(x, y))} with a random linear phase ramp phi per sample, plus optional
    complex Gaussian noise. Returns ((seq_re, seq_im), (tgt_re, tgt_im))
    where the sequences hold frames 0..t_len-1 with shape
    (n, t_len, 1, hw, hw) and the target is frame t_len. With zero noise the
    optimal one-step predictor is the fixed rotation z -> e^{i omega} z and
    its MSE is exactly 0.
    """
    if n < 1 or t_len < 1:
        raise ValueError("n and t_len must be >= 1")
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:hw, 0:hw].astype(np.float64)
    seq_re = np.empty((n, t_len + 1, 1, hw, hw))
    seq_im = np.empty((n, t_len + 1, 1, hw, hw))
    for i in range(n):
        a, b = rng.uniform(-1.0, 1.0, size=2)
        offset = rng.uniform(0, 2 * np.pi)
        phi = 2 * np.pi * (a * xx + b * yy) / hw + offset
        for t in range(t_len + 1):
            arg = omega * t + phi
            seq_re[i, t, 0] = np.cos(arg)
            seq_im[i, t, 0] = np.sin(arg)
    if noise > 0:
        seq_re += noise * rng.standard_normal(seq_re.shape)
        seq_im += noise * rng.standard_normal(seq_im.shape)
    inputs = (seq_re[:, :t_len], seq_im[:, :t_len])
    targets = (seq_re[:, t_len], seq_im[:, t_len])
    return inputs, targets


def predict_last_frame_mse(inputs, targets):
    """Baseline for the phasor task: predict the last observed frame."""
    last_re = inputs[0][:, -1]
    last_im = inputs[1][:, -1]
    err = (last_re - targets[0]) ** 2+ (last_im - targets[1]) ** 2
    return float(err.sum() / (2 * targets[0].size))

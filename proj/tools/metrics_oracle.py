#!/usr/bin/env python3
"""Computes the frozen constants used by tests/test_metrics.cpp.

The noisy instance is bit-reproducible in C++ and Python: uniform noise from
a splitmix64 stream (integer ops, exactly representable doubles). SSIM comes
from scikit-image; MS-SSIM from a NumPy transcription of the published
multi-scale algorithm (2x2 mean pooling between levels, contrast-structure
terms per level, luminance only at the coarsest, standard weights).
"""
import numpy as np
from skimage.metrics import structural_similarity

MASK = (1 << 64) - 1


def splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK
    return x ^ (x >> 31)


class UniformStream:
    def __init__(self, seed):
        self.state = seed

    def next(self):
        self.state = splitmix64(self.state)
        return (self.state >> 11) * 2.0**-53


def quadrant(side):
    img = np.zeros((side, side))
    h = side // 2
    img[:h, :h] = 0.25
    img[:h, h:] = 0.75
    img[h:, :h] = 0.5
    img[h:, h:] = 1.0
    return img


def noisy_instance(side=128, seed=2024, amp=0.1):
    clean = quadrant(side)
    rng = UniformStream(seed)
    noise = np.empty(side * side)
    for i in range(side * side):
        noise[i] = (rng.next() - 0.5) * amp
    return clean, clean + noise.reshape(side, side)


def gaussian_window(size=11, sigma=1.5):
    r = size // 2
    g = np.array([[np.exp(-(x * x + y * y) / (2 * sigma * sigma))
                   for x in range(-r, r + 1)] for y in range(-r, r + 1)])
    return g / g.sum()


def filter_valid(img, k):
    from scipy.signal import convolve2d
    return convolve2d(img, k, mode="valid")


def ssim_cs(x, y, data_range=1.0, k1=0.01, k2=0.03):
    w = gaussian_window()
    c1, c2 = (k1 * data_range) ** 2, (k2 * data_range) ** 2
    mx, my = filter_valid(x, w), filter_valid(y, w)
    sxx = filter_valid(x * x, w) - mx * mx
    syy = filter_valid(y * y, w) - my * my
    sxy = filter_valid(x * y, w) - mx * my
    lum = (2 * mx * my + c1) / (mx * mx + my * my + c1)
    cs = (2 * sxy + c2) / (sxx + syy + c2)
    return (lum * cs).mean(), cs.mean()


def downsample2(img):
    h, w = img.shape
    h2, w2 = h // 2, w // 2
    img = img[: 2 * h2, : 2 * w2]
    return 0.25 * (img[0::2, 0::2] + img[1::2, 0::2] + img[0::2, 1::2] + img[1::2, 1::2])


def ms_ssim(x, y, levels=5, data_range=1.0):
    weights = np.array([0.0448, 0.2856, 0.3001, 0.2363, 0.1333])[:levels]
    weights = weights / weights.sum()
    vals = []
    for lvl in range(levels):
        s, cs = ssim_cs(x, y, data_range)
        if lvl == levels - 1:
            vals.append(max(s, 0.0))
        else:
            vals.append(max(cs, 0.0))
            x, y = downsample2(x), downsample2(y)
    return float(np.prod(np.array(vals) ** weights))


def main():
    clean, noisy = noisy_instance()
    mse = float(np.mean((clean - noisy) ** 2))
    psnr = 10 * np.log10(1.0 / mse)
    sk = structural_similarity(clean, noisy, win_size=11, gaussian_weights=True, sigma=1.5,
                               use_sample_covariance=False, data_range=1.0)
    own_ssim, _ = ssim_cs(clean, noisy)
    ms3 = ms_ssim(clean, noisy, levels=3)
    ms4 = ms_ssim(clean, noisy, levels=4)
    rng_ref = float(clean.max() - clean.min())
    nrmse = float(np.sqrt(mse)) / rng_ref
    print(f"instance: 128x128 quadrant, uniform amp 0.1, splitmix seed 2024")
    print(f"mse            = {mse:.12f}")
    print(f"psnr           = {psnr:.8f}")
    print(f"ssim(skimage)  = {sk:.10f}")
    print(f"ssim(mirror)   = {own_ssim:.10f}")
    print(f"ms_ssim lvl3   = {ms3:.10f}")
    print(f"ms_ssim lvl4   = {ms4:.10f}")
    print(f"nrmse(range)   = {nrmse:.10f}")


if __name__ == "__main__":
    main()

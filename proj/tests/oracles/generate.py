"""Independent reference values frozen into the C++ tests.

Run with numpy, scipy and scikit-image available; paste the printed
constants into the matching test files.
"""
import numpy as np
from skimage.metrics import structural_similarity


def pattern(c, h, w, shift):
    a = np.zeros((c, h, w))
    for ch in range(c):
        for y in range(h):
            for x in range(w):
                a[ch, y, x] = ((7 * y + 3 * x + 5 * ch + shift) % 17) / 16.0
    return a


def ssim_case():
    a = pattern(3, 16, 19, 0)
    b = np.clip(a + 0.1 * np.sin(np.arange(a.size).reshape(a.shape) * 0.37), 0, 1)
    v = structural_similarity(a, b, channel_axis=0, gaussian_weights=True, sigma=1.5,
                              use_sample_covariance=False, data_range=1.0)
    print(f"ssim_pattern = {v:.17g}")


def gaussian_case():
    size, sigma = 5, 1.2
    c = size // 2
    yy, xx = np.mgrid[0:size, 0:size] - c
    k = np.exp(-(xx**2 + yy**2) / (2 * sigma**2))
    k /= k.sum()
    print("gaussian_5_1p2 =", ", ".join(f"{v:.17g}" for v in k.ravel()))


def keys(t, a=-0.5):
    t = abs(t)
    if t <= 1:
        return (a + 2) * t**3 - (a + 3) * t**2 + 1
    if t < 2:
        return a * t**3 - 5 * a * t**2 + 8 * a * t - 4 * a
    return 0.0


def bicubic_case():
    src = np.array([[0.1, 0.4, 0.35, 0.9, 0.2], [0.5, 0.0, 0.7, 0.3, 0.6],
                    [0.25, 0.8, 0.15, 0.45, 1.0], [0.6, 0.05, 0.55, 0.75, 0.3]])
    s = 2
    h, w = src.shape
    out = np.zeros((h * s, w * s))
    for i in range(h * s):
        for j in range(w * s):
            py, px = i / s, j / s
            acc = 0.0
            for m in range(int(np.floor(py)) - 1, int(np.floor(py)) + 3):
                for n in range(int(np.floor(px)) - 1, int(np.floor(px)) + 3):
                    wgt = keys(py - m) * keys(px - n)
                    acc += wgt * src[min(max(m, 0), h - 1), min(max(n, 0), w - 1)]
            out[i, j] = acc
    print("bicubic_row1 =", ", ".join(f"{v:.17g}" for v in out[1]))
    print("bicubic_row6 =", ", ".join(f"{v:.17g}" for v in out[6]))


def potentials_case():
    z = np.array([0.3, -1.2, 0.0, 2.5])
    w = np.array([1.0, 0.5, 2.0, 1.5])
    for p in (1.0, 0.7):
        v = np.sum(w * (z**2 + 1e-3) ** (p / 2))
        print(f"phi_sparse p={p}: {v:.17g}")
    Z = np.array([[0.4, -0.2, 1.1, 0.0], [0.3, 0.8, -0.5, 0.25], [-0.7, 0.1, 0.2, 0.9]])
    sv = np.linalg.svd(Z, compute_uv=False)
    wl = np.array([0.5, 1.0, 2.0])
    for p in (1.0, 0.6):
        v = np.sum(wl * (sv**2 + 1e-3) ** (p / 2))
        print(f"phi_lowrank p={p}: {v:.17g}")


if __name__ == "__main__":
    ssim_case()
    gaussian_case()
    bicubic_case()
    potentials_case()

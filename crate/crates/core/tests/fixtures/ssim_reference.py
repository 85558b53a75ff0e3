"""Regenerates the frozen SSIM values used by tests/metrics.rs."""
import numpy as np
from skimage.metrics import structural_similarity

M = (1 << 64) - 1


def lcg(n, seed):
    s = seed
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        s = (s * 6364136223846793005 + 1442695040888963407) & M
        out[i] = s >> 56
    return out


def fixture(ch, seed_a, seed_b, mix):
    n = 64 * 64 * ch
    a = lcg(n, seed_a)
    b = (a * (4 - mix) + lcg(n, seed_b) * mix) // 4
    shape = (64, 64, ch)
    return a.reshape(shape).astype(np.float64), b.reshape(shape).astype(np.float64)


for ch, sa, sb, mix in [(1, 1, 2, 1), (1, 3, 4, 4), (3, 5, 6, 1), (3, 7, 8, 2), (3, 9, 10, 3)]:
    a, b = fixture(ch, sa, sb, mix)
    v = structural_similarity(
        a, b, data_range=255, gaussian_weights=True, sigma=1.5,
        use_sample_covariance=False, channel_axis=-1,
    )
    print(f"({ch}, {sa}, {sb}, {mix}, {v:.12f}),")

"""Compare the compiled and numpy conv1d backends.

    python benchmarks/bench_conv.py [--repeat N]

Times one forward plus one backward pass per configuration and reports the
best of ``--repeat`` runs for each backend that is available.
"""
import argparse
import timeit

import numpy as np

from rawdann import kernels

# (name, batch, in_channels, length, out_channels, width, stride)
CASES = [
    ("desk conv1", 64, 1, 560, 32, 32, 16),
    ("desk conv2", 64, 32, 17, 32, 5, 1),
    ("large conv1", 16, 1, 4960, 256, 64, 31),
    ("large conv2", 16, 256, 79, 128, 15, 1),
]


def bench(backend, x, w, b, stride, repeat):
    mod = kernels.get_backend(backend)
    out = mod.conv1d_forward(x, w, b, stride)
    g = np.ones_like(out)

    def run():
        mod.conv1d_forward(x, w, b, stride)
        mod.conv1d_backward(x, w, g, stride)

    number = 5
    return min(timeit.repeat(run, number=number, repeat=repeat)) / number


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    backends = kernels.available_backends()
    rng = np.random.default_rng(0)
    print(f"active backend: {kernels.BACKEND}")
    header = f"{'case':<13}" + "".join(f"{b + ' ms':>14}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for name, bsz, c_in, t, c_out, k, s in CASES:
        x = rng.standard_normal((bsz, c_in, t))
        w = rng.standard_normal((c_out, c_in, k))
        b = rng.standard_normal(c_out)
        times = {be: bench(be, x, w, b, s, args.repeat) for be in backends}
        line = f"{name:<13}" + "".join(f"{times[be] * 1e3:>14.3f}" for be in backends)
        if len(backends) == 2:
            line += f"{times['python'] / times['compiled']:>9.2f}x"
        print(line)


if __name__ == "__main__":
    main()

"""Uniform noise on shared parameters washes out in the average.

Each client adds an independent uniform(-a, a) perturbation to the
parameters it sends.  Because the noise is mean-zero, averaging k noisy
copies of the same vector drifts back to the clean vector at the usual
1/sqrt(k) rate.  The table below measures that empirically.
"""

import numpy as np

from fedsim import ParameterSet, Update, add_uniform_noise, plain_average
from fedsim.seeding import derive_seed, rng_from


def main():
    d = 50
    amplitude = 1.0
    base = ParameterSet(rng_from(123).standard_normal(d), (("output_kernel", (d,)),))

    print(f"clean vector: {d} coordinates; noise amplitude a = {amplitude}")
    print(f"{'copies k':>9} {'max |error|':>12} {'sigma/sqrt(k)':>14}")
    for k in (1, 10, 100, 1000, 10000):
        updates = [
            Update(i, add_uniform_noise(base, amplitude, derive_seed(55, i)), 1, 0)
            for i in range(k)
        ]
        avg = plain_average(updates).params.values
        err = np.max(np.abs(avg - base.values))
        # Standard error of one averaged coordinate; the max over 50
        # coordinates lands a few multiples above it and shrinks at the
        # same 1/sqrt(k) rate.
        stderr = (amplitude / np.sqrt(12.0)) / np.sqrt(k)
        print(f"{k:>9} {err:>12.5f} {stderr:>14.5f}")

    # single huge draw: the sample mean of the noise itself is tiny
    big = ParameterSet(np.zeros(10**6), (("output_kernel", (10**6,)),))
    noise = add_uniform_noise(big, amplitude, seed=42).values
    print(f"\nmean of one million noise draws: {noise.mean():+.2e} "
          f"(sd of that mean: {amplitude / np.sqrt(12.0) / 1000.0:.2e})")


if __name__ == "__main__":
    main()

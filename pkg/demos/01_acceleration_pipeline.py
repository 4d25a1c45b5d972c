"""Walk through the acceleration preprocessing chain on a synthetic stream.

Raw 3-axis samples at 10 Hz become orientation-free magnitude/jerk channels,
then a 51x51x2 log-power spectrogram image, optionally stripe-masked for
augmentation. Saves a figure next to this script when matplotlib is around.
"""

import numpy as np

from modemil.accel import band_table, magnitude_jerk, mask_augment, spectrogram

rng = np.random.default_rng(0)

# One minute of "walking": gravity plus a 2 Hz bounce and some jitter.
t = np.arange(600) / 10.0
samples = np.zeros((600, 3))
samples[:, 2] = 9.81 + 2.0 * np.sin(2.0 * np.pi * 2.0 * t)
samples += 0.3 * rng.normal(size=(600, 3))

window = magnitude_jerk(samples, previous_sample=samples[0])
print(f"magnitude range: {window[:, 0].min():.2f} .. {window[:, 0].max():.2f} m/s^2")
print(f"jerk range:      {window[:, 1].min():.2f} .. {window[:, 1].max():.2f} m/s^3")

bands = band_table()
print(f"\nband table: {bands.n_bands} bands, edges {bands.edges[0]:.2f} .. {bands.edges[-1]:.2f} Hz")
print(f"the 2 Hz bounce falls into band {bands.band_of(2.0)}")

spec = spectrogram(window, bands)
print(f"\nspectrogram image: {spec.shape} (time segments x bands x channels)")
peak = spec[:, 2:, 0].argmax(axis=1) + 2  # skip the gravity line's mainlobe
print(f"per-segment peak band of the magnitude channel: {np.bincount(peak).argmax()}")

augmented = mask_augment(spec, np.random.default_rng(7))
changed = int(np.sum(augmented[:, :, 0] != spec[:, :, 0]))
print(f"augmentation masked {changed} of {51 * 51} magnitude cells")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 3, figsize=(12, 3.5), constrained_layout=True)
    for ax, image, title in (
        (axes[0], spec[:, :, 0], "magnitude channel"),
        (axes[1], spec[:, :, 1], "jerk channel"),
        (axes[2], augmented[:, :, 0], "magnitude, masked"),
    ):
        ax.imshow(image.T, origin="lower", aspect="auto", cmap="magma")
        ax.set_title(title)
        ax.set_xlabel("time segment")
        ax.set_ylabel("band")
    fig.savefig("01_acceleration_pipeline.png", dpi=120)
    print("wrote 01_acceleration_pipeline.png")
except ImportError:
    print("matplotlib not available; skipping the figure")

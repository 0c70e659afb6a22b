"""Noise filtering on an event stream with a planted hot pixel and a burst.

Builds a quiet background stream, corrupts it, and shows how the two
filters recover the original: the hot-pixel filter finds the one pixel
firing far above the array's rate, and the burst filter drops the time
slice in which most of the array fired at once.
"""

import numpy as np

from evplace.events import EventStream, SensorGeometry, filter_bursts, remove_hot_pixels


def build_corrupted_stream(geometry: SensorGeometry) -> EventStream:
    rng = np.random.default_rng(11)
    # Background: every pixel fires once, spread over one second.
    n = geometry.n_pixels
    t = np.sort(rng.integers(0, 1_000_000, n))
    x = np.tile(np.arange(geometry.width, dtype=np.int32), geometry.height)
    y = np.repeat(np.arange(geometry.height, dtype=np.int32), geometry.width)
    p = rng.choice(np.array([-1, 1], dtype=np.int8), n)

    # Hot pixel: (5, 4) fires 300 extra times regardless of the scene.
    hot_t = np.sort(rng.integers(0, 1_000_000, 300))
    hot = (hot_t, np.full(300, 5, np.int32), np.full(300, 4, np.int32),
           np.ones(300, np.int8))

    # Burst: 80% of the array fires inside one millisecond around t=700ms.
    k = int(0.8 * n)
    idx = rng.choice(n, k, replace=False)
    burst_t = np.sort(rng.integers(700_000, 701_000, k))
    burst = (burst_t, x[idx], y[idx], p[idx])

    t = np.concatenate([t, hot[0], burst[0]])
    order = np.argsort(t, kind="stable")
    return EventStream(
        geometry,
        t[order],
        np.concatenate([x, hot[1], burst[1]])[order],
        np.concatenate([y, hot[2], burst[2]])[order],
        np.concatenate([p, hot[3], burst[3]])[order],
    )


def main():
    geometry = SensorGeometry(16, 12)
    stream = build_corrupted_stream(geometry)
    print(f"corrupted stream: {len(stream)} events on a "
          f"{geometry.width}x{geometry.height} array")

    cleaned, flagged = remove_hot_pixels(stream, sigma=5.0)
    print(f"\nhot-pixel filter (5 sigma): flagged {flagged}, "
          f"removed {len(stream) - len(cleaned)} events")

    final = filter_bursts(cleaned, bin_us=500, fraction=0.25)
    print(f"burst filter (500 us bins, 25% of pixels): "
          f"removed {len(cleaned) - len(final)} more events")

    print(f"\nfinal stream: {len(final)} events "
          f"(background was {geometry.n_pixels})")


if __name__ == "__main__":
    main()

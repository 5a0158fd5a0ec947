import hashlib
from dataclasses import dataclass

import imageio
import numpy as np

from utils.errors import EmptyString, TyposwypeError, UnsupportedCharacter
from utils.io import atomic_path
from utils.keyboard import QWERTY
from utils.logger import add_file_handler, logger

CANVAS_SHAPE = (40, 100, 3)

# blue, light blue, cyan, green, yellow, orange, red, magenta
PALETTE = (
    (0.0, 0.0, 1.0),
    (0.33, 0.66, 1.0),
    (0.0, 1.0, 1.0),
    (0.0, 1.0, 0.0),
    (1.0, 1.0, 0.0),
    (1.0, 0.6, 0.0),
    (1.0, 0.0, 0.0),
    (1.0, 0.0, 1.0),
)

SEED_MODES = ("canonical", "stream")


@dataclass(frozen=True)
class RenderConfig:
    """
    Swype rendering parameters.

    Attributes:
        noise_amplitude (float): Upper bound of the uniform key jitter, in key units
        scale (float): Pixels per key unit
        palette (tuple): RGB stroke colours, cycled per stroke
        seed_mode (str): "canonical" derives each point's noise from (seed, position, character);
            "stream" draws from a caller-supplied advancing generator
        seed (int): Global seed for canonical noise
    """

    noise_amplitude: float = 0.1
    scale: float = 10.0
    palette: tuple = PALETTE
    seed_mode: str = "canonical"
    seed: int = 0

    def __post_init__(self):
        if self.noise_amplitude < 0:
            raise ValueError(f"noise_amplitude must be >= 0, got {self.noise_amplitude}")
        if self.scale <= 0:
            raise ValueError(f"scale must be > 0, got {self.scale}")
        if len(self.palette) == 0:
            raise ValueError("palette must not be empty")
        if self.seed_mode not in SEED_MODES:
            raise ValueError(f"seed_mode must be one of {SEED_MODES}, got {self.seed_mode!r}")


def canonical_rng(key, seed=0):
    """Noise generator derived only from (seed, key)."""
    digest = hashlib.blake2b(f"{seed}\x00{key}".encode("utf-8"), digest_size=8).digest()
    return np.random.default_rng(int.from_bytes(digest, "little"))


def bresenham_line(r0, c0, r1, c1):
    """
    Integer pixels of the line from (r0, c0) to (r1, c1), both ends included.

    Returns:
        list[tuple[int, int]]: (row, col) pairs in drawing order
    """
    dr = abs(r1 - r0)
    dc = -abs(c1 - c0)
    step_r = 1 if r0 < r1 else -1
    step_c = 1 if c0 < c1 else -1
    error = dr + dc
    points = []
    r, c = r0, c0
    while True:
        points.append((r, c))
        if r == r1 and c == c1:
            break
        e2 = 2 * error
        if e2 >= dc:
            error += dc
            r += step_r
        if e2 <= dr:
            error += dr
            c += step_c
    return points


def normalize_domain(domain, layout=QWERTY):
    """Lowercase `domain` and check every character is on the layout."""
    if not isinstance(domain, str) or len(domain) == 0:
        raise EmptyString("Cannot render an empty domain")
    folded = domain.lower()
    for position, char in enumerate(folded):
        if char not in layout.keys:
            raise UnsupportedCharacter(domain[position], position, domain)
    return folded


def trace_points(domain, config=RenderConfig(), rng=None, layout=QWERTY):
    """
    Noised key centres of `domain` in (fractional) pixel coordinates.

    Args:
        domain (str): Domain to trace
        config (RenderConfig): Rendering parameters
        rng (np.random.Generator, optional): Required in "stream" mode, ignored in
            "canonical" mode
        layout (KeyboardLayout): Key geometry

    Returns:
        np.ndarray: (len(domain), 2) array of (row, col) pixel positions
    """
    folded = normalize_domain(domain, layout)
    keys = np.array(
        [(layout.keys[c].row, layout.keys[c].col) for c in folded], dtype=np.float64
    )
    if config.seed_mode == "canonical":
        # each point keyed by (position, character) so a substitution moves only its own point
        noise = np.array(
            [
                canonical_rng(f"{i}:{c}", config.seed).uniform(0.0, config.noise_amplitude, size=2)
                for i, c in enumerate(folded)
            ]
        )
    elif rng is None:
        raise ValueError("seed_mode='stream' needs a random generator")
    else:
        noise = rng.uniform(0.0, config.noise_amplitude, size=keys.shape)
    return (keys + noise) * config.scale


def render(domain, config=RenderConfig(), rng=None, layout=QWERTY):
    """
    Render `domain` as a swype-like trace on a 40x100 RGB canvas.

    Stroke i joins characters i and i+1 in colour palette[i % len(palette)];
    later strokes overwrite earlier pixels. A single character renders as one
    pixel in palette[0].

    Returns:
        np.ndarray: float32 array of shape (40, 100, 3), values in [0, 1]
    """
    points = trace_points(domain, config, rng, layout)
    height, width, _ = CANVAS_SHAPE
    pixels = np.floor(points + 0.5).astype(np.int64)
    pixels[:, 0] = np.clip(pixels[:, 0], 0, height - 1)
    pixels[:, 1] = np.clip(pixels[:, 1], 0, width - 1)

    image = np.zeros(CANVAS_SHAPE, dtype=np.float32)
    palette = np.asarray(config.palette, dtype=np.float32)

    if len(pixels) == 1:
        image[pixels[0, 0], pixels[0, 1]] = palette[0]
        return image

    for i in range(len(pixels) - 1):
        (r0, c0), (r1, c1) = pixels[i], pixels[i + 1]
        line = np.array(bresenham_line(int(r0), int(c0), int(r1), int(c1)))
        image[line[:, 0], line[:, 1]] = palette[i % len(palette)]
    return image


def render_batch(domains, config=RenderConfig(), rng=None, layout=QWERTY):
    """
    Render a list of domains, preserving order.

    In "canonical" mode each domain gets its own derived noise stream; in
    "stream" mode the shared generator advances domain by domain.

    Raises:
        TyposwypeError: the first failure, with `.index` set to the failing position
    """
    images = []
    for index, domain in enumerate(domains):
        try:
            images.append(render(domain, config, rng, layout))
        except TyposwypeError as e:
            logger.error(f"Failed to render item {index} ({domain!r}): {e}")
            raise e.at_index(index)
    return images


def export_image(image, path):
    """
    Save a swype image as an 8-bit RGB PNG (value = round(intensity * 255)).

    Args:
        image (np.ndarray): (40, 100, 3) intensities in [0, 1]
        path (str): Destination .png path
    """
    quantized = np.rint(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    with atomic_path(path) as tmp_path:
        imageio.v2.imwrite(tmp_path, quantized)
    logger.success(f"Saved swype image to {path}")


def load_image(path):
    """Read an exported PNG back as float32 intensities in [0, 1]."""
    pixels = imageio.v2.imread(path)
    return np.asarray(pixels, dtype=np.float32)[..., :3] / 255.0


if __name__ == "__main__":
    add_file_handler()
    for name in ("facebook.com", "fapebook.com", "faceb0ok.com"):
        export_image(render(name), f"out/swype/{name}.png")

"""Synthetic scenes with exact ground truth.

Scenes are described by a small parametric record (layout, material
chromaticities, highlight lobes, shading ramp) that can be serialized as
a plain-text key/value file; rendering realizes it into per-pixel maps
plus the ground-truth diffuse/specular images.  Every built-in scene
keeps highlight-free margins around each lobe so each material has pure
body-reflection pixels, which the recovery stage depends on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSceneError, UnknownSceneError
from .model import WHITE, _norm3

# Orthonormal hue plane perpendicular to white; used to place synthetic
# material colors at controlled angular spacing.
HUE_AXIS_1 = np.array([1.0, -1.0, 0.0]) / np.sqrt(2.0)
HUE_AXIS_2 = np.array([1.0, 1.0, -2.0]) / np.sqrt(6.0)

# Saturation (orthogonal coordinate) used by the multi-material scenes;
# high enough that two materials 90 degrees apart in hue can never hide
# inside one cluster of the 0.1-deviation fit check.
DEFAULT_SATURATION = 0.55

# Single-material scene colors: a strongly colored, a medium, and a
# near-illumination ("almost white") chromaticity.
SINGLE_COLORS = (
    (0.7053, 0.7053, 0.0705),
    (0.6667, 0.6667, 0.3333),
    (0.5965, 0.5965, 0.5369),
)

_CUTOFF = float(np.exp(-4.5))  # lobe support ends at 3 sigma exactly


def hue_chromaticity(angle_deg: float, saturation: float = DEFAULT_SATURATION) -> np.ndarray:
    """Unit chromaticity at a given hue angle and saturation.

    The angle walks the plane orthogonal to white; saturation is the
    orthogonal coordinate, so all channels stay nonnegative for
    saturation up to ~0.59.
    """
    phi = np.deg2rad(angle_deg)
    u = np.cos(phi) * HUE_AXIS_1 + np.sin(phi) * HUE_AXIS_2
    v = saturation * u + np.sqrt(1.0 - saturation * saturation) * WHITE
    return v / float(_norm3(v))


@dataclass
class SceneParams:
    """Parametric scene description; serializable as key/value text."""

    name: str = "custom"
    width: int = 320
    height: int = 240
    layout: str = "stripes"                 # "stripes" | "quadrants"
    illumination: tuple = (1.0, 1.0, 1.0)   # unnormalized illumination color
    materials: list = field(default_factory=list)   # list of RGB triples
    diffuse_range: tuple = (0.45, 0.75)     # shading ramp, left to right
    lobes: list = field(default_factory=list)  # (cx, cy, sigma, amplitude)

    def to_text(self) -> str:
        lines = [
            "# despec scene description",
            f"scene = {self.name}",
            f"width = {self.width}",
            f"height = {self.height}",
            f"layout = {self.layout}",
            "illumination = %.10g %.10g %.10g" % tuple(self.illumination),
            "diffuse_range = %.10g %.10g" % tuple(self.diffuse_range),
        ]
        for m in self.materials:
            lines.append("material = %.10g %.10g %.10g" % tuple(m))
        for lb in self.lobes:
            lines.append("lobe = %.10g %.10g %.10g %.10g" % tuple(lb))
        return "\n".join(lines) + "\n"


@dataclass
class SceneSpec:
    """A fully realized scene: per-pixel maps ready to render."""

    width: int
    height: int
    material_map: np.ndarray     # (H, W) int32 indices into materials
    materials: list              # unit chromaticities
    diffuse_mag: np.ndarray      # (H, W) body reflection magnitude
    specular_mag: np.ndarray     # (H, W) surface reflection magnitude
    illumination: np.ndarray     # unit chromaticity


@dataclass
class GroundTruth:
    input: np.ndarray
    diffuse: np.ndarray
    specular: np.ndarray
    labels: np.ndarray


def _builtin_table() -> dict:
    singles = {
        f"single-{i + 1}": SceneParams(
            name=f"single-{i + 1}",
            width=320,
            height=240,
            layout="stripes",
            materials=[SINGLE_COLORS[i]],
            lobes=[(0.5, 0.5, 0.10, 0.40)],
        )
        for i in range(3)
    }
    four = SceneParams(
        name="four-materials",
        width=650,
        height=450,
        layout="quadrants",
        materials=[tuple(hue_chromaticity(a)) for a in (45.0, 135.0, 225.0, 315.0)],
        lobes=[
            (0.25, 0.25, 0.06, 0.45),
            (0.75, 0.25, 0.06, 0.45),
            (0.25, 0.75, 0.06, 0.45),
            (0.75, 0.75, 0.06, 0.45),
        ],
    )
    overseg = SceneParams(
        name="over-seg",
        width=500,
        height=300,
        layout="stripes",
        materials=[tuple(hue_chromaticity(a)) for a in (18.0, 90.0, 162.0, 234.0, 306.0)],
        lobes=[(0.1 + 0.2 * i, 0.5, 0.08, 0.45) for i in range(5)],
    )
    table = dict(singles)
    table["four-materials"] = four
    table["over-seg"] = overseg
    return table


BUILTIN_SCENES = tuple(sorted(_builtin_table()))


def builtin_params(name: str, width: int | None = None, height: int | None = None) -> SceneParams:
    table = _builtin_table()
    if name not in table:
        raise UnknownSceneError(
            f"unknown scene {name!r}; built-ins: {', '.join(BUILTIN_SCENES)}"
        )
    params = table[name]
    if width is not None:
        params.width = int(width)
    if height is not None:
        params.height = int(height)
    return params


def build_scene(params: SceneParams) -> SceneSpec:
    """Realize a parametric description into per-pixel maps."""
    w, h = int(params.width), int(params.height)
    if w < 4 or h < 4:
        raise InvalidSceneError(f"scene size {w}x{h} is too small")
    if not params.materials:
        raise InvalidSceneError("scene needs at least one material")

    materials = []
    for m in params.materials:
        v = np.asarray(m, dtype=np.float64)
        if v.shape != (3,) or np.any(v < 0) or not np.all(np.isfinite(v)):
            raise InvalidSceneError(f"bad material color {m!r}")
        n = float(_norm3(v))
        if n <= 0:
            raise InvalidSceneError(f"bad material color {m!r}")
        materials.append(v / n)

    illum = np.asarray(params.illumination, dtype=np.float64)
    if illum.shape != (3,) or np.any(illum < 0) or float(_norm3(illum)) <= 0:
        raise InvalidSceneError(f"bad illumination color {params.illumination!r}")
    illum = illum / float(_norm3(illum))

    n_mat = len(materials)
    xs = np.arange(w)
    ys = np.arange(h)
    if params.layout == "stripes":
        material_map = np.broadcast_to(
            np.minimum(xs * n_mat // w, n_mat - 1)[None, :], (h, w)
        ).astype(np.int32)
    elif params.layout == "quadrants":
        col = (xs * 2 // w)[None, :]
        row = (ys * 2 // h)[:, None]
        material_map = ((row * 2 + col) % n_mat).astype(np.int32)
    else:
        raise InvalidSceneError(f"unknown layout {params.layout!r}")

    lo, hi = params.diffuse_range
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo < 0 or hi < 0:
        raise InvalidSceneError(f"bad diffuse range {params.diffuse_range!r}")
    ramp = lo + (hi - lo) * (xs / max(w - 1, 1))
    diffuse_mag = np.broadcast_to(ramp[None, :], (h, w)).copy()

    specular_mag = np.zeros((h, w), dtype=np.float64)
    gx = xs[None, :].astype(np.float64)
    gy = ys[:, None].astype(np.float64)
    for lb in params.lobes:
        cx, cy, sigma, amp = (float(q) for q in lb)
        if sigma <= 0 or amp < 0:
            raise InvalidSceneError(f"bad lobe {lb!r}")
        s_px = sigma * min(w, h)
        d2 = (gx - cx * w) ** 2 + (gy - cy * h) ** 2
        bump = (np.exp(-d2 / (2.0 * s_px * s_px)) - _CUTOFF) / (1.0 - _CUTOFF)
        specular_mag += amp * np.clip(bump, 0.0, None)

    return SceneSpec(
        width=w,
        height=h,
        material_map=material_map,
        materials=materials,
        diffuse_mag=diffuse_mag,
        specular_mag=specular_mag,
        illumination=illum,
    )


def builtin_scene(name: str, width: int | None = None, height: int | None = None) -> SceneSpec:
    return build_scene(builtin_params(name, width, height))


def render(spec: SceneSpec) -> GroundTruth:
    """Render a scene into input + ground-truth components.

    input = diffuse_mag * material + specular_mag * illumination, pixel
    by pixel.  Raises InvalidSceneError on negative magnitudes or
    non-unit chromaticities.
    """
    mats = np.asarray(spec.materials, dtype=np.float64)
    if np.any(np.abs(_norm3(mats) - 1.0) > 1e-9) or np.any(mats < 0):
        raise InvalidSceneError("material chromaticities must be unit and nonnegative")
    illum = np.asarray(spec.illumination, dtype=np.float64)
    if abs(float(_norm3(illum)) - 1.0) > 1e-9 or np.any(illum < 0):
        raise InvalidSceneError("illumination chromaticity must be unit and nonnegative")
    if np.any(spec.diffuse_mag < 0) or np.any(spec.specular_mag < 0):
        raise InvalidSceneError("reflection magnitudes must be nonnegative")
    if spec.material_map.min() < 0 or spec.material_map.max() >= len(mats):
        raise InvalidSceneError("material map indexes outside the material list")

    diffuse = spec.diffuse_mag[..., None] * mats[spec.material_map]
    specular = spec.specular_mag[..., None] * illum
    return GroundTruth(
        input=diffuse + specular,
        diffuse=diffuse,
        specular=specular,
        labels=spec.material_map.copy(),
    )


def add_noise(gt: GroundTruth, sigma: float, seed: int = 0) -> np.ndarray:
    """Input image plus Gaussian noise of standard deviation sigma/255.

    Uses a counter-based generator keyed on the seed, so the noise field
    for a given seed and shape is reproducible regardless of how the
    caller parallelizes.  Negative results are clipped to zero (sensors
    do not report negative energy); values above 1 are left alone.
    """
    if sigma < 0:
        raise InvalidSceneError(f"noise sigma must be nonnegative, got {sigma!r}")
    if sigma == 0:
        return gt.input.copy()
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    noisy = gt.input + rng.normal(0.0, sigma / 255.0, size=gt.input.shape)
    return np.clip(noisy, 0.0, None)


# --- plain-text scene description files ---

def scene_from_text(text: str) -> SceneParams:
    """Parse the key/value scene grammar.

    Lines are ``key = value``; ``#`` starts a comment; repeated
    ``material`` / ``lobe`` keys append.  A ``scene = <builtin-name>``
    line pulls that scene's defaults, which later keys override; custom
    scenes must list materials explicitly.
    """
    params: SceneParams | None = None
    pending: dict = {}
    materials: list = []
    lobes: list = []

    def to_floats(value, n, key):
        parts = value.replace(",", " ").split()
        if len(parts) != n:
            raise InvalidSceneError(f"{key} expects {n} numbers, got {value!r}")
        try:
            return tuple(float(p) for p in parts)
        except ValueError as exc:
            raise InvalidSceneError(f"bad number in {key}: {value!r}") from exc

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidSceneError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.lower()
        if key == "scene":
            if value != "custom":
                params = builtin_params(value)
            else:
                params = SceneParams()
        elif key in ("width", "height"):
            try:
                pending[key] = int(value)
            except ValueError as exc:
                raise InvalidSceneError(f"bad integer for {key}: {value!r}") from exc
        elif key == "layout":
            if value not in ("stripes", "quadrants"):
                raise InvalidSceneError(f"unknown layout {value!r}")
            pending[key] = value
        elif key == "illumination":
            pending[key] = to_floats(value, 3, key)
        elif key == "diffuse_range":
            pending[key] = to_floats(value, 2, key)
        elif key == "material":
            materials.append(to_floats(value, 3, key))
        elif key == "lobe":
            lobes.append(to_floats(value, 4, key))
        else:
            raise InvalidSceneError(f"line {lineno}: unknown key {key!r}")

    if params is None:
        params = SceneParams()
    for key, value in pending.items():
        setattr(params, key, value)
    if materials:
        params.materials = materials
    if lobes:
        params.lobes = lobes
    if not params.materials:
        raise InvalidSceneError("scene description lists no materials")
    return params


def load_scene(path) -> SceneParams:
    with open(path, "r", encoding="utf-8") as fh:
        return scene_from_text(fh.read())


def save_scene(params: SceneParams, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(params.to_text())

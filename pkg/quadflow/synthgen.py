"""
quadflow - Synthetic Scene Oracle

Renders frames of rigid sprites moving with constant acceleration,

    p(t) = p0 + v * t + (a / 2) * t^2

together with the exact ground-truth flow between any two times. Every test
that needs a known answer (flow accuracy, interpolation centroids, the
quadratic-vs-linear gap) is built on these scenes.

Scene files are line oriented; see docs/scene_format.md.
"""

import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator
from scipy import ndimage

from common.logging import get_logger
from common.utils import parallel_map
from .errors import SceneError
from .flowest import QuartetFlows
from .imgio import FlowField, Image

logger = get_logger(__name__)

QUARTET_TIMES = (-1.0, 0.0, 1.0, 2.0)
SUPPORT_THRESHOLD = 0.01
BLOB_EXTENT_SIGMAS = 3.0
TEXTURE_CELL = 3.0
TEXTURE_RANGE = (0.25, 1.0)

Vec2 = Tuple[float, float]


# =============================================================================
# Scene models
# =============================================================================
class SpriteSpec(BaseModel):
    """One rigid sprite: kinematics plus shape parameters"""
    kind: Literal["blob", "disc"]
    p0: Vec2
    v: Vec2 = (0.0, 0.0)
    a: Vec2 = (0.0, 0.0)
    sigma: Optional[float] = None
    radius: Optional[float] = None
    seed: int = 0

    @field_validator("p0", "v", "a")
    @classmethod
    def validate_finite(cls, value: Vec2) -> Vec2:
        if not all(math.isfinite(c) for c in value):
            raise ValueError(f"kinematic vector must be finite, got {value}")
        return value

    @model_validator(mode="after")
    def validate_shape(self) -> "SpriteSpec":
        if self.kind == "blob":
            if self.sigma is None or not (math.isfinite(self.sigma) and self.sigma > 0):
                raise ValueError("blob sprites need a positive sigma")
        elif self.radius is None or not (math.isfinite(self.radius) and self.radius > 0):
            raise ValueError("disc sprites need a positive radius")
        return self

    @property
    def extent(self) -> float:
        """Distance from the centre beyond which the sprite is negligible"""
        if self.kind == "blob":
            return BLOB_EXTENT_SIGMAS * self.sigma
        return self.radius

    def position(self, t: float) -> Vec2:
        return (
            self.p0[0] + self.v[0] * t + 0.5 * self.a[0] * t * t,
            self.p0[1] + self.v[1] * t + 0.5 * self.a[1] * t * t,
        )

    def displacement(self, t0: float, t1: float) -> Vec2:
        x0, y0 = self.position(t0)
        x1, y1 = self.position(t1)
        return x1 - x0, y1 - y0


class SceneSpec(BaseModel):
    """Canvas, background level, supersampling factor and the sprite list"""
    width: int = Field(gt=0)
    height: int = Field(gt=0)
    background: float = Field(default=0.0, ge=0.0, le=1.0)
    supersample: int = Field(default=4, ge=1, le=16)
    sprites: List[SpriteSpec] = Field(default_factory=list)

    def check_margins(self, t: float) -> None:
        """
        Raises:
            SceneError: If any sprite centre is closer than twice its extent to the canvas edge at t
        """
        for index, sprite in enumerate(self.sprites):
            x, y = sprite.position(t)
            margin = 2.0 * sprite.extent
            if x < margin or y < margin or x > self.width - 1 - margin or y > self.height - 1 - margin:
                raise SceneError(
                    f"sprite {index} at ({x:.3f}, {y:.3f}) violates the {margin:g} px margin at t={t:g}"
                )


# =============================================================================
# Scene files
# =============================================================================
def _numbers(tokens: Sequence[str], count: int, line: int, what: str) -> List[float]:
    if len(tokens) != count:
        raise SceneError(f"{what} expects {count} values, got {len(tokens)}", line)
    try:
        values = [float(tok) for tok in tokens]
    except ValueError as e:
        raise SceneError(f"{what}: {e}", line) from e
    if not all(math.isfinite(v) for v in values):
        raise SceneError(f"{what}: values must be finite", line)
    return values


def _integer(token: str, line: int, what: str) -> int:
    try:
        return int(token)
    except ValueError as e:
        raise SceneError(f"{what}: expected an integer, got {token!r}", line) from e


def parse_scene(text: str, supersample: Optional[int] = None) -> SceneSpec:
    """
    Parse the line-oriented scene format:

        canvas W H
        background b
        supersample S
        sprite blob p0x p0y vx vy ax ay sigma
        sprite disc p0x p0y vx vy ax ay radius seed

    '#' starts a comment. ``canvas`` is required. A scene without a
    ``supersample`` line uses ``supersample`` when given, else the model default.

    Raises:
        SceneError: With the offending line number
    """
    fields = {}
    sprites = []
    for number, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split("#", 1)[0].split()
        if not tokens:
            continue
        keyword, args = tokens[0].lower(), tokens[1:]

        if keyword == "canvas":
            if "width" in fields:
                raise SceneError("canvas given twice", number)
            if len(args) != 2:
                raise SceneError(f"canvas expects 2 values, got {len(args)}", number)
            fields["width"] = _integer(args[0], number, "canvas")
            fields["height"] = _integer(args[1], number, "canvas")
        elif keyword == "background":
            fields["background"] = _numbers(args, 1, number, "background")[0]
        elif keyword == "supersample":
            if len(args) != 1:
                raise SceneError(f"supersample expects 1 value, got {len(args)}", number)
            fields["supersample"] = _integer(args[0], number, "supersample")
        elif keyword == "sprite":
            if not args:
                raise SceneError("sprite needs a kind", number)
            kind, params = args[0].lower(), args[1:]
            try:
                if kind == "blob":
                    p0x, p0y, vx, vy, ax, ay, sigma = _numbers(params, 7, number, "sprite blob")
                    sprite = SpriteSpec(kind="blob", p0=(p0x, p0y), v=(vx, vy), a=(ax, ay), sigma=sigma)
                elif kind == "disc":
                    if len(params) != 8:
                        raise SceneError(f"sprite disc expects 8 values, got {len(params)}", number)
                    p0x, p0y, vx, vy, ax, ay, radius = _numbers(params[:7], 7, number, "sprite disc")
                    seed = _integer(params[7], number, "sprite disc seed")
                    sprite = SpriteSpec(kind="disc", p0=(p0x, p0y), v=(vx, vy), a=(ax, ay),
                                        radius=radius, seed=seed)
                else:
                    raise SceneError(f"unknown sprite kind {kind!r}", number)
            except ValidationError as e:
                raise SceneError(f"invalid sprite: {e.errors()[0]['msg']}", number) from e
            sprites.append(sprite)
        else:
            raise SceneError(f"unknown keyword {keyword!r}", number)

    if "width" not in fields:
        raise SceneError("missing canvas line")
    if supersample is not None:
        fields.setdefault("supersample", supersample)
    try:
        return SceneSpec(sprites=sprites, **fields)
    except ValidationError as e:
        raise SceneError(f"invalid scene: {e.errors()[0]['loc'][0]}: {e.errors()[0]['msg']}") from e


def load_scene(path: Union[str, Path], supersample: Optional[int] = None) -> SceneSpec:
    """Read and parse a scene file; ``supersample`` is the fallback factor"""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise SceneError(f"cannot read scene {path}: {e}") from e
    scene = parse_scene(text, supersample)
    logger.debug("scene loaded", path=str(path), sprites=len(scene.sprites))
    return scene


# =============================================================================
# Rendering
# =============================================================================
def _sample_grid(scene: SceneSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Supersample positions: pixel j gets j + (s + 0.5) / S - 0.5 for s in 0..S-1"""
    s = scene.supersample
    offsets = (np.arange(s) + 0.5) / s - 0.5
    xs = (np.arange(scene.width)[:, np.newaxis] + offsets).ravel()
    ys = (np.arange(scene.height)[:, np.newaxis] + offsets).ravel()
    return np.meshgrid(xs, ys)


def _box_average(samples: np.ndarray, scene: SceneSpec) -> np.ndarray:
    s = scene.supersample
    return samples.reshape(scene.height, s, scene.width, s).mean(axis=(1, 3))


def _texture(sprite: SpriteSpec, lx: np.ndarray, ly: np.ndarray) -> np.ndarray:
    """Seeded value noise in sprite-local coordinates, bilinear between lattice nodes"""
    nodes = int(math.ceil(2.0 * sprite.radius / TEXTURE_CELL)) + 2
    rng = np.random.default_rng(sprite.seed)
    lattice = rng.uniform(TEXTURE_RANGE[0], TEXTURE_RANGE[1], size=(nodes, nodes))
    gx = (lx + sprite.radius) / TEXTURE_CELL
    gy = (ly + sprite.radius) / TEXTURE_CELL
    return ndimage.map_coordinates(lattice, [gy, gx], order=1, mode="nearest")


def _sprite_layer(sprite: SpriteSpec, t: float, gx: np.ndarray, gy: np.ndarray):
    """Supersampled (alpha, colour) of one sprite at time t"""
    cx, cy = sprite.position(t)
    lx = gx - cx
    ly = gy - cy
    r2 = lx * lx + ly * ly
    if sprite.kind == "blob":
        return np.exp(-r2 / (2.0 * sprite.sigma * sprite.sigma)), 1.0
    alpha = (r2 <= sprite.radius * sprite.radius).astype(np.float64)
    return alpha, _texture(sprite, lx, ly)


def render_frame(scene: SceneSpec, t: float) -> Image:
    """
    Composite every sprite, in list order, over the background at its analytic
    position for time t; supersampled, then box-averaged to the canvas grid.
    Blobs are white Gaussians, discs carry seeded value-noise texture.

    Raises:
        SceneError: If a sprite violates the edge margin at t
    """
    if not math.isfinite(t):
        raise SceneError(f"render time must be finite, got {t}")
    scene.check_margins(t)
    gx, gy = _sample_grid(scene)
    canvas = np.full(gx.shape, scene.background)
    for sprite in scene.sprites:
        alpha, colour = _sprite_layer(sprite, t, gx, gy)
        canvas = canvas * (1.0 - alpha) + alpha * colour
    return Image.from_array(_box_average(canvas, scene)[:, :, np.newaxis])


def sprite_weight(scene: SceneSpec, sprite: SpriteSpec, t: float) -> np.ndarray:
    """Pixel-averaged alpha of a single sprite at t"""
    gx, gy = _sample_grid(scene)
    alpha, _ = _sprite_layer(sprite, t, gx, gy)
    return _box_average(alpha, scene)


def analytic_flow(scene: SceneSpec, t0: float, t1: float) -> FlowField:
    """
    Exact displacement p(t1) - p(t0) painted over each sprite's support at t0
    (pixel weight above SUPPORT_THRESHOLD); zero on the background.

    Raises:
        SceneError: If a margin is violated at t0 or t1, or two supports overlap
    """
    scene.check_margins(t0)
    scene.check_margins(t1)
    flow = np.zeros((scene.height, scene.width, 2))
    claimed = np.zeros((scene.height, scene.width), dtype=bool)
    for index, sprite in enumerate(scene.sprites):
        support = sprite_weight(scene, sprite, t0) > SUPPORT_THRESHOLD
        if (support & claimed).any():
            raise SceneError(f"sprite {index} overlaps another sprite at t={t0:g}")
        claimed |= support
        flow[support] = sprite.displacement(t0, t1)
    return FlowField(flow)


def analytic_quartet_flows(scene: SceneSpec) -> QuartetFlows:
    """The four quartet flows, exact"""
    return QuartetFlows(
        f01=analytic_flow(scene, 0.0, 1.0),
        f0m1=analytic_flow(scene, 0.0, -1.0),
        f10=analytic_flow(scene, 1.0, 0.0),
        f12=analytic_flow(scene, 1.0, 2.0),
    )


@dataclass(frozen=True)
class SceneRender:
    """Input quartet (times -1, 0, 1, 2), target frames and ground-truth flows"""
    frames: List[Image]
    targets: List[Tuple[float, Image]]
    gt_flows: QuartetFlows

    @property
    def target_times(self) -> List[float]:
        return [t for t, _ in self.targets]

    @property
    def target_images(self) -> List[Image]:
        return [img for _, img in self.targets]


def render_quartet_with_targets(scene: SceneSpec, target_times: Sequence[float], threads: int = 1) -> SceneRender:
    """Render I_-1, I_0, I_1, I_2 and every target time; frames render in parallel"""
    times = list(QUARTET_TIMES) + [float(t) for t in target_times]
    images = parallel_map(lambda t: render_frame(scene, t), times, threads)
    result = SceneRender(
        frames=images[:4],
        targets=list(zip(times[4:], images[4:])),
        gt_flows=analytic_quartet_flows(scene),
    )
    logger.info("scene rendered", width=scene.width, height=scene.height,
                sprites=len(scene.sprites), targets=len(result.targets))
    return result


def rendered_centroid(img: Image, background: float = 0.0,
                      region: Optional[Tuple[int, int, int, int]] = None) -> Vec2:
    """
    Intensity-weighted centroid (x, y) of |luma - background|, optionally
    restricted to ``region`` = (x0, y0, x1, y1), half-open.

    Raises:
        SceneError: If the region carries no signal
    """
    weight = np.abs(img.luma() - background)
    x0, y0, x1, y1 = region if region is not None else (0, 0, img.width, img.height)
    window = weight[y0:y1, x0:x1]
    total = window.sum()
    if total <= 0:
        raise SceneError("no sprite signal in the centroid region")
    yy, xx = np.mgrid[y0:y1, x0:x1]
    return float((window * xx).sum() / total), float((window * yy).sum() / total)

"""Procedural face rendering with a Hirschberg-style corneal reflection.

Each eye's iris and pupil shift horizontally in proportion to that eye's gaze
deviation while the light reflection (glint) stays fixed near the socket
centre, so the glint-to-pupil offset encodes the deviation. Strabismus shows
up as the two eyes carrying different offsets.
"""

from dataclasses import dataclass

import numpy as np

from rfcnn.boxes import RoIBox

STRABISMUS = 1
NORMAL = 0
LABEL_NAMES = {STRABISMUS: "strabismus", NORMAL: "normal"}
LABEL_CODES = {v: k for k, v in LABEL_NAMES.items()}

STRAB_THRESHOLD_DEG = 5.0
MAX_DEVIATION_DEG = 30.0
NORMAL_RANGE_DEG = 3.0
STRAB_DIFF_RANGE_DEG = (8.0, 25.0)
PARTIAL_FACE_RATE = 375 / 5685
BACKGROUNDS = ("plain", "gradient", "clutter")

# eye geometry, in units of the half inter-ocular distance
SOCKET_RX = 0.75
SOCKET_RY = 0.42
IRIS_R = 0.28
PUPIL_R = 0.45  # of iris radius
GLINT_R = 0.24  # of iris radius
GAZE_SHIFT = 0.45  # iris shift at MAX_DEVIATION_DEG
EYE_BOX_PAD = 0.10


@dataclass(frozen=True)
class SceneParams:
    width: int
    height: int
    face_cx: float
    face_cy: float
    face_radius: float
    eye_left: tuple
    eye_right: tuple
    socket_rx: float
    socket_ry: float
    iris_radius: float
    deviation_left: float
    deviation_right: float
    light_offset: tuple  # common glint offset, in iris radii
    background: str
    partial_face: bool
    brightness: float
    contrast: float
    skin: tuple
    iris_color: tuple
    seed: int

    def __post_init__(self):
        for dev in (self.deviation_left, self.deviation_right):
            if abs(dev) > MAX_DEVIATION_DEG:
                raise ValueError(f"gaze deviation {dev} outside [-30, 30] degrees")
        if not self.iris_radius < min(self.socket_rx, self.socket_ry):
            raise ValueError("iris radius must be smaller than the eye socket")
        if self.background not in BACKGROUNDS:
            raise ValueError(f"unknown background kind {self.background!r}")
        if not self.partial_face:
            fx, fy = self.face_radius, 1.2 * self.face_radius
            for ex, ey in (self.eye_left, self.eye_right):
                if ((ex - self.face_cx) / fx) ** 2 + ((ey - self.face_cy) / fy) ** 2 >= 1.0:
                    raise ValueError("eyes must lie inside the face")

    @property
    def half_interocular(self):
        return 0.5 * (self.eye_right[0] - self.eye_left[0])

    def iris_shift(self, deviation):
        return deviation / MAX_DEVIATION_DEG * GAZE_SHIFT * self.half_interocular

    def iris_centers(self):
        return [
            (ex + self.iris_shift(dev), ey)
            for (ex, ey), dev in ((self.eye_left, self.deviation_left), (self.eye_right, self.deviation_right))
        ]

    def glint_centers(self):
        ox, oy = self.light_offset
        return [(ex + ox * self.iris_radius, ey + oy * self.iris_radius) for ex, ey in (self.eye_left, self.eye_right)]

    def reflection_offsets(self):
        """Glint position relative to each pupil centre, in pixels."""
        return [(gx - ix, gy - iy) for (gx, gy), (ix, iy) in zip(self.glint_centers(), self.iris_centers())]

    def eye_box(self):
        x0 = self.eye_left[0] - self.socket_rx
        x1 = self.eye_right[0] + self.socket_rx
        y0 = min(self.eye_left[1], self.eye_right[1]) - self.socket_ry
        y1 = max(self.eye_left[1], self.eye_right[1]) + self.socket_ry
        px = EYE_BOX_PAD * (x1 - x0)
        py = EYE_BOX_PAD * (y1 - y0)
        return RoIBox(x0 - px, y0 - py, x1 + px, y1 + py).clip(self.width, self.height)


@dataclass
class Sample:
    image: np.ndarray  # [3, H, W] float64 in [0, 1], multiples of 1/255
    eye_box: RoIBox
    label: int
    params: SceneParams = None
    name: str = ""


def label_rule(p):
    """Strabismus iff the two eyes' deviations differ by at least 5 degrees."""
    return STRABISMUS if abs(p.deviation_left - p.deviation_right) >= STRAB_THRESHOLD_DEG else NORMAL


def sample_params(seed, label, width=None, height=None):
    """Draw scene parameters for the requested label, deterministically from ``seed``."""
    rng = np.random.default_rng(seed)
    if height is None:
        height = 96 + 16 * int(rng.integers(0, 11))
    if width is None:
        width = min(320, height + 16 * int(rng.integers(0, (320 - height) // 16 + 1)))
    partial = bool(rng.random() < PARTIAL_FACE_RATE)
    short = min(width, height)
    radius = rng.uniform(0.30, 0.39) * short
    ry = 1.2 * radius
    d = 0.42 * radius
    if partial:
        # push the face towards an edge, keeping the eye strip in frame
        half_box = (1.0 + SOCKET_RX) * d * (1 + 2 * EYE_BOX_PAD)
        margin_x = max(0.0, width / 2 - half_box - 2)
        cx = width / 2 + rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 1.0) * margin_x
        cy = height / 2 + rng.uniform(0.05, 0.2) * ry
    else:
        cx = width / 2 + rng.uniform(-0.5, 0.5) * max(0.0, width / 2 - radius - 2)
        cy = height / 2 + rng.uniform(-0.5, 0.5) * max(0.0, height / 2 - ry - 2)
    ey = cy - 0.2 * ry
    if label == NORMAL:
        dev = rng.uniform(-NORMAL_RANGE_DEG, NORMAL_RANGE_DEG)
        dev_l = dev_r = dev
    else:
        fix = rng.uniform(-NORMAL_RANGE_DEG, NORMAL_RANGE_DEG)
        turned = fix + rng.choice([-1.0, 1.0]) * rng.uniform(*STRAB_DIFF_RANGE_DEG)
        dev_l, dev_r = (fix, turned) if rng.random() < 0.5 else (turned, fix)
    params = SceneParams(
        width=int(width),
        height=int(height),
        face_cx=float(cx),
        face_cy=float(cy),
        face_radius=float(radius),
        eye_left=(float(cx - d), float(ey)),
        eye_right=(float(cx + d), float(ey)),
        socket_rx=float(SOCKET_RX * d),
        socket_ry=float(SOCKET_RY * d),
        iris_radius=float(IRIS_R * d),
        deviation_left=float(dev_l),
        deviation_right=float(dev_r),
        light_offset=(float(rng.uniform(-0.15, 0.15)), float(rng.uniform(-0.15, 0.15))),
        background=BACKGROUNDS[int(rng.integers(0, 3))],
        partial_face=partial,
        brightness=float(rng.uniform(-0.08, 0.08)),
        contrast=float(rng.uniform(0.85, 1.15)),
        skin=tuple(float(v) for v in _skin_tone(rng)),
        iris_color=tuple(float(v) for v in _iris_tone(rng)),
        seed=int(seed),
    )
    if label_rule(params) != label:
        raise AssertionError("sampled deviations disagree with the labeling rule")
    return params


def _skin_tone(rng):
    base = rng.uniform(0.35, 0.9)
    return np.clip([base * 1.0, base * 0.78, base * 0.62] + rng.uniform(-0.04, 0.04, 3), 0, 1)


def _iris_tone(rng):
    palette = np.array([[0.35, 0.2, 0.1], [0.2, 0.35, 0.55], [0.25, 0.4, 0.25], [0.15, 0.1, 0.06]])
    return np.clip(palette[int(rng.integers(0, len(palette)))] + rng.uniform(-0.05, 0.05, 3), 0, 1)


class _Canvas:
    def __init__(self, height, width):
        self.h = height
        self.w = width
        self.img = np.zeros((3, height, width))

    def _window(self, cx, cy, rx, ry):
        y0 = max(0, int(np.floor(cy - ry - 2)))
        y1 = min(self.h, int(np.ceil(cy + ry + 2)))
        x0 = max(0, int(np.floor(cx - rx - 2)))
        x1 = min(self.w, int(np.ceil(cx + rx + 2)))
        if y1 <= y0 or x1 <= x0:
            return None
        ys = np.arange(y0, y1) + 0.5
        xs = np.arange(x0, x1) + 0.5
        return (slice(y0, y1), slice(x0, x1)), ys[:, None], xs[None, :]

    @staticmethod
    def _coverage(ys, xs, cx, cy, rx, ry):
        r = np.sqrt(((xs - cx) / rx) ** 2 + ((ys - cy) / ry) ** 2)
        return np.clip(0.5 - (r - 1.0) * min(rx, ry), 0.0, 1.0)

    def ellipse(self, cx, cy, rx, ry, color, opacity=1.0, clip=None):
        win = self._window(cx, cy, rx, ry)
        if win is None:
            return
        sl, ys, xs = win
        alpha = self._coverage(ys, xs, cx, cy, rx, ry) * opacity
        if clip is not None:
            alpha = alpha * self._coverage(ys, xs, *clip)
        region = self.img[:, sl[0], sl[1]]
        color = np.asarray(color, dtype=np.float64)[:, None, None]
        region *= 1.0 - alpha
        region += alpha * color

    def rect(self, x0, y0, x1, y1, color):
        xa, xb = max(0, int(round(x0))), min(self.w, int(round(x1)))
        ya, yb = max(0, int(round(y0))), min(self.h, int(round(y1)))
        if xb > xa and yb > ya:
            self.img[:, ya:yb, xa:xb] = np.asarray(color, dtype=np.float64)[:, None, None]


def _paint_background(canvas, kind, rng):
    h, w = canvas.h, canvas.w
    if kind == "plain":
        canvas.img[:] = rng.uniform(0.1, 0.9, 3)[:, None, None]
    elif kind == "gradient":
        a, b = rng.uniform(0.05, 0.95, (2, 3))
        theta = rng.uniform(0, 2 * np.pi)
        ys, xs = np.mgrid[0:h, 0:w]
        t = (np.cos(theta) * xs / w + np.sin(theta) * ys / h)
        t = (t - t.min()) / max(t.max() - t.min(), 1e-9)
        canvas.img[:] = a[:, None, None] * (1 - t) + b[:, None, None] * t
    else:
        canvas.img[:] = rng.uniform(0.2, 0.8, 3)[:, None, None]
        # value-noise blobs: a coarse random grid upsampled bilinearly
        gh, gw = 5, 6
        grid = rng.uniform(-0.25, 0.25, (3, gh, gw))
        yi = np.linspace(0, gh - 1, h)
        xi = np.linspace(0, gw - 1, w)
        y0 = np.minimum(yi.astype(int), gh - 2)
        x0 = np.minimum(xi.astype(int), gw - 2)
        fy = (yi - y0)[:, None]
        fx = (xi - x0)[None, :]
        g = grid
        noise = (
            g[:, y0][:, :, x0] * (1 - fy) * (1 - fx)
            + g[:, y0 + 1][:, :, x0] * fy * (1 - fx)
            + g[:, y0][:, :, x0 + 1] * (1 - fy) * fx
            + g[:, y0 + 1][:, :, x0 + 1] * fy * fx
        )
        canvas.img += noise
        for _ in range(int(rng.integers(3, 9))):
            rw, rh = rng.uniform(0.08, 0.4) * w, rng.uniform(0.08, 0.4) * h
            rx, ry = rng.uniform(-0.1, 1.0) * w, rng.uniform(-0.1, 1.0) * h
            canvas.rect(rx, ry, rx + rw, ry + rh, rng.uniform(0.0, 1.0, 3))
        for _ in range(int(rng.integers(1, 5))):
            r = rng.uniform(0.05, 0.15) * min(w, h)
            canvas.ellipse(rng.uniform(0, w), rng.uniform(0, h), r, r * rng.uniform(0.5, 1.5), rng.uniform(0, 1, 3))


def _paint_face(canvas, p, rng):
    skin = np.asarray(p.skin)
    r, ry = p.face_radius, 1.2 * p.face_radius
    canvas.ellipse(p.face_cx, p.face_cy, r, ry, skin)
    d = p.half_interocular
    dark = skin * 0.35
    # brows, nose, mouth
    for ex, ey in (p.eye_left, p.eye_right):
        canvas.ellipse(ex, ey - 0.62 * d, 0.8 * d, 0.12 * d, dark * 0.8)
    canvas.ellipse(p.face_cx, p.face_cy + 0.15 * ry, 0.14 * d, 0.35 * d, skin * 0.8)
    canvas.ellipse(p.face_cx, p.face_cy + 0.55 * ry, 0.55 * d, 0.13 * d, np.array([0.55, 0.2, 0.2]) * skin.mean() * 1.3)
    for (ex, ey), (ix, iy), (gx, gy) in zip((p.eye_left, p.eye_right), p.iris_centers(), p.glint_centers()):
        socket = (ex, ey, p.socket_rx, p.socket_ry)
        canvas.ellipse(ex, ey, p.socket_rx * 1.08, p.socket_ry * 1.15, dark)
        canvas.ellipse(ex, ey, p.socket_rx, p.socket_ry, np.full(3, rng.uniform(0.88, 0.98)))
        canvas.ellipse(ix, iy, p.iris_radius, p.iris_radius, p.iris_color, clip=socket)
        pr = PUPIL_R * p.iris_radius
        canvas.ellipse(ix, iy, pr, pr, np.full(3, 0.04), clip=socket)
        gr = max(0.8, GLINT_R * p.iris_radius)
        canvas.ellipse(gx, gy, gr, gr, np.ones(3), clip=socket)
    if p.partial_face:
        # privacy block over the lower face
        top = p.face_cy + 0.3 * ry
        canvas.rect(p.face_cx - 1.1 * r, top, p.face_cx + 1.1 * r, top + ry, rng.uniform(0.0, 0.25, 3))


def _finish(canvas, p, rng):
    img = (canvas.img - 0.5) * p.contrast + 0.5 + p.brightness
    img = img + rng.normal(0.0, 0.01, img.shape)
    return np.round(np.clip(img, 0.0, 1.0) * 255.0) / 255.0


def render_scene(p):
    """Rasterise a scene; identical parameters give bit-identical images."""
    rng = np.random.default_rng([p.seed, 7])
    canvas = _Canvas(p.height, p.width)
    _paint_background(canvas, p.background, rng)
    _paint_face(canvas, p, rng)
    return Sample(image=_finish(canvas, p, rng), eye_box=p.eye_box(), label=label_rule(p), params=p)


def render_background(seed, width, height):
    """A face-free scene, used as an all-background detector example."""
    rng = np.random.default_rng([seed, 11])
    canvas = _Canvas(height, width)
    kind = BACKGROUNDS[int(rng.integers(0, 3))]
    _paint_background(canvas, kind, rng)
    img = canvas.img + rng.normal(0.0, 0.01, canvas.img.shape)
    return np.round(np.clip(img, 0.0, 1.0) * 255.0) / 255.0

"""Dataset splits with exact class counts, and their on-disk form.

On disk a split is a directory of P6 images plus ``manifest.tsv`` with one
UTF-8 line per image: ``filename, x0, y0, x1, y1, label, seed`` (tab
separated, no header).
"""

import os
from dataclasses import dataclass, field

import numpy as np

from rfcnn.boxes import RoIBox
from rfcnn.errors import FormatError
from rfcnn.synth.pnm import read_ppm, write_ppm
from rfcnn.synth.render import LABEL_CODES, LABEL_NAMES, STRABISMUS, Sample, render_scene, sample_params

# class mix of the clinical dataset: 701/3409 train, 470/2276 test
PAPER_STRAB_FRACTION_TRAIN = 701 / 3409
PAPER_STRAB_FRACTION_TEST = 470 / 2276
DESK_N_TRAIN = 341
DESK_N_TEST = 228
MANIFEST = "manifest.tsv"
SPLIT_IDS = {"train": 0, "test": 1}


@dataclass
class DatasetSplit:
    train: list = field(default_factory=list)
    test: list = field(default_factory=list)

    @staticmethod
    def counts(samples):
        strab = sum(1 for s in samples if s.label == STRABISMUS)
        return {"strabismus": strab, "normal": len(samples) - strab}

    def class_counts(self):
        return {"train": self.counts(self.train), "test": self.counts(self.test)}


def derive_seed(seed, split_id, index):
    """Per-sample seed; independent of generation order."""
    state = np.random.SeedSequence([int(seed), int(split_id), int(index)]).generate_state(2, np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


def class_count(n, fraction):
    n_strab = int(round(n * fraction))
    if n_strab <= 0 or n_strab >= n:
        raise ValueError(f"fraction {fraction} of {n} images leaves a class empty")
    return n_strab


def gen_split(n, strab_fraction, seed, split_id, prefix):
    n_strab = class_count(n, strab_fraction)
    labels = np.zeros(n, dtype=np.int64)
    labels[:n_strab] = STRABISMUS
    labels = np.random.default_rng([int(seed), int(split_id), 99]).permutation(labels)
    samples = []
    for i, label in enumerate(labels):
        s = render_scene(sample_params(derive_seed(seed, split_id, i), int(label)))
        s.name = f"{prefix}_{i:05d}.ppm"
        samples.append(s)
    return samples


def gen_dataset(n_train=DESK_N_TRAIN, n_test=DESK_N_TEST, strab_fraction_train=PAPER_STRAB_FRACTION_TRAIN,
                strab_fraction_test=PAPER_STRAB_FRACTION_TEST, seed=0):
    if n_train <= 0 or n_test <= 0:
        raise ValueError("split sizes must be positive")
    return DatasetSplit(
        train=gen_split(n_train, strab_fraction_train, seed, SPLIT_IDS["train"], "train"),
        test=gen_split(n_test, strab_fraction_test, seed, SPLIT_IDS["test"], "test"),
    )


def write_split(samples, directory):
    os.makedirs(directory, exist_ok=True)
    lines = []
    for i, s in enumerate(samples):
        name = s.name or f"img_{i:05d}.ppm"
        write_ppm(os.path.join(directory, name), s.image)
        b = s.eye_box
        seed = s.params.seed if s.params is not None else -1
        lines.append("\t".join([name, repr(b.x0), repr(b.y0), repr(b.x1), repr(b.y1), LABEL_NAMES[s.label], str(seed)]))
    with open(os.path.join(directory, MANIFEST), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("".join(line + "\n" for line in lines))


def read_split(directory, load_images=True):
    path = os.path.join(directory, MANIFEST)
    if not os.path.exists(path):
        raise FormatError(f"missing manifest {path}")
    samples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) != 7:
                raise FormatError(f"expected 7 tab-separated fields, found {len(fields)}", line=lineno)
            name, *coords, label_name, seed_text = fields
            try:
                x0, y0, x1, y1 = (float(v) for v in coords)
                seed = int(seed_text)
            except ValueError as exc:
                raise FormatError(f"unparseable number ({exc})", line=lineno) from None
            if min(x0, y0, x1, y1) < 0:
                raise FormatError("negative box coordinate", line=lineno)
            if not (x0 < x1 and y0 < y1):
                raise FormatError("box must satisfy x0 < x1 and y0 < y1", line=lineno)
            if label_name not in LABEL_CODES:
                raise FormatError(f"unknown label {label_name!r}", line=lineno)
            label = LABEL_CODES[label_name]
            image_path = os.path.join(directory, name)
            if not os.path.exists(image_path):
                raise FormatError(f"missing image file {name}", line=lineno)
            image = read_ppm(image_path) if load_images else None
            params = sample_params(seed, label) if seed >= 0 else None
            samples.append(Sample(image=image, eye_box=RoIBox(x0, y0, x1, y1), label=label, params=params, name=name))
    return samples


def export_dataset(split, directory):
    write_split(split.train, os.path.join(directory, "train"))
    write_split(split.test, os.path.join(directory, "test"))


def import_dataset(directory):
    return DatasetSplit(
        train=read_split(os.path.join(directory, "train")),
        test=read_split(os.path.join(directory, "test")),
    )

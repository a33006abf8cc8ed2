"""Synthetic tele-strabismus images with eye boxes and labels."""

from rfcnn.synth.dataset import (
    DESK_N_TEST,
    DESK_N_TRAIN,
    PAPER_STRAB_FRACTION_TEST,
    PAPER_STRAB_FRACTION_TRAIN,
    DatasetSplit,
    derive_seed,
    export_dataset,
    gen_dataset,
    gen_split,
    import_dataset,
    read_split,
    write_split,
)
from rfcnn.synth.pnm import read_ppm, write_ppm
from rfcnn.synth.render import (
    NORMAL,
    STRABISMUS,
    Sample,
    SceneParams,
    label_rule,
    render_background,
    render_scene,
    sample_params,
)

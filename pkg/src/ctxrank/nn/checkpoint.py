"""Parameter checkpoints.

A checkpoint is a NumPy ``.npz`` archive: one array per entry, keyed by the
parameter name, stored as little-endian ``<f8`` or ``<f4`` so files written
on any host read back identically. Shapes travel with the arrays.
"""

import numpy as np


def save_checkpoint(path, arrays):
    fixed = {}
    for name, value in arrays.items():
        value = np.asarray(value)
        fixed[name] = value.astype(value.dtype.newbyteorder("<"))
    with open(path, "wb") as fh:
        np.savez(fh, **fixed)


def load_checkpoint(path):
    with np.load(path) as archive:
        return {name: archive[name].astype(archive[name].dtype.newbyteorder("=")) for name in archive.files}

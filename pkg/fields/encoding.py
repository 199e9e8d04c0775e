from typing import List, Sequence, Tuple

import numpy as np

from diffengine import ops


class PositionalEncoding:
    """[p, sin(2^0 p), cos(2^0 p), ..., sin(2^{L-1} p), cos(2^{L-1} p)] componentwise."""

    def __init__(self, level_count: int, include_identity: bool = True):
        if level_count < 0:
            raise ValueError(f"level_count must be non-negative, got {level_count}")
        self.level_count = level_count
        self.include_identity = include_identity

    def output_dim(self, input_dim: int) -> int:
        return input_dim * ((1 if self.include_identity else 0) + 2 * self.level_count)

    def __call__(self, p: Sequence[ops.Scalar]) -> List[ops.Scalar]:
        return self.encode(p)[0]

    def encode(self, p: Sequence[ops.Scalar], with_jet: bool = False):
        """Encoded vector, plus d/dp_d jets of every slot when requested."""
        dim = len(p)
        out: List[ops.Scalar] = []
        jets: Tuple[List[ops.Scalar], ...] = tuple([] for _ in range(dim)) if with_jet else ()
        if self.include_identity:
            out.extend(p)
            for d in range(len(jets)):
                jets[d].extend(1.0 if i == d else 0.0 for i in range(dim))
        for k in range(self.level_count):
            omega = float(2 ** k)
            args = [c * omega for c in p]
            sines = [ops.sin(a) for a in args]
            cosines = [ops.cos(a) for a in args]
            out.extend(sines)
            out.extend(cosines)
            for d in range(len(jets)):
                jets[d].extend(cosines[i] * omega if i == d else 0.0 for i in range(dim))
                jets[d].extend(sines[i] * -omega if i == d else 0.0 for i in range(dim))
        return out, jets

    def batch(self, p: np.ndarray, with_jet: bool = False):
        """Vectorised encoding of (N, D) inputs; jets come back as (N, D, out_dim)."""
        n, dim = p.shape
        blocks = [p] if self.include_identity else []
        jet_blocks = [np.broadcast_to(np.eye(dim), (n, dim, dim))] if self.include_identity else []
        for k in range(self.level_count):
            omega = float(2 ** k)
            s, c = np.sin(p * omega), np.cos(p * omega)
            blocks.extend([s, c])
            if with_jet:
                eye = np.eye(dim)[None]
                jet_blocks.append(eye * (c * omega)[:, None, :])
                jet_blocks.append(eye * (-s * omega)[:, None, :])
        out = np.concatenate(blocks, axis=1) if blocks else np.zeros((n, 0))
        if not with_jet:
            return out
        jets = np.concatenate(jet_blocks, axis=2) if jet_blocks else np.zeros((n, dim, 0))
        return out, jets


def positional_encoding(p: Sequence[ops.Scalar], levels: int) -> List[ops.Scalar]:
    if levels < 0:
        raise ValueError(f"levels must be non-negative, got {levels}")
    return PositionalEncoding(levels)(p)


def encoded_dim(input_dim: int, levels: int) -> int:
    return input_dim * (1 + 2 * levels)

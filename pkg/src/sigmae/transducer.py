"""Autoregressive transformer transducers with a DB head.

``TransducerModel`` maps a source sequence to per-step output vectors and
pushes each through its discrete bottleneck. Sources and decoder inputs may be
token ids or raw embedding vectors; the two paths agree whenever the vectors
are the dictionary rows of the ids, which is what lets the quantized output of
one model feed the other.

``SymbolicAutoencoder`` couples two transducers, X->Z and Z->X, that share the
two vocabulary dictionaries.
"""
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import torch
import torch.nn as nn

from .bottleneck import BottleneckOutput, DiscreteBottleneck, Dictionary
from .vocab import BOS_ID, EOS_ID, PAD_ID, Vocab


@dataclass
class SequenceBatch:
    """Padded token ids (batch x T). Rows end in EOS (counted in ``lengths``)
    unless they were cut at the length limit; positions past the length are PAD."""

    ids: torch.Tensor
    lengths: torch.Tensor
    tag: str = ""

    @classmethod
    def from_ids(cls, rows: Sequence[Sequence[int]], tag: str = "", width: Optional[int] = None):
        width = max([len(r) for r in rows] + [width or 0, 1])
        ids = torch.full((len(rows), width), PAD_ID, dtype=torch.long)
        for i, r in enumerate(rows):
            ids[i, : len(r)] = torch.as_tensor(list(r), dtype=torch.long)
        lengths = torch.tensor([len(r) for r in rows], dtype=torch.long)
        return cls(ids, lengths, tag)

    @classmethod
    def from_tokens(cls, seqs: Sequence[Sequence[str]], vocab: Vocab, tag: str = ""):
        return cls.from_ids([vocab.encode(s) for s in seqs], tag)

    @property
    def mask(self) -> torch.Tensor:
        return torch.arange(self.ids.shape[1]) < self.lengths.unsqueeze(1)

    def rows(self) -> list[list[int]]:
        return [self.ids[i, : int(n)].tolist() for i, n in enumerate(self.lengths)]

    def __len__(self):
        return self.ids.shape[0]


@dataclass
class ModelConfig:
    d_model: int = 64
    heads: int = 4
    layers: int = 2
    ff: int = 256
    dropout: float = 0.0
    db: str = "softmax"
    temperature: float = 1.0
    commitment: Optional[float] = None
    max_len_x: int = 32
    max_len_z: int = 64

    def to_dict(self):
        return asdict(self)


PRESETS = {
    "tiny": dict(d_model=32, heads=2, layers=1, ff=64),
    "small": dict(d_model=64, heads=4, layers=2, ff=256),
    "large": dict(d_model=512, heads=8, layers=6, ff=2048),
}


def sinusoidal_positions(n: int, d: int) -> torch.Tensor:
    pos = torch.arange(n, dtype=torch.float32).unsqueeze(1)
    div = torch.exp(torch.arange(0, d, 2, dtype=torch.float32) * (-math.log(10000.0) / d))
    pe = torch.zeros(n, d)
    pe[:, 0::2] = torch.sin(pos * div)
    pe[:, 1::2] = torch.cos(pos * div[: d // 2])
    return pe


def stack_outputs(outs: list[BottleneckOutput]) -> BottleneckOutput:
    """Stack per-step outputs along a new time axis (dim 1)."""

    def st(name):
        vals = [getattr(o, name) for o in outs]
        return None if vals[0] is None else torch.stack(vals, dim=1)

    return BottleneckOutput(
        st("scores"), st("log_scores"), st("quantized"), st("index"), st("distances"),
        None if outs[0].aux_loss is None else torch.stack([o.aux_loss for o in outs]).mean(),
    )


class TransducerModel(nn.Module):
    def __init__(self, src_dict: Dictionary, tgt_dict: Dictionary, config: ModelConfig, max_len: int):
        super().__init__()
        d = config.d_model
        if src_dict.dim != d or tgt_dict.dim != d:
            raise ValueError("dictionary width must equal d_model")
        self.config = config
        self.max_len = max_len
        self.src_dict = src_dict
        self.tgt_dict = tgt_dict
        enc_layer = nn.TransformerEncoderLayer(
            d, config.heads, config.ff, config.dropout, batch_first=True, norm_first=True
        )
        dec_layer = nn.TransformerDecoderLayer(
            d, config.heads, config.ff, config.dropout, batch_first=True, norm_first=True
        )
        self.encoder = nn.TransformerEncoder(
            enc_layer, config.layers, norm=nn.LayerNorm(d), enable_nested_tensor=False
        )
        self.decoder = nn.TransformerDecoder(dec_layer, config.layers, norm=nn.LayerNorm(d))
        self.db = DiscreteBottleneck(
            tgt_dict, config.db, d, temperature=config.temperature, commitment=config.commitment
        )
        self.register_buffer("positions", sinusoidal_positions(512, d), persistent=False)

    def _embed_source(self, source) -> torch.Tensor:
        if isinstance(source, SequenceBatch):
            source = source.ids
        if not torch.is_floating_point(source):
            source = self.src_dict.lookup(source)
        return source

    def encode(self, source) -> torch.Tensor:
        x = self._embed_source(source)
        x = x + self.positions[: x.shape[1]].to(x.dtype)
        return self.encoder(x)

    def decode(self, memory: torch.Tensor, inputs: torch.Tensor) -> torch.Tensor:
        """Causally decode (B, T, d) input embeddings into (B, T, d) output vectors."""
        T = inputs.shape[1]
        y = inputs + self.positions[:T].to(inputs.dtype)
        causal = nn.Transformer.generate_square_subsequent_mask(T, dtype=y.dtype)
        return self.decoder(y, memory, tgt_mask=causal, tgt_is_causal=True)

    def _bos(self, batch: int) -> torch.Tensor:
        return self.tgt_dict.embeddings[BOS_ID].expand(batch, 1, -1)

    def forward_teacher_forced(self, source, target, greedy: Optional[bool] = None) -> BottleneckOutput:
        """Per-position DB outputs when predicting ``target`` given the gold prefix.

        ``target`` is a (B, T) id tensor / SequenceBatch or a (B, T, d) tensor of
        target embeddings; position t sees BOS and target[:t] only.
        """
        if isinstance(target, SequenceBatch):
            target = target.ids
        T = target.shape[1]
        if T > self.max_len:
            raise ValueError(f"target length {T} exceeds max generation length {self.max_len}")
        memory = self.encode(source)
        if not torch.is_floating_point(target):
            target = self.tgt_dict.lookup(target)
        inputs = torch.cat([self._bos(target.shape[0]).to(target.dtype), target[:, :-1]], dim=1)
        return self.db(self.decode(memory, inputs), greedy=greedy)

    def generate_quantized(self, source, max_len: Optional[int] = None, greedy: Optional[bool] = None):
        """Autoregressively emit quantized vectors, feeding each ``v_q`` back in.

        Runs until every row has produced EOS at least once or ``max_len``
        steps. Rows that halted keep generating (the EOS mask zeroes them
        later) so that their EOS probabilities stay in the graph.

        Returns the stacked BottleneckOutput (B, T, ...) and the per-step EOS
        probabilities ``s^t[EOS]`` (B, T).
        """
        max_len = min(max_len or self.max_len, self.max_len)
        memory = self.encode(source)
        B = memory.shape[0]
        inputs = self._bos(B).to(memory.dtype)
        outs = []
        done = torch.zeros(B, dtype=torch.bool)
        for _ in range(max_len):
            h = self.decode(memory, inputs)[:, -1]
            out = self.db(h, greedy=greedy)
            outs.append(out)
            done = done | (out.index == EOS_ID)
            if bool(done.all()):
                break
            inputs = torch.cat([inputs, out.quantized.unsqueeze(1)], dim=1)
        stacked = stack_outputs(outs)
        return stacked, stacked.scores[..., EOS_ID]

    @torch.no_grad()
    def generate_tokens(self, source, max_len: Optional[int] = None) -> SequenceBatch:
        """Greedy decoding to ids, each row truncated after its first EOS."""
        out, _ = self.generate_quantized(source, max_len, greedy=True)
        rows = []
        for row in out.index.tolist():
            if EOS_ID in row:
                row = row[: row.index(EOS_ID) + 1]
            rows.append(row)
        return SequenceBatch.from_ids(rows, tag=getattr(source, "tag", ""))


class SymbolicAutoencoder(nn.Module):
    """The X->Z and Z->X transducers plus the shared X and Z dictionaries."""

    def __init__(self, vocab_x: Vocab, vocab_z: Vocab, config: Optional[ModelConfig] = None, seed: int = 0):
        super().__init__()
        self.config = config or ModelConfig()
        self.vocab_x, self.vocab_z = vocab_x, vocab_z
        with torch.random.fork_rng():
            torch.manual_seed(seed)
            d = self.config.d_model
            self.dict_x = Dictionary(vocab_x, d)
            self.dict_z = Dictionary(vocab_z, d)
            self.m_xz = TransducerModel(self.dict_x, self.dict_z, self.config, self.config.max_len_z)
            self.m_zx = TransducerModel(self.dict_z, self.dict_x, self.config, self.config.max_len_x)
        self.seed_noise(seed)

    def seed_noise(self, seed: int) -> None:
        """Give both Gumbel heads their own seeded noise streams."""
        for i, m in enumerate((self.m_xz, self.m_zx)):
            g = torch.Generator()
            g.manual_seed(seed * 2 + i + 1)
            m.db.generator = g

    def model(self, direction: str) -> TransducerModel:
        if direction == "xz":
            return self.m_xz
        if direction == "zx":
            return self.m_zx
        raise ValueError(f"direction must be 'xz' or 'zx', got {direction!r}")

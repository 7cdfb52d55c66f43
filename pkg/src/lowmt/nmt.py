"""GRU encoder + attention decoder seq2seq with hand-written gradients.

Everything runs in float64 on numpy with batch size 1; randomness (init,
dropout, teacher forcing, epoch order) comes from seeded streams so training
is fully reproducible. The backward pass is verified against central finite
differences (gradient_check).

Gate equations, per step with input x and previous hidden h:
    z = sigmoid(Wz x + Uz h + bz)
    r = sigmoid(Wr x + Ur h + br)
    c = tanh(Wh x + Uh (r*h) + bh)
    h' = (1 - z)*h + z*c

Decoder step: embed previous token (dropout in train mode), attention weights
softmax(W_attn [x; h] + b) over encoder positions, context = weights @
encoder_outputs, combined = relu(W_comb [x; context] + b), GRU step on the
combined vector, log-softmax output layer.
"""

import json
import math
import random
import struct
from dataclasses import dataclass

import numpy as np

from .subword import PAD_ID, SOS_ID, EOS_ID, UNK_ID
from .util import derive_seed

MAGIC = b"LMTS"
FORMAT_VERSION = 1

PARAM_ORDER = [
    "enc_embed",
    "enc_Wz", "enc_Uz", "enc_bz", "enc_Wr", "enc_Ur", "enc_br",
    "enc_Wh", "enc_Uh", "enc_bh",
    "dec_embed",
    "attn_W", "attn_b", "comb_W", "comb_b",
    "dec_Wz", "dec_Uz", "dec_bz", "dec_Wr", "dec_Ur", "dec_br",
    "dec_Wh", "dec_Uh", "dec_bh",
    "out_W", "out_b",
]


class NmtError(ValueError):
    pass


class NmtNumericalError(RuntimeError):
    """Training produced a NaN/inf loss."""


@dataclass
class ModelConfig:
    src_vocab_size: int
    tgt_vocab_size: int
    hidden: int = 256
    max_len: int = 32
    dropout_p: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.src_vocab_size < 4 or self.tgt_vocab_size < 4:
            raise NmtError("vocab sizes must be >= 4 (pad/unk/sos/eos)")
        if self.max_len < 2:
            raise NmtError("max_len must be >= 2")
        if not (0.0 <= self.dropout_p < 1.0):
            raise NmtError("dropout_p must be in [0, 1)")
        if self.hidden < 1:
            raise NmtError("hidden must be positive")


@dataclass
class TrainConfig:
    epochs: int = 10
    learning_rate: float = 0.01
    teacher_forcing_ratio: float = 0.5
    grad_clip_norm: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise NmtError("learning_rate must be >= 0")
        if not (0.0 <= self.teacher_forcing_ratio <= 1.0):
            raise NmtError("teacher_forcing_ratio must be in [0, 1]")


@dataclass
class Seq2SeqModel:
    params: dict
    config: ModelConfig


def init_model(config):
    """Allocate parameters uniformly in [-1/sqrt(hidden), +1/sqrt(hidden)]."""
    d = config.hidden
    L = config.max_len
    rng = np.random.default_rng(config.seed)
    bound = 1.0 / math.sqrt(d)

    def u(*shape):
        return rng.uniform(-bound, bound, size=shape)

    params = {
        "enc_embed": u(config.src_vocab_size, d),
        "dec_embed": u(config.tgt_vocab_size, d),
        "attn_W": u(L, 2 * d), "attn_b": u(L),
        "comb_W": u(d, 2 * d), "comb_b": u(d),
        "out_W": u(config.tgt_vocab_size, d), "out_b": u(config.tgt_vocab_size),
    }
    for side in ("enc", "dec"):
        for gate in ("z", "r", "h"):
            params[f"{side}_W{gate}"] = u(d, d)
            params[f"{side}_U{gate}"] = u(d, d)
            params[f"{side}_b{gate}"] = u(d)
    return Seq2SeqModel(params=params, config=config)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _gru_forward(p, prefix, x, h):
    z = _sigmoid(p[f"{prefix}_Wz"] @ x + p[f"{prefix}_Uz"] @ h + p[f"{prefix}_bz"])
    r = _sigmoid(p[f"{prefix}_Wr"] @ x + p[f"{prefix}_Ur"] @ h + p[f"{prefix}_br"])
    rh = r * h
    c = np.tanh(p[f"{prefix}_Wh"] @ x + p[f"{prefix}_Uh"] @ rh + p[f"{prefix}_bh"])
    h_new = (1.0 - z) * h + z * c
    return h_new, {"x": x, "h": h, "z": z, "r": r, "rh": rh, "c": c}


def _gru_backward(p, g, prefix, dh_new, cache):
    x, h, z, r, rh, c = (cache["x"], cache["h"], cache["z"], cache["r"],
                         cache["rh"], cache["c"])
    dz = dh_new * (c - h)
    dc = dh_new * z
    dh = dh_new * (1.0 - z)

    da_c = dc * (1.0 - c * c)
    g[f"{prefix}_Wh"] += np.outer(da_c, x)
    g[f"{prefix}_Uh"] += np.outer(da_c, rh)
    g[f"{prefix}_bh"] += da_c
    dx = p[f"{prefix}_Wh"].T @ da_c
    drh = p[f"{prefix}_Uh"].T @ da_c
    dr = drh * h
    dh += drh * r

    da_r = dr * r * (1.0 - r)
    g[f"{prefix}_Wr"] += np.outer(da_r, x)
    g[f"{prefix}_Ur"] += np.outer(da_r, h)
    g[f"{prefix}_br"] += da_r
    dx += p[f"{prefix}_Wr"].T @ da_r
    dh += p[f"{prefix}_Ur"].T @ da_r

    da_z = dz * z * (1.0 - z)
    g[f"{prefix}_Wz"] += np.outer(da_z, x)
    g[f"{prefix}_Uz"] += np.outer(da_z, h)
    g[f"{prefix}_bz"] += da_z
    dx += p[f"{prefix}_Wz"].T @ da_z
    dh += p[f"{prefix}_Uz"].T @ da_z
    return dx, dh


def encode_sequence(model, src_ids):
    """Run the encoder; returns (max_len x d outputs, final hidden, caches)."""
    cfg = model.config
    if not (1 <= len(src_ids) <= cfg.max_len):
        raise NmtError(f"source length {len(src_ids)} outside [1, max_len={cfg.max_len}]")
    p = model.params
    d = cfg.hidden
    h = np.zeros(d)
    outputs = np.zeros((cfg.max_len, d))
    caches = []
    for t, tid in enumerate(src_ids):
        if not (0 <= tid < cfg.src_vocab_size):
            raise NmtError(f"source token id {tid} out of range")
        h, cache = _gru_forward(p, "enc", p["enc_embed"][tid], h)
        outputs[t] = h
        caches.append(cache)
    return outputs, h, caches


def _decode_step(model, prev_id, hidden, encoder_outputs, dropout_mask=None):
    cfg = model.config
    p = model.params
    d = cfg.hidden
    if not (0 <= prev_id < cfg.tgt_vocab_size):
        raise NmtError(f"target token id {prev_id} out of range")
    x0 = p["dec_embed"][prev_id]
    mask = dropout_mask if dropout_mask is not None else np.ones(d)
    xd = x0 * mask
    eh = np.concatenate([xd, hidden])
    attn_logits = p["attn_W"] @ eh + p["attn_b"]
    attn_logits = attn_logits - attn_logits.max()
    a = np.exp(attn_logits)
    a /= a.sum()
    context = encoder_outputs.T @ a
    xc = np.concatenate([xd, context])
    comb_pre = p["comb_W"] @ xc + p["comb_b"]
    comb = np.maximum(comb_pre, 0.0)
    h_new, gru_cache = _gru_forward(p, "dec", comb, hidden)
    logits = p["out_W"] @ h_new + p["out_b"]
    logp = logits - (logits.max() + np.log(np.exp(logits - logits.max()).sum()))
    cache = {"prev_id": prev_id, "mask": mask, "xd": xd, "eh": eh, "a": a,
             "context": context, "xc": xc, "comb_pre": comb_pre,
             "gru": gru_cache, "h_new": h_new, "probs": np.exp(logp),
             "enc_out": encoder_outputs}
    return logp, h_new, a, cache


def decode_step(model, prev_token_id, hidden, encoder_outputs, train_mode=False,
                rng=None):
    """One decoder step; dropout only in train_mode with a supplied rng."""
    mask = None
    if train_mode and model.config.dropout_p > 0.0:
        if rng is None:
            raise NmtError("train_mode dropout requires an rng")
        keep = 1.0 - model.config.dropout_p
        mask = (rng.random(model.config.hidden) < keep).astype(np.float64) / keep
    logp, h_new, a, _ = _decode_step(model, prev_token_id, hidden,
                                     encoder_outputs, mask)
    return logp, h_new, a


def _forward_pair(model, src_ids, tgt_ids, tf_gold, dropout_masks=None):
    """Teacher-forced/free decoding of one pair.

    tf_gold[t] says whether step t consumes the gold previous token; step 0
    always starts from SOS. Returns (mean NLL, caches for backward).
    """
    enc_out, h, enc_caches = encode_sequence(model, src_ids)
    gold = list(tgt_ids) + [EOS_ID]
    steps = []
    loss = 0.0
    prev = SOS_ID
    for t, gold_id in enumerate(gold):
        mask = dropout_masks[t] if dropout_masks is not None else None
        logp, h, _, cache = _decode_step(model, prev, h, enc_out, mask)
        cache["gold"] = gold_id
        steps.append(cache)
        loss -= logp[gold_id]
        if t + 1 < len(gold):
            if tf_gold[t + 1]:
                prev = gold_id
            else:
                masked = logp.copy()
                masked[PAD_ID] = masked[SOS_ID] = -np.inf
                prev = int(np.argmax(masked))
    loss /= len(gold)
    return loss, {"enc_caches": enc_caches, "enc_out": enc_out,
                  "src_ids": list(src_ids), "steps": steps}


def _zero_grads(model):
    return {k: np.zeros_like(v) for k, v in model.params.items()}


def _backward_pair(model, fwd):
    p = model.params
    g = _zero_grads(model)
    steps = fwd["steps"]
    T = len(steps)
    d = model.config.hidden
    denc_out = np.zeros_like(fwd["enc_out"])
    dh_next = np.zeros(d)

    for cache in reversed(steps):
        probs = cache["probs"]
        dlogits = probs / T
        dlogits[cache["gold"]] -= 1.0 / T
        g["out_W"] += np.outer(dlogits, cache["h_new"])
        g["out_b"] += dlogits
        dh_new = p["out_W"].T @ dlogits + dh_next

        dcomb, dh_prev = _gru_backward(p, g, "dec", dh_new, cache["gru"])
        dcomb_pre = dcomb * (cache["comb_pre"] > 0.0)
        g["comb_W"] += np.outer(dcomb_pre, cache["xc"])
        g["comb_b"] += dcomb_pre
        dxc = p["comb_W"].T @ dcomb_pre
        dxd = dxc[:d].copy()
        dcontext = dxc[d:]

        a = cache["a"]
        da = cache["enc_out"] @ dcontext
        denc_out += np.outer(a, dcontext)
        dattn_logits = a * (da - np.dot(a, da))
        g["attn_W"] += np.outer(dattn_logits, cache["eh"])
        g["attn_b"] += dattn_logits
        deh = p["attn_W"].T @ dattn_logits
        dxd += deh[:d]
        dh_prev += deh[d:]

        g["dec_embed"][cache["prev_id"]] += dxd * cache["mask"]
        dh_next = dh_prev

    dh_carry = dh_next
    for t in range(len(fwd["src_ids"]) - 1, -1, -1):
        dh_t = denc_out[t] + dh_carry
        dx, dh_carry = _gru_backward(p, g, "enc", dh_t, fwd["enc_caches"][t])
        g["enc_embed"][fwd["src_ids"][t]] += dx
    return g


def _clip_gradients(grads, max_norm):
    total = math.sqrt(sum(float(np.sum(v * v)) for v in grads.values()))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / total
        for v in grads.values():
            v *= scale
    return total


def _check_pair(cfg, src_ids, tgt_ids):
    if len(src_ids) < 1 or len(src_ids) > cfg.max_len:
        raise NmtError(f"source length {len(src_ids)} outside [1, max_len={cfg.max_len}]")
    if len(tgt_ids) + 1 > cfg.max_len:
        raise NmtError(f"target length {len(tgt_ids)}+eos exceeds max_len={cfg.max_len}")


def train(model, pairs, train_config, validation_pairs=None):
    """Per-pair SGD with teacher forcing; returns (model, loss_history)."""
    cfg = model.config
    if not pairs:
        raise NmtError("no training pairs")
    for src_ids, tgt_ids in pairs:
        _check_pair(cfg, src_ids, tgt_ids)

    tf_rng = random.Random(derive_seed(train_config.seed, "teacher_forcing"))
    drop_rng = np.random.default_rng(derive_seed(train_config.seed, "dropout"))
    history = []
    for epoch in range(train_config.epochs):
        order = list(range(len(pairs)))
        random.Random(derive_seed(train_config.seed, "order", epoch)).shuffle(order)
        epoch_loss = 0.0
        for idx in order:
            src_ids, tgt_ids = pairs[idx]
            n_steps = len(tgt_ids) + 1
            tf_gold = [tf_rng.random() < train_config.teacher_forcing_ratio
                       for _ in range(n_steps)]
            masks = None
            if cfg.dropout_p > 0.0:
                keep = 1.0 - cfg.dropout_p
                masks = [(drop_rng.random(cfg.hidden) < keep).astype(np.float64) / keep
                         for _ in range(n_steps)]
            loss, fwd = _forward_pair(model, src_ids, tgt_ids, tf_gold, masks)
            if not np.isfinite(loss):
                raise NmtNumericalError(
                    f"non-finite loss at epoch {epoch}, pair {idx}: {loss}")
            grads = _backward_pair(model, fwd)
            _clip_gradients(grads, train_config.grad_clip_norm)
            for name, grad in grads.items():
                model.params[name] -= train_config.learning_rate * grad
            epoch_loss += loss
        entry = {"epoch": epoch, "mean_loss": epoch_loss / len(pairs)}
        if validation_pairs:
            entry["val_loss"] = mean_loss(model, validation_pairs)
        history.append(entry)
    return model, history


def mean_loss(model, pairs):
    """Mean teacher-forced NLL without dropout (evaluation loss)."""
    total = 0.0
    for src_ids, tgt_ids in pairs:
        loss, _ = _forward_pair(model, src_ids, tgt_ids,
                                [True] * (len(tgt_ids) + 1), None)
        total += loss
    return total / len(pairs)


def translate(model, src_ids, max_out_len=None):
    """Greedy decoding; returns (generated ids without eos, attention rows)."""
    cfg = model.config
    if max_out_len is None:
        max_out_len = cfg.max_len
    src_ids = [tid if 0 <= tid < cfg.src_vocab_size else UNK_ID for tid in src_ids]
    enc_out, h, _ = encode_sequence(model, src_ids)
    out_ids = []
    attn_rows = []
    prev = SOS_ID
    for _ in range(max_out_len):
        logp, h, a, _ = _decode_step(model, prev, h, enc_out, None)
        logp = logp.copy()
        logp[PAD_ID] = logp[SOS_ID] = -np.inf
        nxt = int(np.argmax(logp))
        attn_rows.append(a)
        if nxt == EOS_ID:
            break
        out_ids.append(nxt)
        prev = nxt
    attention = np.stack(attn_rows) if attn_rows else np.zeros((0, cfg.max_len))
    return out_ids, attention


def pair_loss(model, src_ids, tgt_ids):
    """Deterministic loss (teacher forcing 1, no dropout). Used by gradient_check."""
    loss, _ = _forward_pair(model, src_ids, tgt_ids,
                            [True] * (len(tgt_ids) + 1), None)
    return loss


def pair_gradients(model, src_ids, tgt_ids):
    loss, fwd = _forward_pair(model, src_ids, tgt_ids,
                              [True] * (len(tgt_ids) + 1), None)
    return loss, _backward_pair(model, fwd)


def gradient_check(model, pair, epsilon=1e-5, n_params_sampled=200, seed=0):
    """Max relative error between analytic and central-difference gradients."""
    src_ids, tgt_ids = pair
    _check_pair(model.config, src_ids, tgt_ids)
    _, grads = pair_gradients(model, src_ids, tgt_ids)

    sizes = [(name, model.params[name].size) for name in PARAM_ORDER]
    total = sum(s for _, s in sizes)
    rng = random.Random(seed)
    picks = (rng.sample(range(total), n_params_sampled)
             if n_params_sampled < total else range(total))

    max_err = 0.0
    for flat_idx in picks:
        offset = flat_idx
        for name, size in sizes:
            if offset < size:
                break
            offset -= size
        arr = model.params[name]
        orig = arr.flat[offset]
        arr.flat[offset] = orig + epsilon
        lp = pair_loss(model, src_ids, tgt_ids)
        arr.flat[offset] = orig - epsilon
        lm = pair_loss(model, src_ids, tgt_ids)
        arr.flat[offset] = orig
        numeric = (lp - lm) / (2.0 * epsilon)
        analytic = grads[name].flat[offset]
        err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-12)
        max_err = max(max_err, err)
    return max_err


def save_checkpoint(model, path):
    cfg = model.config
    config_blob = json.dumps({
        "src_vocab_size": cfg.src_vocab_size, "tgt_vocab_size": cfg.tgt_vocab_size,
        "hidden": cfg.hidden, "max_len": cfg.max_len,
        "dropout_p": cfg.dropout_p, "seed": cfg.seed,
    }, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", FORMAT_VERSION))
        f.write(struct.pack("<I", len(config_blob)))
        f.write(config_blob)
        for name in PARAM_ORDER:
            f.write(np.ascontiguousarray(model.params[name], dtype="<f8").tobytes())


def load_checkpoint(path):
    with open(path, "rb") as f:
        if f.read(4) != MAGIC:
            raise NmtError(f"{path}: not a checkpoint file")
        (version,) = struct.unpack("<I", f.read(4))
        if version != FORMAT_VERSION:
            raise NmtError(f"{path}: unsupported checkpoint version {version}")
        (clen,) = struct.unpack("<I", f.read(4))
        cfg = ModelConfig(**json.loads(f.read(clen).decode("utf-8")))
        template = init_model(cfg)
        params = {}
        for name in PARAM_ORDER:
            shape = template.params[name].shape
            count = template.params[name].size
            data = np.frombuffer(f.read(count * 8), dtype="<f8")
            if data.size != count:
                raise NmtError(f"{path}: truncated checkpoint at {name}")
            params[name] = data.reshape(shape).copy()
    return Seq2SeqModel(params=params, config=cfg)


def save_loss_history(history, path):
    with open(path, "w", encoding="utf-8") as f:
        cols = ["epoch", "mean_loss"] + (["val_loss"] if history and "val_loss" in history[0] else [])
        f.write(",".join(cols) + "\n")
        for entry in history:
            f.write(",".join(str(entry[c]) for c in cols) + "\n")

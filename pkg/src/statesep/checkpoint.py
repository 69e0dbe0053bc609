"""Value-exact checkpoints for params, state stores, and EWC state.

One ``.npz`` archive (zip of standard ``.npy`` records) holds everything:

==================  =====================================================
``meta``            JSON string: format tag, version, model dims, flags
``theta``           flat float64 parameter vector, row-major layout
                    ``[embed | Wx | Wh | b | W_out | b_out]``
``vocab``           symbol strings, position = id
``store_keys``      JSON-encoded state keys in bank-row order
``store_c/h``       state banks, one row per key
``ewc_sf/sft/sftt`` EWC running sums (present when consolidated)
==================  =====================================================

Floats round-trip bit-exactly because ``.npy`` stores raw IEEE bytes.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .ewc import EwcPenalty
from .lstm import LstmParams
from .states import StateStore
from .tasks import Vocabulary

__all__ = ["save_checkpoint", "load_checkpoint", "save_store", "load_store",
           "Checkpoint", "FORMAT_TAG", "FORMAT_VERSION"]

FORMAT_TAG = "statesep-checkpoint"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    """What a checkpoint file unpacks to; absent parts are None."""

    params: LstmParams | None = None
    vocab: Vocabulary | None = None
    store: StateStore | None = None
    penalty: EwcPenalty | None = None


def _store_entries(store: StateStore) -> dict:
    c, h = store.banks()
    keys = [None] * len(store)
    for k, r in store.snapshot()["index"].items():
        keys[r] = json.dumps(k)
    return {"store_keys": np.array(keys, dtype=object).astype(str),
            "store_c": c.copy(), "store_h": h.copy()}


def _restore_store(hidden: int, keys, c, h) -> StateStore:
    store = StateStore(hidden, capacity=max(8, len(keys)))
    for r, raw in enumerate(keys):
        store.commit(json.loads(str(raw)), c[r], h[r])
    return store


def save_checkpoint(path, params: LstmParams, vocab: Vocabulary | None = None,
                    store: StateStore | None = None,
                    penalty: EwcPenalty | None = None) -> None:
    """Write params (and optionally vocab/store/EWC state) to ``path``."""
    meta = {
        "format": FORMAT_TAG, "version": FORMAT_VERSION,
        "vocab": params.vocab, "input_dim": params.input_dim,
        "hidden": params.hidden,
        "has_vocab": vocab is not None, "has_store": store is not None,
        "has_penalty": penalty is not None,
    }
    entries = {"theta": params.flat}
    if vocab is not None:
        if len(vocab) != params.vocab:
            raise ValueError("vocabulary size does not match params")
        entries["vocab"] = np.array(vocab.symbols(), dtype=str)
    if store is not None:
        meta["store_hidden"] = store.hidden
        entries.update(_store_entries(store))
    if penalty is not None:
        meta["penalty"] = {"lam": penalty.lam,
                           "fisher_samples": penalty.fisher_samples,
                           "n_anchors": penalty.n_anchors}
        entries["ewc_sf"] = penalty._sf
        entries["ewc_sft"] = penalty._sft
        entries["ewc_sftt"] = penalty._sftt
    entries["meta"] = np.array(json.dumps(meta))
    with open(path, "wb") as fh:
        np.savez(fh, **entries)


def load_checkpoint(path) -> Checkpoint:
    """Read a checkpoint written by :func:`save_checkpoint`."""
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["meta"]))
        if meta.get("format") != FORMAT_TAG:
            raise ValueError(f"{path}: not a {FORMAT_TAG} file")
        if meta.get("version") != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported version {meta.get('version')}")
        params = LstmParams(meta["vocab"], meta["input_dim"], meta["hidden"],
                            z["theta"].copy())
        out = Checkpoint(params=params)
        if meta["has_vocab"]:
            out.vocab = Vocabulary(str(s) for s in z["vocab"])
        if meta["has_store"]:
            out.store = _restore_store(meta["store_hidden"], z["store_keys"],
                                       z["store_c"], z["store_h"])
        if meta["has_penalty"]:
            p = meta["penalty"]
            pen = EwcPenalty(params.n_params, lam=p["lam"],
                             fisher_samples=p["fisher_samples"])
            pen.n_anchors = p["n_anchors"]
            pen._sf[:] = z["ewc_sf"]
            pen._sft[:] = z["ewc_sft"]
            pen._sftt[:] = z["ewc_sftt"]
            out.penalty = pen
    return out


def save_store(path, store: StateStore) -> None:
    """Write a bare state-store snapshot (same format family)."""
    meta = {"format": FORMAT_TAG, "version": FORMAT_VERSION,
            "store_hidden": store.hidden, "store_only": True}
    entries = _store_entries(store)
    entries["meta"] = np.array(json.dumps(meta))
    with open(path, "wb") as fh:
        np.savez(fh, **entries)


def load_store(path) -> StateStore:
    """Read a snapshot written by :func:`save_store`."""
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["meta"]))
        if meta.get("format") != FORMAT_TAG:
            raise ValueError(f"{path}: not a {FORMAT_TAG} file")
        return _restore_store(meta["store_hidden"], z["store_keys"],
                              z["store_c"], z["store_h"])

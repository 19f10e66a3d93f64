"""Normalized columnar intermediate store.

Parsing the multi-gigabyte national file is slow; analysis is iterated
many times with different strata and dates. The store decouples the two:
normalized records live in a versioned .npz of parallel columns.
"""

from __future__ import annotations

import datetime as dt
import json
from typing import Iterable, Iterator

import numpy as np

from .records import ALL_AGE_BANDS, GENDERS, LineRecord

STORE_VERSION = 1

_EPOCH = dt.date(1970, 1, 1)
_BAND_INDEX = {b: i for i, b in enumerate(ALL_AGE_BANDS)}
_GENDER_INDEX = {g: i for i, g in enumerate(GENDERS)}


def save_store(path, records: Iterable[LineRecord], meta: dict | None = None) -> int:
    """Write records as parallel columns; returns the row count."""
    days, bands, genders, hosp, died, states = [], [], [], [], [], []
    for r in records:
        days.append((r.event_date - _EPOCH).days)
        bands.append(_BAND_INDEX[r.age_band])
        genders.append(_GENDER_INDEX[r.gender])
        hosp.append(r.hospitalized)
        died.append(r.died)
        states.append(r.state or "")
    payload = {
        "version": np.int64(STORE_VERSION),
        "event_day": np.asarray(days, dtype=np.int32),
        "age_band": np.asarray(bands, dtype=np.uint8),
        "gender": np.asarray(genders, dtype=np.uint8),
        "hospitalized": np.asarray(hosp, dtype=bool),
        "died": np.asarray(died, dtype=bool),
        "state": np.asarray(states, dtype="U2"),
        "meta_json": np.str_(json.dumps(meta or {})),
    }
    np.savez_compressed(path, **payload)
    return len(days)


def load_store(path) -> tuple[dict[str, np.ndarray], dict]:
    """Load the columnar arrays and the metadata dict."""
    with np.load(path, allow_pickle=False) as npz:
        version = int(npz["version"])
        if version != STORE_VERSION:
            raise ValueError(f"unsupported store version {version}")
        columns = {
            k: npz[k]
            for k in ("event_day", "age_band", "gender", "hospitalized", "died", "state")
        }
        meta = json.loads(str(npz["meta_json"]))
    return columns, meta


def iter_records(columns: dict[str, np.ndarray]) -> Iterator[LineRecord]:
    """Materialize LineRecords from store columns."""
    days = columns["event_day"]
    bands = columns["age_band"]
    genders = columns["gender"]
    hosp = columns["hospitalized"]
    died = columns["died"]
    states = columns["state"]
    for i in range(len(days)):
        yield LineRecord(
            event_date=_EPOCH + dt.timedelta(days=int(days[i])),
            age_band=ALL_AGE_BANDS[bands[i]],
            gender=GENDERS[genders[i]],
            hospitalized=bool(hosp[i]),
            died=bool(died[i]),
            state=str(states[i]) or None,
        )

"""Symbolic score I/O: MIDI parsing/writing, chord annotations, piano rolls.

Everything downstream works on a fixed 16th-note grid: a piano roll is a
128 x T velocity matrix (0 = silence), a chord progression is a 12 x T chroma
matrix plus a per-step root pitch class.  This module owns the conversion
between those grids and the outside world (Standard MIDI Files, POP909-style
chord/bar annotation text).

Chord dictionary
----------------
Labels are ``ROOT:QUALITY`` (``C:maj``, ``F#:min7``, ...) or ``N`` for
no-chord.  Supported qualities and their interval templates above the root:

    maj   0 4 7        min   0 3 7        dim   0 3 6
    aug   0 4 8        maj7  0 4 7 11     min7  0 3 7 10
    7     0 4 7 10     sus2  0 2 7        sus4  0 5 7
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace

import numpy as np

NUM_PITCHES = 128
NUM_PITCH_CLASSES = 12
STEPS_PER_QUARTER = 4  # 16th-note grid
DEFAULT_TIME_SIGNATURE = (4, 4)
DEFAULT_TEMPO_BPM = 120.0
BARS_PER_SEGMENT = 2

MELODY, BRIDGE, PIANO = "MELODY", "BRIDGE", "PIANO"

CHORD_TEMPLATES = {
    "maj": (0, 4, 7),
    "min": (0, 3, 7),
    "dim": (0, 3, 6),
    "aug": (0, 4, 8),
    "maj7": (0, 4, 7, 11),
    "min7": (0, 3, 7, 10),
    "7": (0, 4, 7, 10),
    "sus2": (0, 2, 7),
    "sus4": (0, 5, 7),
}

_NOTE_NAME_TO_PC = {
    "C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11,
}


class ScoreError(ValueError):
    """Base class for score I/O failures."""


class MidiParseError(ScoreError):
    """Malformed Standard MIDI File; carries the offending byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class TrackLayoutError(ScoreError):
    """MIDI track layout could not be mapped to melody/bridge/piano."""

    def __init__(self, message: str, track_names: list[str]):
        super().__init__(f"{message}; found tracks: {track_names}")
        self.track_names = track_names


class DimensionError(ScoreError):
    """Grid shape violates a contract (wrong T, wrong axis size, ...)."""


class ChordLabelError(ScoreError):
    """Unknown chord label in an annotation file."""

    def __init__(self, label: str, line_number: int):
        super().__init__(f"unknown chord label {label!r} on line {line_number}")
        self.label = label
        self.line_number = line_number


class AnnotationError(ScoreError):
    """Malformed annotation text (overlaps, bad fields, ...)."""


def steps_per_bar(time_signature: tuple[int, int] = DEFAULT_TIME_SIGNATURE) -> int:
    num, den = time_signature
    if (16 * num) % den != 0:
        raise ScoreError(f"time signature {num}/{den} does not align with the 16th grid")
    return 16 * num // den


@dataclass(frozen=True)
class NoteEvent:
    """A quantized note: onset/duration in 16th steps."""

    pitch: int
    onset: int
    duration: int
    velocity: int

    def __post_init__(self):
        if not 0 <= self.pitch < NUM_PITCHES:
            raise ScoreError(f"pitch {self.pitch} outside [0, 127]")
        if self.onset < 0:
            raise ScoreError(f"onset {self.onset} must be >= 0")
        if self.duration < 1:
            raise ScoreError(f"duration {self.duration} must be >= 1")
        if not 1 <= self.velocity <= 127:
            raise ScoreError(f"velocity {self.velocity} outside [1, 127]")

    @property
    def offset(self) -> int:
        return self.onset + self.duration

    @property
    def pitch_class(self) -> int:
        return self.pitch % NUM_PITCH_CLASSES


@dataclass
class PianoRoll:
    """128 x T velocity grid at 16th-note resolution.

    T must be positive and a whole number of bars; velocities live in
    [0, 127] with 0 meaning silence.
    """

    grid: np.ndarray
    role: str = "melody"
    steps_per_bar: int = 16

    def __post_init__(self):
        self.grid = np.asarray(self.grid)
        if self.grid.ndim != 2 or self.grid.shape[0] != NUM_PITCHES:
            raise DimensionError(
                f"piano roll grid must be 128 x T, got {self.grid.shape}")
        if self.num_steps == 0:
            raise DimensionError("piano roll must span at least one step (T > 0)")
        if self.num_steps % self.steps_per_bar != 0:
            raise DimensionError(
                f"T={self.num_steps} is not a multiple of {self.steps_per_bar} steps per bar")
        if self.grid.min() < 0 or self.grid.max() > 127:
            raise ScoreError("velocities must lie in [0, 127]")

    @property
    def num_steps(self) -> int:
        return self.grid.shape[1]

    @property
    def num_bars(self) -> int:
        return self.num_steps // self.steps_per_bar

    def binarized(self) -> np.ndarray:
        return self.grid > 0

    def to_notes(self) -> list[NoteEvent]:
        """Extract the note set: one note per maximal constant-velocity run."""
        notes = []
        for pitch in range(NUM_PITCHES):
            row = self.grid[pitch]
            t = 0
            while t < len(row):
                if row[t] == 0:
                    t += 1
                    continue
                start = t
                vel = int(row[t])
                while t < len(row) and row[t] == vel:
                    t += 1
                notes.append(NoteEvent(pitch, start, t - start, vel))
        notes.sort(key=lambda n: (n.onset, n.pitch))
        return notes

    @classmethod
    def from_notes(cls, notes, num_steps: int, role: str = "melody",
                   steps_per_bar: int = 16) -> "PianoRoll":
        """Rasterize notes onto a grid; overlaps keep the louder velocity."""
        grid = np.zeros((NUM_PITCHES, num_steps), dtype=np.int16)
        for n in notes:
            if n.onset >= num_steps:
                continue
            end = min(n.offset, num_steps)
            seg = grid[n.pitch, n.onset:end]
            np.maximum(seg, n.velocity, out=seg)
        return cls(grid, role=role, steps_per_bar=steps_per_bar)


@dataclass
class ChromaSequence:
    """12 x T chord representation; all-zero columns mean no chord."""

    chroma: np.ndarray
    root: np.ndarray

    def __post_init__(self):
        self.chroma = np.asarray(self.chroma, dtype=np.float64)
        self.root = np.asarray(self.root, dtype=np.int64)
        if self.chroma.ndim != 2 or self.chroma.shape[0] != NUM_PITCH_CLASSES:
            raise DimensionError(f"chroma must be 12 x T, got {self.chroma.shape}")
        if self.root.shape != (self.chroma.shape[1],):
            raise DimensionError("root must have one entry per step")
        if self.chroma.min() < 0 or self.chroma.max() > 1:
            raise ScoreError("chroma entries must lie in [0, 1]")
        if ((self.root < 0) | (self.root >= NUM_PITCH_CLASSES)).any():
            raise ScoreError("root entries must be pitch classes in [0, 11]")

    @property
    def num_steps(self) -> int:
        return self.chroma.shape[1]

    def has_chord(self) -> np.ndarray:
        """Boolean mask of columns that carry a chord."""
        return self.chroma.any(axis=0)

    @classmethod
    def empty(cls, num_steps: int) -> "ChromaSequence":
        return cls(np.zeros((NUM_PITCH_CLASSES, num_steps)),
                   np.zeros(num_steps, dtype=np.int64))


@dataclass
class BarStructure:
    """Bar grid: strictly increasing start steps, first bar at step 0."""

    bar_starts: list[int]
    time_signature: tuple[int, int] = DEFAULT_TIME_SIGNATURE
    bars_per_segment: int = BARS_PER_SEGMENT

    def __post_init__(self):
        starts = list(self.bar_starts)
        if not starts:
            raise ScoreError("bar structure needs at least one bar")
        if starts[0] != 0:
            raise ScoreError("first bar must start at step 0")
        if any(b >= a for a, b in zip(starts[1:], starts)):
            raise ScoreError("bar starts must be strictly increasing")
        self.bar_starts = starts

    @property
    def steps_per_bar(self) -> int:
        return steps_per_bar(self.time_signature)

    @property
    def num_bars(self) -> int:
        return len(self.bar_starts)

    def bar_bounds(self, index: int, total_steps: int) -> tuple[int, int]:
        if not 0 <= index < self.num_bars:
            raise IndexError(f"bar {index} out of range (0..{self.num_bars - 1})")
        start = self.bar_starts[index]
        end = self.bar_starts[index + 1] if index + 1 < self.num_bars else total_steps
        return start, end

    @classmethod
    def from_time_signature(cls, total_steps: int,
                            time_signature: tuple[int, int] = DEFAULT_TIME_SIGNATURE,
                            ) -> "BarStructure":
        spb = steps_per_bar(time_signature)
        return cls(list(range(0, total_steps, spb)), time_signature)


@dataclass
class TrackSet:
    """Parsed song: melody/bridge/piano rolls plus bar and chord annotations."""

    melody: PianoRoll
    bridge: PianoRoll
    piano: PianoRoll
    bars: BarStructure
    chords: ChromaSequence
    tempo_bpm: float = DEFAULT_TEMPO_BPM

    def __post_init__(self):
        lengths = {self.melody.num_steps, self.bridge.num_steps, self.piano.num_steps}
        if len(lengths) != 1:
            raise DimensionError(f"track rolls must share T, got lengths {sorted(lengths)}")
        if self.chords.num_steps != self.melody.num_steps:
            raise DimensionError("chroma length must match the rolls")

    @property
    def num_steps(self) -> int:
        return self.melody.num_steps


# ---------------------------------------------------------------------------
# Standard MIDI File reader
# ---------------------------------------------------------------------------

_META_TEMPO = 0x51
_META_TRACK_NAME = 0x03
_META_TIME_SIGNATURE = 0x58
_META_END_OF_TRACK = 0x2F


class _ByteReader:
    def __init__(self, data: bytes, offset: int = 0):
        self.data = data
        self.pos = offset

    def read(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise MidiParseError("unexpected end of file", self.pos)
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def read_byte(self) -> int:
        return self.read(1)[0]

    def read_varlen(self) -> int:
        value = 0
        for _ in range(4):
            b = self.read_byte()
            value = (value << 7) | (b & 0x7F)
            if not b & 0x80:
                return value
        raise MidiParseError("variable-length quantity longer than 4 bytes", self.pos)


@dataclass
class _RawTrack:
    name: str = ""
    # (tick, pitch, velocity, off_tick)
    notes: list[tuple[int, int, int, int]] = field(default_factory=list)


def _parse_track(reader: _ByteReader, tempos: list, time_sigs: list) -> _RawTrack:
    track = _RawTrack()
    open_notes: dict[tuple[int, int], tuple[int, int]] = {}  # (chan, pitch) -> (tick, vel)
    tick = 0
    running_status = None
    end_pos = None

    header = reader.read(4)
    if header != b"MTrk":
        raise MidiParseError(f"expected MTrk chunk, got {header!r}", reader.pos - 4)
    (length,) = struct.unpack(">I", reader.read(4))
    end_pos = reader.pos + length

    def close_note(chan: int, pitch: int):
        key = (chan, pitch)
        if key in open_notes:
            on_tick, vel = open_notes.pop(key)
            track.notes.append((on_tick, pitch, vel, tick))

    while reader.pos < end_pos:
        tick += reader.read_varlen()
        status = reader.read_byte()
        if status < 0x80:
            if running_status is None:
                raise MidiParseError("data byte without running status", reader.pos - 1)
            reader.pos -= 1
            status = running_status
        if status < 0xF0:
            running_status = status
        kind, chan = status & 0xF0, status & 0x0F
        if kind == 0x90:
            pitch, vel = reader.read_byte(), reader.read_byte()
            if vel == 0:
                close_note(chan, pitch)
            else:
                close_note(chan, pitch)  # retrigger implies the old note ends
                open_notes[(chan, pitch)] = (tick, vel)
        elif kind == 0x80:
            pitch, _ = reader.read_byte(), reader.read_byte()
            close_note(chan, pitch)
        elif kind in (0xA0, 0xB0, 0xE0):
            reader.read(2)
        elif kind in (0xC0, 0xD0):
            reader.read(1)
        elif status == 0xFF:
            meta_type = reader.read_byte()
            length = reader.read_varlen()
            payload = reader.read(length)
            if meta_type == _META_TEMPO and length == 3:
                tempos.append(int.from_bytes(payload, "big"))
            elif meta_type == _META_TRACK_NAME:
                track.name = payload.decode("latin-1").strip()
            elif meta_type == _META_TIME_SIGNATURE and length >= 2:
                time_sigs.append((payload[0], 1 << payload[1]))
            elif meta_type == _META_END_OF_TRACK:
                break
        elif status in (0xF0, 0xF7):
            length = reader.read_varlen()
            reader.read(length)
        else:
            raise MidiParseError(f"unsupported status byte 0x{status:02X}", reader.pos - 1)

    reader.pos = end_pos
    # notes left hanging at end of track get closed at the final tick
    for (chan, pitch), (on_tick, vel) in sorted(open_notes.items()):
        track.notes.append((on_tick, pitch, vel, tick))
    return track


def _quantize_track(raw: _RawTrack, ticks_per_step: float) -> list[NoteEvent]:
    notes = []
    for on_tick, pitch, vel, off_tick in raw.notes:
        onset = int(round(on_tick / ticks_per_step))
        offset = int(round(off_tick / ticks_per_step))
        duration = max(1, offset - onset)  # nearest-16th rounding, min 1 step
        notes.append(NoteEvent(pitch, onset, duration, min(vel, 127)))
    return notes


def _assign_tracks(note_tracks: list[_RawTrack]) -> dict[str, _RawTrack]:
    by_name = {}
    for raw in note_tracks:
        upper = raw.name.upper()
        for wanted in (MELODY, BRIDGE, PIANO):
            if upper == wanted and wanted not in by_name:
                by_name[wanted] = raw
    if by_name:
        return by_name
    if len(note_tracks) == 1:
        return {MELODY: note_tracks[0]}
    if len(note_tracks) == 3:
        return dict(zip((MELODY, BRIDGE, PIANO), note_tracks))
    raise TrackLayoutError(
        f"cannot identify melody/bridge/piano among {len(note_tracks)} unnamed note tracks",
        [t.name for t in note_tracks])


def parse_midi(data: bytes) -> TrackSet:
    """Parse a format 0/1 Standard MIDI File into quantized track rolls.

    Tracks are identified by name (MELODY/BRIDGE/PIANO) first, then by
    order for 1- or 3-track files.  All events are quantized to the
    16th-note grid and the total length is padded to a whole bar.
    Chords come back empty; attach them via ``parse_chord_annotations``.
    """
    reader = _ByteReader(data)
    header = reader.read(4)
    if header != b"MThd":
        raise MidiParseError(f"not a Standard MIDI File (header {header!r})", 0)
    (hlen,) = struct.unpack(">I", reader.read(4))
    if hlen < 6:
        raise MidiParseError(f"MThd length {hlen} too short", 4)
    fmt, ntracks, division = struct.unpack(">HHH", reader.read(6))
    reader.pos += hlen - 6
    if fmt not in (0, 1):
        raise MidiParseError(f"unsupported MIDI format {fmt}", 8)
    if division & 0x8000:
        raise MidiParseError("SMPTE time division is not supported", 12)
    if division == 0:
        raise MidiParseError("time division must be positive", 12)

    tempos: list[int] = []
    time_sigs: list[tuple[int, int]] = []
    raw_tracks = [_parse_track(reader, tempos, time_sigs) for _ in range(ntracks)]

    for sig in time_sigs:
        if sig != DEFAULT_TIME_SIGNATURE:
            raise ScoreError(
                f"unsupported time signature {sig[0]}/{sig[1]}; only 4/4 is handled")
    tempo_bpm = 60e6 / tempos[0] if tempos else DEFAULT_TEMPO_BPM

    ticks_per_step = division / STEPS_PER_QUARTER
    note_tracks = [t for t in raw_tracks if t.notes]
    if not note_tracks:
        raise DimensionError("MIDI file contains no notes (T > 0 violated)")
    assigned = _assign_tracks(note_tracks)
    quantized = {name: _quantize_track(raw, ticks_per_step)
                 for name, raw in assigned.items()}

    spb = steps_per_bar(DEFAULT_TIME_SIGNATURE)
    last = max((n.offset for notes in quantized.values() for n in notes), default=0)
    if last == 0:
        raise DimensionError("MIDI file contains no notes (T > 0 violated)")
    total = ((last + spb - 1) // spb) * spb

    def roll(name: str, role: str) -> PianoRoll:
        return PianoRoll.from_notes(quantized.get(name, []), total, role=role,
                                    steps_per_bar=spb)

    return TrackSet(
        melody=roll(MELODY, "melody"),
        bridge=roll(BRIDGE, "accompaniment"),
        piano=roll(PIANO, "accompaniment"),
        bars=BarStructure.from_time_signature(total),
        chords=ChromaSequence.empty(total),
        tempo_bpm=tempo_bpm,
    )


# ---------------------------------------------------------------------------
# Standard MIDI File writer
# ---------------------------------------------------------------------------

def _varlen(value: int) -> bytes:
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(out))


def write_midi(roll: PianoRoll, tempo_bpm: float = DEFAULT_TEMPO_BPM,
               ticks_per_quarter: int = 480, track_name: str | None = None) -> bytes:
    """Serialize a piano roll to a single-track format-0 SMF.

    Round-trip contract: ``parse_midi(write_midi(r))`` reproduces the note
    set of ``r`` exactly on the 16th grid.
    """
    if roll.grid.shape[1] == 0:
        raise ScoreError("cannot write an empty piano roll (T = 0)")
    ticks_per_step = ticks_per_quarter // STEPS_PER_QUARTER
    events = []  # (tick, order, message bytes)
    for n in roll.to_notes():
        on, off = n.onset * ticks_per_step, n.offset * ticks_per_step
        events.append((on, 1, bytes((0x90, n.pitch, n.velocity))))
        events.append((off, 0, bytes((0x80, n.pitch, 0))))
    events.sort(key=lambda e: (e[0], e[1]))

    body = bytearray()
    if track_name:
        name = track_name.encode("latin-1")
        body += b"\x00\xff\x03" + _varlen(len(name)) + name
    tempo_us = int(round(60e6 / tempo_bpm))
    body += b"\x00\xff\x51\x03" + tempo_us.to_bytes(3, "big")
    body += b"\x00\xff\x58\x04" + bytes((4, 2, 24, 8))
    last_tick = 0
    for tick, _, msg in events:
        body += _varlen(tick - last_tick) + msg
        last_tick = tick
    body += _varlen(0) + b"\xff\x2f\x00"

    header = b"MThd" + struct.pack(">IHHH", 6, 0, 1, ticks_per_quarter)
    return header + b"MTrk" + struct.pack(">I", len(body)) + bytes(body)


def write_track_set(ts: TrackSet, tempo_bpm: float | None = None,
                    ticks_per_quarter: int = 480) -> bytes:
    """Serialize a TrackSet as a format-1 SMF with named MELODY/BRIDGE/PIANO tracks."""
    tempo = tempo_bpm if tempo_bpm is not None else ts.tempo_bpm
    chunks = []
    for name, roll in ((MELODY, ts.melody), (BRIDGE, ts.bridge), (PIANO, ts.piano)):
        if roll.grid.any():
            full = write_midi(roll, tempo, ticks_per_quarter, track_name=name)
            chunks.append(full[14:])  # strip the per-roll MThd header
        else:
            chunks.append(_empty_named_track(name, tempo, ticks_per_quarter))
    header = b"MThd" + struct.pack(">IHHH", 6, 1, len(chunks), ticks_per_quarter)
    return header + b"".join(chunks)


def _empty_named_track(name: str, tempo_bpm: float, ticks_per_quarter: int) -> bytes:
    body = bytearray()
    encoded = name.encode("latin-1")
    body += b"\x00\xff\x03" + _varlen(len(encoded)) + encoded
    tempo_us = int(round(60e6 / tempo_bpm))
    body += b"\x00\xff\x51\x03" + tempo_us.to_bytes(3, "big")
    body += _varlen(0) + b"\xff\x2f\x00"
    return b"MTrk" + struct.pack(">I", len(body)) + bytes(body)


# ---------------------------------------------------------------------------
# Roll / chroma operations
# ---------------------------------------------------------------------------

def merge_accompaniment(ts: TrackSet) -> PianoRoll:
    """Merge bridge and piano into the accompaniment roll (element-wise max)."""
    return merge_rolls(ts.bridge, ts.piano)


def merge_rolls(a: PianoRoll, b: PianoRoll) -> PianoRoll:
    if a.num_steps != b.num_steps:
        raise DimensionError(
            f"cannot merge rolls of different lengths ({a.num_steps} vs {b.num_steps})")
    return PianoRoll(np.maximum(a.grid, b.grid), role="merged",
                     steps_per_bar=a.steps_per_bar)


def segment(ts: TrackSet) -> list[TrackSet]:
    """Cut a song into consecutive 2-bar TrackSets; a trailing odd bar is dropped.

    Only windows spanning exactly ``bars_per_segment`` full bars survive, so
    each output covers 32 steps in 4/4 (the arousal window; 8 beats for the
    valence window).
    """
    spb = ts.bars.steps_per_bar
    per_seg = ts.bars.bars_per_segment
    want = spb * per_seg
    out = []
    starts = ts.bars.bar_starts
    for i in range(0, len(starts) - per_seg + 1, per_seg):
        start = starts[i]
        end = starts[i + per_seg] if i + per_seg < len(starts) else ts.num_steps
        if end - start != want:
            continue
        sl = slice(start, end)
        out.append(TrackSet(
            melody=PianoRoll(ts.melody.grid[:, sl].copy(), "melody", spb),
            bridge=PianoRoll(ts.bridge.grid[:, sl].copy(), "accompaniment", spb),
            piano=PianoRoll(ts.piano.grid[:, sl].copy(), "accompaniment", spb),
            bars=BarStructure(list(range(0, want, spb)), ts.bars.time_signature, per_seg),
            chords=ChromaSequence(ts.chords.chroma[:, sl].copy(), ts.chords.root[sl].copy()),
            tempo_bpm=ts.tempo_bpm,
        ))
    return out


def normalize_root(c: ChromaSequence) -> ChromaSequence:
    """Rotate every chord column so its root lands on pitch class C.

    No-chord columns pass through untouched.  The rotation is invertible:
    ``denormalize_root(normalize_root(c), c.root)`` recovers the input.
    """
    chroma = c.chroma.copy()
    root = c.root.copy()
    for t in np.flatnonzero(c.has_chord()):
        chroma[:, t] = np.roll(c.chroma[:, t], -int(c.root[t]))
        root[t] = 0
    return ChromaSequence(chroma, root)


def denormalize_root(c: ChromaSequence, roots: np.ndarray) -> ChromaSequence:
    """Inverse of normalize_root given the original per-step roots."""
    roots = np.asarray(roots, dtype=np.int64)
    chroma = c.chroma.copy()
    root = c.root.copy()
    for t in np.flatnonzero(c.has_chord()):
        chroma[:, t] = np.roll(c.chroma[:, t], int(roots[t]))
        root[t] = roots[t]
    return ChromaSequence(chroma, root)


def downsample_chroma(c: ChromaSequence, factor: int = STEPS_PER_QUARTER) -> ChromaSequence:
    """Reduce chroma resolution by ``factor`` (16th steps -> beats by default).

    Each output column is the first chord-carrying column of its window, so a
    chord change mid-window resolves to the chord sounding at the window start.
    """
    if c.num_steps % factor != 0:
        raise DimensionError(f"T={c.num_steps} not divisible by factor {factor}")
    n = c.num_steps // factor
    chroma = np.zeros((NUM_PITCH_CLASSES, n))
    root = np.zeros(n, dtype=np.int64)
    mask = c.has_chord()
    for i in range(n):
        window = range(i * factor, (i + 1) * factor)
        t = next((t for t in window if mask[t]), i * factor)
        chroma[:, i] = c.chroma[:, t]
        root[i] = c.root[t]
    return ChromaSequence(chroma, root)


def chord_label_to_chroma(label: str) -> tuple[np.ndarray, int] | None:
    """Expand ``ROOT:QUALITY`` into (12-dim chroma, root pc); None for no-chord."""
    label = label.strip()
    if label in ("N", "NC", "N.C.", ""):
        return None
    root_part, _, quality = label.partition(":")
    quality = quality.strip() or "maj"
    root = _parse_root(root_part)
    if root is None or quality not in CHORD_TEMPLATES:
        return None
    chroma = np.zeros(NUM_PITCH_CLASSES)
    for interval in CHORD_TEMPLATES[quality]:
        chroma[(root + interval) % NUM_PITCH_CLASSES] = 1.0
    return chroma, root


def _parse_root(text: str) -> int | None:
    text = text.strip()
    if not text or text[0].upper() not in _NOTE_NAME_TO_PC:
        return None
    pc = _NOTE_NAME_TO_PC[text[0].upper()]
    for accidental in text[1:]:
        if accidental in ("#", "s"):
            pc += 1
        elif accidental in ("b", "-"):
            pc -= 1
        else:
            return None
    return pc % NUM_PITCH_CLASSES


def parse_chord_annotations(text: bytes | str, tempo_bpm: float = DEFAULT_TEMPO_BPM,
                            total_steps: int | None = None) -> ChromaSequence:
    """Parse POP909-style chord annotation text into a chroma sequence.

    One interval per line: ``start_seconds end_seconds label``.  Intervals
    must not overlap; gaps and ``N`` lines become no-chord columns.  Seconds
    map to 16th steps through ``tempo_bpm``.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    seconds_per_step = 60.0 / (tempo_bpm * STEPS_PER_QUARTER)
    intervals = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) == 1:  # bare no-chord marker
            parts = ["0", "0", parts[0]]
        if len(parts) != 3:
            raise AnnotationError(f"expected 'start end label' on line {line_no}: {line!r}")
        try:
            start_s, end_s = float(parts[0]), float(parts[1])
        except ValueError as exc:
            raise AnnotationError(f"bad interval bounds on line {line_no}: {line!r}") from exc
        if end_s < start_s:
            raise AnnotationError(f"interval ends before it starts on line {line_no}")
        label = parts[2]
        expanded = chord_label_to_chroma(label)
        if expanded is None and label not in ("N", "NC", "N.C."):
            raise ChordLabelError(label, line_no)
        start = int(round(start_s / seconds_per_step))
        end = int(round(end_s / seconds_per_step))
        intervals.append((start, end, expanded, line_no))

    intervals.sort(key=lambda iv: iv[0])
    for (s1, e1, _, l1), (s2, _, _, l2) in zip(intervals, intervals[1:]):
        if s2 < e1:
            raise AnnotationError(f"overlapping chord intervals on lines {l1} and {l2}")

    last = max((end for _, end, _, _ in intervals), default=0)
    total = total_steps if total_steps is not None else last
    chroma = np.zeros((NUM_PITCH_CLASSES, total))
    root = np.zeros(total, dtype=np.int64)
    for start, end, expanded, _ in intervals:
        if expanded is None:
            continue
        col, r = expanded
        lo, hi = max(0, start), min(total, end)
        chroma[:, lo:hi] = col[:, None]
        root[lo:hi] = r
    return ChromaSequence(chroma, root)


def parse_bar_annotations(text: bytes | str,
                          time_signature: tuple[int, int] = DEFAULT_TIME_SIGNATURE,
                          ) -> BarStructure:
    """Parse bar annotation text: one bar-start step index per line."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    starts = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            starts.append(int(line))
        except ValueError as exc:
            raise AnnotationError(f"bad bar start on line {line_no}: {line!r}") from exc
    return BarStructure(starts, time_signature)


def with_chords(ts: TrackSet, chords: ChromaSequence) -> TrackSet:
    """Attach a chord sequence to a parsed TrackSet, padding/truncating to T."""
    total = ts.num_steps
    if chords.num_steps == total:
        fitted = chords
    else:
        chroma = np.zeros((NUM_PITCH_CLASSES, total))
        root = np.zeros(total, dtype=np.int64)
        n = min(total, chords.num_steps)
        chroma[:, :n] = chords.chroma[:, :n]
        root[:n] = chords.root[:n]
        fitted = ChromaSequence(chroma, root)
    return replace(ts, chords=fitted)
